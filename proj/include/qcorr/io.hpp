#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qcorr/inference.hpp"

namespace qcorr {

struct AnalysisOptions {
  DiscordOptions discord;
  QuadratureSpec quadrature;
  GridSpec grid;
  ProfileOptions profile;
  int fast_discord_seeds = 16;
  int fast_discord_refine = 2;
  int threads = 1;
};

/// A parsed input file: the measured bins, the observables to evaluate,
/// run options, and optional per-bin reference predictions keyed by
/// observable name (e.g. an external generator curve).
struct AnalysisRequest {
  std::vector<MeasurementRecord> records;
  std::vector<std::string> observables;
  AnalysisOptions options;
  std::map<std::string, std::map<std::string, double>> reference_values;  // label -> obs -> value
  std::string reference_label;  // cosmetic tag for the reference column
};

struct ObservableReport {
  ScanResult scan;
  std::optional<double> reference;
};

/// One output row per bin. Carries the record data so the structured format
/// can round-trip through parse_input.
struct BinReportRow {
  std::string label;
  SpinBasis basis;
  BinKinematics bin;
  Vector15 coefficients = Vector15::Zero();
  Matrix15 covariance = Matrix15::Identity();
  std::map<std::string, double> reference;
  std::vector<ObservableReport> results;  // ordered as requested
};

enum class ReportFormat { table_text, csv, structured, plot_data };

ReportFormat parse_report_format(const std::string& name);

struct ParseDiagnostics {
  std::vector<std::string> warnings;
};

/// Parses and fully validates the documented input schema (UTF-8 JSON, one
/// top-level list of bins). Covariances are symmetrized as (U + U^T)/2; a
/// warning is recorded when the asymmetry exceeds 1e-8 relative.
AnalysisRequest parse_input(std::istream& in, const std::string& origin = "<stream>",
                            ParseDiagnostics* diags = nullptr);
AnalysisRequest parse_input(const std::string& path, ParseDiagnostics* diags = nullptr);

/// Per bin and per observable: central value, profile scan, and threshold
/// significance. Bins run concurrently up to options.threads; rows come back
/// in input order regardless of thread count.
std::vector<BinReportRow> run_analysis(const AnalysisRequest& request);

std::string emit_report(const std::vector<BinReportRow>& rows, ReportFormat format);

/// Shortest decimal string equal to the value rounded to 4 significant
/// digits (at least one decimal place below 10^4).
std::string format_value4(double v);

/// "central_{-lo}^{+hi}" with the significance bracket appended only for
/// exceedances of at least 3 sigma; saturates at ">5sigma".
std::string format_measurement_cell(double central, double err_low, double err_high,
                                    double significance, ThresholdSide side);

}  // namespace qcorr
