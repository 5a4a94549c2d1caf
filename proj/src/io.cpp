#include "qcorr/io.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

namespace qcorr {

using nlohmann::json;

namespace {

const json& require_field(const json& obj, const char* key, const std::string& path) {
  if (!obj.contains(key))
    throw ValidationError(path + ": missing required field '" + key + "'");
  return obj.at(key);
}

double require_number(const json& j, const std::string& path) {
  if (!j.is_number()) throw ValidationError(path + ": expected a number");
  return j.get<double>();
}

std::string require_string(const json& j, const std::string& path) {
  if (!j.is_string()) throw ValidationError(path + ": expected a string");
  return j.get<std::string>();
}

std::pair<double, double> require_interval(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 2)
    throw ValidationError(path + ": expected an array [lo, hi]");
  return {require_number(j[0], path + "[0]"), require_number(j[1], path + "[1]")};
}

SpinBasis parse_basis(const json& bin, const std::string& path) {
  const std::string kind = require_string(require_field(bin, "basis", path), path + ".basis");
  SpinBasis basis;
  if (kind == "helicity")
    basis = SpinBasis::helicity();
  else if (kind == "beam")
    basis = SpinBasis::beam();
  else if (kind == "custom")
    basis.kind = BasisKind::custom;
  else
    throw ValidationError(path + ".basis: expected 'helicity', 'beam' or 'custom', got '" +
                          kind + "'");

  if (bin.contains("axis_labels")) {
    const json& labels = bin.at("axis_labels");
    if (!labels.is_array() || labels.size() != 3)
      throw ValidationError(path + ".axis_labels: expected an array of 3 strings");
    for (int i = 0; i < 3; ++i)
      basis.axis_labels[i] = require_string(labels[i], path + ".axis_labels");
  } else if (basis.kind == BasisKind::custom) {
    throw ValidationError(path + ".axis_labels: required for a custom basis");
  }
  basis.validate();
  return basis;
}

MeasurementRecord parse_bin(const json& bin, const std::string& path, ParseDiagnostics* diags) {
  if (!bin.is_object()) throw ValidationError(path + ": expected an object");

  MeasurementRecord record;
  record.label = require_string(require_field(bin, "label", path), path + ".label");
  record.basis = parse_basis(bin, path);

  const auto mtt = require_interval(require_field(bin, "mtt_gev", path), path + ".mtt_gev");
  record.bin.mtt_lo = mtt.first;
  record.bin.mtt_hi = mtt.second;
  const auto cth =
      require_interval(require_field(bin, "abs_cos_theta", path), path + ".abs_cos_theta");
  record.bin.abs_costheta_lo = cth.first;
  record.bin.abs_costheta_hi = cth.second;

  const json& coeffs = require_field(bin, "coefficients", path);
  if (!coeffs.is_array() || coeffs.size() != 15) {
    std::ostringstream msg;
    msg << path << ".coefficients: expected 15 entries (P, Pbar, C row-major), got "
        << (coeffs.is_array() ? coeffs.size() : 0);
    throw ValidationError(msg.str());
  }
  for (int i = 0; i < 15; ++i)
    record.observed(i) = require_number(coeffs[i], path + ".coefficients");

  const json& cov = require_field(bin, "covariance", path);
  if (!cov.is_array() || cov.size() != 225) {
    std::ostringstream msg;
    msg << path << ".covariance: expected 225 entries (15x15 block, row-major), got "
        << (cov.is_array() ? cov.size() : 0);
    throw ValidationError(msg.str());
  }
  Matrix15 u;
  for (int i = 0; i < 15; ++i)
    for (int j = 0; j < 15; ++j) u(i, j) = require_number(cov[15 * i + j], path + ".covariance");

  const double scale = std::max(u.cwiseAbs().maxCoeff(), 1e-300);
  const double asym = (u - u.transpose()).cwiseAbs().maxCoeff() / scale;
  if (asym > 1e-8 && diags != nullptr) {
    std::ostringstream msg;
    msg << path << ".covariance: asymmetry " << asym
        << " (relative) exceeds 1e-8; symmetrized as (U + U^T)/2";
    diags->warnings.push_back(msg.str());
  }
  record.covariance = 0.5 * (u + u.transpose());

  record.validate();
  return record;
}

void parse_options(const json& j, const std::string& path, AnalysisOptions& options) {
  if (!j.is_object()) throw ValidationError(path + ": expected an object");
  for (const auto& [key, value] : j.items()) {
    const std::string vpath = path + "." + key;
    if (key == "discord_seeds")
      options.discord.seed_count = static_cast<int>(require_number(value, vpath));
    else if (key == "discord_tolerance")
      options.discord.tolerance = require_number(value, vpath);
    else if (key == "physical_tolerance")
      options.discord.physical_tol = options.profile.physical_tol = require_number(value, vpath);
    else if (key == "polar_order")
      options.quadrature.polar_order = static_cast<int>(require_number(value, vpath));
    else if (key == "azimuthal_order")
      options.quadrature.azimuthal_order = static_cast<int>(require_number(value, vpath));
    else if (key == "scan_points")
      options.grid.n = static_cast<int>(require_number(value, vpath));
    else if (key == "fast_discord_seeds")
      options.fast_discord_seeds = static_cast<int>(require_number(value, vpath));
    else if (key == "threads")
      options.threads = static_cast<int>(require_number(value, vpath));
    else
      throw ValidationError(vpath + ": unknown option");
  }
  options.quadrature.validate();
  if (options.grid.n < 3) throw ValidationError(path + ".scan_points: must be >= 3");
  if (options.threads < 1) throw ValidationError(path + ".threads: must be >= 1");
}

}  // namespace

ReportFormat parse_report_format(const std::string& name) {
  if (name == "table-text" || name == "table") return ReportFormat::table_text;
  if (name == "csv") return ReportFormat::csv;
  if (name == "structured") return ReportFormat::structured;
  if (name == "plot-data") return ReportFormat::plot_data;
  throw ValidationError("unknown report format '" + name +
                        "'; expected table-text, csv, structured or plot-data");
}

AnalysisRequest parse_input(std::istream& in, const std::string& origin, ParseDiagnostics* diags) {
  json doc;
  try {
    doc = json::parse(in, nullptr, /*allow_exceptions=*/true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    std::ostringstream msg;
    msg << origin << ": " << e.what();
    throw ValidationError(msg.str());
  }
  if (!doc.is_object()) throw ValidationError(origin + ": top level must be an object");

  AnalysisRequest request;

  const json& bins = require_field(doc, "bins", origin);
  if (!bins.is_array() || bins.empty())
    throw ValidationError(origin + ".bins: expected a non-empty array");

  std::set<std::string> labels;
  for (size_t i = 0; i < bins.size(); ++i) {
    std::ostringstream path;
    path << origin << ".bins[" << i << "]";
    MeasurementRecord record = parse_bin(bins[i], path.str(), diags);
    if (!labels.insert(record.label).second)
      throw ValidationError(path.str() + ": duplicate bin label '" + record.label + "'");

    if (bins[i].contains("reference")) {
      const json& ref = bins[i].at("reference");
      if (!ref.is_object()) throw ValidationError(path.str() + ".reference: expected an object");
      for (const auto& [key, value] : ref.items()) {
        if (std::find(known_observables().begin(), known_observables().end(), key) ==
            known_observables().end())
          throw ValidationError(path.str() + ".reference: unknown observable '" + key + "'");
        request.reference_values[record.label][key] =
            require_number(value, path.str() + ".reference." + key);
      }
    }
    request.records.push_back(std::move(record));
  }

  if (doc.contains("observables")) {
    const json& observables = doc.at("observables");
    if (!observables.is_array() || observables.empty())
      throw ValidationError(origin + ".observables: expected a non-empty array");
    for (size_t i = 0; i < observables.size(); ++i) {
      const std::string name = require_string(observables[i], origin + ".observables");
      if (std::find(known_observables().begin(), known_observables().end(), name) ==
          known_observables().end())
        throw ValidationError(origin + ".observables: unknown observable '" + name + "'");
      request.observables.push_back(name);
    }
  } else {
    request.observables = known_observables();
  }

  if (doc.contains("options")) parse_options(doc.at("options"), origin + ".options", request.options);
  if (doc.contains("reference_label"))
    request.reference_label =
        require_string(doc.at("reference_label"), origin + ".reference_label");

  return request;
}

AnalysisRequest parse_input(const std::string& path, ParseDiagnostics* diags) {
  std::ifstream in(path);
  if (!in) throw ValidationError(path + ": cannot open input file");
  return parse_input(in, path, diags);
}

std::vector<BinReportRow> run_analysis(const AnalysisRequest& request) {
  if (request.records.empty()) throw ValidationError("analysis request has no records");
  if (request.observables.empty()) throw ValidationError("analysis request has no observables");

  std::vector<BinReportRow> rows(request.records.size());
  std::vector<std::exception_ptr> failures(request.records.size());

  const auto process = [&](size_t index) {
    const MeasurementRecord& record = request.records[index];
    BinReportRow row;
    row.label = record.label;
    row.basis = record.basis;
    row.bin = record.bin;
    row.coefficients = record.observed;
    row.covariance = record.covariance;
    if (auto it = request.reference_values.find(record.label);
        it != request.reference_values.end())
      row.reference = it->second;

    ObservableOptions oopts;
    oopts.discord = request.options.discord;
    oopts.quadrature = request.options.quadrature;
    oopts.fast_discord_seeds = request.options.fast_discord_seeds;
    oopts.fast_discord_refine = request.options.fast_discord_refine;

    try {
      for (const auto& name : request.observables) {
        const ObservableSpec spec = make_observable(name, record.basis, oopts);
        ObservableReport report;
        report.scan =
            scan_observable(record, spec, request.options.grid, request.options.profile);
        if (auto it = row.reference.find(name); it != row.reference.end())
          report.reference = it->second;
        row.results.push_back(std::move(report));
      }
    } catch (const std::exception& e) {
      std::ostringstream msg;
      msg << "bin '" << record.label << "': " << e.what();
      failures[index] = std::make_exception_ptr(NumericalError(msg.str()));
      return;
    }
    rows[index] = std::move(row);
  };

  const int thread_count =
      std::max(1, std::min<int>(request.options.threads,
                                static_cast<int>(request.records.size())));
  if (thread_count == 1) {
    for (size_t i = 0; i < request.records.size(); ++i) process(i);
  } else {
    std::atomic<size_t> next{0};
    std::vector<std::thread> workers;
    workers.reserve(thread_count);
    for (int t = 0; t < thread_count; ++t)
      workers.emplace_back([&] {
        for (size_t i = next.fetch_add(1); i < request.records.size(); i = next.fetch_add(1))
          process(i);
      });
    for (auto& worker : workers) worker.join();
  }

  for (const auto& failure : failures)
    if (failure) std::rethrow_exception(failure);
  return rows;
}

std::string format_value4(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (v == 0.0) return "0.0";
  const double a = std::abs(v);
  const int exponent = static_cast<int>(std::floor(std::log10(a)));
  const int decimals = std::max(0, 3 - exponent);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  std::string s(buf);
  if (s.find('.') != std::string::npos) {
    const size_t last = s.find_last_not_of('0');
    s.erase(last + 1);
    if (s.back() == '.') s += "0";
  }
  return s;
}

namespace {

std::string significance_bracket(double significance, ThresholdSide side) {
  if (side != ThresholdSide::above || !(significance >= 3.0)) return "";
  if (std::isinf(significance)) return "[>5\xcf\x83]";
  const double display = std::round(significance * 10.0) / 10.0;
  if (display > 5.0) return "[>5\xcf\x83]";
  char buf[32];
  std::snprintf(buf, sizeof buf, "[%.1f\xcf\x83]", display);
  return buf;
}

std::string basis_name(const SpinBasis& basis) {
  switch (basis.kind) {
    case BasisKind::helicity:
      return "helicity";
    case BasisKind::beam:
      return "beam";
    case BasisKind::custom:
      return "custom";
  }
  return "?";
}

std::string full_precision(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string emit_table(const std::vector<BinReportRow>& rows) {
  std::vector<std::string> headers = {"label", "basis", "mtt_gev", "abs_cos_theta"};
  for (const auto& report : rows.front().results)
    headers.push_back(report.scan.observable_name);

  std::vector<std::vector<std::string>> cells;
  for (const auto& row : rows) {
    std::vector<std::string> line = {
        row.label, basis_name(row.basis),
        "[" + format_value4(row.bin.mtt_lo) + "," + format_value4(row.bin.mtt_hi) + "]",
        "[" + format_value4(row.bin.abs_costheta_lo) + "," +
            format_value4(row.bin.abs_costheta_hi) + "]"};
    for (const auto& report : row.results) {
      const auto& scan = report.scan;
      std::string cell =
          format_measurement_cell(scan.central, scan.central - scan.ci68_low,
                                  scan.ci68_high - scan.central, scan.significance,
                                  scan.significance_side);
      if (report.reference) cell += " (ref " + format_value4(*report.reference) + ")";
      line.push_back(cell);
    }
    cells.push_back(std::move(line));
  }

  // Column widths ignore multi-byte continuation bytes so sigma aligns.
  const auto display_width = [](const std::string& s) {
    size_t w = 0;
    for (unsigned char c : s)
      if ((c & 0xc0) != 0x80) ++w;
    return w;
  };
  std::vector<size_t> widths(headers.size());
  for (size_t c = 0; c < headers.size(); ++c) widths[c] = display_width(headers[c]);
  for (const auto& line : cells)
    for (size_t c = 0; c < line.size(); ++c)
      widths[c] = std::max(widths[c], display_width(line[c]));

  std::ostringstream out;
  const auto emit_line = [&](const std::vector<std::string>& line) {
    for (size_t c = 0; c < line.size(); ++c) {
      out << line[c];
      if (c + 1 < line.size())
        out << std::string(widths[c] - display_width(line[c]) + 2, ' ');
    }
    out << "\n";
  };
  emit_line(headers);
  for (const auto& line : cells) emit_line(line);
  return out.str();
}

std::string emit_csv(const std::vector<BinReportRow>& rows) {
  std::ostringstream out;
  out << "label,basis,mtt_lo,mtt_hi,abs_costheta_lo,abs_costheta_hi,observable,central,"
         "ci68_low,ci68_high,err_low,err_high,at_boundary_low,at_boundary_high,threshold,"
         "significance,significance_side,reference\n";
  for (const auto& row : rows)
    for (const auto& report : row.results) {
      const auto& scan = report.scan;
      out << row.label << "," << basis_name(row.basis) << "," << full_precision(row.bin.mtt_lo)
          << "," << full_precision(row.bin.mtt_hi) << ","
          << full_precision(row.bin.abs_costheta_lo) << ","
          << full_precision(row.bin.abs_costheta_hi) << "," << scan.observable_name << ","
          << full_precision(scan.central) << "," << full_precision(scan.ci68_low) << ","
          << full_precision(scan.ci68_high) << ","
          << full_precision(scan.central - scan.ci68_low) << ","
          << full_precision(scan.ci68_high - scan.central) << "," << scan.at_boundary_low << ","
          << scan.at_boundary_high << "," << full_precision(scan.threshold) << ","
          << full_precision(scan.significance) << ","
          << (scan.significance_side == ThresholdSide::above ? "above" : "below") << ","
          << (report.reference ? full_precision(*report.reference) : "") << "\n";
    }
  return out.str();
}

std::string emit_structured(const std::vector<BinReportRow>& rows) {
  json doc;
  doc["format"] = "qcorr-analysis";
  doc["version"] = 1;
  json observables = json::array();
  for (const auto& report : rows.front().results)
    observables.push_back(report.scan.observable_name);
  doc["observables"] = observables;

  json bins = json::array();
  for (const auto& row : rows) {
    json bin;
    bin["label"] = row.label;
    bin["basis"] = basis_name(row.basis);
    bin["axis_labels"] = row.basis.axis_labels;
    bin["mtt_gev"] = {row.bin.mtt_lo, row.bin.mtt_hi};
    bin["abs_cos_theta"] = {row.bin.abs_costheta_lo, row.bin.abs_costheta_hi};
    json coefficients = json::array();
    for (int i = 0; i < 15; ++i) coefficients.push_back(row.coefficients(i));
    bin["coefficients"] = coefficients;
    json covariance = json::array();
    for (int i = 0; i < 15; ++i)
      for (int j = 0; j < 15; ++j) covariance.push_back(row.covariance(i, j));
    bin["covariance"] = covariance;
    if (!row.reference.empty()) bin["reference"] = row.reference;

    json results;
    for (const auto& report : row.results) {
      const auto& scan = report.scan;
      json entry;
      entry["central"] = scan.central;
      entry["ci68"] = {scan.ci68_low, scan.ci68_high};
      entry["at_boundary"] = {scan.at_boundary_low, scan.at_boundary_high};
      entry["threshold"] = scan.threshold;
      if (std::isinf(scan.significance))
        entry["significance"] = "unattainable";
      else
        entry["significance"] = scan.significance;
      entry["significance_side"] =
          scan.significance_side == ThresholdSide::above ? "above" : "below";
      json curve = json::array();
      for (const auto& [value, m2ll] : scan.curve) curve.push_back({value, m2ll});
      entry["curve"] = curve;
      results[scan.observable_name] = entry;
    }
    bin["results"] = results;
    bins.push_back(bin);
  }
  doc["bins"] = bins;
  return doc.dump(2) + "\n";
}

std::string emit_plot_data(const std::vector<BinReportRow>& rows) {
  std::ostringstream out;
  const size_t n_observables = rows.front().results.size();
  for (size_t c = 0; c < n_observables; ++c) {
    const auto& name = rows.front().results[c].scan.observable_name;
    out << "# observable: " << name
        << " threshold: " << full_precision(rows.front().results[c].scan.threshold) << "\n";
    out << "# columns: mtt_mid central err_low err_high reference\n";
    for (const auto& row : rows) {
      const auto& report = row.results[c];
      const auto& scan = report.scan;
      out << full_precision(row.bin.mtt_mid()) << " " << full_precision(scan.central) << " "
          << full_precision(scan.central - scan.ci68_low) << " "
          << full_precision(scan.ci68_high - scan.central) << " "
          << (report.reference ? full_precision(*report.reference) : "nan") << "\n";
    }
    if (c + 1 < n_observables) out << "\n";
  }
  return out.str();
}

}  // namespace

std::string format_measurement_cell(double central, double err_low, double err_high,
                                    double significance, ThresholdSide side) {
  return format_value4(central) + "_{-" + format_value4(err_low) + "}^{+" +
         format_value4(err_high) + "}" + significance_bracket(significance, side);
}

std::string emit_report(const std::vector<BinReportRow>& rows, ReportFormat format) {
  if (rows.empty()) throw ValidationError("emit_report: no rows");
  switch (format) {
    case ReportFormat::table_text:
      return emit_table(rows);
    case ReportFormat::csv:
      return emit_csv(rows);
    case ReportFormat::structured:
      return emit_structured(rows);
    case ReportFormat::plot_data:
      return emit_plot_data(rows);
  }
  throw ValidationError("emit_report: unknown format");
}

}  // namespace qcorr
