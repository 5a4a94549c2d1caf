#include "qcorr/cli.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "qcorr/io.hpp"
#include "qcorr/oracles.hpp"

namespace qcorr {

namespace {

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream stream(text);
  std::string item;
  while (std::getline(stream, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

GridSpec parse_grid_spec(const std::string& text) {
  GridSpec grid;
  if (text.empty()) return grid;
  std::stringstream stream(text);
  std::string lo, hi, n;
  if (!std::getline(stream, lo, ':') || !std::getline(stream, hi, ':') ||
      !std::getline(stream, n))
    throw ValidationError("--grid expects lo:hi:n");
  try {
    grid.lo = std::stod(lo);
    grid.hi = std::stod(hi);
    grid.n = std::stoi(n);
  } catch (const std::exception&) {
    throw ValidationError("--grid expects numeric lo:hi:n");
  }
  if (grid.n < 3) throw ValidationError("--grid: n must be >= 3");
  return grid;
}

int check_file(const std::string& path, std::ostream& err) {
  if (!std::filesystem::exists(path)) {
    err << "qcorr: input file not found: " << path << "\n";
    return 66;
  }
  return 0;
}

struct OracleStats {
  int failures = 0;
};

void oracle_states(std::uint64_t seed, std::ostream& out, OracleStats& stats) {
  double worst_physical = 0.0, worst_separable = 0.0, worst_delta = 0.0;
  for (int i = 0; i < 50; ++i) {
    const auto physical = random_physical_state(seed + i);
    worst_physical = std::min(worst_physical, validate_physicality(physical.fano).min_eigenvalue);
    const auto separable = random_separable_state(seed + 1000 + i);
    worst_separable =
        std::min(worst_separable, validate_physicality(separable.fano).min_eigenvalue);
    const auto marker = entanglement_marker(assemble_density(separable.fano));
    worst_delta = std::max(worst_delta, marker.delta_e - 1.0);
    if (marker.negativity > 1e-10) ++stats.failures;
  }
  const bool ok = worst_physical >= -1e-9 && worst_separable >= -1e-9 && worst_delta <= 1e-9;
  if (!ok) ++stats.failures;
  out << (ok ? "ok" : "FAIL")
      << " states: min eigenvalue (physical) = " << worst_physical
      << ", (separable) = " << worst_separable << ", max Delta_E - 1 = " << worst_delta << "\n";
}

void oracle_discord(std::uint64_t seed, std::ostream& out, OracleStats& stats) {
  double worst = 0.0;
  for (int i = 0; i < 25; ++i) {
    const auto state = random_physical_state(seed + i);
    const double fast = discord(state.fano, Side::top).value;
    const double brute = grid_discord(state.fano, Side::top, 20000);
    worst = std::max(worst, std::abs(fast - brute));
  }
  const bool ok = worst < 5e-5;
  if (!ok) ++stats.failures;
  out << (ok ? "ok" : "FAIL") << " discord: max |optimizer - grid(20000)| = " << worst << "\n";
}

void oracle_steering(std::uint64_t seed, std::ostream& out, OracleStats& stats) {
  double worst_pull = 0.0;
  for (int i = 0; i < 20; ++i) {
    const auto state = random_physical_state(seed + 500 + i);
    const double quad = steering_marker(state.fano.C);
    const auto mc = mc_steering(state.fano.C, 1000000, seed + i);
    if (mc.std_error > 0.0)
      worst_pull = std::max(worst_pull, std::abs(quad - mc.estimate) / mc.std_error);
  }
  const bool ok = worst_pull < 5.0;
  if (!ok) ++stats.failures;
  out << (ok ? "ok" : "FAIL")
      << " steering: max |quadrature - MC| / std_error = " << worst_pull << "\n";
}

void oracle_profile(std::uint64_t seed, std::ostream& out, OracleStats& stats) {
  MeasurementRecord record;
  record.label = "toy";
  record.basis = SpinBasis::helicity();
  record.bin = {300.0, 400.0, 0.0, 0.4};
  record.observed = Vector15::Zero();
  record.observed(6) = 0.3;
  record.covariance = 0.01 * Matrix15::Identity();

  ObservableOptions oopts;
  ObservableSpec spec;
  spec.name = "c11";
  spec.eval = [](const Vector15& x) { return x(6); };
  spec.eval_fast = spec.eval;

  const double analytic = 4.0;  // ((0.5 - 0.3) / 0.1)^2
  const double profiled = profile_at(record, spec, 0.5);
  const double dense = dense_profile_oracle(record, spec, 0.5, 20000, seed);
  const bool ok = std::abs(profiled - analytic) < 1e-3 && std::abs(dense - analytic) < 1e-3;
  if (!ok) ++stats.failures;
  out << (ok ? "ok" : "FAIL") << " profile: penalty = " << profiled << ", dense = " << dense
      << ", analytic = " << analytic << "\n";
}

}  // namespace

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"quantum correlation hierarchy of two-qubit spin density matrices"};
  app.require_subcommand(1);

  std::uint64_t seed = 20240901;
  int threads = 1;
  double tolerance = -1.0;
  app.add_option("--seed", seed, "seed for the oracle random streams");
  app.add_option("--threads", threads, "bins processed concurrently");
  app.add_option("--tolerance", tolerance, "discord optimizer / profile constraint tolerance");

  auto* cmd_validate = app.add_subcommand("validate", "check an input file and report physicality");
  std::string validate_path;
  cmd_validate->add_option("file", validate_path, "input file")->required();

  auto* cmd_compute = app.add_subcommand("compute", "evaluate observables for every bin");
  std::string compute_path, observables_arg, format_arg = "table-text", out_path;
  cmd_compute->add_option("file", compute_path, "input file")->required();
  cmd_compute->add_option("--observables", observables_arg, "comma-separated subset");
  cmd_compute->add_option("--format", format_arg, "table-text | csv | structured | plot-data");
  cmd_compute->add_option("--out", out_path, "write the report here instead of stdout");

  auto* cmd_scan = app.add_subcommand("scan", "emit the -2logL profile curve for one observable");
  std::string scan_path, scan_observable_name, scan_bin, grid_arg;
  cmd_scan->add_option("file", scan_path, "input file")->required();
  cmd_scan->add_option("--observable", scan_observable_name, "observable name")->required();
  cmd_scan->add_option("--bin", scan_bin, "bin label")->required();
  cmd_scan->add_option("--grid", grid_arg, "scan grid as lo:hi:n");

  auto* cmd_oracle = app.add_subcommand("oracle", "run the reference-oracle agreement suite");
  std::string subcheck = "all";
  cmd_oracle->add_option("subcheck", subcheck, "states | discord | steering | profile | all");

  std::vector<const char*> argv;
  argv.push_back("qcorr");
  for (const auto& arg : args) argv.push_back(arg.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "qcorr: " << e.what() << "\n\n" << app.help();
    return 64;
  }

  try {
    if (*cmd_validate) {
      if (int rc = check_file(validate_path, err); rc != 0) return rc;
      ParseDiagnostics diags;
      const AnalysisRequest request = parse_input(validate_path, &diags);
      for (const auto& warning : diags.warnings) out << "warning: " << warning << "\n";
      for (const auto& record : request.records) {
        const auto report = validate_physicality(record.observed_fano(), 1e-9);
        out << record.label << ": min_eigenvalue = " << report.min_eigenvalue
            << (report.is_physical ? " (physical)" : " (unphysical)") << "\n";
      }
      out << request.records.size() << " bin(s) valid\n";
      return 0;
    }

    if (*cmd_compute) {
      if (int rc = check_file(compute_path, err); rc != 0) return rc;
      ParseDiagnostics diags;
      AnalysisRequest request = parse_input(compute_path, &diags);
      for (const auto& warning : diags.warnings) err << "warning: " << warning << "\n";
      if (!observables_arg.empty()) {
        request.observables = split_list(observables_arg);
        for (const auto& name : request.observables)
          make_observable(name, request.records.front().basis);  // name check
      }
      if (threads > 0) request.options.threads = threads;
      if (tolerance > 0.0) {
        request.options.discord.tolerance = tolerance;
        request.options.profile.constraint_tol = std::max(tolerance, 1e-9);
      }
      const auto rows = run_analysis(request);
      const std::string report = emit_report(rows, parse_report_format(format_arg));
      if (out_path.empty()) {
        out << report;
      } else {
        std::ofstream file(out_path);
        if (!file) throw ValidationError("cannot open output file " + out_path);
        file << report;
      }
      return 0;
    }

    if (*cmd_scan) {
      if (int rc = check_file(scan_path, err); rc != 0) return rc;
      AnalysisRequest request = parse_input(scan_path);
      const auto record_it =
          std::find_if(request.records.begin(), request.records.end(),
                       [&](const MeasurementRecord& r) { return r.label == scan_bin; });
      if (record_it == request.records.end())
        throw ValidationError("no bin labelled '" + scan_bin + "' in " + scan_path);

      ObservableOptions oopts;
      oopts.discord = request.options.discord;
      oopts.quadrature = request.options.quadrature;
      oopts.fast_discord_seeds = request.options.fast_discord_seeds;
      const ObservableSpec spec = make_observable(scan_observable_name, record_it->basis, oopts);
      GridSpec grid = parse_grid_spec(grid_arg);
      if (grid_arg.empty()) grid.n = request.options.grid.n;

      const ScanResult result = scan_observable(*record_it, spec, grid, request.options.profile);
      out << "# observable: " << result.observable_name << " bin: " << scan_bin << "\n";
      out << "# central: " << result.central << " ci68: [" << result.ci68_low << ", "
          << result.ci68_high << "]"
          << (result.at_boundary_low ? " at_boundary_low" : "")
          << (result.at_boundary_high ? " at_boundary_high" : "") << "\n";
      out << "# threshold: " << result.threshold << " significance: " << result.significance
          << (result.significance_side == ThresholdSide::above ? " (above)" : " (below)") << "\n";
      out << "# columns: value minus2logL\n";
      for (const auto& [value, m2ll] : result.curve) out << value << " " << m2ll << "\n";
      return 0;
    }

    if (*cmd_oracle) {
      OracleStats stats;
      if (subcheck == "states" || subcheck == "all") oracle_states(seed, out, stats);
      if (subcheck == "discord" || subcheck == "all") oracle_discord(seed, out, stats);
      if (subcheck == "steering" || subcheck == "all") oracle_steering(seed, out, stats);
      if (subcheck == "profile" || subcheck == "all") oracle_profile(seed, out, stats);
      if (subcheck != "states" && subcheck != "discord" && subcheck != "steering" &&
          subcheck != "profile" && subcheck != "all")
        throw ValidationError("unknown oracle subcheck '" + subcheck + "'");
      return stats.failures == 0 ? 0 : 3;
    }
  } catch (const ValidationError& e) {
    err << "qcorr: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "qcorr: " << e.what() << "\n";
    return 3;
  }
  return 0;
}

}  // namespace qcorr
