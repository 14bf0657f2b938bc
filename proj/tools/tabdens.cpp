// tabdens: fit densities to tabulated summaries, run simulation studies and
// self-checks.

#include "tabdens/tabdens.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

using namespace tabdens;

struct FitArgs
{
  std::string data;
  std::string moments{ "auto" };
  int splines{ 25 };
  int bins{ 300 };
  int penalty_order{ 3 };
  std::string lambda{ "auto" };
  std::vector<double> quantiles;
  double alpha{ 0.05 };
  std::string back_transform{ "none" };
  std::string out;
  std::uint64_t seed{ 0 };
  int em_max_iters{ 2000 };
  std::string plot;
  bool no_svg{ false };
};

struct SimArgs
{
  int reps{ 100 };
  int n{ 1000 };
  std::string classes{ "3" };
  int moments{ 4 };
  std::uint64_t seed{ 1 };
  std::string out;
  int threads{ 0 };
  int bins{ 350 };
  int splines{ 25 };
  int penalty_order{ 3 };
};

struct CheckArgs
{
  bool gradients{ false };
  bool invariants{ false };
  std::uint64_t seed{ 1 };
};

void emit(const std::string& out, const json& doc)
{
  const std::string body = doc.dump(2) + "\n";
  if (out.empty() || out == "-")
    std::cout << body;
  else
    write_atomic(out, body);
}

std::vector<double> parse_cut_list(const std::string& s)
{
  std::vector<double> cuts;
  for (const auto& field : detail::split_csv(s)) {
    const auto v = detail::parse_double(detail::trim(field));
    detail::require(v.has_value(), "bad cut value '" + field + "'");
    cuts.push_back(*v);
  }
  detail::require(cuts.size() >= 2, "custom classes need at least two cuts");
  return cuts;
}

int run_fit(const FitArgs& a)
{
  GroupedDataset d = parse_summary_table(a.data);
  if (a.moments != "auto") {
    const auto R = detail::parse_double(a.moments);
    detail::require(R && *R == static_cast<int>(*R), "--moments must be 0, 1, 2, 4 or auto");
    d = with_order(d, static_cast<int>(*R));
  }

  FitConfig cfg;
  cfg.K = a.splines;
  cfg.target_bins = a.bins;
  cfg.penalty_order = a.penalty_order;
  cfg.em_max_iters = a.em_max_iters;
  if (a.lambda != "auto") {
    const auto v = detail::parse_double(a.lambda);
    detail::require(v.has_value(), "--lambda must be auto or a positive number");
    cfg.fixed_lambda = *v;
  }

  FitReportOptions opt;
  opt.quantiles = a.quantiles;
  opt.alpha = a.alpha;
  opt.back_transform = a.back_transform == "exp10" ? BackTransform::exp10 : BackTransform::none;
  opt.seed = a.seed;
  opt.data_path = a.data;

  const auto t0 = std::chrono::steady_clock::now();
  const FitResult f = fit(d, cfg);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  const json report = build_fit_report(f, opt, secs);
  emit(a.out, report);
  if (!a.plot.empty())
    emit_plot_data(f, a.plot, !a.no_svg);

  if (!a.out.empty() && a.out != "-") {
    std::printf("%s after %d EM sweeps, lambda %.4g, edf %.3f\n",
                f.converged ? "converged" : "not converged", f.em_iterations, f.lambda_hat, f.edf);
    if (report.contains("quantiles"))
      for (const auto& q : report["quantiles"])
        std::printf("Q(%g) = %.6g  [%.6g, %.6g]\n", q["p"].get<double>(), q["q"].get<double>(),
                    q["ci_lower"].get<double>(), q["ci_upper"].get<double>());
  }
  if (!f.converged) {
    std::fprintf(stderr, "warning[optimizer_failure]: EM stopped after %d sweeps without converging\n",
                 f.em_iterations);
    return 2;
  }
  return 0;
}

int run_simulate(const SimArgs& a)
{
  StudyConfig cfg;
  cfg.reps = a.reps;
  cfg.n = a.n;
  if (a.classes == "3" || a.classes == "5")
    cfg.cuts = class_preset(std::stoi(a.classes));
  else
    cfg.cuts = parse_cut_list(a.classes);
  cfg.order = a.moments;
  cfg.seed = a.seed;
  cfg.threads = a.threads;
  cfg.fit.target_bins = a.bins;
  cfg.fit.K = a.splines;
  cfg.fit.penalty_order = a.penalty_order;

  const SimulationReport rep = run_study(cfg);
  emit(a.out, simulation_report_to_json(rep));
  if (!a.out.empty() && a.out != "-")
    std::printf("%d of %d replicates used (%d not converged, %d failed)\n", rep.used, a.reps,
                rep.not_converged, rep.failed);
  return 0;
}

int run_check(const CheckArgs& a)
{
  const bool both = !a.gradients && !a.invariants;
  std::vector<CheckReport> reports;
  if (a.gradients || both)
    reports.push_back(gradient_checks(a.seed));
  if (a.invariants || both)
    reports.push_back(invariant_checks(a.seed));
  bool ok = true;
  for (const auto& rep : reports)
    for (const auto& r : rep.results) {
      std::printf("%s  %s: %s\n", r.passed ? "PASS" : "FAIL", r.name.c_str(), r.detail.c_str());
      ok = ok && r.passed;
    }
  return ok ? 0 : 1;
}

} // namespace

int main(int argc, char** argv)
{
  CLI::App app{ "Density estimation from tabulated summary statistics" };
  app.require_subcommand(1);

  FitArgs fa;
  auto* fit_cmd = app.add_subcommand("fit", "Fit a density to a summary table");
  fit_cmd->add_option("--data", fa.data, "Summary table (CSV or JSON)")->required();
  fit_cmd->add_option("--moments", fa.moments, "Moment order used: 0, 1, 2, 4 or auto")
    ->check(CLI::IsMember({ "0", "1", "2", "4", "auto" }));
  fit_cmd->add_option("--splines", fa.splines, "Number of B-splines K");
  fit_cmd->add_option("--bins", fa.bins, "Target number of fine bins");
  fit_cmd->add_option("--penalty-order", fa.penalty_order, "Difference order of the penalty");
  fit_cmd->add_option("--lambda", fa.lambda, "Penalty weight or auto");
  fit_cmd->add_option("--quantiles", fa.quantiles, "Comma-separated probabilities")->delimiter(',');
  fit_cmd->add_option("--alpha", fa.alpha, "Credible interval level is 1 - alpha");
  fit_cmd->add_option("--back-transform", fa.back_transform, "none or exp10")
    ->check(CLI::IsMember({ "none", "exp10" }));
  fit_cmd->add_option("--out", fa.out, "Report path (stdout if omitted)");
  fit_cmd->add_option("--seed", fa.seed, "Seed recorded in the report");
  fit_cmd->add_option("--em-max-iters", fa.em_max_iters, "Maximum EM sweeps");
  fit_cmd->add_option("--plot", fa.plot, "Prefix for histogram/density CSV and SVG files");
  fit_cmd->add_flag("--no-svg", fa.no_svg, "Skip the SVG when writing plot data");

  SimArgs sa;
  auto* sim_cmd = app.add_subcommand("simulate", "Run the simulation study");
  sim_cmd->add_option("--reps", sa.reps, "Number of replicates");
  sim_cmd->add_option("--n", sa.n, "Sample size per replicate");
  sim_cmd->add_option("--classes", sa.classes, "3, 5 or a comma-separated list of cuts");
  sim_cmd->add_option("--moments", sa.moments, "Moment order 0, 1, 2 or 4");
  sim_cmd->add_option("--seed", sa.seed, "Base seed");
  sim_cmd->add_option("--out", sa.out, "Report path (stdout if omitted)");
  sim_cmd->add_option("--threads", sa.threads, "Worker threads (0: TABDENS_THREADS or hardware)");
  sim_cmd->add_option("--bins", sa.bins, "Target number of fine bins");
  sim_cmd->add_option("--splines", sa.splines, "Number of B-splines K");
  sim_cmd->add_option("--penalty-order", sa.penalty_order, "Difference order of the penalty");

  CheckArgs ca;
  auto* check_cmd = app.add_subcommand("check", "Run gradient and invariant self-checks");
  check_cmd->add_flag("--gradients", ca.gradients, "Finite-difference gradient checks");
  check_cmd->add_flag("--invariants", ca.invariants, "Invariant checks");
  check_cmd->add_option("--seed", ca.seed, "Seed for random check points");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (*fit_cmd)
      return run_fit(fa);
    if (*sim_cmd)
      return run_simulate(sa);
    return run_check(ca);
  } catch (const Error& e) {
    std::fprintf(stderr, "error[%s]: %s\n", std::string(to_string(e.code())).c_str(), e.what());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error[internal]: %s\n", e.what());
  }
  return 1;
}
