#pragma once

//! Self-checks: analytic derivatives against central finite differences and
//! structural invariants of the model, the fitter and the file formats.
//! Random check points derive from a single seed.

#include "datasets.hpp"
#include "em_fitter.hpp"
#include "io.hpp"
#include "risk_inference.hpp"
#include "sim_harness.hpp"

#include <boost/random/mersenne_twister.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_real_distribution.hpp>

#include <cmath>
#include <cstdint>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

namespace tabdens {

struct CheckResult
{
  std::string name;
  bool passed{};
  std::string detail;
};

struct CheckReport
{
  std::vector<CheckResult> results;

  bool all_passed() const
  {
    for (const auto& r : results)
      if (!r.passed)
        return false;
    return !results.empty();
  }
};

namespace detail {

using Rng = boost::random::mt19937_64;

inline Eigen::VectorXd random_theta(Rng& rng, int K, double scale)
{
  boost::random::normal_distribution<> z(0.0, scale);
  Eigen::VectorXd t(K);
  for (int k = 0; k < K; ++k)
    t[k] = z(rng);
  return t;
}

inline double max_relative_error(const Eigen::VectorXd& a, const Eigen::VectorXd& ref)
{
  return (a - ref).lpNorm<Eigen::Infinity>() /
         std::max(ref.lpNorm<Eigen::Infinity>(), 1e-8);
}

inline Eigen::VectorXd central_difference(const std::function<double(const Eigen::VectorXd&)>& f,
                                          const Eigen::VectorXd& x,
                                          double h)
{
  Eigen::VectorXd g(x.size());
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    Eigen::VectorXd xp = x, xm = x;
    xp[k] += h;
    xm[k] -= h;
    g[k] = (f(xp) - f(xm)) / (2.0 * h);
  }
  return g;
}

inline std::string format_error(double worst, double tol)
{
  std::ostringstream s;
  s << "max relative error " << worst << " (tolerance " << tol << ")";
  return s.str();
}

inline FitProblem car_problem(int order)
{
  FitConfig cfg;
  return make_problem(with_order(car_insurance_claims(), order), cfg);
}

} // namespace detail

//! Gradient of the complete objective with frozen moment covariances.
inline CheckResult check_complete_gradient(int order, std::uint64_t seed, int points = 20)
{
  detail::Rng rng(seed);
  const FitProblem p = detail::car_problem(order);
  const double lambda = 3.0;
  double worst = 0.0;
  for (int t = 0; t < points; ++t) {
    const Eigen::VectorXd theta = detail::random_theta(rng, p.K(), 0.5);
    const Eigen::VectorXd k = e_step(detail::random_theta(rng, p.K(), 0.5), p.data, p.grid, p.basis);
    const FrozenScales frozen = freeze_scales(theta, p);
    const GradientHessian gh = mstep_gradient_hessian(theta, k, p, lambda, frozen);
    const Eigen::VectorXd fd = detail::central_difference(
      [&](const Eigen::VectorXd& x) { return complete_objective(x, k, p, lambda, frozen); },
      theta, 1e-5);
    worst = std::max(worst, detail::max_relative_error(gh.gradient, fd));
  }
  const double tol = 1e-5;
  return { "complete-objective gradient, moment order " + std::to_string(order),
           worst < tol, detail::format_error(worst, tol) };
}

//! Class moment Jacobians against differences of the moments themselves.
inline CheckResult check_moment_derivatives(std::uint64_t seed, int points = 20)
{
  detail::Rng rng(seed);
  const FitProblem p = detail::car_problem(4);
  double worst = 0.0;
  for (int t = 0; t < points; ++t) {
    const Eigen::VectorXd theta = detail::random_theta(rng, p.K(), 0.5);
    const ModelState s = evaluate_model(theta, p, true);
    for (int j = 0; j < p.grid.num_classes(); ++j)
      for (int r = 1; r <= 4; ++r) {
        const Eigen::VectorXd fd = detail::central_difference(
          [&](const Eigen::VectorXd& x) {
            return class_central_moments(softmax_probabilities(x, p.basis), p.grid, 4).mu(j, r - 1);
          },
          theta, 1e-5);
        const Eigen::VectorXd an = s.jacobians[j].row(r - 1).transpose();
        worst = std::max(worst, detail::max_relative_error(an, fd));
      }
  }
  const double tol = 1e-6;
  return { "class moment derivatives", worst < tol, detail::format_error(worst, tol) };
}

//! Quantile gradient against differences of the quantile function.
inline CheckResult check_quantile_gradient(std::uint64_t seed, int points = 20)
{
  detail::Rng rng(seed);
  boost::random::uniform_real_distribution<> unif(0.05, 0.95);
  const FitProblem p = detail::car_problem(0);
  double worst = 0.0;
  for (int t = 0; t < points; ++t) {
    const Eigen::VectorXd theta = detail::random_theta(rng, p.K(), 0.5);
    const double prob = unif(rng);
    const FittedDensity fd(theta, p.basis, p.grid);
    const Eigen::VectorXd an = fd.quantile_gradient(prob);
    const Eigen::VectorXd num = detail::central_difference(
      [&](const Eigen::VectorXd& x) { return FittedDensity(x, p.basis, p.grid).quantile(prob); },
      theta, 1e-6);
    worst = std::max(worst, detail::max_relative_error(an, num));
  }
  const double tol = 1e-4;
  return { "quantile gradient", worst < tol, detail::format_error(worst, tol) };
}

//! Frequency part of the observed information (tabulation loss included)
//! against differences of the observed score, which equals the complete
//! score at k = E(k | theta).
inline CheckResult check_observed_information(std::uint64_t seed, int points = 10)
{
  detail::Rng rng(seed);
  const FitProblem p = detail::car_problem(0);
  const double lambda = 3.0;
  const FrozenScales none = freeze_scales(Eigen::VectorXd::Zero(p.K()), p);
  auto score = [&](const Eigen::VectorXd& x) {
    const Eigen::VectorXd k = e_step(x, p.data, p.grid, p.basis);
    return mstep_gradient_hessian(x, k, p, lambda, none).gradient;
  };
  double worst = 0.0;
  const double h = 1e-5;
  for (int t = 0; t < points; ++t) {
    const Eigen::VectorXd theta = detail::random_theta(rng, p.K(), 0.5);
    const Eigen::MatrixXd info = observed_information(theta, p, lambda);
    Eigen::MatrixXd fd(p.K(), p.K());
    for (int k = 0; k < p.K(); ++k) {
      Eigen::VectorXd tp = theta, tm = theta;
      tp[k] += h;
      tm[k] -= h;
      fd.col(k) = -(score(tp) - score(tm)) / (2.0 * h);
    }
    const double err = (info - fd).cwiseAbs().maxCoeff() / fd.cwiseAbs().maxCoeff();
    worst = std::max(worst, err);
  }
  const double tol = 1e-5;
  return { "observed information, frequency part", worst < tol, detail::format_error(worst, tol) };
}

inline CheckReport gradient_checks(std::uint64_t seed)
{
  CheckReport rep;
  for (int order : { 0, 1, 2, 4 })
    rep.results.push_back(check_complete_gradient(order, splitmix64(seed + order)));
  rep.results.push_back(check_moment_derivatives(splitmix64(seed + 10)));
  rep.results.push_back(check_quantile_gradient(splitmix64(seed + 11)));
  rep.results.push_back(check_observed_information(splitmix64(seed + 12)));
  return rep;
}

inline CheckResult check_softmax_normalization(std::uint64_t seed)
{
  detail::Rng rng(seed);
  const FitProblem p = detail::car_problem(0);
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const Eigen::VectorXd theta = detail::random_theta(rng, p.K(), 3.0);
    const Eigen::VectorXd pi = softmax_probabilities(theta, p.basis);
    const Eigen::VectorXd gamma = class_probabilities(pi, p.grid);
    worst = std::max({ worst, std::abs(pi.sum() - 1.0), std::abs(gamma.sum() - 1.0) });
    if (pi.minCoeff() <= 0.0)
      return { "softmax normalization", false, "nonpositive bin probability" };
  }
  return { "softmax normalization", worst < 1e-12, "max |sum - 1| = " + std::to_string(worst) };
}

inline CheckResult check_partition_of_unity(std::uint64_t seed)
{
  detail::Rng rng(seed);
  const FitProblem p = detail::car_problem(0);
  boost::random::uniform_real_distribution<> unif(p.grid.a0, p.grid.aJ);
  double worst = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const Eigen::RowVectorXd row = p.basis.spline.evaluate(unif(rng));
    worst = std::max(worst, std::abs(row.sum() - 1.0));
    if ((row.array() != 0.0).count() > 4)
      return { "partition of unity", false, "more than four nonzero B-splines" };
  }
  worst = std::max(worst, (p.basis.B.rowwise().sum().array() - 1.0).abs().maxCoeff());
  return { "partition of unity", worst < 1e-10, "max |sum - 1| = " + std::to_string(worst) };
}

inline CheckResult check_estep_mass(std::uint64_t seed)
{
  detail::Rng rng(seed);
  const FitProblem p = detail::car_problem(0);
  double worst = 0.0;
  for (int t = 0; t < 20; ++t) {
    const Eigen::VectorXd k = e_step(detail::random_theta(rng, p.K(), 1.0), p.data, p.grid, p.basis);
    for (int j = 0; j < p.grid.num_classes(); ++j)
      worst = std::max(worst, std::abs(k.segment(p.grid.class_begin[j], p.grid.bins_in_class(j)).sum() -
                                       p.data.freqs[j]));
  }
  return { "E-step mass conservation", worst < 1e-10, "max class error " + std::to_string(worst) };
}

//! Observed objective along an EM run at fixed lambda.
inline CheckResult check_em_ascent(int order)
{
  FitConfig cfg;
  cfg.fixed_lambda = 5.0;
  cfg.em_max_iters = 300;
  const FitResult f = fit(with_order(car_insurance_claims(), order), cfg);
  const double slack = order == 0 ? 1e-8 : 1e-4;
  const auto& tr = f.loglik_trace;
  double worst_drop = 0.0;
  for (size_t i = 1; i < tr.size(); ++i)
    worst_drop = std::max(worst_drop, tr[i - 1] - tr[i]);
  bool tail_ok = true;
  if (f.converged) {
    for (size_t i = tr.size() >= 6 ? tr.size() - 5 : 1; i < tr.size(); ++i)
      tail_ok = tail_ok && std::abs(tr[i] - tr[i - 1]) < 1e-6;
  }
  std::ostringstream s;
  s << "largest decrease " << worst_drop << " over " << tr.size() - 1 << " sweeps";
  return { "EM ascent, moment order " + std::to_string(order),
           worst_drop <= slack && tail_ok, s.str() };
}

inline CheckResult check_quantile_round_trip()
{
  const FitResult f = fit(car_insurance_claims());
  const FittedDensity fd(f);
  double prev = -std::numeric_limits<double>::infinity();
  double worst = 0.0;
  for (int m = 1; m <= 99; ++m) {
    const double p = m / 100.0;
    const double q = fd.quantile(p);
    if (!(q > prev))
      return { "quantile monotonicity and CDF round trip", false,
               "quantile not increasing at p = " + std::to_string(p) };
    prev = q;
    worst = std::max(worst, std::abs(fd.cdf_at(q) - p));
  }
  return { "quantile monotonicity and CDF round trip", worst < 1e-8,
           "max |F(Q(p)) - p| = " + std::to_string(worst) };
}

inline bool same_dataset(const GroupedDataset& a, const GroupedDataset& b)
{
  if (a.class_cuts != b.class_cuts || a.transform != b.transform || a.order() != b.order() ||
      a.freqs.size() != b.freqs.size() || a.freqs != b.freqs)
    return false;
  for (int j = 0; j < a.num_classes(); ++j) {
    if (a.has_moments(j) != b.has_moments(j))
      return false;
    if (!a.has_moments(j))
      continue;
    for (int r = 0; r < a.order(); ++r)
      if (a.observed.m(j, r) != b.observed.m(j, r))
        return false;
  }
  return true;
}

inline CheckResult check_report_round_trip(std::uint64_t seed)
{
  std::vector<GroupedDataset> cases{ car_insurance_claims() };
  for (int order : { 0, 1, 2, 4 })
    cases.push_back(tabulate(sample_truth(60, seed + order), { -1.0, 0.0, 1.0, 3.5, 6.0 }, order));
  for (const auto& d : cases) {
    const GroupedDataset back = parse_summary_text(emit_summary_csv(d));
    if (!same_dataset(d, back))
      return { "summary table round trip", false, "dataset changed after emit and parse" };
  }
  return { "summary table round trip", true, std::to_string(cases.size()) + " datasets" };
}

inline CheckReport invariant_checks(std::uint64_t seed)
{
  CheckReport rep;
  rep.results.push_back(check_softmax_normalization(splitmix64(seed + 20)));
  rep.results.push_back(check_partition_of_unity(splitmix64(seed + 21)));
  rep.results.push_back(check_estep_mass(splitmix64(seed + 22)));
  rep.results.push_back(check_em_ascent(0));
  rep.results.push_back(check_em_ascent(1));
  rep.results.push_back(check_em_ascent(4));
  rep.results.push_back(check_quantile_round_trip());
  rep.results.push_back(check_report_round_trip(splitmix64(seed + 23)));
  return rep;
}

} // namespace tabdens
