#pragma once

//! Simulation study: a Normal / reflected Gamma mixture is sampled,
//! tabulated into classes with their moments, fitted, and the fitted
//! quantiles and densities are compared with the truth.
//!
//! Replicate s uses the generator seed splitmix64(seed + s), so results do
//! not depend on the number of worker threads.

#include "dataset.hpp"
#include "em_fitter.hpp"
#include "error.hpp"
#include "evaluation.hpp"
#include "risk_inference.hpp"

#include <boost/math/distributions/gamma.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/tools/roots.hpp>
#include <boost/random/bernoulli_distribution.hpp>
#include <boost/random/gamma_distribution.hpp>
#include <boost/random/mersenne_twister.hpp>
#include <boost/random/normal_distribution.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <limits>
#include <string>
#include <thread>
#include <vector>

namespace tabdens {

inline std::uint64_t splitmix64(std::uint64_t x)
{
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

//! f(x) = w1 N(x; 1, 1/9) + w2 g(5.6 - x) with g the Gamma(11, rate 6) density.
struct MixtureTruth
{
  double w1{ 0.2 };
  double w2{ 0.8 };
  double normal_mean{ 1.0 };
  double normal_sd{ 1.0 / 3.0 };
  double gamma_shape{ 11.0 };
  double gamma_rate{ 6.0 };
  double reflect_at{ 5.6 };
  double lower{ -1.0 }; ///< samples are redrawn outside (lower, upper)
  double upper{ 6.0 };

  boost::math::normal normal() const { return boost::math::normal(normal_mean, normal_sd); }
  boost::math::gamma_distribution<> gamma() const
  {
    return boost::math::gamma_distribution<>(gamma_shape, 1.0 / gamma_rate);
  }

  double pdf(double x) const
  {
    const double t = reflect_at - x;
    const double g = t > 0.0 ? boost::math::pdf(gamma(), t) : 0.0;
    return w1 * boost::math::pdf(normal(), x) + w2 * g;
  }

  double cdf(double x) const
  {
    const double t = reflect_at - x;
    const double g = t > 0.0 ? boost::math::cdf(boost::math::complement(gamma(), t)) : 1.0;
    return w1 * boost::math::cdf(normal(), x) + w2 * g;
  }

  double quantile(double p) const
  {
    detail::require(p > 0.0 && p < 1.0, "probability must lie in (0, 1)");
    boost::math::tools::eps_tolerance<double> tol(50);
    std::uintmax_t iters = 200;
    const auto r = boost::math::tools::toms748_solve(
      [&](double x) { return cdf(x) - p; }, -10.0, reflect_at + 10.0, tol, iters);
    return 0.5 * (r.first + r.second);
  }
};

inline std::vector<double> sample_truth(int n, std::uint64_t seed, const MixtureTruth& truth = {})
{
  detail::require(n >= 1, "sample size must be at least 1");
  boost::random::mt19937_64 rng(seed);
  boost::random::bernoulli_distribution<> first(truth.w1);
  boost::random::normal_distribution<> normal(truth.normal_mean, truth.normal_sd);
  boost::random::gamma_distribution<> gamma(truth.gamma_shape, 1.0 / truth.gamma_rate);
  std::vector<double> out;
  out.reserve(n);
  while (static_cast<int>(out.size()) < n) {
    const double x = first(rng) ? normal(rng) : truth.reflect_at - gamma(rng);
    if (x > truth.lower && x < truth.upper)
      out.push_back(x);
  }
  return out;
}

//! Frequencies and central moments per class (a_{j-1}, a_j]. Empty classes
//! get NaN moments.
inline GroupedDataset tabulate(const std::vector<double>& samples,
                               const std::vector<double>& cuts,
                               int max_order)
{
  detail::require(valid_order(max_order), "moment order must be 0, 1, 2 or 4");
  detail::require(cuts.size() >= 2, "at least two class cut points are required");
  const int J = static_cast<int>(cuts.size()) - 1;
  std::vector<std::vector<double>> members(J);
  for (double x : samples) {
    if (!(x > cuts.front() && x <= cuts.back()))
      detail::fail(ErrorCode::validation, "sample outside the class range");
    const auto it = std::lower_bound(cuts.begin() + 1, cuts.end(), x);
    members[static_cast<int>(it - cuts.begin()) - 1].push_back(x);
  }
  GroupedDataset d;
  d.class_cuts = cuts;
  d.freqs.resize(J);
  d.observed.order = max_order;
  d.observed.m.setConstant(J, 4, std::numeric_limits<double>::quiet_NaN());
  for (int j = 0; j < J; ++j) {
    const auto& xs = members[j];
    d.freqs[j] = static_cast<double>(xs.size());
    if (xs.empty() || max_order == 0)
      continue;
    double mean = 0.0;
    for (double x : xs)
      mean += x;
    mean /= xs.size();
    double c[5] = { 0, 0, 0, 0, 0 };
    for (double x : xs) {
      const double dx = x - mean;
      c[2] += dx * dx;
      c[3] += dx * dx * dx;
      c[4] += dx * dx * dx * dx;
    }
    d.observed.m(j, 0) = mean;
    for (int r = 2; r <= max_order; ++r)
      d.observed.m(j, r - 1) = c[r] / xs.size();
  }
  return d;
}

inline std::vector<double> class_preset(int classes)
{
  if (classes == 3)
    return { -1.0, 1.0, 3.5, 6.0 };
  if (classes == 5)
    return { -1.0, 1.0, 2.2, 3.5, 4.8, 6.0 };
  detail::fail(ErrorCode::validation, "class preset must be 3 or 5");
}

inline std::vector<double> default_study_probabilities()
{
  return { 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 0.99 };
}

//! Worker count from TABDENS_THREADS, else the hardware concurrency.
inline int default_thread_count()
{
  if (const char* env = std::getenv("TABDENS_THREADS")) {
    const int t = std::atoi(env);
    if (t >= 1)
      return t;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

struct StudyConfig
{
  int reps{ 100 };
  int n{ 1000 };
  std::vector<double> cuts{ class_preset(3) };
  int order{ 4 };
  std::uint64_t seed{ 1 };
  std::vector<double> probs{ default_study_probabilities() };
  FitConfig fit{ .target_bins = 350 };
  int threads{ 0 }; ///< 0 selects default_thread_count()
  MixtureTruth truth{};
};

struct QuantileSummary
{
  double p{};
  double true_q{};
  double mean{};
  double bias{};
  double sd{}; ///< divisor: number of replicates used
  double rmse{};
  double coverage95{};
  double coverage90{};
};

struct ReplicateOutcome
{
  enum class Status
  {
    ok,
    not_converged,
    failed
  } status{ Status::ok };
  std::string error;
  std::vector<double> q, lo95, hi95, lo90, hi90;
  double l1{}, rimse{}, kl{};
  int em_iterations{};
};

struct SimulationReport
{
  StudyConfig config;
  int used{};
  int not_converged{};
  int failed{};
  std::vector<QuantileSummary> quantiles;
  double median_l1{};
  double median_rimse{};
  double median_kl{};
  std::vector<std::string> failures;
};

inline double median(std::vector<double> v)
{
  if (v.empty())
    return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

inline ReplicateOutcome run_replicate(const StudyConfig& cfg,
                                      int rep,
                                      const std::vector<double>& truth_grid_q)
{
  ReplicateOutcome out;
  try {
    const auto xs = sample_truth(cfg.n, splitmix64(cfg.seed + static_cast<std::uint64_t>(rep)), cfg.truth);
    const GroupedDataset data = tabulate(xs, cfg.cuts, cfg.order);
    const FitResult fit = tabdens::fit(data, cfg.fit);
    out.em_iterations = fit.em_iterations;
    if (!fit.converged)
      out.status = ReplicateOutcome::Status::not_converged;
    const FittedDensity fd(fit);
    const InformationMatrix info = information_matrix(fit);
    for (double p : cfg.probs) {
      const auto e95 = quantile_credible_interval(p, 0.05, fd, info);
      const auto e90 = quantile_credible_interval(p, 0.10, fd, info);
      out.q.push_back(e95.q_hat);
      out.lo95.push_back(e95.ci_lower);
      out.hi95.push_back(e95.ci_upper);
      out.lo90.push_back(e90.ci_lower);
      out.hi90.push_back(e90.ci_upper);
    }
    const int points = static_cast<int>(truth_grid_q.size());
    out.l1 = l1_quantile_distance(
      [&](double p) { return truth_grid_q[static_cast<size_t>(std::lround(p * points - 0.5))]; },
      [&](double p) { return fd.quantile(p); },
      points);
    const auto f_true = [&](double x) { return cfg.truth.pdf(x); };
    const auto f_fit = [&](double x) { return fd.density_at(x); };
    out.rimse = rimse(f_true, f_fit, cfg.cuts.front(), cfg.cuts.back());
    out.kl = kl_divergence(f_true, f_fit, cfg.cuts.front(), cfg.cuts.back());
  } catch (const Error& e) {
    out.status = ReplicateOutcome::Status::failed;
    out.error = "replicate " + std::to_string(rep) + ": " +
                std::string(to_string(e.code())) + ": " + e.what();
  }
  return out;
}

//! Replicates whose fit did not converge or failed are counted and left
//! out of every aggregate.
inline SimulationReport aggregate(const StudyConfig& cfg,
                                  const std::vector<ReplicateOutcome>& reps)
{
  SimulationReport rep;
  rep.config = cfg;
  const size_t P = cfg.probs.size();
  std::vector<double> sum(P, 0.0), sq(P, 0.0), c95(P, 0.0), c90(P, 0.0);
  std::vector<double> true_q(P);
  for (size_t a = 0; a < P; ++a)
    true_q[a] = cfg.truth.quantile(cfg.probs[a]);
  std::vector<double> l1, ri, kl;
  for (const auto& r : reps) {
    if (r.status == ReplicateOutcome::Status::failed) {
      ++rep.failed;
      rep.failures.push_back(r.error);
      continue;
    }
    if (r.status == ReplicateOutcome::Status::not_converged) {
      ++rep.not_converged;
      continue;
    }
    ++rep.used;
    for (size_t a = 0; a < P; ++a) {
      const double e = r.q[a] - true_q[a];
      sum[a] += e;
      sq[a] += e * e;
      c95[a] += (r.lo95[a] <= true_q[a] && true_q[a] <= r.hi95[a]) ? 1.0 : 0.0;
      c90[a] += (r.lo90[a] <= true_q[a] && true_q[a] <= r.hi90[a]) ? 1.0 : 0.0;
    }
    l1.push_back(r.l1);
    ri.push_back(r.rimse);
    kl.push_back(r.kl);
  }
  const double S = rep.used;
  for (size_t a = 0; a < P; ++a) {
    QuantileSummary q;
    q.p = cfg.probs[a];
    q.true_q = true_q[a];
    if (S > 0) {
      q.bias = sum[a] / S;
      q.mean = q.true_q + q.bias;
      const double mse = sq[a] / S;
      q.sd = std::sqrt(std::max(0.0, mse - q.bias * q.bias));
      q.rmse = std::sqrt(q.bias * q.bias + q.sd * q.sd);
      q.coverage95 = c95[a] / S;
      q.coverage90 = c90[a] / S;
    } else {
      q.mean = q.bias = q.sd = q.rmse = q.coverage95 = q.coverage90 =
        std::numeric_limits<double>::quiet_NaN();
    }
    rep.quantiles.push_back(q);
  }
  rep.median_l1 = median(l1);
  rep.median_rimse = median(ri);
  rep.median_kl = median(kl);
  return rep;
}

inline SimulationReport run_study(const StudyConfig& cfg)
{
  detail::require(cfg.reps >= 1, "number of replicates must be at least 1");
  detail::require(cfg.n >= 1, "sample size must be at least 1");
  detail::require(cfg.cuts.size() >= 2, "at least two class cut points are required");
  detail::require(cfg.cuts.front() >= cfg.truth.lower && cfg.cuts.back() <= cfg.truth.upper,
                  "class range must lie within the sampling range");
  for (double p : cfg.probs)
    detail::require(p > 0.0 && p < 1.0, "probabilities must lie in (0, 1)");

  constexpr int grid_points = 999;
  std::vector<double> truth_grid_q(grid_points);
  for (int m = 0; m < grid_points; ++m)
    truth_grid_q[m] = cfg.truth.quantile((m + 0.5) / grid_points);

  std::vector<ReplicateOutcome> outcomes(cfg.reps);
  const int threads = std::min(cfg.threads > 0 ? cfg.threads : default_thread_count(), cfg.reps);
  std::atomic<int> next{ 0 };
  auto worker = [&] {
    for (int r = next++; r < cfg.reps; r = next++)
      outcomes[r] = run_replicate(cfg, r, truth_grid_q);
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t)
      pool.emplace_back(worker);
    for (auto& t : pool)
      t.join();
  }
  return aggregate(cfg, outcomes);
}

} // namespace tabdens
