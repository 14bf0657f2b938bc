#pragma once

#include "dataset.hpp"
#include "em_fitter.hpp"
#include "error.hpp"

#include <boost/math/quadrature/gauss.hpp>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

namespace tabdens {

using RealFunction = std::function<double(double)>;

//! int_0^1 |Q_fit(p) - Q_true(p)| dp, midpoint rule with `points` nodes.
inline double l1_quantile_distance(const RealFunction& q_true,
                                   const RealFunction& q_fit,
                                   int points = 999)
{
  detail::require(points >= 1, "need at least one quadrature node");
  double acc = 0.0;
  for (int m = 0; m < points; ++m) {
    const double p = (m + 0.5) / points;
    acc += std::abs(q_fit(p) - q_true(p));
  }
  return acc / points;
}

//! int (f_fit - f)^2 f dx over (lo, hi), midpoint rule. No square root is
//! taken.
inline double rimse(const RealFunction& f_true,
                    const RealFunction& f_fit,
                    double lo,
                    double hi,
                    int points = 2000)
{
  detail::require(hi > lo && points >= 1, "invalid integration range");
  const double h = (hi - lo) / points;
  double acc = 0.0;
  for (int m = 0; m < points; ++m) {
    const double x = lo + (m + 0.5) * h;
    const double f = f_true(x);
    const double d = f_fit(x) - f;
    acc += d * d * f;
  }
  return acc * h;
}

//! int f log(f / f_fit) dx over the points where f > 1e-12. Returns +inf if
//! f_fit vanishes there.
inline double kl_divergence(const RealFunction& f_true,
                            const RealFunction& f_fit,
                            double lo,
                            double hi,
                            int points = 2000)
{
  detail::require(hi > lo && points >= 1, "invalid integration range");
  const double h = (hi - lo) / points;
  double acc = 0.0;
  for (int m = 0; m < points; ++m) {
    const double x = lo + (m + 0.5) * h;
    const double f = f_true(x);
    if (!(f > 1e-12))
      continue;
    const double g = f_fit(x);
    if (!(g > 0.0))
      return std::numeric_limits<double>::infinity();
    acc += f * std::log(f / g);
  }
  return acc * h;
}

//! Expectation of g when each class spreads its relative frequency uniformly:
//! sum_j n_j / (n (a_j - a_{j-1})) int_{a_{j-1}}^{a_j} g(t) dt.
inline double uniform_baseline_expectation(const RealFunction& g,
                                           const GroupedDataset& data)
{
  const double n = data.n();
  double acc = 0.0;
  for (int j = 0; j < data.num_classes(); ++j) {
    if (data.freqs[j] == 0.0)
      continue;
    const double a = data.class_cuts[j], b = data.class_cuts[j + 1];
    const double integral = boost::math::quadrature::gauss<double, 30>::integrate(g, a, b);
    acc += data.freqs[j] / (n * (b - a)) * integral;
  }
  return acc;
}

struct MomentDiagnostic
{
  int cls{};   ///< class index, 0-based
  int order{}; ///< 1 = mean, r = central moment of order r
  double observed{};
  double fitted{};
  double sd{}; ///< sqrt of the diagonal of the moment covariance at the fit
  double z{};
};

//! Observed against fitted class moments with z = (m - mu) / sd.
inline std::vector<MomentDiagnostic> moment_diagnostics(const FitResult& fit)
{
  const GroupedDataset& d = fit.data();
  const int R = std::min(d.order(), 4);
  std::vector<MomentDiagnostic> out;
  for (int j = 0; j < d.num_classes(); ++j) {
    if (!d.has_moments(j))
      continue;
    const Eigen::Matrix4d S = moment_covariance(fit.moments, j, d.freqs[j]);
    for (int r = 1; r <= R; ++r) {
      MomentDiagnostic m;
      m.cls = j;
      m.order = r;
      m.observed = d.observed.m(j, r - 1);
      m.fitted = fit.moments.mu(j, r - 1);
      m.sd = std::sqrt(std::max(0.0, S(r - 1, r - 1)));
      m.z = m.sd > 0.0 ? (m.observed - m.fitted) / m.sd : 0.0;
      out.push_back(m);
    }
  }
  return out;
}

} // namespace tabdens
