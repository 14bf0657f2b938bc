#pragma once

//! Map spline coefficients to latent bin probabilities, class probabilities
//! and class-conditional central moments, together with the moment
//! covariance used by the moment likelihood and the moment derivatives.
//!
//! Derivative of the central moments. With w_i = pi_i / gamma_j the class
//! weights, the derivative of the order-r central moment is
//!
//!   d mu_r / d theta_k = sum_i w_i b_ik { d_i^r - mu_r - r c_{r-1} d_i }
//!
//! where d_i = u_i - mu_1 and c_{r-1} is the *centered* moment of order r - 1.
//! For r = 2 this is the centered first moment, which is zero; using the
//! conditional mean in its place disagrees with finite differences.

#include "error.hpp"
#include "grid_basis.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace tabdens {

using MomentTable = Eigen::Matrix<double, Eigen::Dynamic, 8>;
using MomentJacobian = Eigen::Matrix<double, 4, Eigen::Dynamic>;

struct IdentifiedTheta
{
  Eigen::VectorXd theta;
  int pivot{}; ///< index with theta[pivot] == 0, lowest index on ties
};

//! Subtract the largest coefficient so that max_k theta_k = 0.
inline IdentifiedTheta normalize_identification(const Eigen::VectorXd& theta)
{
  Eigen::Index pivot = 0;
  theta.maxCoeff(&pivot);
  IdentifiedTheta out;
  out.pivot = static_cast<int>(pivot);
  out.theta = theta.array() - theta[pivot];
  out.theta[pivot] = 0.0;
  return out;
}

//! pi_i = exp(eta_i) / sum_t exp(eta_t) with eta = B theta.
inline Eigen::VectorXd softmax_probabilities(const Eigen::VectorXd& theta,
                                             const Eigen::MatrixXd& B)
{
  Eigen::VectorXd eta = B * theta;
  const double top = eta.maxCoeff();
  Eigen::VectorXd pi = (eta.array() - top).exp();
  pi /= pi.sum();
  return pi;
}

inline Eigen::VectorXd softmax_probabilities(const Eigen::VectorXd& theta,
                                             const GridBasis& basis)
{
  return softmax_probabilities(theta, basis.B);
}

inline Eigen::VectorXd class_probabilities(const Eigen::VectorXd& pi,
                                           const Eigen::MatrixXd& composition)
{
  return composition * pi;
}

inline Eigen::VectorXd class_probabilities(const Eigen::VectorXd& pi,
                                           const FineGrid& grid)
{
  const int J = grid.num_classes();
  Eigen::VectorXd gamma(J);
  for (int j = 0; j < J; ++j)
    gamma[j] = pi.segment(grid.class_begin[j], grid.bins_in_class(j)).sum();
  return gamma;
}

//! Class-conditional moments of the latent distribution. Column 0 holds the
//! conditional mean, column r - 1 the centered moment of order r.
struct ClassMoments
{
  MomentTable mu;
  Eigen::VectorXd gamma;

  int num_classes() const { return static_cast<int>(mu.rows()); }
  double mean(int j) const { return mu(j, 0); }
  double central(int j, int r) const { return mu(j, r - 1); }
};

inline ClassMoments class_central_moments(const Eigen::VectorXd& pi,
                                          const FineGrid& grid,
                                          int max_order = 8)
{
  detail::require(max_order >= 2 && max_order <= 8,
                  "moment order must be between 2 and 8");
  const int J = grid.num_classes();
  ClassMoments out;
  out.mu = MomentTable::Zero(J, 8);
  out.gamma = class_probabilities(pi, grid);
  for (int j = 0; j < J; ++j) {
    const double g = out.gamma[j];
    if (!(g >= 1e-12))
      detail::fail(ErrorCode::empty_class,
                   "empty class " + std::to_string(j + 1) +
                     ": model probability below 1e-12");
    const int b0 = grid.class_begin[j];
    const int nb = grid.bins_in_class(j);
    double m1 = 0.0;
    for (int i = b0; i < b0 + nb; ++i)
      m1 += grid.midpoints[i] * pi[i];
    m1 /= g;
    out.mu(j, 0) = m1;
    std::array<double, 9> acc{};
    for (int i = b0; i < b0 + nb; ++i) {
      const double d = grid.midpoints[i] - m1;
      double p = pi[i] * d;
      for (int r = 2; r <= max_order; ++r) {
        p *= d;
        acc[r] += p;
      }
    }
    for (int r = 2; r <= max_order; ++r)
      out.mu(j, r - 1) = acc[r] / g;
  }
  return out;
}

//! Large-sample covariance of the sample mean and the sample central moments
//! of order 2 to 4 within class j, for n_j observations. Needs moments to
//! order 8.
//!
//! The sample central moment of order r behaves like the average of
//! psi_r = d^r - mu_r - r mu_{r-1} d (psi_1 = d), the extra term accounting
//! for the estimated mean, so that
//!
//!   n Cov(m_r, m_s) = mu_{r+s} - mu_r mu_s - a_s mu_{r+1} - a_r mu_{s+1}
//!                     + a_r a_s mu_2,        a_r = r mu_{r-1}, a_1 = 0.
//!
//! Dropping the a-terms gives a matrix that overstates Var(m_3) threefold
//! for Normal data.
inline Eigen::Matrix4d asymptotic_moment_covariance(const ClassMoments& m, int j, double n_j)
{
  detail::require(n_j >= 1.0, "class frequency must be at least 1");
  std::array<double, 9> c{};
  c[0] = 1.0;
  for (int r = 2; r <= 8; ++r)
    c[r] = m.mu(j, r - 1);
  std::array<double, 5> a{};
  for (int r = 2; r <= 4; ++r)
    a[r] = r * c[r - 1];
  Eigen::Matrix4d S;
  for (int r = 1; r <= 4; ++r)
    for (int s = r; s <= 4; ++s) {
      S(r - 1, s - 1) = c[r + s] - c[r] * c[s] - a[s] * c[r + 1] -
                        a[r] * c[s + 1] + a[r] * a[s] * c[2];
      S(s - 1, r - 1) = S(r - 1, s - 1);
    }
  for (int a = 0; a < 4; ++a)
    if (S(a, a) < -1e-10)
      detail::fail(ErrorCode::inconsistent_moments,
                   "inconsistent moments in class " + std::to_string(j + 1) +
                     ": negative variance in the moment covariance");
  return S / n_j;
}

namespace detail {

// Polynomial in 1/n and the central moments: (power of 1/n, sorted moment
// orders) -> coefficient. Coefficients stay small integers, so sums cancel
// exactly.
using MomentPoly = std::map<std::pair<int, std::vector<int>>, double>;

inline MomentPoly poly_product(const MomentPoly& a, const MomentPoly& b)
{
  MomentPoly out;
  for (const auto& [ka, ca] : a)
    for (const auto& [kb, cb] : b) {
      std::vector<int> mu = ka.second;
      mu.insert(mu.end(), kb.second.begin(), kb.second.end());
      std::sort(mu.begin(), mu.end());
      out[{ ka.first + kb.first, mu }] += ca * cb;
    }
  return out;
}

// Signed Stirling numbers of the first kind: (n)_b = sum_i s(b, i) n^i.
inline std::vector<std::vector<double>> stirling_first(int max_b)
{
  std::vector<std::vector<double>> s(max_b + 1, std::vector<double>(max_b + 1, 0.0));
  s[0][0] = 1.0;
  for (int b = 0; b < max_b; ++b)
    for (int i = 1; i <= b + 1; ++i)
      s[b + 1][i] = s[b][i - 1] - b * s[b][i];
  return s;
}

// E[prod_t P_{a_t}] with P_a = (1/n) sum_i x_i^a for iid x centered at the
// population mean: a sum over set partitions of the factors, each block
// contributing the moment of order equal to its summed powers and the
// partition the falling factorial (n)_{blocks}.
inline MomentPoly expected_power_product(const std::vector<int>& a)
{
  static const auto stirling = stirling_first(8);
  const int q = static_cast<int>(a.size());
  MomentPoly out;
  std::vector<int> block_sum;
  std::function<void(int)> assign = [&](int t) {
    if (t == q) {
      std::vector<int> mu;
      for (int v : block_sum) {
        if (v == 1)
          return;
        mu.push_back(v);
      }
      std::sort(mu.begin(), mu.end());
      const int b = static_cast<int>(block_sum.size());
      for (int i = 1; i <= b; ++i)
        if (stirling[b][i] != 0.0)
          out[{ q - i, mu }] += stirling[b][i];
      return;
    }
    for (size_t blk = 0; blk < block_sum.size(); ++blk) {
      block_sum[blk] += a[t];
      assign(t + 1);
      block_sum[blk] -= a[t];
    }
    block_sum.push_back(a[t]);
    assign(t + 1);
    block_sum.pop_back();
  };
  assign(0);
  return out;
}

// Sample moment of order r in power sums: the mean is P_1, and for r >= 2
// m_r = sum_k C(r, k) (-P_1)^{r-k} P_k.
inline std::vector<std::pair<double, std::vector<int>>> moment_in_power_sums(int r)
{
  if (r == 1)
    return { { 1.0, { 1 } } };
  std::vector<std::pair<double, std::vector<int>>> terms;
  double binom = 1.0;
  for (int k = 0; k <= r; ++k) {
    if (k > 0)
      binom = binom * (r - k + 1) / k;
    const double sign = (r - k) % 2 == 0 ? 1.0 : -1.0;
    std::vector<int> powers(r - k, 1);
    if (k > 0)
      powers.push_back(k);
    terms.push_back({ sign * binom, powers });
  }
  return terms;
}

inline MomentPoly expected_moment_product(int r, int s)
{
  MomentPoly out;
  for (const auto& [cr, pr] : moment_in_power_sums(r))
    for (const auto& [cs, ps] : moment_in_power_sums(s)) {
      std::vector<int> a = pr;
      a.insert(a.end(), ps.begin(), ps.end());
      for (const auto& [key, c] : expected_power_product(a))
        out[key] += cr * cs * c;
    }
  return out;
}

inline MomentPoly expected_moment(int r)
{
  MomentPoly out;
  for (const auto& [c, powers] : moment_in_power_sums(r))
    for (const auto& [key, e] : expected_power_product(powers))
      out[key] += c * e;
  return out;
}

struct CovarianceTerm
{
  double coef;
  int inv_n_power;
  std::vector<int> mu;
};

// Exact Cov(m_r, m_s) as terms coef * n^{-d} * prod mu, for 1 <= r, s <= 4.
inline const std::array<std::vector<CovarianceTerm>, 16>& exact_covariance_table()
{
  static const auto table = [] {
    std::array<std::vector<CovarianceTerm>, 16> t;
    for (int r = 1; r <= 4; ++r)
      for (int s = r; s <= 4; ++s) {
        MomentPoly cov = expected_moment_product(r, s);
        for (const auto& [key, c] : poly_product(expected_moment(r), expected_moment(s)))
          cov[key] -= c;
        std::vector<CovarianceTerm> terms;
        for (const auto& [key, c] : cov)
          if (std::abs(c) > 1e-9)
            terms.push_back({ c, key.first, key.second });
        t[(r - 1) * 4 + (s - 1)] = terms;
        t[(s - 1) * 4 + (r - 1)] = terms;
      }
    return t;
  }();
  return table;
}

} // namespace detail

//! Covariance of the sample mean and the sample central moments of order 2
//! to 4 (divisor n) within class j, for n_j observations. Needs moments to
//! order 8.
//!
//! The matrix is exact for a sample of size n_j: each entry is a polynomial
//! in 1/n_j whose leading term is the large-sample covariance above. With
//! fewer than five observations the exact matrix is singular (m_3 vanishes
//! for two points), and the large-sample matrix is returned instead.
inline Eigen::Matrix4d moment_covariance(const ClassMoments& m, int j, double n_j)
{
  if (n_j < 5.0)
    return asymptotic_moment_covariance(m, j, n_j);
  std::array<double, 9> c{};
  c[0] = 1.0;
  for (int r = 2; r <= 8; ++r)
    c[r] = m.mu(j, r - 1);
  const auto& table = detail::exact_covariance_table();
  Eigen::Matrix4d S;
  for (int r = 0; r < 4; ++r)
    for (int s = 0; s < 4; ++s) {
      double v = 0.0;
      for (const auto& term : table[r * 4 + s]) {
        double t = term.coef * std::pow(n_j, -term.inv_n_power);
        for (int k : term.mu)
          t *= c[k];
        v += t;
      }
      S(r, s) = v;
    }
  for (int a = 0; a < 4; ++a)
    if (S(a, a) * n_j < -1e-10)
      detail::fail(ErrorCode::inconsistent_moments,
                   "inconsistent moments in class " + std::to_string(j + 1) +
                     ": negative variance in the moment covariance");
  return S;
}

inline std::vector<Eigen::Matrix4d> moment_covariance(const ClassMoments& m,
                                                      const Eigen::VectorXd& freqs)
{
  std::vector<Eigen::Matrix4d> out;
  out.reserve(m.num_classes());
  for (int j = 0; j < m.num_classes(); ++j)
    out.push_back(moment_covariance(m, j, freqs[j]));
  return out;
}

//! Jacobians d(mu_1j, ..., mu_4j) / d theta, one 4 x K matrix per class.
inline std::vector<MomentJacobian> moment_derivatives(const Eigen::VectorXd& pi,
                                                      const GridBasis& basis,
                                                      const FineGrid& grid,
                                                      const ClassMoments& m)
{
  const int J = grid.num_classes();
  const int K = basis.K();
  std::vector<MomentJacobian> out(J, MomentJacobian::Zero(4, K));
#ifdef TABDENS_MUTATE_MOMENT_DERIVATIVE
  constexpr double lower_order_sign = +1.0; // deliberately wrong
#else
  constexpr double lower_order_sign = -1.0;
#endif
  for (int j = 0; j < J; ++j) {
    const double g = m.gamma[j];
    const double m1 = m.mu(j, 0);
    // centered moments c_0..c_4 with c_1 = 0
    const std::array<double, 5> c{ 1.0, 0.0, m.mu(j, 1), m.mu(j, 2), m.mu(j, 3) };
    const int b0 = grid.class_begin[j];
    const int nb = grid.bins_in_class(j);
    Eigen::Matrix<double, 4, Eigen::Dynamic> weights(4, nb);
    for (int t = 0; t < nb; ++t) {
      const int i = b0 + t;
      const double w = pi[i] / g;
      const double d = grid.midpoints[i] - m1;
      weights(0, t) = w * d;
      double dr = d;
      for (int r = 2; r <= 4; ++r) {
        dr *= d;
        weights(r - 1, t) =
          w * (dr - c[r] + lower_order_sign * r * c[r - 1] * d);
      }
    }
    out[j] = weights * basis.B.middleRows(b0, nb);
  }
  return out;
}

//! Observed sample moments per class: column 0 is the mean, column r - 1 the
//! centered moment of order r. Only the first `order` columns are meaningful.
struct ObservedClassMoments
{
  Eigen::Matrix<double, Eigen::Dynamic, 4> m;
  int order{ 0 };
};

struct CentralMoments
{
  double m1{}, m2{}, m3{}, m4{};
};

//! Mean, standard deviation, skewness g1 and excess kurtosis g2 to central
//! moments: m3 = g1 sd^3, m4 = (g2 + 3) sd^4.
inline CentralMoments convert_summary_to_central_moments(double mean,
                                                         double sd,
                                                         double skewness,
                                                         double kurtosis_excess)
{
  detail::require(sd >= 0.0, "standard deviation must be nonnegative");
  const double s2 = sd * sd;
  return { mean, s2, skewness * s2 * sd, (kurtosis_excess + 3.0) * s2 * s2 };
}

} // namespace tabdens
