#pragma once

//! Continuous density, distribution and quantile functions of a fitted
//! model, the observed information for the spline coefficients and
//! delta-method intervals for quantiles.
//!
//! Integrals use the midpoint rule on the fine grid, so that
//! f(u_i) delta = pi_i and the distribution function is linear inside each
//! bin with F(b_i) = pi_0 + ... + pi_{i-1}.

#include "em_fitter.hpp"
#include "error.hpp"
#include "grid_basis.hpp"

#include <Eigen/Dense>
#include <boost/math/distributions/normal.hpp>
#include <algorithm>
#include <cmath>
#include <vector>

namespace tabdens {

class FittedDensity
{
public:
  FittedDensity(const Eigen::VectorXd& theta, const GridBasis& basis, const FineGrid& grid)
    : spline_(basis.spline)
    , grid_(grid)
  {
    detail::require(theta.size() == basis.K(), "coefficient vector has wrong length");
    detail::require(theta.allFinite(), "coefficients must be finite");
    const IdentifiedTheta id = normalize_identification(theta);
    theta_ = id.theta;
    pivot_ = id.pivot;
    const Eigen::VectorXd eta = basis.B * theta_;
    eta_max_ = eta.maxCoeff();
    const Eigen::VectorXd e = (eta.array() - eta_max_).exp();
    norm_ = e.sum() * grid_.delta;
    pi_ = e / e.sum();
    cum_.resize(grid_.I + 1);
    cum_[0] = 0.0;
    for (int i = 0; i < grid_.I; ++i)
      cum_[i + 1] = cum_[i] + pi_[i];
    cum_ /= cum_[grid_.I];
    cum_[grid_.I] = 1.0;
    bbar_ = basis.B.transpose() * pi_;
    basis_B_ = basis.B;
  }

  explicit FittedDensity(const FitResult& fit)
    : FittedDensity(fit.theta_hat, fit.basis(), fit.grid())
  {}

  const Eigen::VectorXd& theta() const { return theta_; }
  int pivot() const { return pivot_; }
  const FineGrid& grid() const { return grid_; }
  const SplineBasis& spline() const { return spline_; }
  const Eigen::VectorXd& bin_probabilities() const { return pi_; }
  double lower() const { return grid_.a0; }
  double upper() const { return grid_.aJ; }

  //! f(x) = exp(eta(x)) / sum_i exp(eta(u_i)) delta; zero outside the support.
  double density_at(double x) const
  {
    if (x < grid_.a0 || x > grid_.aJ)
      return 0.0;
    return std::exp(spline_.linear_predictor(x, theta_) - eta_max_) / norm_;
  }

  //! Distribution function. Points outside the support give 0 or 1 and set
  //! *clamped when provided.
  double cdf_at(double x, bool* clamped = nullptr) const
  {
    if (clamped)
      *clamped = x < grid_.a0 || x > grid_.aJ;
    if (x <= grid_.a0)
      return 0.0;
    if (x >= grid_.aJ)
      return 1.0;
    const int i = bin_of(x);
    return cum_[i] + (x - grid_.edges[i]) / grid_.delta * pi_[i];
  }

  //! Slope of the distribution function in the bin containing x.
  double bin_density(double x) const { return pi_[bin_of(x)] / grid_.delta; }

  //! Quantile: start at the largest edge with F(b_i) <= p, then Newton steps
  //! on F, with bisection between bracketing edges as a fallback.
  double quantile(double p) const
  {
    detail::require(p > 0.0 && p < 1.0, "probability must lie in (0, 1)");
    const auto it = std::upper_bound(cum_.data(), cum_.data() + cum_.size(), p);
    int i = static_cast<int>(it - cum_.data()) - 1;
    i = std::clamp(i, 0, grid_.I - 1);
    double lo = grid_.edges[i];
    double hi = grid_.edges[i + 1];
    double x = lo;
    for (int iter = 0; iter < 100; ++iter) {
      const double r = p - cdf_at(x);
      if (std::abs(r) < 1e-14)
        break;
      (r > 0.0 ? lo : hi) = x;
      const double f = bin_density(x);
      double next = f > 1e-300 ? x + r / f : lo;
      if (!(next > lo && next < hi))
        next = 0.5 * (lo + hi);
      if (next == x)
        break;
      x = next;
    }
    return std::clamp(x, grid_.a0, grid_.aJ);
  }

  //! dQ(p)/dtheta_k = -(1/f(Q)) [ int_{a0}^{Q} b_k f - p int b_k f ], with
  //! f(Q) the slope of F at Q.
  Eigen::VectorXd quantile_gradient(double p) const
  {
    const double q = quantile(p);
    const int i = bin_of(q);
    const double frac = (q - grid_.edges[i]) / grid_.delta;
    Eigen::VectorXd partial =
      basis_B_.topRows(i).transpose() * pi_.head(i) +
      frac * pi_[i] * basis_B_.row(i).transpose();
    const double F = cum_[i] + frac * pi_[i];
    return -(partial - F * bbar_) / (pi_[i] / grid_.delta);
  }

private:
  int bin_of(double x) const
  {
    const int i = static_cast<int>(std::floor((x - grid_.a0) / grid_.delta));
    return std::clamp(i, 0, grid_.I - 1);
  }

  SplineBasis spline_;
  FineGrid grid_;
  Eigen::MatrixXd basis_B_;
  Eigen::VectorXd theta_;
  int pivot_{};
  double eta_max_{};
  double norm_{};
  Eigen::VectorXd pi_;
  Eigen::VectorXd cum_;
  Eigen::VectorXd bbar_;
};

//! Observed information with the identification pivot removed.
struct InformationMatrix
{
  Eigen::MatrixXd full;
  Eigen::MatrixXd reduced;    ///< row and column `pivot` deleted
  Eigen::MatrixXd covariance; ///< inverse of `reduced`
  int pivot{};
  bool ridged{}; ///< reduced matrix needed a ridge to become positive definite
};

inline Eigen::MatrixXd drop_index(const Eigen::MatrixXd& A, int k)
{
  const Eigen::Index n = A.rows();
  Eigen::MatrixXd out(n - 1, n - 1);
  for (Eigen::Index a = 0, ra = 0; a < n; ++a) {
    if (a == k)
      continue;
    for (Eigen::Index b = 0, rb = 0; b < n; ++b) {
      if (b == k)
        continue;
      out(ra, rb++) = A(a, b);
    }
    ++ra;
  }
  return out;
}

inline Eigen::VectorXd drop_index(const Eigen::VectorXd& v, int k)
{
  Eigen::VectorXd out(v.size() - 1);
  out << v.head(k), v.tail(v.size() - k - 1);
  return out;
}

inline InformationMatrix reduce_information(const Eigen::MatrixXd& full, int pivot)
{
  InformationMatrix out;
  out.full = 0.5 * (full + full.transpose());
  out.pivot = pivot;
  out.reduced = drop_index(out.full, pivot);
  const Eigen::Index m = out.reduced.rows();
  Eigen::LLT<Eigen::MatrixXd> llt(out.reduced);
  if (llt.info() != Eigen::Success) {
    out.ridged = true;
    out.reduced.diagonal().array() += 1e-8 * out.reduced.diagonal().mean();
    llt.compute(out.reduced);
    if (llt.info() != Eigen::Success)
      detail::fail(ErrorCode::numerical_degeneracy,
                   "information matrix is not positive definite");
  }
  out.covariance = llt.solve(Eigen::MatrixXd::Identity(m, m));
  return out;
}

//! Information of a fit at its reported coefficients.
inline InformationMatrix information_matrix(const FitResult& fit)
{
  return reduce_information(fit.information, fit.pivot);
}

enum class BackTransform
{
  none,
  exp10
};

struct QuantileEstimate
{
  double p{};
  double alpha{};
  double q_hat{};
  double s_q{}; ///< on the model scale
  double ci_lower{};
  double ci_upper{};
  bool back_transformed{};
  bool ridged{};
};

inline QuantileEstimate quantile_credible_interval(double p,
                                                   double alpha,
                                                   const FittedDensity& fd,
                                                   const InformationMatrix& info)
{
  detail::require(alpha > 0.0 && alpha <= 1.0, "alpha must lie in (0, 1]");
  detail::require(info.pivot == fd.pivot(),
                  "information matrix and density use different pivots");
  QuantileEstimate e;
  e.p = p;
  e.alpha = alpha;
  e.q_hat = fd.quantile(p);
  const Eigen::VectorXd g = drop_index(fd.quantile_gradient(p), info.pivot);
  e.s_q = std::sqrt(std::max(0.0, g.dot(info.covariance * g)));
  const double z =
    alpha >= 1.0 ? 0.0
                 : boost::math::quantile(boost::math::normal(), 1.0 - alpha / 2.0);
  e.ci_lower = e.q_hat - z * e.s_q;
  e.ci_upper = e.q_hat + z * e.s_q;
  e.ridged = info.ridged;
  return e;
}

inline QuantileEstimate apply_back_transform(QuantileEstimate e, BackTransform bt)
{
  if (bt == BackTransform::exp10) {
    e.q_hat = std::pow(10.0, e.q_hat);
    e.ci_lower = std::pow(10.0, e.ci_lower);
    e.ci_upper = std::pow(10.0, e.ci_upper);
    e.back_transformed = true;
  }
  return e;
}

//! VaR_eps = Q(1 - eps).
inline QuantileEstimate value_at_risk(double epsilon,
                                      const FittedDensity& fd,
                                      const InformationMatrix& info,
                                      double alpha = 0.05,
                                      BackTransform bt = BackTransform::none)
{
  detail::require(epsilon > 0.0 && epsilon < 1.0, "epsilon must lie in (0, 1)");
  return apply_back_transform(
    quantile_credible_interval(1.0 - epsilon, alpha, fd, info), bt);
}

} // namespace tabdens
