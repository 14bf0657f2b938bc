#pragma once

#include "error.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <string>
#include <vector>

namespace tabdens {

//! Equal-width latent bins refining the reporting classes.
//!
//! Bin i covers (edges[i], edges[i+1]] with midpoint midpoints[i]. Class j
//! covers bins [class_begin[j], class_begin[j+1]). Interior class cuts are
//! snapped to the nearest bin edge; `class_cuts` holds the snapped values and
//! `requested_cuts` the caller's originals.
struct FineGrid
{
  double a0{};
  double aJ{};
  int I{};
  double delta{};
  Eigen::VectorXd edges;
  Eigen::VectorXd midpoints;
  std::vector<double> class_cuts;
  std::vector<double> requested_cuts;
  std::vector<int> class_begin;
  std::vector<int> class_of_bin;

  int num_classes() const { return static_cast<int>(class_cuts.size()) - 1; }
  int bins_in_class(int j) const { return class_begin[j + 1] - class_begin[j]; }

  //! Dense J x I binary matrix with c(j, i) = 1 iff bin i lies in class j.
  Eigen::MatrixXd composition() const
  {
    Eigen::MatrixXd C = Eigen::MatrixXd::Zero(num_classes(), I);
    for (int i = 0; i < I; ++i)
      C(class_of_bin[i], i) = 1.0;
    return C;
  }
};

inline FineGrid build_fine_grid(std::span<const double> cuts, int target_bins)
{
  using detail::require;
  require(cuts.size() >= 2, "at least two class cut points are required");
  for (size_t j = 0; j < cuts.size(); ++j)
    require(std::isfinite(cuts[j]), "class cut points must be finite");
  for (size_t j = 1; j < cuts.size(); ++j)
    require(cuts[j] > cuts[j - 1],
            "class cut points must be strictly increasing (cut " +
              std::to_string(j) + ")");
  const int J = static_cast<int>(cuts.size()) - 1;
  require(target_bins >= 10 * J,
          "number of fine bins must be at least 10 per class");

  FineGrid g;
  g.a0 = cuts.front();
  g.aJ = cuts.back();
  g.I = target_bins;
  g.delta = (g.aJ - g.a0) / g.I;
  g.edges.resize(g.I + 1);
  for (int i = 0; i <= g.I; ++i)
    g.edges[i] = g.a0 + (g.aJ - g.a0) * (static_cast<double>(i) / g.I);
  g.edges[g.I] = g.aJ;

  g.requested_cuts.assign(cuts.begin(), cuts.end());
  g.class_begin.assign(J + 1, 0);
  g.class_begin[J] = g.I;
  for (int j = 1; j < J; ++j) {
    const double pos = (cuts[j] - g.a0) / g.delta;
    const int e = static_cast<int>(std::lround(pos));
    // a cut commensurate with the grid keeps its exact value
    if (std::abs(pos - e) < 1e-9)
      g.edges[e] = cuts[j];
    g.class_begin[j] = e;
  }
  for (int j = 1; j <= J; ++j) {
    if (g.class_begin[j] <= g.class_begin[j - 1])
      detail::fail(ErrorCode::grid_too_coarse,
                   "grid too coarse: class cuts " + std::to_string(j - 1) +
                     " and " + std::to_string(j) +
                     " snap to the same bin edge");
  }
  g.class_cuts.resize(J + 1);
  for (int j = 0; j <= J; ++j)
    g.class_cuts[j] = g.edges[g.class_begin[j]];

  g.midpoints.resize(g.I);
  for (int i = 0; i < g.I; ++i)
    g.midpoints[i] = 0.5 * (g.edges[i] + g.edges[i + 1]);
  g.class_of_bin.resize(g.I);
  for (int j = 0; j < J; ++j)
    for (int i = g.class_begin[j]; i < g.class_begin[j + 1]; ++i)
      g.class_of_bin[i] = j;
  return g;
}

//! Placement of the knots outside the interior of (xl, xr).
enum class KnotLayout
{
  clamped, ///< boundary knots repeated degree + 1 times
  padded   ///< equidistant knots continued three spans beyond each end
};

//! Cubic B-splines with equidistant knots over (xl, xr).
//!
//! Both layouts use K - 3 equal knot spans on (xl, xr) and give K functions
//! forming a partition of unity there. The clamped layout repeats each
//! boundary knot four times so that b_1(xl) = b_K(xr) = 1.
class SplineBasis
{
public:
  static constexpr int degree = 3;

  SplineBasis() = default;

  SplineBasis(double xl, double xr, int K, KnotLayout layout = KnotLayout::clamped)
    : xl_(xl)
    , xr_(xr)
    , K_(K)
    , layout_(layout)
  {
    detail::require(K >= 4, "a cubic basis needs at least 4 B-splines");
    detail::require(xr > xl, "basis range must be non-empty");
    const int spans = K - degree;
    dx_ = (xr - xl) / spans;
    knots_.resize(K + degree + 1);
    for (int m = 0; m < static_cast<int>(knots_.size()); ++m) {
      int step = m - degree;
      if (layout == KnotLayout::clamped)
        step = std::clamp(step, 0, spans);
      knots_[m] = step == spans ? xr : xl + step * dx_;
    }
  }

  int size() const { return K_; }
  double lower() const { return xl_; }
  double upper() const { return xr_; }
  double knot_spacing() const { return dx_; }
  KnotLayout layout() const { return layout_; }
  const std::vector<double>& knots() const { return knots_; }

  //! Index of the first of the (at most) four splines that are nonzero at x.
  //! Points outside [xl, xr] use the nearest boundary span.
  int first_nonzero(double x) const
  {
    int s = static_cast<int>(std::floor((x - xl_) / dx_));
    return std::clamp(s, 0, K_ - 1 - degree);
  }

  //! Values of b_s(x), ..., b_{s+3}(x) with s = first_nonzero(x), computed
  //! with the Cox-de Boor triangular scheme.
  std::array<double, 4> nonzero(double x) const
  {
    const int s = first_nonzero(x);
    // knot span [t_mu, t_mu+1) with mu = s + degree
    const int mu = s + degree;
    std::array<double, 4> N{ 1.0, 0.0, 0.0, 0.0 };
    std::array<double, 4> left{}, right{};
    for (int d = 1; d <= degree; ++d) {
      left[d] = x - knots_[mu + 1 - d];
      right[d] = knots_[mu + d] - x;
      double saved = 0.0;
      for (int r = 0; r < d; ++r) {
        const double tmp = N[r] / (right[r + 1] + left[d - r]);
        N[r] = saved + right[r + 1] * tmp;
        saved = left[d - r] * tmp;
      }
      N[d] = saved;
    }
    return N;
  }

  Eigen::RowVectorXd evaluate(double x) const
  {
    Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(K_);
    const int s = first_nonzero(x);
    const auto N = nonzero(x);
    for (int r = 0; r <= degree; ++r)
      row[s + r] = N[r];
    return row;
  }

  Eigen::MatrixXd evaluate(const Eigen::VectorXd& x) const
  {
    Eigen::MatrixXd B(x.size(), K_);
    for (Eigen::Index i = 0; i < x.size(); ++i)
      B.row(i) = evaluate(x[i]);
    return B;
  }

  //! eta(x) = sum_k b_k(x) theta_k
  double linear_predictor(double x, const Eigen::VectorXd& theta) const
  {
    const int s = first_nonzero(x);
    const auto N = nonzero(x);
    double eta = 0.0;
    for (int r = 0; r <= degree; ++r)
      eta += N[r] * theta[s + r];
    return eta;
  }

private:
  double xl_{};
  double xr_{};
  double dx_{};
  int K_{};
  KnotLayout layout_{ KnotLayout::clamped };
  std::vector<double> knots_;
};

//! Basis evaluated at the bin midpoints of a grid.
struct GridBasis
{
  SplineBasis spline;
  Eigen::MatrixXd B; ///< I x K, B(i, k) = b_k(u_i)

  int K() const { return spline.size(); }
};

inline GridBasis build_basis(const FineGrid& grid,
                             int K,
                             KnotLayout layout = KnotLayout::clamped)
{
  detail::require(K >= 4, "number of B-splines must be at least 4");
  detail::require(K <= grid.I,
                  "number of B-splines cannot exceed the number of fine bins");
  GridBasis out{ SplineBasis(grid.a0, grid.aJ, K, layout), {} };
  out.B = out.spline.evaluate(grid.midpoints);
  return out;
}

struct PenaltyMatrix
{
  int r{};
  Eigen::MatrixXd D; ///< (K - r) x K difference operator
  Eigen::MatrixXd P; ///< D^T D
};

//! r-th order difference penalty; D has +1 on the superdiagonal for r = 1.
inline PenaltyMatrix build_penalty(int K, int r)
{
  detail::require(r >= 1 && r <= 3, "penalty order must be 1, 2 or 3");
  detail::require(r < K, "penalty order must be smaller than the basis size");
  Eigen::MatrixXd D = Eigen::MatrixXd::Identity(K, K);
  for (int d = 0; d < r; ++d) {
    const Eigen::Index rows = D.rows() - 1;
    D = (D.bottomRows(rows) - D.topRows(rows)).eval();
  }
  PenaltyMatrix pen;
  pen.r = r;
  pen.P = D.transpose() * D;
  pen.D = std::move(D);
  return pen;
}

} // namespace tabdens
