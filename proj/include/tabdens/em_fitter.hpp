#pragma once

//! Penalized maximum likelihood for the spline coefficients from grouped
//! summaries, by EM with Newton-Raphson M-steps.
//!
//! The complete-data objective for latent bin counts k is
//!
//!   sum_i k_i log pi_i - lambda/2 |D theta|^2
//!     - 1/2 sum_j (m_j - mu_j)' S_j^{-1} (m_j - mu_j)
//!
//! where S_j is the moment covariance frozen at the start of the M-step and
//! mu_j holds the first R' = min(R, 4) class moments (R' = 0 for frequency
//! data). The observed objective replaces the first term by the multinomial
//! class log-likelihood sum_j n_j log gamma_j and uses S_j(theta) together
//! with its log-determinant.

#include "dataset.hpp"
#include "density_model.hpp"
#include "error.hpp"
#include "grid_basis.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace tabdens {

struct FitConfig
{
  int K{ 25 };
  int target_bins{ 300 };
  int penalty_order{ 3 };
  double ridge{ 1e-6 };
  std::optional<double> fixed_lambda{}; ///< empty selects lambda by edf
  double lambda_init{ 1.0 };
  int em_max_iters{ 2000 };
  int newton_max_iters{ 50 };
  double theta_tol{ 1e-6 };
  double loglik_tol{ 1e-8 };
  int max_halvings{ 20 };
  double lambda_min{ 1e-6 };
  double lambda_max{ 1e12 };
  double edf_excess_min{ 0.1 };

  void validate() const
  {
    using detail::require;
    require(K >= 4, "number of B-splines must be at least 4");
    require(penalty_order >= 1 && penalty_order <= 3,
            "penalty order must be 1, 2 or 3");
    require(K >= penalty_order + 2, "too few B-splines for the penalty order");
    require(ridge > 0.0, "ridge must be positive");
    require(!fixed_lambda || *fixed_lambda > 0.0, "lambda must be positive");
    require(lambda_init > 0.0, "initial lambda must be positive");
    require(em_max_iters >= 1 && newton_max_iters >= 1,
            "iteration limits must be positive");
    require(theta_tol > 0.0 && loglik_tol > 0.0, "tolerances must be positive");
  }
};

//! Everything that stays fixed during a fit.
struct FitProblem
{
  GroupedDataset data;
  FineGrid grid;
  GridBasis basis;
  PenaltyMatrix penalty;

  int order() const { return data.order(); }
  //! Length of the moment vector entering the likelihood.
  int moment_dim() const { return std::min(order(), 4); }
  int K() const { return basis.K(); }
};

inline FitProblem make_problem(const GroupedDataset& data, const FitConfig& cfg)
{
  validate(data);
  cfg.validate();
  FitProblem p;
  p.data = data;
  p.grid = build_fine_grid(data.class_cuts, cfg.target_bins);
  p.basis = build_basis(p.grid, cfg.K);
  p.penalty = build_penalty(cfg.K, cfg.penalty_order);
  return p;
}

//! Inverse (and log-determinant) of a class moment covariance.
struct ScaleInverse
{
  Eigen::MatrixXd inverse;
  double log_det{};
};

//! Invert a moment covariance block. Near-singular blocks (condition number
//! above 1e12) receive diagonal jitter of 1e-10 trace / dim first.
inline ScaleInverse invert_moment_covariance(const Eigen::MatrixXd& S, int j)
{
  Eigen::MatrixXd A = 0.5 * (S + S.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
  double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().maxCoeff();
  if (!(lo > 0.0) || hi / lo > 1e12) {
    const double jitter = 1e-10 * A.trace() / static_cast<double>(A.rows());
    A.diagonal().array() += jitter;
    es.compute(A);
    lo = es.eigenvalues().minCoeff();
  }
  if (!(lo > 0.0) || !std::isfinite(es.eigenvalues().sum()))
    detail::fail(ErrorCode::numerical_degeneracy,
                 "moment covariance of class " + std::to_string(j + 1) +
                   " cannot be inverted");
  ScaleInverse out;
  out.inverse = es.eigenvectors() *
                es.eigenvalues().cwiseInverse().asDiagonal() *
                es.eigenvectors().transpose();
  out.log_det = es.eigenvalues().array().log().sum();
  return out;
}

//! Moment covariances held fixed during one M-step. Entry j is empty for
//! classes without moment information.
struct FrozenScales
{
  std::vector<ScaleInverse> classes;
};

//! Model quantities at a given theta.
struct ModelState
{
  Eigen::VectorXd pi;
  ClassMoments moments;
  std::vector<MomentJacobian> jacobians; ///< empty for R = 0
};

inline ModelState evaluate_model(const Eigen::VectorXd& theta,
                                 const FitProblem& p,
                                 bool with_jacobians)
{
  ModelState s;
  s.pi = softmax_probabilities(theta, p.basis);
  if (p.order() == 0) {
    s.moments.gamma = class_probabilities(s.pi, p.grid);
    return s;
  }
  s.moments = class_central_moments(s.pi, p.grid, 8);
  if (with_jacobians)
    s.jacobians = moment_derivatives(s.pi, p.basis, p.grid, s.moments);
  return s;
}

inline Eigen::MatrixXd moment_covariance_block(const ClassMoments& m,
                                               int j,
                                               double n_j,
                                               int dim)
{
  return moment_covariance(m, j, n_j).topLeftCorner(dim, dim);
}

inline FrozenScales freeze_scales(const ModelState& s, const FitProblem& p)
{
  FrozenScales f;
  const int J = p.grid.num_classes();
  f.classes.resize(J);
  if (p.order() == 0)
    return f;
  for (int j = 0; j < J; ++j) {
    if (!p.data.has_moments(j))
      continue;
    f.classes[j] = invert_moment_covariance(
      moment_covariance_block(s.moments, j, p.data.freqs[j], p.moment_dim()), j);
  }
  return f;
}

inline FrozenScales freeze_scales(const Eigen::VectorXd& theta, const FitProblem& p)
{
  return freeze_scales(evaluate_model(theta, p, false), p);
}

inline Eigen::VectorXd moment_residual(const ModelState& s,
                                       const FitProblem& p,
                                       int j)
{
  const int dim = p.moment_dim();
  return p.data.observed.m.row(j).head(dim).transpose() -
         s.moments.mu.row(j).head(dim).transpose();
}

//! E-step: k_i = n_{j(i)} pi_i / gamma_{j(i)}.
inline Eigen::VectorXd e_step(const Eigen::VectorXd& pi,
                              const GroupedDataset& data,
                              const FineGrid& grid)
{
  Eigen::VectorXd k = Eigen::VectorXd::Zero(grid.I);
  for (int j = 0; j < grid.num_classes(); ++j) {
    const double n_j = data.freqs[j];
    if (n_j == 0.0)
      continue;
    const int b0 = grid.class_begin[j];
    const int nb = grid.bins_in_class(j);
    const double g = pi.segment(b0, nb).sum();
    if (!(g >= 1e-300))
      detail::fail(ErrorCode::numerical_degeneracy,
                   "class " + std::to_string(j + 1) +
                     " has observations but zero model probability");
    k.segment(b0, nb) = pi.segment(b0, nb) * (n_j / g);
  }
  return k;
}

inline Eigen::VectorXd e_step(const Eigen::VectorXd& theta,
                              const GroupedDataset& data,
                              const FineGrid& grid,
                              const GridBasis& basis)
{
  return e_step(softmax_probabilities(theta, basis), data, grid);
}

//! Complete penalized log-likelihood with frozen moment covariances.
inline double complete_objective(const Eigen::VectorXd& theta,
                                 const Eigen::VectorXd& k,
                                 const FitProblem& p,
                                 double lambda,
                                 const FrozenScales& frozen)
{
  const ModelState s = evaluate_model(theta, p, false);
  double ll = 0.0;
  for (int i = 0; i < p.grid.I; ++i)
    if (k[i] > 0.0)
      ll += k[i] * std::log(s.pi[i]);
  ll -= 0.5 * lambda * theta.dot(p.penalty.P * theta);
  for (int j = 0; j < p.grid.num_classes(); ++j) {
    if (!p.data.has_moments(j))
      continue;
    const Eigen::VectorXd res = moment_residual(s, p, j);
    ll -= 0.5 * res.dot(frozen.classes[j].inverse * res);
  }
  return ll;
}

//! Observed penalized log-likelihood, moment covariances evaluated at theta.
inline double observed_objective(const Eigen::VectorXd& theta,
                                 const FitProblem& p,
                                 double lambda)
{
  const ModelState s = evaluate_model(theta, p, false);
  const Eigen::VectorXd& gamma = s.moments.gamma;
  double ll = 0.0;
  for (int j = 0; j < p.grid.num_classes(); ++j)
    if (p.data.freqs[j] > 0.0)
      ll += p.data.freqs[j] * std::log(gamma[j]);
  ll -= 0.5 * lambda * theta.dot(p.penalty.P * theta);
  if (p.order() == 0)
    return ll;
  const FrozenScales here = freeze_scales(s, p);
  for (int j = 0; j < p.grid.num_classes(); ++j) {
    if (!p.data.has_moments(j))
      continue;
    const Eigen::VectorXd res = moment_residual(s, p, j);
    ll -= 0.5 * (here.classes[j].log_det +
                 res.dot(here.classes[j].inverse * res));
  }
  return ll;
}

struct GradientHessian
{
  Eigen::VectorXd gradient;
  Eigen::MatrixXd neg_hessian;
};

//! n (B' diag(pi) B - (B' pi)(B' pi)')
inline Eigen::MatrixXd multinomial_information(const Eigen::MatrixXd& B,
                                               const Eigen::VectorXd& pi,
                                               double n)
{
  const Eigen::VectorXd bbar = B.transpose() * pi;
  Eigen::MatrixXd H = B.transpose() * pi.asDiagonal() * B;
  H.noalias() -= bbar * bbar.transpose();
  return n * H;
}

//! Gradient and (Gauss-Newton) negative Hessian of the complete penalized
//! log-likelihood at theta, moment covariances held at `frozen`.
inline GradientHessian mstep_gradient_hessian(const Eigen::VectorXd& theta,
                                              const Eigen::VectorXd& k,
                                              const FitProblem& p,
                                              double lambda,
                                              const FrozenScales& frozen)
{
  const ModelState s = evaluate_model(theta, p, true);
  const double n = k.sum();
  GradientHessian gh;
  gh.gradient = p.basis.B.transpose() * (k - n * s.pi) -
                lambda * (p.penalty.P * theta);
  gh.neg_hessian = multinomial_information(p.basis.B, s.pi, n) +
                   lambda * p.penalty.P;
  const int dim = p.moment_dim();
  for (int j = 0; j < p.grid.num_classes(); ++j) {
    if (!p.data.has_moments(j))
      continue;
    const auto Jm = s.jacobians[j].topRows(dim);
    const Eigen::MatrixXd& Sinv = frozen.classes[j].inverse;
    gh.gradient += Jm.transpose() * (Sinv * moment_residual(s, p, j));
    gh.neg_hessian += Jm.transpose() * Sinv * Jm;
  }
  gh.neg_hessian = 0.5 * (gh.neg_hessian + gh.neg_hessian.transpose()).eval();
  return gh;
}

struct MStepResult
{
  Eigen::VectorXd theta;
  int iterations{};
  bool converged{};
  std::vector<double> objective_trace; ///< complete objective per accepted step
};

//! Newton-Raphson maximization of the complete objective with ridge
//! stabilization and step halving.
inline MStepResult mstep(const Eigen::VectorXd& theta0,
                         const Eigen::VectorXd& k,
                         const FitProblem& p,
                         double lambda,
                         const FrozenScales& frozen,
                         const FitConfig& cfg)
{
  MStepResult res;
  res.theta = theta0;
  double obj = complete_objective(res.theta, k, p, lambda, frozen);
  res.objective_trace.push_back(obj);
  for (int it = 0; it < cfg.newton_max_iters; ++it) {
    const GradientHessian gh = mstep_gradient_hessian(res.theta, k, p, lambda, frozen);
    Eigen::MatrixXd A = gh.neg_hessian;
    A.diagonal().array() += cfg.ridge;
    const Eigen::VectorXd step = A.ldlt().solve(gh.gradient);
    double scale = 1.0;
    Eigen::VectorXd candidate = res.theta + step;
    double cand_obj = complete_objective(candidate, k, p, lambda, frozen);
    int halvings = 0;
    while (!(cand_obj >= obj) && halvings < cfg.max_halvings) {
      scale *= 0.5;
      candidate = res.theta + scale * step;
      cand_obj = complete_objective(candidate, k, p, lambda, frozen);
      ++halvings;
    }
    res.iterations = it + 1;
    if (!std::isfinite(cand_obj) && !std::isfinite(obj))
      detail::fail(ErrorCode::optimizer_failure,
                   "Newton step produced a non-finite objective after " +
                     std::to_string(halvings) + " halvings");
    if (!(cand_obj >= obj)) {
      // no ascent direction left at working precision
      res.converged = true;
      break;
    }
    const double change = (scale * step).norm() / (1.0 + res.theta.norm());
    res.theta = candidate;
    obj = cand_obj;
    res.objective_trace.push_back(obj);
    if (change < cfg.theta_tol) {
      res.converged = true;
      break;
    }
  }
  return res;
}

struct LambdaUpdate
{
  double lambda{};
  double edf{};
  bool flat_fit{}; ///< |D theta|^2 vanished, lambda left unchanged
};

//! edf = tr((-H + eps I)^{-1} (-H - lambda P)).
inline double effective_dimension(const Eigen::MatrixXd& neg_hessian,
                                  const Eigen::MatrixXd& P,
                                  double lambda,
                                  double ridge)
{
  Eigen::MatrixXd A = neg_hessian;
  A.diagonal().array() += ridge;
  const Eigen::MatrixXd rhs = neg_hessian - lambda * P;
  return A.ldlt().solve(rhs).trace();
}

inline LambdaUpdate update_lambda(const Eigen::VectorXd& theta,
                                  const Eigen::MatrixXd& neg_hessian,
                                  const PenaltyMatrix& penalty,
                                  double lambda,
                                  const FitConfig& cfg)
{
  LambdaUpdate out;
  out.edf = effective_dimension(neg_hessian, penalty.P, lambda, cfg.ridge);
  const double quad = (penalty.D * theta).squaredNorm();
  if (quad < 1e-14) {
    out.lambda = lambda;
    out.flat_fit = true;
    return out;
  }
  const double excess = std::max(out.edf - penalty.r, cfg.edf_excess_min);
  out.lambda = std::clamp(excess / quad, cfg.lambda_min, cfg.lambda_max);
  return out;
}

//! Negative Hessian of the observed penalized log-likelihood from class
//! frequencies, plus the moment information with covariances at theta:
//!
//!   B'WB + lambda P - sum_j n_j Cov_j(b) + sum_j J_j' S_j^{-1} J_j
//!
//! where Cov_j(b) is the covariance of the basis functions under the
//! class-conditional latent distribution (the information lost by tabulation).
inline Eigen::MatrixXd observed_information(const Eigen::VectorXd& theta,
                                            const FitProblem& p,
                                            double lambda)
{
  const ModelState s = evaluate_model(theta, p, true);
  const double n = p.data.n();
  Eigen::MatrixXd info = multinomial_information(p.basis.B, s.pi, n) +
                         lambda * p.penalty.P;
  for (int j = 0; j < p.grid.num_classes(); ++j) {
    const double n_j = p.data.freqs[j];
    if (n_j == 0.0)
      continue;
    const int b0 = p.grid.class_begin[j];
    const int nb = p.grid.bins_in_class(j);
    const Eigen::VectorXd w = s.pi.segment(b0, nb) / s.pi.segment(b0, nb).sum();
    const auto Bj = p.basis.B.middleRows(b0, nb);
    info -= multinomial_information(Bj, w, n_j);
  }
  if (p.order() > 0) {
    const FrozenScales here = freeze_scales(s, p);
    const int dim = p.moment_dim();
    for (int j = 0; j < p.grid.num_classes(); ++j) {
      if (!p.data.has_moments(j))
        continue;
      const auto Jm = s.jacobians[j].topRows(dim);
      info += Jm.transpose() * here.classes[j].inverse * Jm;
    }
  }
  return 0.5 * (info + info.transpose());
}

struct FitResult
{
  FitConfig config;
  FitProblem problem;
  Eigen::VectorXd theta_hat; ///< max_k theta_k = 0
  int pivot{};
  double lambda_hat{};
  double edf{};
  Eigen::VectorXd latent_freqs;
  Eigen::VectorXd pi_hat;
  ClassMoments moments; ///< fitted class moments to order 8
  Eigen::MatrixXd information;
  std::vector<double> loglik_trace; ///< observed objective after each EM sweep
  std::vector<double> lambda_trace;
  std::vector<bool> lambda_flat;
  bool converged{};
  int em_iterations{};
  int newton_iterations{};

  const FineGrid& grid() const { return problem.grid; }
  const GridBasis& basis() const { return problem.basis; }
  const GroupedDataset& data() const { return problem.data; }
};

inline FitResult fit(const GroupedDataset& data, const FitConfig& cfg = {})
{
  FitResult out;
  out.config = cfg;
  out.problem = make_problem(data, cfg);
  const FitProblem& p = out.problem;

  Eigen::VectorXd theta = Eigen::VectorXd::Zero(p.K());
  double lambda = cfg.fixed_lambda.value_or(cfg.lambda_init);
  const bool auto_lambda = !cfg.fixed_lambda.has_value();

  out.loglik_trace.push_back(observed_objective(theta, p, lambda));
  for (int it = 1; it <= cfg.em_max_iters; ++it) {
    const double before = observed_objective(theta, p, lambda);
    const ModelState s = evaluate_model(theta, p, false);
    const Eigen::VectorXd k = e_step(s.pi, p.data, p.grid);
    const FrozenScales frozen = freeze_scales(s, p);
    const MStepResult m = mstep(theta, k, p, lambda, frozen, cfg);
    out.newton_iterations += m.iterations;
    const double change = (m.theta - theta).norm() / (1.0 + m.theta.norm());
    theta = m.theta;
    const double after = observed_objective(theta, p, lambda);
    out.loglik_trace.push_back(after);
    out.lambda_trace.push_back(lambda);
    out.em_iterations = it;

    if (auto_lambda) {
      const Eigen::MatrixXd H =
        mstep_gradient_hessian(theta, e_step(softmax_probabilities(theta, p.basis),
                                             p.data, p.grid),
                               p, lambda, freeze_scales(theta, p))
          .neg_hessian;
      const LambdaUpdate upd = update_lambda(theta, H, p.penalty, lambda, cfg);
      out.lambda_flat.push_back(upd.flat_fit);
      lambda = upd.lambda;
    }
    if (std::abs(after - before) < cfg.loglik_tol && change < cfg.theta_tol) {
      out.converged = true;
      break;
    }
  }

  const IdentifiedTheta id = normalize_identification(theta);
  out.theta_hat = id.theta;
  out.pivot = id.pivot;
  out.lambda_hat = lambda;
  const ModelState s = evaluate_model(out.theta_hat, p, false);
  out.pi_hat = s.pi;
  out.latent_freqs = e_step(s.pi, p.data, p.grid);
  out.moments = class_central_moments(s.pi, p.grid, 8);
  const GradientHessian gh = mstep_gradient_hessian(
    out.theta_hat, out.latent_freqs, p, lambda, freeze_scales(s, p));
  out.edf = effective_dimension(gh.neg_hessian, p.penalty.P, lambda, cfg.ridge);
  out.information = observed_information(out.theta_hat, p, lambda);
  return out;
}

} // namespace tabdens
