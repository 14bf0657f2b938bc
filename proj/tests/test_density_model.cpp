#include "tabdens/density_model.hpp"

#include <boost/random/mersenne_twister.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_int_distribution.hpp>
#include <catch_amalgamated.hpp>

#include <array>
#include <vector>

using namespace tabdens;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

// Equal-width grid on (cuts.front(), cuts.back()] regrouped into the given
// classes; lets tests use classes narrower than the builder allows.
FineGrid regrouped_grid(const std::vector<double>& cuts, int bins)
{
  FineGrid g = build_fine_grid(std::vector<double>{ cuts.front(), cuts.back() }, bins);
  const int J = static_cast<int>(cuts.size()) - 1;
  g.requested_cuts = cuts;
  g.class_begin.assign(J + 1, 0);
  g.class_begin[J] = g.I;
  for (int j = 1; j < J; ++j)
    g.class_begin[j] = static_cast<int>(std::lround((cuts[j] - g.a0) / g.delta));
  g.class_cuts.resize(J + 1);
  for (int j = 0; j <= J; ++j)
    g.class_cuts[j] = g.edges[g.class_begin[j]];
  for (int j = 0; j < J; ++j)
    for (int i = g.class_begin[j]; i < g.class_begin[j + 1]; ++i)
      g.class_of_bin[i] = j;
  return g;
}

FineGrid grid_of(std::vector<double> cuts, int bins)
{
  return build_fine_grid(cuts, bins);
}

ClassMoments standard_normal_moments()
{
  ClassMoments m;
  m.mu = MomentTable::Zero(1, 8);
  m.mu.row(0) << 0, 1, 0, 3, 0, 15, 0, 105;
  m.gamma = Eigen::VectorXd::Ones(1);
  return m;
}

} // namespace

TEST_CASE("softmax basics")
{
  const FineGrid g = grid_of({ 0.0, 1.0, 2.0 }, 40);
  const GridBasis b = build_basis(g, 10);
  const Eigen::VectorXd pi0 = softmax_probabilities(Eigen::VectorXd::Zero(10), b);
  CHECK((pi0.array() - 1.0 / 40).abs().maxCoeff() < 1e-15);

  const Eigen::VectorXd theta = Eigen::VectorXd::LinSpaced(10, -1.0, 2.0).array().sin();
  const Eigen::VectorXd shifted = theta.array() + 5.0;
  CHECK((softmax_probabilities(theta, b) - softmax_probabilities(shifted, b)).cwiseAbs().maxCoeff() < 1e-14);

  Eigen::VectorXd logs(6);
  for (int i = 0; i < 6; ++i)
    logs[i] = std::log(i + 1.0);
  const Eigen::VectorXd pi = softmax_probabilities(logs, Eigen::MatrixXd::Identity(6, 6));
  for (int i = 0; i < 6; ++i)
    CHECK_THAT(pi[i], WithinRel((i + 1) / 21.0, 1e-14));
}

TEST_CASE("class probabilities")
{
  const Eigen::VectorXd pi = Eigen::VectorXd::LinSpaced(5, 1.0, 5.0) / 15.0;
  CHECK(class_probabilities(pi, Eigen::MatrixXd::Identity(5, 5)).isApprox(pi));

  const FineGrid g = grid_of({ -1.0, 1.0, 3.5, 6.0 }, 350);
  const Eigen::VectorXd uniform = Eigen::VectorXd::Constant(350, 1.0 / 350);
  const Eigen::VectorXd gamma = class_probabilities(uniform, g);
  CHECK_THAT(gamma[0], WithinRel(100.0 / 350, 1e-13));
  CHECK_THAT(gamma[1], WithinRel(125.0 / 350, 1e-13));
  CHECK_THAT(gamma[2], WithinRel(125.0 / 350, 1e-13));
  CHECK(class_probabilities(uniform, g.composition()).isApprox(gamma));

  const FineGrid one = grid_of({ 0.0, 1.0 }, 10);
  CHECK_THAT(class_probabilities(Eigen::VectorXd::Constant(10, 0.1), one)[0], WithinAbs(1.0, 1e-15));
}

TEST_CASE("class central moments")
{
  SECTION("uniform within a class")
  {
    const FineGrid g = grid_of({ 0.0, 2.0, 5.0 }, 250); // 100 bins in the first class
    const Eigen::VectorXd pi = Eigen::VectorXd::Constant(250, 1.0 / 250);
    const ClassMoments m = class_central_moments(pi, g);
    CHECK_THAT(m.mean(0), WithinAbs(1.0, g.delta * g.delta));
    CHECK_THAT(m.central(0, 2), WithinRel(4.0 / 12, 0.01));
    CHECK_THAT(m.central(1, 2), WithinRel(9.0 / 12, 0.01));
  }
  SECTION("symmetric mass has no odd moments")
  {
    const FineGrid g = grid_of({ 0.0, 1.0 }, 50);
    Eigen::VectorXd pi(50);
    for (int i = 0; i < 50; ++i)
      pi[i] = 1.0 + std::pow(std::min(i, 49 - i), 2);
    pi /= pi.sum();
    const ClassMoments m = class_central_moments(pi, g);
    CHECK(std::abs(m.central(0, 3)) < 1e-12);
    CHECK(std::abs(m.central(0, 5)) < 1e-12);
  }
  SECTION("point mass")
  {
    const FineGrid g = grid_of({ 0.0, 1.0 }, 20);
    Eigen::VectorXd pi = Eigen::VectorXd::Zero(20);
    pi[7] = 1.0;
    const ClassMoments m = class_central_moments(pi, g);
    CHECK_THAT(m.mean(0), WithinAbs(g.midpoints[7], 1e-15));
    for (int r = 2; r <= 8; ++r)
      CHECK(m.central(0, r) == 0.0);
  }
  SECTION("empty class")
  {
    const FineGrid g = grid_of({ 0.0, 1.0, 2.0 }, 20);
    Eigen::VectorXd pi = Eigen::VectorXd::Zero(20);
    pi.head(10).setConstant(0.1);
    try {
      class_central_moments(pi, g);
      FAIL("expected an empty-class error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::empty_class);
    }
  }
}

TEST_CASE("large-sample moment covariance")
{
  const ClassMoments m = standard_normal_moments();
  const Eigen::Matrix4d S = asymptotic_moment_covariance(m, 0, 100);
  const Eigen::Vector4d diag(0.01, 0.02, 0.06, 0.96);
  CHECK((S.diagonal() - diag).cwiseAbs().maxCoeff() < 1e-15);
  CHECK_THAT(S(0, 0), WithinRel(m.central(0, 2) / 100, 1e-15));
  CHECK(S(0, 1) == 0.0);
  CHECK(S(0, 2) == 0.0);
  CHECK_THAT(S(1, 3), WithinAbs(0.12, 1e-15));
}

TEST_CASE("finite-sample moment covariance")
{
  const ClassMoments normal = standard_normal_moments();
  const Eigen::Matrix4d S = moment_covariance(normal, 0, 100);
  CHECK((S - S.transpose()).cwiseAbs().maxCoeff() == 0.0);
  CHECK_THAT(S(0, 0), WithinRel(0.01, 1e-14));
  CHECK(std::abs(S(0, 1)) < 1e-15);
  CHECK(std::abs(S(1, 2)) < 1e-15);

  // Var(m2) = (mu4 - mu2^2)/n - 2 (mu4 - 2 mu2^2)/n^2 + (mu4 - 3 mu2^2)/n^3
  ClassMoments expo;
  expo.mu = MomentTable::Zero(1, 8);
  expo.mu.row(0) << 1, 1, 2, 9, 44, 265, 1854, 14833;
  expo.gamma = Eigen::VectorXd::Ones(1);
  for (double n : { 5.0, 12.0, 50.0, 1000.0 }) {
    const double v = 8 / n - 2 * 7 / (n * n) + 6 / (n * n * n);
    CHECK_THAT(moment_covariance(expo, 0, n)(1, 1), WithinRel(v, 1e-12));
    CHECK_THAT(moment_covariance(expo, 0, n)(0, 0), WithinRel(1.0 / n, 1e-12));
  }

  // leading term is the large-sample matrix
  for (const ClassMoments* m : std::array<const ClassMoments*, 2>{ &normal, &expo }) {
    const double n = 1e7;
    const Eigen::Matrix4d gap = (moment_covariance(*m, 0, n) - asymptotic_moment_covariance(*m, 0, n)) * n;
    CHECK(gap.cwiseAbs().maxCoeff() < 1e-3 * asymptotic_moment_covariance(*m, 0, 1).cwiseAbs().maxCoeff());
  }

  // small classes fall back to the large-sample form
  CHECK(moment_covariance(normal, 0, 3).isApprox(asymptotic_moment_covariance(normal, 0, 3)));
}

TEST_CASE("moment covariance matches sample moments by simulation")
{
  const int reps = 20000, n = 100;
  boost::random::mt19937_64 rng(11);
  boost::random::normal_distribution<> z;
  std::vector<Eigen::Vector4d> draws(reps);
  std::vector<double> x(n);
  for (auto& m : draws) {
    double mean = 0.0;
    for (double& v : x) {
      v = z(rng);
      mean += v / n;
    }
    m.setZero();
    m[0] = mean;
    for (double v : x) {
      const double d = v - mean;
      m[1] += d * d / n;
      m[2] += d * d * d / n;
      m[3] += d * d * d * d / n;
    }
  }
  Eigen::Vector4d avg = Eigen::Vector4d::Zero();
  for (const auto& m : draws)
    avg += m / reps;
  const Eigen::Matrix4d S = moment_covariance(standard_normal_moments(), 0, n);
  for (int r = 0; r < 4; ++r)
    for (int s = r; s < 4; ++s) {
      double c = 0.0, c2 = 0.0;
      for (const auto& m : draws) {
        const double prod = (m[r] - avg[r]) * (m[s] - avg[s]);
        c += prod / reps;
        c2 += prod * prod / reps;
      }
      const double se = std::sqrt((c2 - c * c) / reps);
      INFO("entry " << r << "," << s << " simulated " << c << " exact " << S(r, s) << " se " << se);
      CHECK(std::abs(c - S(r, s)) < 3.0 * se);
    }
}

TEST_CASE("moment derivatives agree with finite differences")
{
  const FineGrid g = grid_of({ 0.0, 3.0, 4.3, 6.18 }, 309);
  const GridBasis b = build_basis(g, 25);
  boost::random::mt19937_64 rng(3);
  boost::random::normal_distribution<> z(0.0, 0.7);
  boost::random::uniform_int_distribution<> pick_j(0, 2), pick_r(1, 4), pick_k(0, 24);
  const double h = 1e-5;
  for (int t = 0; t < 50; ++t) {
    Eigen::VectorXd theta(25);
    for (auto& v : theta)
      v = z(rng);
    const int j = pick_j(rng), r = pick_r(rng), k = pick_k(rng);
    const Eigen::VectorXd pi = softmax_probabilities(theta, b);
    const ClassMoments m = class_central_moments(pi, g);
    const double analytic = moment_derivatives(pi, b, g, m)[j](r - 1, k);
    Eigen::VectorXd tp = theta, tm = theta;
    tp[k] += h;
    tm[k] -= h;
    const double fd = (class_central_moments(softmax_probabilities(tp, b), g).mu(j, r - 1) -
                       class_central_moments(softmax_probabilities(tm, b), g).mu(j, r - 1)) /
                      (2 * h);
    INFO("class " << j << " order " << r << " coefficient " << k);
    CHECK(std::abs(analytic - fd) <= 1e-6 * std::max(std::abs(fd), 1e-3));
  }
}

TEST_CASE("moment derivatives are shift invariant and vanish on single-bin classes")
{
  const FineGrid g = regrouped_grid({ 0.0, 0.1, 1.0 }, 10);
  const GridBasis b = build_basis(g, 6);
  const Eigen::VectorXd theta = Eigen::VectorXd::LinSpaced(6, -1.0, 1.0).array().cos();
  auto derivs = [&](const Eigen::VectorXd& th) {
    const Eigen::VectorXd pi = softmax_probabilities(th, b);
    return moment_derivatives(pi, b, g, class_central_moments(pi, g));
  };
  const auto d0 = derivs(theta);
  const auto d1 = derivs(theta.array() + 3.0);
  for (int j = 0; j < 2; ++j)
    CHECK((d0[j] - d1[j]).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(d0[0].bottomRows(3).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("summary statistics to central moments")
{
  const CentralMoments car = convert_summary_to_central_moments(2.462, 0.580, -1.793, 2.401);
  CHECK_THAT(car.m1, WithinAbs(2.462, 1e-15));
  CHECK_THAT(car.m2, WithinAbs(0.3364, 1e-12));
  CHECK_THAT(car.m3, WithinAbs(-0.349835816, 1e-12));
  CHECK_THAT(car.m4, WithinAbs(0.61120394896, 1e-12));

  const CentralMoments normal = convert_summary_to_central_moments(0, 1, 0, 0);
  CHECK(normal.m1 == 0.0);
  CHECK(normal.m2 == 1.0);
  CHECK(normal.m3 == 0.0);
  CHECK(normal.m4 == 3.0);

  const CentralMoments point = convert_summary_to_central_moments(5, 0, 0, 0);
  CHECK(point.m1 == 5.0);
  CHECK(point.m2 == 0.0);
  CHECK(point.m3 == 0.0);
  CHECK(point.m4 == 0.0);

  CHECK_THROWS_AS(convert_summary_to_central_moments(0, -1, 0, 0), Error);
}

TEST_CASE("identification")
{
  const IdentifiedTheta a = normalize_identification(Eigen::Vector3d(1, 3, 2));
  CHECK(a.theta == Eigen::Vector3d(-2, 0, -1));
  CHECK(a.pivot == 1); // zero-based
  const IdentifiedTheta flat = normalize_identification(Eigen::Vector4d::Constant(2.5));
  CHECK(flat.theta.isZero(0.0));
  CHECK(flat.pivot == 0);

  const FineGrid g = grid_of({ 0.0, 1.0 }, 30);
  const GridBasis b = build_basis(g, 8);
  const Eigen::VectorXd theta = Eigen::VectorXd::LinSpaced(8, 0.5, 4.0).array().square();
  CHECK((softmax_probabilities(theta, b) - softmax_probabilities(normalize_identification(theta).theta, b))
          .cwiseAbs()
          .maxCoeff() < 1e-14);
}
