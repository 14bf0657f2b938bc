#include "tabdens/sim_harness.hpp"

#include <catch_amalgamated.hpp>

using namespace tabdens;
using Catch::Matchers::WithinAbs;

TEST_CASE("truth sampler")
{
  const auto a = sample_truth(1000000, 99);
  double mean = 0.0;
  for (double x : a) {
    REQUIRE(x > -1.0);
    REQUIRE(x < 6.0);
    mean += x / a.size();
  }
  CHECK_THAT(mean, WithinAbs(0.2 * 1.0 + 0.8 * (5.6 - 11.0 / 6.0), 0.01));
  CHECK(sample_truth(500, 7) == sample_truth(500, 7));
  CHECK(sample_truth(500, 7) != sample_truth(500, 8));
}

TEST_CASE("truth quantiles")
{
  const MixtureTruth t;
  const double expected[] = { 1.000, 1.793, 3.122, 3.430, 3.643, 3.822, 3.989, 4.163, 4.375, 4.530, 4.778 };
  const auto probs = default_study_probabilities();
  for (size_t a = 0; a < probs.size(); ++a)
    CHECK_THAT(t.quantile(probs[a]), WithinAbs(expected[a], 0.002));
  for (double p : { 0.01, 0.3, 0.77, 0.999 })
    CHECK_THAT(t.cdf(t.quantile(p)), WithinAbs(p, 1e-12));
  CHECK_THAT(t.cdf(-10.0), WithinAbs(0.0, 1e-15));
  CHECK_THAT(t.cdf(15.0), WithinAbs(1.0, 1e-15));
}

TEST_CASE("tabulation")
{
  const GroupedDataset d = tabulate({ 0.5, 0.5 }, { 0.0, 1.0 }, 4);
  CHECK(d.freqs[0] == 2);
  CHECK(d.observed.m(0, 0) == 0.5);
  CHECK(d.observed.m(0, 1) == 0.0);
  CHECK(d.observed.m(0, 2) == 0.0);
  CHECK(d.observed.m(0, 3) == 0.0);

  const GroupedDataset e = tabulate({ 0, 1, 2, 3 }, { -1.0, 5.0 }, 4);
  CHECK(e.observed.m(0, 0) == 1.5);
  CHECK(e.observed.m(0, 1) == 1.25);
  CHECK(e.observed.m(0, 2) == 0.0);
  CHECK(e.observed.m(0, 3) == 2.5625);

  const GroupedDataset b = tabulate({ 1.0, 1.0000001 }, { 0.0, 1.0, 2.0 }, 0);
  CHECK(b.freqs[0] == 1);
  CHECK(b.freqs[1] == 1);
  CHECK(b.order() == 0);

  const GroupedDataset gap = tabulate({ 0.5 }, { 0.0, 1.0, 2.0 }, 2);
  CHECK(gap.freqs[1] == 0);
  CHECK_FALSE(gap.has_moments(1));
  CHECK_THROWS_AS(tabulate({ 3.0 }, { 0.0, 1.0 }, 0), Error);
}

TEST_CASE("class presets")
{
  CHECK(class_preset(3) == std::vector<double>{ -1.0, 1.0, 3.5, 6.0 });
  CHECK(class_preset(5) == std::vector<double>{ -1.0, 1.0, 2.2, 3.5, 4.8, 6.0 });
  CHECK_THROWS_AS(class_preset(4), Error);
}

TEST_CASE("median")
{
  CHECK(median({ 3.0, 1.0, 2.0 }) == 2.0);
  CHECK(median({ 4.0, 1.0, 2.0, 3.0 }) == 2.5);
  CHECK(std::isnan(median({})));
}

TEST_CASE("aggregation")
{
  StudyConfig cfg;
  cfg.probs = { 0.5 };
  const double q = cfg.truth.quantile(0.5);
  auto outcome = [&](double est, double half, ReplicateOutcome::Status st) {
    ReplicateOutcome r;
    r.status = st;
    r.q = { est };
    r.lo95 = { est - half };
    r.hi95 = { est + half };
    r.lo90 = { est - 0.8 * half };
    r.hi90 = { est + 0.8 * half };
    r.kl = est;
    return r;
  };
  std::vector<ReplicateOutcome> reps{
    outcome(q + 0.1, 0.2, ReplicateOutcome::Status::ok),
    outcome(q - 0.3, 0.2, ReplicateOutcome::Status::ok),
    outcome(q + 5.0, 0.2, ReplicateOutcome::Status::not_converged),
  };
  ReplicateOutcome bad;
  bad.status = ReplicateOutcome::Status::failed;
  bad.error = "replicate 3: boom";
  reps.push_back(bad);

  const SimulationReport r = aggregate(cfg, reps);
  CHECK(r.used == 2);
  CHECK(r.not_converged == 1);
  CHECK(r.failed == 1);
  CHECK(r.failures.size() == 1);
  const QuantileSummary& s = r.quantiles[0];
  CHECK_THAT(s.bias, WithinAbs(-0.1, 1e-12));
  CHECK_THAT(s.sd, WithinAbs(0.2, 1e-12));
  CHECK_THAT(s.rmse * s.rmse, WithinAbs(s.bias * s.bias + s.sd * s.sd, 1e-14));
  CHECK(s.coverage95 == 0.5);
  CHECK(s.coverage90 == 0.5);
}

TEST_CASE("single-replicate study")
{
  StudyConfig cfg;
  cfg.reps = 1;
  cfg.n = 250;
  cfg.threads = 1;
  const SimulationReport r = run_study(cfg);
  REQUIRE(r.used + r.not_converged + r.failed == 1);
  for (const auto& q : r.quantiles)
    if (r.used == 1) {
      CHECK(q.sd == 0.0);
      CHECK_THAT(q.rmse, WithinAbs(std::abs(q.bias), 1e-15));
    }
}

TEST_CASE("results do not depend on the number of threads")
{
  StudyConfig cfg;
  cfg.reps = 4;
  cfg.n = 300;
  cfg.order = 1;
  cfg.threads = 1;
  const SimulationReport one = run_study(cfg);
  cfg.threads = 3;
  const SimulationReport three = run_study(cfg);
  REQUIRE(one.quantiles.size() == three.quantiles.size());
  for (size_t a = 0; a < one.quantiles.size(); ++a) {
    CHECK(one.quantiles[a].bias == three.quantiles[a].bias);
    CHECK(one.quantiles[a].coverage95 == three.quantiles[a].coverage95);
  }
  CHECK(one.median_kl == three.median_kl);
}
