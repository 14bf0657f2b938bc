#include "tabdens/datasets.hpp"
#include "tabdens/io.hpp"

#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace tabdens;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace fs = std::filesystem;

namespace {

const fs::path source_dir{ TABDENS_SOURCE_DIR };

fs::path scratch_dir()
{
  const fs::path p = fs::temp_directory_path() / "tabdens_test_io";
  fs::create_directories(p);
  return p;
}

const FitResult& car_fit()
{
  static const FitResult f = fit(car_insurance_claims());
  return f;
}

void check_same(const GroupedDataset& a, const GroupedDataset& b)
{
  REQUIRE(a.num_classes() == b.num_classes());
  CHECK(a.class_cuts == b.class_cuts);
  CHECK(a.freqs == b.freqs);
  CHECK(a.order() == b.order());
  CHECK(a.transform == b.transform);
  for (int j = 0; j < a.num_classes(); ++j)
    for (int r = 0; r < a.order(); ++r)
      if (a.has_moments(j))
        CHECK(a.observed.m(j, r) == b.observed.m(j, r));
}

} // namespace

TEST_CASE("car insurance table in both encodings")
{
  const GroupedDataset csv = parse_summary_table(source_dir / "data" / "car_insurance.csv");
  const GroupedDataset js = parse_summary_table(source_dir / "data" / "car_insurance.json");
  const GroupedDataset embedded = car_insurance_claims();
  CHECK(csv.order() == 4);
  CHECK(csv.n() == 3518);
  CHECK(csv.transform == "log10");
  CHECK(csv.freqs == Eigen::Vector3d(1168, 2234, 116));
  CHECK(csv.class_cuts == std::vector<double>{ 0.0, 3.0, 4.3, 6.18 });
  CHECK_THAT(csv.observed.m(0, 1), WithinAbs(0.3364, 1e-12));
  check_same(csv, embedded);
  check_same(js, embedded);
}

TEST_CASE("moment order follows the populated columns")
{
  CHECK(parse_summary_text("lower,upper,freq\n0,1,5\n1,2,7\n").order() == 0);
  CHECK(parse_summary_text("lower,upper,freq,mean\n0,1,5,0.5\n1,2,7,1.4\n").order() == 1);
  const GroupedDataset two = parse_summary_text("lower,upper,freq,mean,sd\n0,1,5,0.5,0.2\n");
  CHECK(two.order() == 2);
  CHECK_THAT(two.observed.m(0, 1), WithinAbs(0.04, 1e-15));
  const GroupedDataset central = parse_summary_text("lower,upper,freq,mean,m2,m3,m4\n0,1,5,0.5,0.04,0.001,0.003\n");
  CHECK(central.order() == 4);
  CHECK(central.observed.m(0, 2) == 0.001);
  // a class without observations may leave its moments blank
  const GroupedDataset blank = parse_summary_text("lower,upper,freq,mean\n0,1,5,0.5\n1,2,0,\n");
  CHECK_FALSE(blank.has_moments(1));
}

TEST_CASE("malformed tables are rejected with a diagnostic")
{
  struct Case
  {
    const char* text;
    const char* message;
  };
  const Case corpus[] = {
    { "", "no header" },
    { "lower,upper\n0,1\n", "missing column 'freq'" },
    { "lower,upper,freq\n", "no classes" },
    { "lower,upper,freq\n0,1,5\n1.5,2,3\n", "gap at the boundary between classes 1 and 2" },
    { "lower,upper,freq\n0,1,5\n0.5,2,3\n", "overlap" },
    { "lower,upper,freq\n0,1,-5\n", "line 2: frequency" },
    { "lower,upper,freq\n0,1,2.5\n", "frequency" },
    { "lower,upper,freq\n1,0,5\n", "lower < upper" },
    { "lower,upper,freq\n0,1,abc\n", "line 2: invalid number 'abc'" },
    { "lower,upper,freq\n0,1,5,7\n", "expected 3 fields" },
    { "lower,upper,freq,mean,sd\n0,1,5,0.5,-0.1\n", "negative standard deviation" },
    { "lower,upper,freq,mean,sd\n0,1,5,0.5,0.1\n1,2,5,1.5,\n", "line 3: mixed moment orders" },
    { "lower,upper,freq,mean,sd,skewness\n0,1,5,0.5,0.1,0\n", "three moment columns" },
    { "lower,upper,freq,sd\n0,1,5,0.1\n", "prefix" },
    { "lower,upper,freq,mean\n0,1,5,1.5\n", "mean outside" },
    { "lower,upper,freq,colour\n0,1,5,red\n", "unknown column 'colour'" },
    { "lower,upper,freq,mean,m2,sd\n0,1,5,0.5,0.1,0.1\n", "mix central moments" },
    { "# transform: sqrt\nlower,upper,freq\n0,1,5\n", "unknown transform" },
    { "{\"classes\": [{\"lower\": 0, \"upper\": 1}]}", "missing field 'freq'" },
    { "{\"classes\": [{\"lower\": 0, \"upper\": 1, \"freq\": 3, \"mean\": 0.5},"
      " {\"lower\": 1, \"upper\": 2, \"freq\": 3, \"mean\": 1.5, \"sd\": 0.2}]}",
      "mixed moment orders" },
    { "{\"classes\": [", "malformed JSON" },
    { "lower,upper,freq,freq\n0,1,5,5\n", "duplicate column 'freq'" },
    { "# schema: other/2\nlower,upper,freq\n0,1,5\n", "unsupported schema" },
  };
  STATIC_REQUIRE(std::size(corpus) >= 20);
  for (const auto& c : corpus) {
    INFO("input: " << c.text);
    try {
      parse_summary_text(c.text);
      FAIL("accepted malformed input");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::validation);
      CHECK_THAT(std::string(e.what()), ContainsSubstring(c.message));
    }
  }
  try {
    parse_summary_table(scratch_dir() / "missing.csv");
    FAIL("read a missing file");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::io);
  }
}

TEST_CASE("emit and parse round trip")
{
  std::vector<GroupedDataset> cases{ car_insurance_claims() };
  for (int order : { 0, 1, 2, 4 })
    cases.push_back(tabulate(sample_truth(80, 5 + order), { -1.0, 0.5, 1.0, 3.5, 6.0 }, order));
  GroupedDataset awkward = tabulate({ 0.1, 0.2, 0.7 }, { 0.0, 1.0 / 3.0, 0.9, 1.7 }, 4);
  cases.push_back(awkward);
  for (const auto& d : cases) {
    const GroupedDataset back = parse_summary_text(emit_summary_csv(d));
    check_same(d, back);
    check_same(back, parse_summary_text(emit_summary_csv(back)));
  }
}

TEST_CASE("fit report")
{
  FitReportOptions opt;
  opt.quantiles = { 0.95, 0.99 };
  opt.back_transform = BackTransform::exp10;
  const json r = build_fit_report(car_fit(), opt, 0.25);
  CHECK(r["schema"] == fit_report_schema);
  CHECK(r["config"]["K"] == 25);
  CHECK(r["config"]["moments"] == 4);
  CHECK(r["fit"]["converged"] == true);
  REQUIRE(r["quantiles"].size() == 2);
  CHECK_THAT(r["quantiles"][0]["q"].get<double>(), WithinRel(16106.0, 0.02));
  CHECK_THAT(r["quantiles"][1]["q"].get<double>(), WithinRel(38988.0, 0.05));
  CHECK(r["moments"].size() == 12);

  const auto x = r["density"]["x"].get<std::vector<double>>();
  const auto f = r["density"]["f"].get<std::vector<double>>();
  double area = 0.0;
  for (size_t m = 1; m < x.size(); ++m)
    area += 0.5 * (f[m] + f[m - 1]) * (x[m] - x[m - 1]);
  CHECK_THAT(area, WithinAbs(1.0, 1e-6));

  const json without = build_fit_report(car_fit(), FitReportOptions{}, 0.0);
  CHECK_FALSE(without.contains("quantiles"));

  // identical apart from timings
  json a = build_fit_report(car_fit(), opt, 1.0), b = build_fit_report(car_fit(), opt, 2.0);
  a.erase("timings");
  b.erase("timings");
  CHECK(a.dump() == b.dump());
}

TEST_CASE("plot data")
{
  const GroupedDataset& d = car_fit().data();
  const auto h = histogram_heights(d);
  double area = 0.0;
  for (int j = 0; j < d.num_classes(); ++j)
    area += h[j] * (d.class_cuts[j + 1] - d.class_cuts[j]);
  CHECK_THAT(area, WithinAbs(1.0, 1e-14));

  const fs::path prefix = scratch_dir() / "car";
  const PlotFiles files = emit_plot_data(car_fit(), prefix);
  CHECK(fs::exists(files.histogram));
  CHECK(fs::exists(files.density));
  CHECK(fs::exists(files.svg));
  CHECK_THAT(read_file(files.svg), ContainsSubstring("<svg"));

  // density samples against the stored reference curve
  auto rows = [](const std::string& text) {
    std::vector<std::pair<double, double>> out;
    std::istringstream in(text);
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      const auto cells = detail::split_csv(line);
      out.emplace_back(*detail::parse_double(cells[0]), *detail::parse_double(cells[1]));
    }
    return out;
  };
  const auto now = rows(read_file(files.density));
  const auto golden = rows(read_file(source_dir / "tests" / "golden" / "car_d4_density.csv"));
  REQUIRE(now.size() == golden.size());
  for (size_t m = 0; m < now.size(); ++m) {
    CHECK_THAT(now[m].first, WithinAbs(golden[m].first, 1e-12));
    CHECK_THAT(now[m].second, WithinAbs(golden[m].second, 1e-6));
  }

  CHECK_THROWS_AS(emit_plot_data(car_fit(), scratch_dir() / "no_such_dir" / "car"), Error);
}

TEST_CASE("atomic writes leave no temporary file")
{
  const fs::path p = scratch_dir() / "report.json";
  write_atomic(p, "{}\n");
  CHECK(read_file(p) == "{}\n");
  CHECK_FALSE(fs::exists(p.string() + ".tmp"));
}

TEST_CASE("simulation report layout")
{
  StudyConfig cfg;
  cfg.reps = 1;
  cfg.n = 250;
  cfg.threads = 1;
  const json r = simulation_report_to_json(run_study(cfg));
  CHECK(r["schema"] == simulation_report_schema);
  CHECK(r["quantiles"].size() == default_study_probabilities().size());
  for (const char* key : { "p", "true_q", "bias", "sd", "rmse", "coverage95", "coverage90" })
    CHECK(r["quantiles"][0].contains(key));
  CHECK(r["config"]["class_cuts"].get<std::vector<double>>() == class_preset(3));
}
