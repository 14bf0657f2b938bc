#pragma once

//! Summary tables, fit and simulation reports, plot data.
//!
//! A summary table lists one class per record with its bounds, frequency and
//! optionally its moments, either as mean / sd / skewness / kurtosis (excess)
//! or as mean / m2 / m3 / m4 (central moments). Two encodings share that
//! schema: delimited text
//!
//!   # transform: log10
//!   lower,upper,freq,mean,sd,skewness,kurtosis
//!   0,3.00,1168,2.462,0.580,-1.793,2.401
//!
//! and a JSON object {"transform": ..., "classes": [{"lower": ...}, ...]}.
//! The encoding is detected from the first non-blank character.

#include "dataset.hpp"
#include "em_fitter.hpp"
#include "error.hpp"
#include "evaluation.hpp"
#include "risk_inference.hpp"
#include "sim_harness.hpp"

#include <json.hpp>

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace tabdens {

using json = nlohmann::json;

inline constexpr std::string_view summary_schema = "tabdens.summary/1";
inline constexpr std::string_view fit_report_schema = "tabdens.fit_report/1";
inline constexpr std::string_view simulation_report_schema = "tabdens.simulation_report/1";

namespace detail {

[[noreturn]] inline void fail_io(const std::string& what)
{
  fail(ErrorCode::io, what);
}

inline std::string trim(std::string_view s)
{
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos)
    return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_csv(const std::string& line)
{
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ','))
    out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',')
    out.emplace_back();
  return out;
}

inline std::optional<double> parse_double(const std::string& s)
{
  double v{};
  const char* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end)
    return std::nullopt;
  return v;
}

//! Shortest decimal text that reads back to the same double.
inline std::string format_double(double v)
{
  if (std::isnan(v))
    return {};
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

} // namespace detail

//! One record of a summary table before conversion.
struct SummaryRecord
{
  double lower{}, upper{}, freq{};
  std::optional<double> mean, second, third, fourth;
  int line{}; ///< source line (CSV) or record number (JSON)
};

enum class MomentForm
{
  summary, ///< mean, sd, skewness, excess kurtosis
  central  ///< mean, m2, m3, m4
};

namespace detail {

inline std::string where(const SummaryRecord& r, bool csv)
{
  return csv ? "line " + std::to_string(r.line) : "class " + std::to_string(r.line);
}

//! Validate records and convert them into a dataset.
inline GroupedDataset assemble(const std::vector<SummaryRecord>& recs,
                               int order,
                               MomentForm form,
                               const std::string& transform,
                               bool csv)
{
  if (recs.empty())
    fail(ErrorCode::validation, "summary table has no classes");
  if (transform != "none" && transform != "log10")
    fail(ErrorCode::validation, "unknown transform '" + transform + "'");
  const int J = static_cast<int>(recs.size());
  GroupedDataset d;
  d.transform = transform;
  d.freqs.resize(J);
  d.observed.order = order;
  d.observed.m.setConstant(J, 4, std::numeric_limits<double>::quiet_NaN());
  for (int j = 0; j < J; ++j) {
    const SummaryRecord& r = recs[j];
    const std::string at = where(r, csv) + ": ";
    if (!(std::isfinite(r.lower) && std::isfinite(r.upper) && r.lower < r.upper))
      fail(ErrorCode::validation, at + "class bounds must be finite with lower < upper");
    if (j == 0)
      d.class_cuts.push_back(r.lower);
    else if (r.lower != recs[j - 1].upper)
      fail(ErrorCode::validation,
           at + (r.lower > recs[j - 1].upper ? "gap" : "overlap") +
             " at the boundary between classes " + std::to_string(j) + " and " +
             std::to_string(j + 1) + " (upper " + format_double(recs[j - 1].upper) +
             ", lower " + format_double(r.lower) + ")");
    d.class_cuts.push_back(r.upper);
    if (!(r.freq >= 0.0) || std::floor(r.freq) != r.freq)
      fail(ErrorCode::validation, at + "frequency must be a nonnegative integer");
    d.freqs[j] = r.freq;

    const std::optional<double> cols[4] = { r.mean, r.second, r.third, r.fourth };
    int present = 0;
    for (const auto& c : cols)
      present += c.has_value();
    if (present == 0 && (order == 0 || r.freq == 0.0))
      continue;
    if (present != order)
      fail(ErrorCode::validation,
           at + "mixed moment orders: " + std::to_string(present) + " of " +
             std::to_string(order) + " moment values given");
    for (int c = 0; c < order; ++c)
      if (!std::isfinite(*cols[c]))
        fail(ErrorCode::validation, at + "moment values must be finite");
    const double mean = *r.mean;
    if (r.freq > 0.0 && !(mean > r.lower && mean <= r.upper))
      fail(ErrorCode::validation, at + "class mean outside (lower, upper]");
    d.observed.m(j, 0) = mean;
    if (order < 2)
      continue;
    if (*r.second < 0.0)
      fail(ErrorCode::validation,
           at + (form == MomentForm::summary ? "negative standard deviation"
                                             : "negative variance"));
    if (form == MomentForm::central) {
      for (int c = 1; c < order; ++c)
        d.observed.m(j, c) = *cols[c];
    } else {
      const double skew = order == 4 ? *r.third : 0.0;
      const double kurt = order == 4 ? *r.fourth : 0.0;
      const CentralMoments cm = convert_summary_to_central_moments(mean, *r.second, skew, kurt);
      d.observed.m(j, 1) = cm.m2;
      if (order == 4) {
        d.observed.m(j, 2) = cm.m3;
        d.observed.m(j, 3) = cm.m4;
      }
    }
  }
  validate(d);
  return d;
}

inline int order_from_columns(int count, const std::string& at)
{
  if (count == 3)
    fail(ErrorCode::validation, at + "three moment columns given; use 0, 1, 2 or 4");
  return count;
}

} // namespace detail

inline GroupedDataset parse_summary_csv(std::istream& in)
{
  using detail::fail;
  std::string line;
  int lineno = 0;
  std::string transform = "none";
  std::vector<std::string> header;
  std::vector<SummaryRecord> recs;
  std::map<std::string, int> col;
  MomentForm form = MomentForm::summary;
  int order = 0;
  std::vector<std::string> moment_cols;

  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = detail::trim(line);
    if (t.empty())
      continue;
    const std::string at = "line " + std::to_string(lineno) + ": ";
    if (t[0] == '#') {
      const std::string body = detail::trim(std::string_view(t).substr(1));
      const auto colon = body.find(':');
      if (colon == std::string::npos)
        continue;
      const std::string key = detail::trim(std::string_view(body).substr(0, colon));
      const std::string value = detail::trim(std::string_view(body).substr(colon + 1));
      if (key == "transform")
        transform = value;
      else if (key == "schema" && value != summary_schema)
        fail(ErrorCode::validation, at + "unsupported schema '" + value + "'");
      continue;
    }
    auto cells = detail::split_csv(t);
    if (header.empty()) {
      header = cells;
      for (size_t c = 0; c < header.size(); ++c) {
        if (col.count(header[c]))
          fail(ErrorCode::validation, at + "duplicate column '" + header[c] + "'");
        col[header[c]] = static_cast<int>(c);
      }
      for (const char* req : { "lower", "upper", "freq" })
        if (!col.count(req))
          fail(ErrorCode::validation, at + "missing column '" + req + "'");
      const bool has_central = col.count("m2") || col.count("m3") || col.count("m4");
      const bool has_summary = col.count("sd") || col.count("skewness") ||
                               col.count("kurtosis") || col.count("kurtosis_excess");
      if (has_central && has_summary)
        fail(ErrorCode::validation, at + "columns mix central moments and summary statistics");
      form = has_central ? MomentForm::central : MomentForm::summary;
      const std::string kurt = col.count("kurtosis_excess") ? "kurtosis_excess" : "kurtosis";
      const std::vector<std::string> wanted =
        form == MomentForm::central
          ? std::vector<std::string>{ "mean", "m2", "m3", "m4" }
          : std::vector<std::string>{ "mean", "sd", "skewness", kurt };
      for (const auto& name : header) {
        if (name == "lower" || name == "upper" || name == "freq")
          continue;
        if (std::find(wanted.begin(), wanted.end(), name) == wanted.end())
          fail(ErrorCode::validation, at + "unknown column '" + name + "'");
      }
      int count = 0;
      for (const auto& name : wanted) {
        if (!col.count(name))
          break;
        ++count;
      }
      int total = 0;
      for (const auto& name : wanted)
        total += col.count(name) ? 1 : 0;
      if (total != count)
        fail(ErrorCode::validation, at + "moment columns must form a prefix of " +
                                      wanted[0] + ", " + wanted[1] + ", " + wanted[2] +
                                      ", " + wanted[3]);
      order = detail::order_from_columns(count, at);
      moment_cols.assign(wanted.begin(), wanted.begin() + count);
      continue;
    }
    if (cells.size() != header.size())
      fail(ErrorCode::validation, at + "expected " + std::to_string(header.size()) +
                                    " fields, found " + std::to_string(cells.size()));
    auto number = [&](const std::string& name) -> std::optional<double> {
      const std::string& s = cells[col[name]];
      if (s.empty())
        return std::nullopt;
      const auto v = detail::parse_double(s);
      if (!v)
        fail(ErrorCode::validation, at + "invalid number '" + s + "' in column '" + name + "'");
      return v;
    };
    SummaryRecord r;
    r.line = lineno;
    for (const char* req : { "lower", "upper", "freq" }) {
      const auto v = number(req);
      if (!v)
        fail(ErrorCode::validation, at + "missing value in column '" + req + "'");
      (req[0] == 'l' ? r.lower : req[0] == 'u' ? r.upper : r.freq) = *v;
    }
    std::optional<double>* slots[4] = { &r.mean, &r.second, &r.third, &r.fourth };
    for (size_t c = 0; c < moment_cols.size(); ++c)
      *slots[c] = number(moment_cols[c]);
    recs.push_back(r);
  }
  if (header.empty())
    detail::fail(ErrorCode::validation, "summary table has no header line");
  return detail::assemble(recs, order, form, transform, true);
}

inline GroupedDataset parse_summary_json(const json& doc)
{
  using detail::fail;
  if (!doc.is_object())
    fail(ErrorCode::validation, "summary table must be a JSON object");
  if (doc.contains("schema") && doc["schema"] != summary_schema)
    fail(ErrorCode::validation, "unsupported schema");
  const std::string transform = doc.value("transform", std::string("none"));
  if (!doc.contains("classes") || !doc["classes"].is_array())
    fail(ErrorCode::validation, "summary table needs a 'classes' array");
  const json& classes = doc["classes"];
  const bool central = std::any_of(classes.begin(), classes.end(), [](const json& c) {
    return c.is_object() && (c.contains("m2") || c.contains("m3") || c.contains("m4"));
  });
  const MomentForm form = central ? MomentForm::central : MomentForm::summary;
  const std::vector<std::string> names =
    central ? std::vector<std::string>{ "mean", "m2", "m3", "m4" }
            : std::vector<std::string>{ "mean", "sd", "skewness", "kurtosis" };
  std::vector<SummaryRecord> recs;
  int order = -1;
  for (size_t j = 0; j < classes.size(); ++j) {
    const json& c = classes[j];
    const std::string at = "class " + std::to_string(j + 1) + ": ";
    if (!c.is_object())
      fail(ErrorCode::validation, at + "record must be an object");
    auto number = [&](const std::string& name) -> std::optional<double> {
      if (!c.contains(name) || c[name].is_null())
        return std::nullopt;
      if (!c[name].is_number())
        fail(ErrorCode::validation, at + "field '" + name + "' must be a number");
      return c[name].get<double>();
    };
    SummaryRecord r;
    r.line = static_cast<int>(j + 1);
    for (const char* req : { "lower", "upper", "freq" }) {
      const auto v = number(req);
      if (!v)
        fail(ErrorCode::validation, at + "missing field '" + req + "'");
      (req[0] == 'l' ? r.lower : req[0] == 'u' ? r.upper : r.freq) = *v;
    }
    std::optional<double>* slots[4] = { &r.mean, &r.second, &r.third, &r.fourth };
    int count = 0;
    for (size_t m = 0; m < 4; ++m) {
      *slots[m] = number(m == 3 && !central && c.contains("kurtosis_excess")
                           ? "kurtosis_excess"
                           : names[m]);
      if (slots[m]->has_value() && count == static_cast<int>(m))
        ++count;
    }
    int total = 0;
    for (auto* s : slots)
      total += s->has_value();
    if (total != count)
      fail(ErrorCode::validation, at + "moment fields must form a prefix of mean, " +
                                    names[1] + ", " + names[2] + ", " + names[3]);
    if (total > 0) {
      const int o = detail::order_from_columns(count, at);
      if (order >= 0 && o != order)
        fail(ErrorCode::validation, at + "mixed moment orders across classes");
      order = o;
    }
    recs.push_back(r);
  }
  return detail::assemble(recs, std::max(order, 0), form, transform, false);
}

//! Parse a summary table in either encoding.
inline GroupedDataset parse_summary_text(const std::string& text)
{
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    json doc;
    try {
      doc = json::parse(text);
    } catch (const json::parse_error& e) {
      detail::fail(ErrorCode::validation, std::string("malformed JSON: ") + e.what());
    }
    return parse_summary_json(doc);
  }
  std::istringstream in(text);
  return parse_summary_csv(in);
}

inline std::string read_file(const std::filesystem::path& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
    detail::fail_io("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline GroupedDataset parse_summary_table(const std::filesystem::path& path)
{
  return parse_summary_text(read_file(path));
}

//! Delimited text in the central-moment form; parsing it gives back the
//! same dataset bit for bit.
inline std::string emit_summary_csv(const GroupedDataset& d)
{
  using detail::format_double;
  std::ostringstream out;
  out << "# schema: " << summary_schema << "\n";
  out << "# transform: " << d.transform << "\n";
  static const char* names[4] = { "mean", "m2", "m3", "m4" };
  out << "lower,upper,freq";
  for (int r = 0; r < d.order(); ++r)
    out << ',' << names[r];
  out << '\n';
  for (int j = 0; j < d.num_classes(); ++j) {
    out << format_double(d.class_cuts[j]) << ',' << format_double(d.class_cuts[j + 1])
        << ',' << format_double(d.freqs[j]);
    for (int r = 0; r < d.order(); ++r)
      out << ',' << (d.has_moments(j) ? format_double(d.observed.m(j, r)) : std::string());
    out << '\n';
  }
  return out.str();
}

//! Write through a temporary file and rename it into place.
inline void write_atomic(const std::filesystem::path& path, const std::string& content)
{
  namespace fs = std::filesystem;
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out)
      detail::fail_io("cannot write '" + tmp.string() + "'");
    out << content;
    out.flush();
    if (!out)
      detail::fail_io("write to '" + tmp.string() + "' failed");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    detail::fail_io("cannot move report into '" + path.string() + "'");
  }
}

inline json config_to_json(const FitConfig& c)
{
  json j;
  j["K"] = c.K;
  j["target_bins"] = c.target_bins;
  j["penalty_order"] = c.penalty_order;
  j["ridge"] = c.ridge;
  j["lambda"] = c.fixed_lambda ? json(*c.fixed_lambda) : json("auto");
  j["lambda_init"] = c.lambda_init;
  j["em_max_iters"] = c.em_max_iters;
  j["newton_max_iters"] = c.newton_max_iters;
  j["theta_tol"] = c.theta_tol;
  j["loglik_tol"] = c.loglik_tol;
  return j;
}

inline std::vector<double> to_vector(const Eigen::VectorXd& v)
{
  return std::vector<double>(v.data(), v.data() + v.size());
}

struct FitReportOptions
{
  std::vector<double> quantiles;
  double alpha{ 0.05 };
  BackTransform back_transform{ BackTransform::none };
  int curve_points{ 2001 };
  std::uint64_t seed{ 0 };
  std::string data_path;
};

inline std::string_view to_string(BackTransform bt)
{
  return bt == BackTransform::exp10 ? "exp10" : "none";
}

//! Evenly spaced samples of the fitted density over the support.
inline std::pair<std::vector<double>, std::vector<double>> density_curve(const FittedDensity& fd,
                                                                         int points)
{
  detail::require(points >= 2, "density curve needs at least two points");
  std::vector<double> x(points), f(points);
  for (int m = 0; m < points; ++m) {
    x[m] = m == points - 1 ? fd.upper()
                           : fd.lower() + (fd.upper() - fd.lower()) * m / (points - 1);
    f[m] = fd.density_at(x[m]);
  }
  return { x, f };
}

inline json build_fit_report(const FitResult& fit,
                             const FitReportOptions& opt,
                             double fit_seconds)
{
  const FittedDensity fd(fit);
  const GroupedDataset& d = fit.data();
  json r;
  r["schema"] = fit_report_schema;
  json cfg = config_to_json(fit.config);
  cfg["moments"] = d.order();
  cfg["quantiles"] = opt.quantiles;
  cfg["alpha"] = opt.alpha;
  cfg["back_transform"] = to_string(opt.back_transform);
  cfg["seed"] = opt.seed;
  cfg["data"] = opt.data_path;
  r["config"] = cfg;

  json data;
  data["class_cuts"] = d.class_cuts;
  data["snapped_cuts"] = fit.grid().class_cuts;
  data["freqs"] = to_vector(d.freqs);
  data["n"] = d.n();
  data["transform"] = d.transform;
  r["data"] = data;

  json f;
  f["converged"] = fit.converged;
  f["em_iterations"] = fit.em_iterations;
  f["newton_iterations"] = fit.newton_iterations;
  f["lambda"] = fit.lambda_hat;
  f["edf"] = fit.edf;
  f["pivot"] = fit.pivot;
  f["theta"] = to_vector(fit.theta_hat);
  r["fit"] = f;

  const auto [x, fx] = density_curve(fd, opt.curve_points);
  r["density"] = { { "x", x }, { "f", fx } };

  if (!opt.quantiles.empty()) {
    const InformationMatrix info = information_matrix(fit);
    json qs = json::array();
    for (double p : opt.quantiles) {
      const QuantileEstimate e = apply_back_transform(
        quantile_credible_interval(p, opt.alpha, fd, info), opt.back_transform);
      qs.push_back({ { "p", e.p },
                     { "q", e.q_hat },
                     { "s_q", e.s_q },
                     { "ci_lower", e.ci_lower },
                     { "ci_upper", e.ci_upper },
                     { "alpha", e.alpha },
                     { "back_transformed", e.back_transformed },
                     { "ridged", e.ridged } });
    }
    r["quantiles"] = qs;
  }

  json ms = json::array();
  for (const auto& m : moment_diagnostics(fit))
    ms.push_back({ { "class", m.cls + 1 },
                   { "order", m.order },
                   { "observed", m.observed },
                   { "fitted", m.fitted },
                   { "sd", m.sd },
                   { "z", m.z } });
  r["moments"] = ms;
  r["trace"] = { { "loglik", fit.loglik_trace }, { "lambda", fit.lambda_trace } };
  r["timings"] = { { "fit_seconds", fit_seconds } };
  return r;
}

inline json simulation_report_to_json(const SimulationReport& rep)
{
  const StudyConfig& c = rep.config;
  json r;
  r["schema"] = simulation_report_schema;
  json cfg;
  cfg["reps"] = c.reps;
  cfg["n"] = c.n;
  cfg["class_cuts"] = c.cuts;
  cfg["moments"] = c.order;
  cfg["seed"] = c.seed;
  cfg["probs"] = c.probs;
  cfg["fit"] = config_to_json(c.fit);
  r["config"] = cfg;
  r["replicates"] = { { "requested", c.reps },
                      { "used", rep.used },
                      { "not_converged", rep.not_converged },
                      { "failed", rep.failed } };
  json qs = json::array();
  for (const auto& q : rep.quantiles)
    qs.push_back({ { "p", q.p },
                   { "true_q", q.true_q },
                   { "mean", q.mean },
                   { "bias", q.bias },
                   { "sd", q.sd },
                   { "rmse", q.rmse },
                   { "coverage95", q.coverage95 },
                   { "coverage90", q.coverage90 } });
  r["quantiles"] = qs;
  r["metrics"] = { { "median_l1", rep.median_l1 },
                   { "median_rimse", rep.median_rimse },
                   { "median_kl", rep.median_kl } };
  r["failures"] = rep.failures;
  return r;
}

//! Histogram heights n_j / (n width_j) per class.
inline std::vector<double> histogram_heights(const GroupedDataset& d)
{
  std::vector<double> h(d.num_classes());
  for (int j = 0; j < d.num_classes(); ++j)
    h[j] = d.freqs[j] / (d.n() * (d.class_cuts[j + 1] - d.class_cuts[j]));
  return h;
}

struct PlotFiles
{
  std::filesystem::path histogram, density, svg;
};

//! Write `<prefix>_histogram.csv`, `<prefix>_density.csv` and, if asked,
//! `<prefix>.svg` overlaying both.
inline PlotFiles emit_plot_data(const FitResult& fit,
                                const std::filesystem::path& prefix,
                                bool svg = true,
                                int points = 501)
{
  using detail::format_double;
  const GroupedDataset& d = fit.data();
  const FittedDensity fd(fit);
  const auto heights = histogram_heights(d);
  const auto [x, f] = density_curve(fd, points);
  PlotFiles files;
  files.histogram = prefix.string() + "_histogram.csv";
  files.density = prefix.string() + "_density.csv";

  std::ostringstream h;
  h << "class,lower,upper,height\n";
  for (int j = 0; j < d.num_classes(); ++j)
    h << j + 1 << ',' << format_double(d.class_cuts[j]) << ','
      << format_double(d.class_cuts[j + 1]) << ',' << format_double(heights[j]) << '\n';
  write_atomic(files.histogram, h.str());

  std::ostringstream c;
  c << "x,density\n";
  for (size_t m = 0; m < x.size(); ++m)
    c << format_double(x[m]) << ',' << format_double(f[m]) << '\n';
  write_atomic(files.density, c.str());

  if (svg) {
    files.svg = prefix.string() + ".svg";
    const double W = 640, H = 400, pad = 40;
    const double x0 = d.class_cuts.front(), x1 = d.class_cuts.back();
    double top = *std::max_element(f.begin(), f.end());
    top = std::max(top, *std::max_element(heights.begin(), heights.end())) * 1.05;
    auto sx = [&](double v) { return pad + (v - x0) / (x1 - x0) * (W - 2 * pad); };
    auto sy = [&](double v) { return H - pad - v / top * (H - 2 * pad); };
    std::ostringstream s;
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\" viewBox=\"0 0 " << W << ' ' << H << "\">\n";
    s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    for (int j = 0; j < d.num_classes(); ++j) {
      const double l = sx(d.class_cuts[j]), r = sx(d.class_cuts[j + 1]);
      s << "<rect x=\"" << l << "\" y=\"" << sy(heights[j]) << "\" width=\"" << r - l
        << "\" height=\"" << sy(0) - sy(heights[j])
        << "\" fill=\"#dddddd\" stroke=\"#888888\"/>\n";
    }
    s << "<polyline fill=\"none\" stroke=\"#c0392b\" stroke-width=\"2\" points=\"";
    for (size_t m = 0; m < x.size(); ++m)
      s << sx(x[m]) << ',' << sy(f[m]) << ' ';
    s << "\"/>\n";
    s << "<line x1=\"" << pad << "\" y1=\"" << sy(0) << "\" x2=\"" << W - pad << "\" y2=\""
      << sy(0) << "\" stroke=\"black\"/>\n";
    s << "<text x=\"" << pad << "\" y=\"" << H - 10 << "\" font-size=\"12\">"
      << format_double(x0) << "</text>\n";
    s << "<text x=\"" << W - pad << "\" y=\"" << H - 10
      << "\" font-size=\"12\" text-anchor=\"end\">" << format_double(x1) << "</text>\n";
    s << "</svg>\n";
    write_atomic(files.svg, s.str());
  }
  return files;
}

} // namespace tabdens
