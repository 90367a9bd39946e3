#pragma once

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cfembed/calibration.hpp"
#include "cfembed/common.hpp"
#include "cfembed/synthetic.hpp"

namespace cfembed {

// Shortest-faithful double formatting: 17 significant digits round-trip
// exactly through strtod.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline double parse_double(const std::string& s) {
  const char* begin = s.c_str();
  char* end = nullptr;
  double v = std::strtod(begin, &end);
  if (end == begin) throw io_error("parse_double: not a number: '" + s + "'");
  return v;
}

namespace detail {

inline std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot open for writing: " + path);
  return out;
}

inline std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open for reading: " + path);
  return in;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.push_back("");
  return fields;
}

inline void expect_header(std::ifstream& in, const std::string& expected,
                          const std::string& path) {
  std::string line;
  if (!std::getline(in, line))
    throw io_error("empty file: " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != expected)
    throw io_error("unexpected header in " + path + ": '" + line +
                   "' (expected '" + expected + "')");
}

}  // namespace detail

inline void write_logging_csv(const std::string& path, const LoggingData& d1) {
  auto out = detail::open_out(path);
  out << "u,a,r\n";
  for (Eigen::Index i = 0; i < d1.u.size(); ++i)
    out << format_double(d1.u[i]) << ',' << format_double(d1.a[i]) << ','
        << format_double(d1.r[i]) << '\n';
  if (!out) throw io_error("write failed: " + path);
}

inline void write_link_csv(const std::string& path, const LinkData& d2) {
  auto out = detail::open_out(path);
  out << "r_tilde,y\n";
  for (Eigen::Index i = 0; i < d2.r.size(); ++i)
    out << format_double(d2.r[i]) << ',' << format_double(d2.y[i]) << '\n';
  if (!out) throw io_error("write failed: " + path);
}

inline void write_policy_csv(const std::string& path, const PolicyData& d3) {
  auto out = detail::open_out(path);
  out << "u,a\n";
  for (Eigen::Index i = 0; i < d3.u.size(); ++i)
    out << format_double(d3.u[i]) << ',' << format_double(d3.a[i]) << '\n';
  if (!out) throw io_error("write failed: " + path);
}

namespace detail {

inline Eigen::MatrixXd read_csv_columns(const std::string& path,
                                        const std::string& header) {
  auto in = open_in(path);
  expect_header(in, header, path);
  size_t ncols = split_csv_line(header).size();
  std::vector<double> values;
  std::string line;
  size_t nrows = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (fields.size() != ncols)
      throw io_error("bad field count in " + path + " line " +
                     std::to_string(nrows + 2));
    for (const auto& f : fields) values.push_back(parse_double(f));
    ++nrows;
  }
  Eigen::MatrixXd m(nrows, ncols);
  for (size_t i = 0; i < nrows; ++i)
    for (size_t j = 0; j < ncols; ++j) m(i, j) = values[i * ncols + j];
  return m;
}

}  // namespace detail

inline LoggingData read_logging_csv(const std::string& path) {
  Eigen::MatrixXd m = detail::read_csv_columns(path, "u,a,r");
  return {m.col(0), m.col(1), m.col(2)};
}

inline LinkData read_link_csv(const std::string& path) {
  Eigen::MatrixXd m = detail::read_csv_columns(path, "r_tilde,y");
  return {m.col(0), m.col(1)};
}

inline PolicyData read_policy_csv(const std::string& path) {
  Eigen::MatrixXd m = detail::read_csv_columns(path, "u,a");
  return {m.col(0), m.col(1)};
}

inline const std::string kSweepHeader =
    "setting,alpha,method,seed,mean,variance,ci_low,ci_high,true_eta,status";

inline void write_sweep_csv(const std::string& path, const SweepResult& result) {
  auto out = detail::open_out(path);
  out << kSweepHeader << '\n';
  for (const auto& r : result.rows)
    out << r.setting << ',' << format_double(r.alpha) << ','
        << method_label(r.method) << ',' << r.seed << ','
        << format_double(r.mean) << ',' << format_double(r.variance) << ','
        << format_double(r.ci_low) << ',' << format_double(r.ci_high) << ','
        << format_double(r.true_eta) << ',' << (r.ok ? "ok" : "failed")
        << '\n';
  if (!out) throw io_error("write failed: " + path);
}

inline SweepResult read_sweep_csv(const std::string& path) {
  auto in = detail::open_in(path);
  detail::expect_header(in, kSweepHeader, path);
  SweepResult result;
  std::string line;
  size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto f = detail::split_csv_line(line);
    if (f.size() != 10)
      throw io_error("bad field count in " + path + " line " +
                     std::to_string(lineno));
    SweepRow r;
    if (f[0].size() != 1) throw io_error("bad setting in " + path);
    r.setting = f[0][0];
    r.alpha = parse_double(f[1]);
    r.method = method_from_label(f[2]);
    r.seed = std::strtoull(f[3].c_str(), nullptr, 10);
    r.mean = parse_double(f[4]);
    r.variance = parse_double(f[5]);
    r.ci_low = parse_double(f[6]);
    r.ci_high = parse_double(f[7]);
    r.true_eta = parse_double(f[8]);
    if (f[9] == "ok") r.ok = true;
    else if (f[9] == "failed") r.ok = false;
    else throw io_error("bad status '" + f[9] + "' in " + path);
    result.rows.push_back(r);
  }
  return result;
}

// JSON mirror of the sweep table.  NaNs (failed rows) serialize as null.
inline nlohmann::ordered_json sweep_to_json(const SweepResult& result) {
  auto encode = [](double v) -> nlohmann::ordered_json {
    if (std::isnan(v)) return nullptr;
    return v;
  };
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const auto& r : result.rows) {
    nlohmann::ordered_json row;
    row["setting"] = std::string(1, r.setting);
    row["alpha"] = r.alpha;
    row["method"] = method_label(r.method);
    row["seed"] = r.seed;
    row["mean"] = encode(r.mean);
    row["variance"] = encode(r.variance);
    row["ci_low"] = encode(r.ci_low);
    row["ci_high"] = encode(r.ci_high);
    row["true_eta"] = r.true_eta;
    row["status"] = r.ok ? "ok" : "failed";
    rows.push_back(std::move(row));
  }
  nlohmann::ordered_json doc;
  doc["level"] = result.level;
  doc["rows"] = std::move(rows);
  return doc;
}

inline SweepResult sweep_from_json(const nlohmann::json& doc) {
  auto decode = [](const nlohmann::json& v) -> double {
    if (v.is_null()) return std::numeric_limits<double>::quiet_NaN();
    return v.get<double>();
  };
  SweepResult result;
  if (doc.contains("level")) result.level = doc.at("level").get<double>();
  for (const auto& row : doc.at("rows")) {
    SweepRow r;
    r.setting = row.at("setting").get<std::string>().at(0);
    r.alpha = row.at("alpha").get<double>();
    r.method = method_from_label(row.at("method").get<std::string>());
    r.seed = row.at("seed").get<std::uint64_t>();
    r.mean = decode(row.at("mean"));
    r.variance = decode(row.at("variance"));
    r.ci_low = decode(row.at("ci_low"));
    r.ci_high = decode(row.at("ci_high"));
    r.true_eta = row.at("true_eta").get<double>();
    r.ok = row.at("status").get<std::string>() == "ok";
    result.rows.push_back(r);
  }
  return result;
}

inline void write_sweep_json(const std::string& path, const SweepResult& result) {
  auto out = detail::open_out(path);
  out << sweep_to_json(result).dump(2) << '\n';
  if (!out) throw io_error("write failed: " + path);
}

inline SweepResult read_sweep_json(const std::string& path) {
  auto in = detail::open_in(path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw io_error("bad json in " + path + ": " + e.what());
  }
  return sweep_from_json(doc);
}

// Per-method plot table: the first seed's curve across alpha, ascending.
inline void write_plot_csvs(const std::string& dir, const SweepResult& result) {
  if (result.rows.empty()) return;
  std::uint64_t first_seed = result.rows.front().seed;
  std::set<Method> methods;
  for (const auto& r : result.rows) {
    first_seed = std::min(first_seed, r.seed);
    methods.insert(r.method);
  }
  for (Method m : methods) {
    std::vector<const SweepRow*> rows;
    for (const auto& r : result.rows)
      if (r.method == m && r.seed == first_seed) rows.push_back(&r);
    std::stable_sort(rows.begin(), rows.end(),
                     [](const SweepRow* a, const SweepRow* b) {
                       return a->alpha < b->alpha;
                     });
    auto path = (std::filesystem::path(dir) / ("plot_" + method_label(m) + ".csv"))
                    .string();
    auto out = detail::open_out(path);
    out << "alpha,mean,ci_low,ci_high,true_eta\n";
    for (const SweepRow* r : rows)
      out << format_double(r->alpha) << ',' << format_double(r->mean) << ','
          << format_double(r->ci_low) << ',' << format_double(r->ci_high)
          << ',' << format_double(r->true_eta) << '\n';
    if (!out) throw io_error("write failed: " + path);
  }
}

}  // namespace cfembed
