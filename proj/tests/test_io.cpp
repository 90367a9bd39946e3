#include <catch2/catch_amalgamated.hpp>

#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>

#include "cfembed/io.hpp"
#include "cfembed/synthetic.hpp"

using cfembed::SweepResult;
using cfembed::SweepRow;
namespace fs = std::filesystem;

namespace {

fs::path test_dir() {
  static fs::path dir = [] {
    fs::path p = fs::temp_directory_path() /
                 ("cfembed_io_" + std::to_string(::getpid()));
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
  }();
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string first_line(const fs::path& path) {
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  return line;
}

int line_count(const fs::path& path) {
  std::string all = slurp(path);
  int n = 0;
  for (char ch : all) n += ch == '\n' ? 1 : 0;
  return n;
}

SweepRow demo_row(double alpha, cfembed::Method method, std::uint64_t seed) {
  SweepRow r;
  r.setting = 'B';
  r.alpha = alpha;
  r.method = method;
  r.seed = seed;
  r.mean = std::sin(alpha) / 3.0;
  r.variance = 0.01 * (1.0 + alpha * alpha);
  r.ci_low = r.mean - 0.2;
  r.ci_high = r.mean + 0.2;
  r.true_eta = std::sin(alpha) / 3.1;
  return r;
}

}  // namespace

TEST_CASE("doubles survive the text round trip", "[io]") {
  for (double v : {1.0 / 3.0, 1e-308, 2.5e17, 3.141592653589793, -7.25,
                   5e-324, 1.7976931348623157e308}) {
    CHECK(cfembed::parse_double(cfembed::format_double(v)) == v);
    CHECK(cfembed::parse_double(cfembed::format_double(-v)) == -v);
  }
  CHECK(std::isnan(cfembed::parse_double(
      cfembed::format_double(std::nan("")))));
  CHECK(std::signbit(cfembed::parse_double(cfembed::format_double(-0.0))));
  CHECK_THROWS_AS(cfembed::parse_double("pi"), cfembed::io_error);
  CHECK_THROWS_AS(cfembed::parse_double(""), cfembed::io_error);
}

TEST_CASE("dataset files round-trip bitwise", "[io]") {
  auto spec = cfembed::SettingSpec::setting_b();
  auto [d1, d2] = gen_logging_data(spec, 17, 9, 4);
  auto d3 = gen_policy_d3(spec, 0.8, d1.u, 4, 11);

  fs::path dir = test_dir();
  cfembed::write_logging_csv((dir / "d1.csv").string(), d1);
  cfembed::write_link_csv((dir / "d2.csv").string(), d2);
  cfembed::write_policy_csv((dir / "d3.csv").string(), d3);

  CHECK(first_line(dir / "d1.csv") == "u,a,r");
  CHECK(first_line(dir / "d2.csv") == "r_tilde,y");
  CHECK(first_line(dir / "d3.csv") == "u,a");
  CHECK(line_count(dir / "d1.csv") == 18);
  CHECK(line_count(dir / "d2.csv") == 10);
  CHECK(line_count(dir / "d3.csv") == 12);

  auto r1 = cfembed::read_logging_csv((dir / "d1.csv").string());
  auto r2 = cfembed::read_link_csv((dir / "d2.csv").string());
  auto r3 = cfembed::read_policy_csv((dir / "d3.csv").string());
  CHECK((r1.u - d1.u).cwiseAbs().maxCoeff() == 0.0);
  CHECK((r1.a - d1.a).cwiseAbs().maxCoeff() == 0.0);
  CHECK((r1.r - d1.r).cwiseAbs().maxCoeff() == 0.0);
  CHECK((r2.r - d2.r).cwiseAbs().maxCoeff() == 0.0);
  CHECK((r2.y - d2.y).cwiseAbs().maxCoeff() == 0.0);
  CHECK((r3.u - d3.u).cwiseAbs().maxCoeff() == 0.0);
  CHECK((r3.a - d3.a).cwiseAbs().maxCoeff() == 0.0);

  // Rewrites are byte-identical.
  cfembed::write_logging_csv((dir / "d1_again.csv").string(), d1);
  CHECK(slurp(dir / "d1.csv") == slurp(dir / "d1_again.csv"));

  CHECK_THROWS_AS(cfembed::read_link_csv((dir / "d1.csv").string()),
                  cfembed::io_error);
  CHECK_THROWS_AS(cfembed::read_logging_csv((dir / "missing.csv").string()),
                  cfembed::io_error);
}

TEST_CASE("sweep tables round-trip through CSV and JSON", "[io]") {
  SweepResult result;
  result.level = 0.9;
  result.rows = {demo_row(-8.0, cfembed::Method::cfmp, 2),
                 demo_row(0.5, cfembed::Method::bayes_cfmp, 2),
                 demo_row(8.0, cfembed::Method::plugin, 7)};
  SweepRow failed = demo_row(0.5, cfembed::Method::bayes_rcfme, 7);
  failed.ok = false;
  failed.mean = failed.variance = failed.ci_low = failed.ci_high =
      std::numeric_limits<double>::quiet_NaN();
  result.rows.push_back(failed);

  fs::path dir = test_dir();
  const std::string csv = (dir / "sweep.csv").string();
  cfembed::write_sweep_csv(csv, result);
  CHECK(first_line(csv) ==
        "setting,alpha,method,seed,mean,variance,ci_low,ci_high,true_eta,"
        "status");

  SweepResult back = cfembed::read_sweep_csv(csv);
  REQUIRE(back.rows.size() == 4);
  CHECK(back.failed_count() == 1);
  for (size_t i = 0; i < 3; ++i) {
    CHECK(back.rows[i].setting == 'B');
    CHECK(back.rows[i].alpha == result.rows[i].alpha);
    CHECK(back.rows[i].method == result.rows[i].method);
    CHECK(back.rows[i].seed == result.rows[i].seed);
    CHECK(back.rows[i].mean == result.rows[i].mean);
    CHECK(back.rows[i].variance == result.rows[i].variance);
    CHECK(back.rows[i].ci_low == result.rows[i].ci_low);
    CHECK(back.rows[i].ci_high == result.rows[i].ci_high);
    CHECK(back.rows[i].true_eta == result.rows[i].true_eta);
    CHECK(back.rows[i].ok);
  }
  CHECK_FALSE(back.rows[3].ok);
  CHECK(std::isnan(back.rows[3].mean));
  CHECK(back.rows[3].true_eta == failed.true_eta);

  const std::string json = (dir / "sweep.json").string();
  cfembed::write_sweep_json(json, result);
  SweepResult jback = cfembed::read_sweep_json(json);
  REQUIRE(jback.rows.size() == 4);
  CHECK(jback.level == 0.9);
  for (size_t i = 0; i < 3; ++i) {
    CHECK(jback.rows[i].mean == result.rows[i].mean);
    CHECK(jback.rows[i].variance == result.rows[i].variance);
    CHECK(jback.rows[i].seed == result.rows[i].seed);
  }
  CHECK_FALSE(jback.rows[3].ok);
  CHECK(std::isnan(jback.rows[3].variance));

  // Failed rows carry nulls, not NaN literals, in the JSON document.
  auto doc = cfembed::sweep_to_json(result);
  CHECK(doc["rows"][3]["mean"].is_null());
  CHECK(doc["rows"][0]["mean"].is_number());
}

TEST_CASE("malformed sweep files are rejected", "[io]") {
  fs::path dir = test_dir();
  const fs::path bad = dir / "bad.csv";

  {
    std::ofstream out(bad);
    out << "setting,alpha\nA,0.0\n";
  }
  CHECK_THROWS_AS(cfembed::read_sweep_csv(bad.string()), cfembed::io_error);

  {
    std::ofstream out(bad);
    out << cfembed::kSweepHeader << "\nA,0.0,cfmp,1\n";
  }
  CHECK_THROWS_AS(cfembed::read_sweep_csv(bad.string()), cfembed::io_error);

  {
    std::ofstream out(bad);
    out << cfembed::kSweepHeader
        << "\nA,0.0,cfmp,1,0.0,1.0,-1.0,1.0,0.0,maybe\n";
  }
  CHECK_THROWS_AS(cfembed::read_sweep_csv(bad.string()), cfembed::io_error);

  {
    std::ofstream out(dir / "bad.json");
    out << "{ not json";
  }
  CHECK_THROWS_AS(cfembed::read_sweep_json((dir / "bad.json").string()),
                  cfembed::io_error);
}

TEST_CASE("plot tables are per-method, first seed, ascending", "[io]") {
  SweepResult result;
  // Deliberately unsorted alphas and a later seed that must be ignored.
  result.rows = {demo_row(0.5, cfembed::Method::cfmp, 2),
                 demo_row(-8.0, cfembed::Method::cfmp, 2),
                 demo_row(8.0, cfembed::Method::cfmp, 2),
                 demo_row(0.5, cfembed::Method::cfmp, 9),
                 demo_row(0.5, cfembed::Method::bayes_cfmp, 2),
                 demo_row(-8.0, cfembed::Method::bayes_cfmp, 2),
                 demo_row(8.0, cfembed::Method::bayes_cfmp, 2)};

  fs::path dir = test_dir() / "plots";
  fs::create_directories(dir);
  cfembed::write_plot_csvs(dir.string(), result);

  fs::path cfmp_csv = dir / "plot_cfmp.csv";
  fs::path bcfmp_csv = dir / "plot_bayes_cfmp.csv";
  REQUIRE(fs::exists(cfmp_csv));
  REQUIRE(fs::exists(bcfmp_csv));
  CHECK_FALSE(fs::exists(dir / "plot_bayes_rcfme.csv"));
  CHECK(first_line(cfmp_csv) == "alpha,mean,ci_low,ci_high,true_eta");
  CHECK(line_count(cfmp_csv) == 4);

  std::ifstream in(cfmp_csv);
  std::string line;
  std::getline(in, line);
  double prev = -std::numeric_limits<double>::infinity();
  while (std::getline(in, line)) {
    double alpha = cfembed::parse_double(line.substr(0, line.find(',')));
    CHECK(alpha > prev);
    prev = alpha;
  }
  CHECK(prev == 8.0);
}
