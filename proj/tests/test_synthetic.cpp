#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "cfembed/synthetic.hpp"
#include "oracles.hpp"

using cfembed::gen_logging_data;
using cfembed::gen_policy_d3;
using cfembed::Setting;
using cfembed::SettingSpec;
using cfembed::true_eta;
using Catch::Matchers::WithinAbs;

namespace {

double sample_sd(const Eigen::VectorXd& v) {
  double mu = v.mean();
  return std::sqrt((v.array() - mu).square().sum() / (v.size() - 1));
}

// Closed form for the first setting: under the policy the intermediate
// outcome is Gaussian, and E[sin Z] = sin(mu) exp(-var/2).
double eta_a_closed_form(double alpha) {
  double mu = 5.0 * (1.0 + alpha);
  double var = 4.0 * (1.0 + alpha) * (1.0 + alpha) + 0.005;
  return 2.0 * std::sin(0.5 * mu) * std::exp(-0.125 * var);
}

// Quadrature for the second setting: integrate sin(cos u + sin a) against
// the two Gaussian laws; the outcome noise contributes the usual
// exp(-noise_var/2) attenuation.
double eta_b_quadrature(double alpha) {
  auto normal_pdf = [](double x, double mu, double sd) {
    double z = (x - mu) / sd;
    return std::exp(-0.5 * z * z) / (sd * std::sqrt(2.0 * M_PI));
  };
  double mu_a = 2.0 * std::sin(alpha);
  auto inner = [&](double u) {
    return oracles::simpson(
        [&](double a) {
          return std::sin(std::cos(u) + std::sin(a)) *
                 normal_pdf(a, mu_a, 0.5);
        },
        mu_a - 2.5, mu_a + 2.5, 400);
  };
  double outer = oracles::simpson(
      [&](double u) { return inner(u) * normal_pdf(u, 5.0, 2.0); }, -5.0,
      15.0, 400);
  return 1.5 * std::exp(-0.125) * outer;
}

}  // namespace

TEST_CASE("setting descriptors", "[synthetic]") {
  SettingSpec a = SettingSpec::setting_a();
  SettingSpec b = SettingSpec::setting_b();
  CHECK(a.label() == 'A');
  CHECK(b.label() == 'B');
  CHECK(SettingSpec::from_label('b').id == Setting::B);
  CHECK(SettingSpec::from_id(Setting::A).label() == 'A');
  CHECK_THROWS_AS(SettingSpec::from_label('C'), cfembed::input_error);

  CHECK(a.reward_mean(3.0, 2.0) == 5.0);
  CHECK_THAT(b.reward_mean(3.0, 2.0),
             WithinAbs(std::cos(3.0) + std::sin(2.0), 1e-15));
  CHECK_THAT(a.link_mean(1.0), WithinAbs(2.0 * std::sin(0.5), 1e-15));
  CHECK_THAT(b.link_mean(1.0), WithinAbs(1.5 * std::sin(1.0), 1e-15));
  CHECK(a.policy_mean(0.5, 4.0) == 2.0);
  CHECK_THAT(b.policy_mean(0.5, 4.0), WithinAbs(2.0 * std::sin(0.5), 1e-15));
  CHECK(a.f_sup() == 2.0);
  CHECK(b.f_sup() == 1.5);
  CHECK(a.alpha_min == -2.0);
  CHECK(b.alpha_min == -8.0);
  CHECK(b.alpha_max == 8.0);
}

TEST_CASE("logging laws hold at scale", "[synthetic]") {
  const int n = 100000;

  SECTION("setting A") {
    auto [d1, d2] = gen_logging_data(SettingSpec::setting_a(), n, n, 11);
    CHECK_THAT(d1.u.mean(), WithinAbs(5.0, 0.05));
    CHECK_THAT(sample_sd(d1.u), WithinAbs(2.0, 0.05));
    CHECK_THAT(d1.a.mean(), WithinAbs(0.0, 0.06));
    CHECK_THAT(sample_sd(d1.a), WithinAbs(4.0, 0.07));
    CHECK_THAT(d1.r.mean(), WithinAbs(d1.u.mean() + d1.a.mean(), 0.1));
    CHECK(d2.r.minCoeff() >= -2.0);
    CHECK(d2.r.maxCoeff() <= 2.0);
    CHECK_THAT(d2.r.mean(), WithinAbs(0.0, 0.03));
    CHECK_THAT(sample_sd(d2.r), WithinAbs(2.0 / std::sqrt(3.0), 0.03));
    CHECK_THAT(d2.y.mean(), WithinAbs(0.0, 0.02));
  }

  SECTION("setting B") {
    auto [d1, d2] = gen_logging_data(SettingSpec::setting_b(), n, n, 12);
    CHECK_THAT(d1.u.mean(), WithinAbs(5.0, 0.05));
    CHECK_THAT(sample_sd(d1.a), WithinAbs(3.0, 0.06));
    CHECK_THAT(d1.r.mean(),
               WithinAbs(std::cos(5.0) * std::exp(-2.0), 0.03));
    CHECK_THAT(d2.y.mean(), WithinAbs(0.0, 0.02));
  }
}

TEST_CASE("generators are deterministic per stream", "[synthetic]") {
  SettingSpec spec = SettingSpec::setting_a();
  auto [d1a, d2a] = gen_logging_data(spec, 40, 25, 99);
  auto [d1b, d2b] = gen_logging_data(spec, 40, 25, 99);
  CHECK((d1a.u - d1b.u).cwiseAbs().maxCoeff() == 0.0);
  CHECK((d1a.a - d1b.a).cwiseAbs().maxCoeff() == 0.0);
  CHECK((d1a.r - d1b.r).cwiseAbs().maxCoeff() == 0.0);
  CHECK((d2a.r - d2b.r).cwiseAbs().maxCoeff() == 0.0);
  CHECK((d2a.y - d2b.y).cwiseAbs().maxCoeff() == 0.0);

  // Each dataset draws from its own stream: resizing one leaves the other
  // untouched, and growing a sample only appends.
  auto [d1c, d2c] = gen_logging_data(spec, 10, 25, 99);
  CHECK((d2c.r - d2a.r).cwiseAbs().maxCoeff() == 0.0);
  CHECK((d1c.u - d1a.u.head(10)).cwiseAbs().maxCoeff() == 0.0);
  CHECK((d1c.r - d1a.r.head(10)).cwiseAbs().maxCoeff() == 0.0);

  auto p1 = gen_policy_d3(spec, 0.7, d1a.u, 5);
  auto p2 = gen_policy_d3(spec, 0.7, d1a.u, 5);
  CHECK((p1.a - p2.a).cwiseAbs().maxCoeff() == 0.0);
  auto p3 = gen_policy_d3(spec, 0.7001, d1a.u, 5);
  CHECK((p1.a - p3.a).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("policy actions follow the designated laws", "[synthetic]") {
  const int big = 100000;
  SettingSpec a = SettingSpec::setting_a();
  auto [d1, d2] = gen_logging_data(a, big, 1, 13);

  auto d3a = gen_policy_d3(a, 0.0, d1.u, 13, 10000);
  CHECK(d3a.u.size() == 10000);
  CHECK((d3a.u - d1.u.head(10000)).cwiseAbs().maxCoeff() == 0.0);
  CHECK_THAT(d3a.a.mean(), WithinAbs(0.0, 0.003));
  CHECK(sample_sd(d3a.a) >= 0.04);
  CHECK(sample_sd(d3a.a) <= 0.06);

  SettingSpec b = SettingSpec::setting_b();
  auto d3b = gen_policy_d3(b, 0.0, d1.u, 13, 10000);
  CHECK_THAT(d3b.a.mean(), WithinAbs(0.0, 0.02));

  CHECK_THROWS_AS(gen_policy_d3(a, 0.0, d1.u.head(5), 13, 6),
                  cfembed::input_error);
  CHECK_THROWS_AS(gen_logging_data(a, 0, 5, 1), cfembed::input_error);
}

TEST_CASE("oracle behaviour", "[synthetic]") {
  SettingSpec a = SettingSpec::setting_a();
  SettingSpec b = SettingSpec::setting_b();

  SECTION("null policy of setting A cancels the context") {
    CHECK(std::abs(true_eta(a, -1.0, 1000000, 1)) <= 0.01);
  }

  SECTION("bounded by the link supremum") {
    for (double alpha : {-2.0, -1.3, 0.0, 0.9, 2.0}) {
      CHECK(std::abs(true_eta(a, alpha, 100000, 1)) <= a.f_sup());
      CHECK(std::abs(true_eta(b, alpha, 100000, 1)) <= b.f_sup());
    }
  }

  SECTION("seed stability") {
    for (double alpha : {-1.0, 0.5}) {
      double e1 = true_eta(a, alpha, 1000000, 1);
      double e2 = true_eta(a, alpha, 1000000, 2);
      CHECK_THAT(e1, WithinAbs(e2, 0.01));
    }
  }

  SECTION("matches the closed form in setting A") {
    for (double alpha : {-1.5, -1.0, -0.5, 0.4}) {
      CHECK_THAT(true_eta(a, alpha, 1000000, 1),
                 WithinAbs(eta_a_closed_form(alpha), 0.01));
    }
  }

  SECTION("matches quadrature in setting B") {
    for (double alpha : {-2.0, 0.7, 1.3}) {
      CHECK_THAT(true_eta(b, alpha, 1000000, 1),
                 WithinAbs(eta_b_quadrature(alpha), 0.01));
    }
  }

  SECTION("input validation") {
    CHECK_THROWS_AS(true_eta(a, 0.0, 0, 1), cfembed::input_error);
  }
}
