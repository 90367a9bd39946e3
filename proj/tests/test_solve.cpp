#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "cfembed/kernel.hpp"
#include "cfembed/solve.hpp"
#include "oracles.hpp"

using cfembed::RegularizedChol;
using cfembed::SolveConfig;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("reg_solve identity cases", "[solve]") {
  SolveConfig cfg;
  cfg.ridge = 0.0;
  Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(3, 3);
  Eigen::MatrixXd x = reg_solve(eye, cfg, eye);
  CHECK((x - eye).cwiseAbs().maxCoeff() <= 1e-14);

  cfg.ridge = 1.0;
  Eigen::VectorXd b(3);
  b << 1.0, -2.0, 3.5;
  double jitter = -1.0;
  Eigen::VectorXd y = reg_solve(eye, cfg, b, &jitter);
  CHECK(jitter == 0.0);
  CHECK((y - b / 2.0).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("rank-deficient matrix takes the jitter path", "[solve]") {
  SolveConfig cfg;
  cfg.ridge = 0.0;
  Eigen::MatrixXd ones = Eigen::MatrixXd::Ones(2, 2);
  Eigen::VectorXd b(2);
  b << 1.0, 2.0;
  double jitter = -1.0;
  Eigen::VectorXd x = reg_solve(ones, cfg, b, &jitter);
  CHECK(jitter > 0.0);
  Eigen::MatrixXd shifted = ones + jitter * Eigen::MatrixXd::Identity(2, 2);
  CHECK((shifted * x - b).norm() <= 1e-8 * b.norm());
}

TEST_CASE("factorization failure at the ceiling is a numerical error",
          "[solve]") {
  SolveConfig cfg;
  cfg.ridge = 0.0;
  Eigen::MatrixXd neg = -Eigen::MatrixXd::Identity(3, 3);
  CHECK_THROWS_AS(reg_solve(neg, cfg, Eigen::MatrixXd::Identity(3, 3)),
                  cfembed::numerical_error);
}

TEST_CASE("residual guarantee on random kernel systems", "[solve]") {
  std::mt19937_64 rng(21);
  auto spec = cfembed::KernelSpec::rbf(0.7);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    int n = 5 + static_cast<int>(rng() % 40);
    Eigen::MatrixXd pts(n, 1);
    for (int i = 0; i < n; ++i) pts(i, 0) = 3.0 * g(rng);
    Eigen::MatrixXd k = gram(spec, pts, pts);
    Eigen::MatrixXd b(n, 3);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < 3; ++j) b(i, j) = g(rng);
    SolveConfig cfg;
    cfg.ridge = (trial % 2 == 0) ? 1e-2 : 0.0;
    double jitter = -1.0;
    Eigen::MatrixXd x = reg_solve(k, cfg, b, &jitter);
    Eigen::MatrixXd shifted = k;
    shifted.diagonal().array() += cfg.ridge + jitter;
    CHECK((shifted * x - b).norm() <= 1e-8 * b.norm());
  }
}

TEST_CASE("cached factor and one-shot solve agree bitwise", "[solve]") {
  std::mt19937_64 rng(22);
  Eigen::VectorXd pts = oracles::well_spread(rng, 8, 1.0);
  auto spec = cfembed::KernelSpec::rbf(0.5);
  Eigen::MatrixXd k = gram(spec, pts, pts);
  SolveConfig cfg;
  cfg.ridge = 1e-2;
  Eigen::MatrixXd b = Eigen::MatrixXd::Random(8, 2);
  RegularizedChol chol(k, cfg);
  Eigen::MatrixXd x1 = chol.solve(b);
  Eigen::MatrixXd x2 = reg_solve(k, cfg, b);
  CHECK((x1 - x2).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("solver input validation", "[solve]") {
  SolveConfig cfg;
  CHECK_THROWS_AS(RegularizedChol(Eigen::MatrixXd::Zero(2, 3), cfg),
                  cfembed::input_error);

  Eigen::MatrixXd asym(2, 2);
  asym << 1.0, 0.5, -0.5, 1.0;
  CHECK_THROWS_AS(RegularizedChol(asym, cfg), cfembed::input_error);

  SolveConfig bad = cfg;
  bad.ridge = -1.0;
  CHECK_THROWS_AS(bad.validate(), cfembed::input_error);
  bad = cfg;
  bad.jitter_start = 0.0;
  CHECK_THROWS_AS(bad.validate(), cfembed::input_error);
  bad = cfg;
  bad.jitter_max = bad.jitter_start / 10.0;
  CHECK_THROWS_AS(bad.validate(), cfembed::input_error);
  bad = cfg;
  bad.jitter_factor = 1.0;
  CHECK_THROWS_AS(bad.validate(), cfembed::input_error);

  RegularizedChol chol(Eigen::MatrixXd::Identity(3, 3), cfg);
  CHECK_THROWS_AS(chol.solve(Eigen::MatrixXd::Zero(2, 1)),
                  cfembed::input_error);
}

TEST_CASE("degenerate sizes", "[solve]") {
  SolveConfig cfg;
  RegularizedChol empty(Eigen::MatrixXd(0, 0), cfg);
  Eigen::MatrixXd x = empty.solve(Eigen::MatrixXd(0, 4));
  CHECK(x.rows() == 0);
  CHECK(x.cols() == 4);

  RegularizedChol one(Eigen::MatrixXd::Constant(1, 1, 4.0),
                      cfg.with_ridge(1.0));
  CHECK_THAT(one.solve(Eigen::MatrixXd::Constant(1, 1, 10.0))(0, 0),
             WithinRel(2.0, 1e-14));
  CHECK(one.shift() == 1.0);

  Eigen::MatrixXd zero_rhs = Eigen::MatrixXd::Zero(1, 2);
  CHECK(one.solve(zero_rhs).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("psd square-root factor reconstructs and clamps", "[solve]") {
  std::mt19937_64 rng(23);
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd a = Eigen::MatrixXd::NullaryExpr(
      6, 6, [&](Eigen::Index, Eigen::Index) { return g(rng); });
  Eigen::MatrixXd psd = a * a.transpose();
  Eigen::MatrixXd f = cfembed::psd_sqrt_factor(psd);
  CHECK((f * f.transpose() - psd).cwiseAbs().maxCoeff() <=
        1e-12 * psd.cwiseAbs().maxCoeff());

  // Slightly indefinite inputs are clamped to their PSD part.
  Eigen::MatrixXd dipped = Eigen::MatrixXd::Zero(2, 2);
  dipped(0, 0) = 1.0;
  dipped(1, 1) = -1e-12;
  Eigen::MatrixXd fd = cfembed::psd_sqrt_factor(dipped);
  Eigen::MatrixXd rec = fd * fd.transpose();
  CHECK_THAT(rec(0, 0), WithinRel(1.0, 1e-12));
  CHECK_THAT(rec(1, 1), WithinAbs(0.0, 1e-15));

  CHECK_THROWS_AS(cfembed::psd_sqrt_factor(Eigen::MatrixXd::Zero(2, 3)),
                  cfembed::input_error);
}
