#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <string>

#include "cfembed/common.hpp"

namespace cfembed {

// Controls the regularized Cholesky solves used throughout the library.
// Every solve targets M + (ridge + jitter) I where ridge is the statistical
// regularizer (part of the model) and jitter is escalated only as far as the
// factorization needs to produce reliable solves.
struct SolveConfig {
  double ridge = 1e-2;
  double jitter_start = 1e-8;
  double jitter_max = 1e-2;
  double jitter_factor = 10.0;

  SolveConfig with_ridge(double r) const {
    SolveConfig c = *this;
    c.ridge = r;
    return c;
  }

  void validate() const {
    if (!(ridge >= 0.0)) throw input_error("SolveConfig: ridge must be >= 0");
    if (!(jitter_start > 0.0) || !(jitter_max >= jitter_start))
      throw input_error("SolveConfig: need 0 < jitter_start <= jitter_max");
    if (!(jitter_factor > 1.0))
      throw input_error("SolveConfig: jitter_factor must be > 1");
  }
};

namespace detail {

// Relative residual accepted by RegularizedChol::solve.  Solves that land
// above solve_tol throw; the factorization probe escalates jitter while the
// residual sits above probe_tol, leaving margin between the two.
constexpr double kProbeTol = 1e-10;
constexpr double kSolveTol = 1e-8;

// Fixed pseudo-random probe entries (splitmix64).  The probe rhs has to
// excite the small-eigenvalue directions, otherwise a barely-positive factor
// passes the probe and fails later on a generic rhs.
inline double probe_entry(std::uint64_t i) {
  std::uint64_t z = (i + 1) * 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  z ^= z >> 31;
  return 2.0 * (static_cast<double>(z >> 11) * 0x1.0p-53) - 1.0;
}

}  // namespace detail

// Cholesky factor of M + (ridge + jitter) I with automatic jitter
// escalation.  The constructor factors at jitter 0 first, then walks
// jitter_start * jitter_factor^k up to jitter_max until the factor passes a
// probe solve; solve() afterwards applies one round of iterative refinement
// and verifies the relative residual.  Solutions are deterministic: the same
// inputs always take the same escalation path.
class RegularizedChol {
 public:
  RegularizedChol() = default;

  RegularizedChol(Eigen::MatrixXd m, const SolveConfig& cfg) : m_(std::move(m)) {
    cfg.validate();
    if (m_.rows() != m_.cols())
      throw input_error("RegularizedChol: matrix must be square");
    const double scale = m_.size() > 0 ? m_.cwiseAbs().maxCoeff() : 0.0;
    if (m_.size() > 0) {
      double asym = (m_ - m_.transpose()).cwiseAbs().maxCoeff();
      if (asym > 1e-8 * std::max(scale, 1.0))
        throw input_error("RegularizedChol: matrix is not symmetric");
    }
    ridge_ = cfg.ridge;
    if (m_.rows() == 0) return;

    double jitter = 0.0;
    while (true) {
      if (try_factor(jitter)) return;
      if (jitter == 0.0) {
        jitter = cfg.jitter_start;
      } else if (jitter < cfg.jitter_max) {
        jitter = std::min(jitter * cfg.jitter_factor, cfg.jitter_max);
      } else {
        throw numerical_error(
            "RegularizedChol: factorization failed at jitter ceiling " +
            std::to_string(cfg.jitter_max) + " (n=" +
            std::to_string(m_.rows()) + ", ridge=" + std::to_string(ridge_) +
            ", diag in [" + std::to_string(m_.diagonal().minCoeff()) + ", " +
            std::to_string(m_.diagonal().maxCoeff()) + "])");
      }
    }
  }

  // Solves (M + (ridge + jitter) I) X = B.  Throws numerical_error if the
  // refined solution's relative residual exceeds 1e-8.
  Eigen::MatrixXd solve(const Eigen::MatrixXd& b) const {
    if (b.rows() != m_.rows())
      throw input_error("RegularizedChol::solve: rhs has wrong row count");
    if (m_.rows() == 0) return Eigen::MatrixXd(0, b.cols());
    double bnorm = b.norm();
    if (bnorm == 0.0) return Eigen::MatrixXd::Zero(b.rows(), b.cols());
    Eigen::MatrixXd x = llt_.solve(b);
    Eigen::MatrixXd res = b - apply(x);
    for (int pass = 0; pass < 4 && res.norm() > detail::kProbeTol * bnorm; ++pass) {
      x += llt_.solve(res);
      res = b - apply(x);
    }
    if (!(res.norm() <= detail::kSolveTol * bnorm))
      throw numerical_error("RegularizedChol::solve: residual " +
                            std::to_string(res.norm() / bnorm) +
                            " exceeds tolerance");
    return x;
  }

  double jitter() const { return jitter_; }
  double ridge() const { return ridge_; }
  double shift() const { return ridge_ + jitter_; }
  Eigen::Index size() const { return m_.rows(); }
  const Eigen::MatrixXd& matrix() const { return m_; }
  const Eigen::LLT<Eigen::MatrixXd>& llt() const { return llt_; }

 private:
  Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const {
    return m_ * x + (ridge_ + jitter_) * x;
  }

  bool try_factor(double jitter) {
    Eigen::MatrixXd shifted = m_;
    shifted.diagonal().array() += ridge_ + jitter;
    llt_.compute(shifted);
    if (llt_.info() != Eigen::Success) return false;
    jitter_ = jitter;
    // A numerically singular or severely ill-conditioned factor shows up as
    // a large or non-finite residual on the fixed probe rhs.
    Eigen::VectorXd rhs(m_.rows());
    for (Eigen::Index i = 0; i < m_.rows(); ++i)
      rhs[i] = detail::probe_entry(static_cast<std::uint64_t>(i));
    Eigen::VectorXd x = llt_.solve(rhs);
    Eigen::VectorXd res = rhs - apply(x);
    double rnorm = rhs.norm();
    if (rnorm == 0.0) return true;
    if (res.norm() > detail::kProbeTol * rnorm) {
      x += llt_.solve(res);
      res = rhs - apply(x);
    }
    return std::isfinite(res.norm()) && res.norm() <= detail::kProbeTol * rnorm;
  }

  Eigen::MatrixXd m_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  double ridge_ = 0.0;
  double jitter_ = 0.0;
};

// One-shot convenience wrapper.  Reports the jitter the factorization
// settled on through jitter_used when provided.
inline Eigen::MatrixXd reg_solve(const Eigen::MatrixXd& m, const SolveConfig& cfg,
                                 const Eigen::MatrixXd& b,
                                 double* jitter_used = nullptr) {
  RegularizedChol chol(m, cfg);
  if (jitter_used) *jitter_used = chol.jitter();
  return chol.solve(b);
}

// Symmetric square-root factor of a nominally PSD matrix: eigenvalues are
// clamped at zero, so F F^T reproduces the PSD part of the input.  Used to
// assemble posterior variances as sums of squares instead of differences of
// large traces.
inline Eigen::MatrixXd psd_sqrt_factor(const Eigen::MatrixXd& a) {
  if (a.rows() != a.cols())
    throw input_error("psd_sqrt_factor: matrix must be square");
  if (a.rows() == 0) return a;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(a);
  if (eig.info() != Eigen::Success)
    throw numerical_error("psd_sqrt_factor: eigendecomposition failed");
  Eigen::VectorXd d = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * d.asDiagonal();
}

}  // namespace cfembed
