#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <optional>
#include <utility>

#include "cfembed/common.hpp"
#include "cfembed/kernel.hpp"
#include "cfembed/solve.hpp"

namespace cfembed {

// Scalar Gaussian summary of an estimator's output.  variance is clamped at
// zero; variance_raw keeps the assembled value so tests can check how far
// below zero rounding pushed it.
struct GaussianScalar {
  double mean = 0.0;
  double variance = 0.0;
  double variance_raw = 0.0;
};

// Which regression weights enter the fourth uncertainty block of the joint
// estimator: base keeps the plain ridge weights (K + lambda_f I)^{-1} y,
// nuclear substitutes the dominating-kernel weights (R + lambda_f I)^{-1} y
// used by the posterior mean.
enum class Theta4Kernel { base, nuclear };

// Inputs shared by all fusion estimators.
//   logged_x, logged_r : covariates and intermediate outcomes from the
//                        logging experiment (N rows)
//   link_r, link_y     : intermediate outcomes and noisy final outcomes from
//                        the link experiment (M rows)
//   policy_x           : covariate sample from the target policy (L rows)
// kx and kr are the covariate and intermediate-outcome kernels; rr is the
// dominating kernel used for GP priors over functions of the intermediate
// outcome (defaults to the convolution kernel over kr).
struct FusionInputs {
  Eigen::MatrixXd logged_x, logged_r;
  Eigen::MatrixXd link_r;
  Eigen::VectorXd link_y;
  Eigen::MatrixXd policy_x;
  KernelSpec kx, kr;
  std::optional<KernelSpec> rr;
  double lambda = 1e-2;
  double lambda_f = 1e-2;
  SolveConfig solve;
  Theta4Kernel theta4_kernel = Theta4Kernel::base;

  KernelSpec rr_or_default() const {
    return rr ? *rr : KernelSpec::nuclear_over(kr);
  }

  void validate(bool require_policy) const {
    kx.validate();
    kr.validate();
    rr_or_default().validate();
    if (logged_x.rows() == 0) throw input_error("FusionInputs: empty logging sample");
    if (logged_x.rows() != logged_r.rows())
      throw input_error("FusionInputs: logged_x and logged_r row counts differ");
    if (link_r.rows() == 0) throw input_error("FusionInputs: empty link sample");
    if (link_r.rows() != link_y.size())
      throw input_error("FusionInputs: link_r and link_y row counts differ");
    if (logged_r.cols() != link_r.cols())
      throw input_error("FusionInputs: logged_r and link_r dimensions differ");
    if (logged_x.cols() != kx.dim())
      throw input_error("FusionInputs: logged_x dimension does not match kx");
    if (logged_r.cols() != kr.dim())
      throw input_error("FusionInputs: logged_r dimension does not match kr");
    if (rr && rr->dim() != kr.dim())
      throw input_error("FusionInputs: rr dimension does not match kr");
    if (!(lambda >= 0.0) || !(lambda_f >= 0.0))
      throw input_error("FusionInputs: regularizers must be >= 0");
    if (require_policy) {
      if (policy_x.rows() == 0)
        throw input_error("FusionInputs: empty policy sample");
      if (policy_x.cols() != kx.dim())
        throw input_error("FusionInputs: policy_x dimension does not match kx");
    }
    solve.validate();
  }
};

// Uncertainty blocks of the joint estimator, exposed for verification.
// theta2a/theta3a pair with the policy term f, theta2b/theta3b with g;
// gp_term is the quadratic form of the policy weights through the joint
// posterior covariance.
struct BayesCfmpTerms {
  double gp_term = 0.0;
  double theta2a = 0.0, theta2b = 0.0;
  double theta3a = 0.0, theta3b = 0.0;
  double f = 0.0, g = 0.0;
};

// Precomputes everything that depends only on the logging and link samples;
// each policy sample then costs one kernel block and a few matrix-vector
// products.  All posterior variances are assembled as nonnegative
// combinations of squares: with f >= g the exact identities
//   B f - C g                    = (B - C) f + C (f - g)
//   theta_a f - theta_b g        = D f + theta_b (f - g),  D = theta_a - theta_b
// hold with B >= C, theta2a >= theta2b, theta3a >= theta3b >= 0, and each of
// the regrouped scalars is computed as a squared norm.  The naive
// differences of traces lose all significant digits once the joint gram
// factor gets ill-conditioned; this form does not.
class FusionEstimator {
 public:
  explicit FusionEstimator(const FusionInputs& in) : in_(in) {
    in_.validate(false);
    rr_kernel_ = in_.rr_or_default();
    const Eigen::MatrixXd& r1 = in_.logged_r;
    const Eigen::MatrixXd& rt = in_.link_r;

    kxx_ = RegularizedChol(gram(in_.kx, in_.logged_x, in_.logged_x),
                           in_.solve.with_ridge(in_.lambda));

    // Base-kernel blocks shared by the point estimator.
    Eigen::MatrixXd k_rr = gram(in_.kr, r1, r1);
    Eigen::MatrixXd k_rl = gram(in_.kr, r1, rt);
    kll_ = RegularizedChol(gram(in_.kr, rt, rt),
                           in_.solve.with_ridge(in_.lambda_f));
    af_ = kll_.solve(in_.link_y).col(0);
    v1_ = k_rl * af_;
    ktilde_ = k_rr - k_rl * kll_.solve(k_rl.transpose());
    ktilde_ = 0.5 * (ktilde_ + ktilde_.transpose()).eval();

    // Dominating-kernel blocks on the logged intermediate outcomes.
    rrr_ = RegularizedChol(gram(rr_kernel_, r1, r1), in_.solve.with_ridge(0.0));
    Eigen::MatrixXd r_rl = gram(rr_kernel_, r1, rt);
    Eigen::MatrixXd r_ll = gram(rr_kernel_, rt, rt);
    rll_ = RegularizedChol(r_ll, in_.solve.with_ridge(in_.lambda_f));
    wf_ = rll_.solve(in_.link_y).col(0);
    Eigen::VectorXd val = r_rl * af_;
    t2_ = k_rr * rrr_.solve(val).col(0);
    b_ = af_.dot(r_ll * af_);
    c_ = val.dot(rrr_.solve(val).col(0));

    // Joint blocks on the pooled intermediate outcomes.
    const Eigen::Index n = r1.rows(), m = rt.rows(), p = n + m;
    Eigen::MatrixXd rhat(p, r1.cols());
    rhat << r1, rt;
    khh_ = RegularizedChol(gram(in_.kr, rhat, rhat), in_.solve.with_ridge(0.0));
    Eigen::MatrixXd r_hh = gram(rr_kernel_, rhat, rhat);
    Eigen::MatrixXd r_hl = gram(rr_kernel_, rhat, rt);
    Eigen::MatrixXd r_hr = gram(rr_kernel_, rhat, r1);
    Eigen::MatrixXd k_rh = gram(in_.kr, r1, rhat);

    w3_ = k_rh * khh_.solve(r_hl * wf_).col(0);
    Eigen::VectorXd a4 =
        (in_.theta4_kernel == Theta4Kernel::base) ? af_ : wf_;
    Eigen::VectorXd th4 = khh_.solve(r_hl * a4).col(0);

    Eigen::MatrixXd rbar = r_hh - r_hl * rll_.solve(r_hl.transpose());
    rbar = 0.5 * (rbar + rbar.transpose()).eval();
    Eigen::MatrixXd fr = psd_sqrt_factor(rbar);

    Eigen::MatrixXd theta1 = khh_.solve(r_hr * rrr_.solve(k_rr));
    q1_ = fr.transpose() * theta1;

    // u u^T = R_hr (R_rr + shift I)^{-1} R_rh via the triangular factor.
    Eigen::MatrixXd u =
        rrr_.llt().matrixL().solve(r_hr.transpose()).transpose();
    Eigen::MatrixXd s = r_hh - u * u.transpose();
    s = 0.5 * (s + s.transpose()).eval();
    Eigen::MatrixXd fs = psd_sqrt_factor(s);

    theta2b_ = (u.transpose() * th4).squaredNorm();
    d2_ = (fs.transpose() * th4).squaredNorm();
    Eigen::MatrixXd ku = khh_.solve(u);
    theta3b_ = (fr.transpose() * ku).squaredNorm();
    Eigen::MatrixXd kfs = khh_.solve(fs);
    d3_ = (fr.transpose() * kfs).squaredNorm();
  }

  struct PolicyTerms {
    Eigen::VectorXd e;  // (1/L) (K_xx + lambda I)^{-1} K_{X x'} 1
    double f = 0.0, g = 0.0;
  };

  PolicyTerms policy_terms(const Eigen::MatrixXd& policy_x) const {
    if (policy_x.rows() == 0)
      throw input_error("FusionEstimator: empty policy sample");
    detail::check_query_dim(in_.kx, policy_x.cols(), "FusionEstimator");
    const double l = static_cast<double>(policy_x.rows());
    PolicyTerms t;
    Eigen::VectorXd z =
        gram(in_.kx, in_.logged_x, policy_x).rowwise().sum() / l;
    t.e = kxx_.solve(z).col(0);
    t.f = gram(in_.kx, policy_x, policy_x).sum() / (l * l);
    t.g = t.e.dot(z);
    return t;
  }

  GaussianScalar plugin(const Eigen::MatrixXd& policy_x) const {
    PolicyTerms t = policy_terms(policy_x);
    return {t.e.dot(v1_), 0.0, 0.0};
  }

  GaussianScalar cfmp(const Eigen::MatrixXd& policy_x) const {
    PolicyTerms t = policy_terms(policy_x);
    double raw = t.e.dot(ktilde_ * t.e);
    return {t.e.dot(v1_), std::max(raw, 0.0), raw};
  }

  GaussianScalar bayes_rcfme(const Eigen::MatrixXd& policy_x) const {
    PolicyTerms t = policy_terms(policy_x);
    double raw = (b_ - c_) * t.f + c_ * (t.f - t.g);
    return {t.e.dot(t2_), std::max(raw, 0.0), raw};
  }

  GaussianScalar bayes_cfmp(const Eigen::MatrixXd& policy_x,
                            BayesCfmpTerms* terms = nullptr) const {
    PolicyTerms t = policy_terms(policy_x);
    double gp = (q1_ * t.e).squaredNorm();
    double raw = gp + d2_ * t.f + theta2b_ * (t.f - t.g) + d3_ * t.f +
                 theta3b_ * (t.f - t.g);
    if (terms) {
      terms->gp_term = gp;
      terms->theta2a = d2_ + theta2b_;
      terms->theta2b = theta2b_;
      terms->theta3a = d3_ + theta3b_;
      terms->theta3b = theta3b_;
      terms->f = t.f;
      terms->g = t.g;
    }
    return {t.e.dot(w3_), std::max(raw, 0.0), raw};
  }

  Eigen::Index n() const { return in_.logged_r.rows(); }
  Eigen::Index m() const { return in_.link_r.rows(); }
  const FusionInputs& inputs() const { return in_; }
  double rcfme_f_coefficient() const { return b_; }
  double rcfme_g_coefficient() const { return c_; }

  // Jitter each factorization settled on; all zero on well-conditioned data.
  double kxx_jitter() const { return kxx_.jitter(); }
  double kll_jitter() const { return kll_.jitter(); }
  double rll_jitter() const { return rll_.jitter(); }
  double rrr_jitter() const { return rrr_.jitter(); }
  double khh_jitter() const { return khh_.jitter(); }

 private:
  FusionInputs in_;
  KernelSpec rr_kernel_;
  RegularizedChol kxx_, kll_, rll_, rrr_, khh_;
  Eigen::VectorXd af_, wf_;          // link regression weights (base / dominating)
  Eigen::VectorXd v1_, t2_, w3_;     // mean anchors for the three estimators
  Eigen::MatrixXd ktilde_;           // deflated base gram on logged outcomes
  Eigen::MatrixXd q1_;               // sqrt(Rbar)^T Theta1
  double b_ = 0.0, c_ = 0.0;
  double d2_ = 0.0, theta2b_ = 0.0;
  double d3_ = 0.0, theta3b_ = 0.0;
};

// Point estimate of the policy effect: the counterfactual embedding paired
// with the link-sample ridge regression.
inline double plugin_point(const FusionInputs& in) {
  in.validate(true);
  return FusionEstimator(in).plugin(in.policy_x).mean;
}

// Point estimate plus the GP posterior variance of the link function routed
// through the point-estimate embedding.
inline GaussianScalar cfmp(const FusionInputs& in) {
  in.validate(true);
  return FusionEstimator(in).cfmp(in.policy_x);
}

// Posterior of the policy effect when the embedding is Bayesian and the link
// regression enters as a fixed regressor.
inline GaussianScalar bayes_rcfme(const FusionInputs& in) {
  in.validate(true);
  return FusionEstimator(in).bayes_rcfme(in.policy_x);
}

// Joint posterior: Bayesian embedding and GP link posterior on the pooled
// intermediate-outcome sample.
inline GaussianScalar bayes_cfmp(const FusionInputs& in,
                                 BayesCfmpTerms* terms = nullptr) {
  in.validate(true);
  return FusionEstimator(in).bayes_cfmp(in.policy_x, terms);
}

}  // namespace cfembed
