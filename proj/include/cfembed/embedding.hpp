#pragma once

#include <Eigen/Dense>
#include <utility>

#include "cfembed/common.hpp"
#include "cfembed/kernel.hpp"
#include "cfembed/solve.hpp"

namespace cfembed {

// A kernel mean embedding represented by weights over anchor points:
// mu(.) = sum_i weights_i k(anchor_i, .).
struct WeightedEmbedding {
  Eigen::VectorXd weights;
  Eigen::MatrixXd anchor_points;
  KernelSpec kernel;

  double evaluate(const Eigen::VectorXd& point) const {
    return (gram(kernel, anchor_points, point.transpose()).col(0))
        .dot(weights);
  }

  Eigen::VectorXd evaluate(const Eigen::MatrixXd& points) const {
    return gram(kernel, points, anchor_points) * weights;
  }
};

// Kernel ridge regression model of the conditional mean embedding of y
// given x.  Owns the training data, the input-side factorization of
// K_xx + lambda I, and the output-side gram matrices shared by the Bayesian
// posteriors: K_yy under the base output kernel and the factorization of
// R_yy under the dominating (convolution) kernel.
class CMEModel {
 public:
  CMEModel(Eigen::MatrixXd train_x, Eigen::MatrixXd train_y, KernelSpec kx,
           KernelSpec ky, SolveConfig solve)
      : CMEModel(std::move(train_x), std::move(train_y), std::move(kx),
                 std::move(ky), KernelSpec(), std::move(solve), true) {}

  // ry is normally the convolution kernel over ky; tests exercise other
  // choices (e.g. ry == ky) through this constructor.
  CMEModel(Eigen::MatrixXd train_x, Eigen::MatrixXd train_y, KernelSpec kx,
           KernelSpec ky, KernelSpec ry, SolveConfig solve)
      : CMEModel(std::move(train_x), std::move(train_y), std::move(kx),
                 std::move(ky), std::move(ry), std::move(solve), false) {}

  // Prior-only model (no training data); posteriors reduce to the GP prior.
  static CMEModel prior(int xdim, int ydim, KernelSpec kx, KernelSpec ky,
                        SolveConfig solve) {
    return CMEModel(Eigen::MatrixXd(0, xdim), Eigen::MatrixXd(0, ydim),
                    std::move(kx), std::move(ky), std::move(solve));
  }

  Eigen::Index n() const { return train_x_.rows(); }
  const Eigen::MatrixXd& train_x() const { return train_x_; }
  const Eigen::MatrixXd& train_y() const { return train_y_; }
  const KernelSpec& kx() const { return kx_; }
  const KernelSpec& ky() const { return ky_; }
  const KernelSpec& ry() const { return ry_; }
  double lambda() const { return kxx_.ridge(); }
  const RegularizedChol& kxx_factor() const { return kxx_; }
  const RegularizedChol& ryy_factor() const { return ryy_; }
  const Eigen::MatrixXd& kyy() const { return kyy_; }

 private:
  CMEModel(Eigen::MatrixXd train_x, Eigen::MatrixXd train_y, KernelSpec kx,
           KernelSpec ky, KernelSpec ry, SolveConfig solve, bool derive_ry)
      : train_x_(std::move(train_x)),
        train_y_(std::move(train_y)),
        kx_(std::move(kx)),
        ky_(std::move(ky)),
        ry_(derive_ry ? KernelSpec::nuclear_over(ky_) : std::move(ry)) {
    kx_.validate();
    ky_.validate();
    ry_.validate();
    if (train_x_.rows() != train_y_.rows())
      throw input_error("CMEModel: train_x and train_y row counts differ");
    if (train_x_.rows() > 0 && train_x_.cols() != kx_.dim())
      throw input_error("CMEModel: train_x dimension does not match kx");
    if (train_y_.rows() > 0 && train_y_.cols() != ky_.dim())
      throw input_error("CMEModel: train_y dimension does not match ky");
    if (ry_.dim() != ky_.dim())
      throw input_error("CMEModel: ry dimension does not match ky");
    kxx_ = RegularizedChol(gram(kx_, train_x_, train_x_), solve);
    kyy_ = gram(ky_, train_y_, train_y_);
    // The output-side gram is inverted without a statistical ridge; jitter
    // alone keeps it factorable.
    ryy_ = RegularizedChol(gram(ry_, train_y_, train_y_), solve.with_ridge(0.0));
  }

  Eigen::MatrixXd train_x_, train_y_;
  KernelSpec kx_, ky_, ry_;
  RegularizedChol kxx_;
  RegularizedChol ryy_;
  Eigen::MatrixXd kyy_;
};

inline CMEModel fit_cme(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                        const KernelSpec& kx, const KernelSpec& ky,
                        const SolveConfig& solve) {
  if (x.rows() == 0) throw input_error("fit_cme: empty training set");
  return CMEModel(x, y, kx, ky, solve);
}

// Point-estimate conditional mean embedding at x: weights
// (K_xx + lambda I)^{-1} k_x anchored at the training outputs.
inline WeightedEmbedding cme_weights(const CMEModel& model,
                                     const Eigen::VectorXd& x) {
  detail::check_query_dim(model.kx(), x.size(), "cme_weights");
  Eigen::MatrixXd kxq = gram(model.kx(), model.train_x(), x.transpose());
  WeightedEmbedding e;
  e.weights = model.kxx_factor().solve(kxq).col(0);
  e.anchor_points = model.train_y();
  e.kernel = model.ky();
  return e;
}

// Point-estimate counterfactual mean embedding: the conditional embedding
// averaged over a sample from the shifted input distribution.
inline WeightedEmbedding cfme(const CMEModel& model,
                              const Eigen::MatrixXd& shift_points) {
  if (shift_points.rows() == 0)
    throw input_error("cfme: empty shift sample");
  detail::check_query_dim(model.kx(), shift_points.cols(), "cfme");
  Eigen::MatrixXd kxs = gram(model.kx(), model.train_x(), shift_points);
  Eigen::VectorXd avg =
      kxs * Eigen::VectorXd::Constant(shift_points.rows(),
                                      1.0 / shift_points.rows());
  WeightedEmbedding e;
  e.weights = model.kxx_factor().solve(avg).col(0);
  e.anchor_points = model.train_y();
  e.kernel = model.ky();
  return e;
}

// <mu, f> for a function known by its values at the embedding's anchors.
inline double embedding_expectation(const WeightedEmbedding& embedding,
                                    const Eigen::VectorXd& f_at_anchors) {
  if (f_at_anchors.size() != embedding.weights.size())
    throw input_error(
        "embedding_expectation: f values do not match anchor count");
  return embedding.weights.dot(f_at_anchors);
}

}  // namespace cfembed
