#pragma once

#include <Eigen/Dense>
#include <utility>

#include "cfembed/common.hpp"
#include "cfembed/embedding.hpp"
#include "cfembed/kernel.hpp"
#include "cfembed/solve.hpp"

namespace cfembed {

// Gaussian posterior of the conditional mean embedding, evaluated jointly at
// query pairs (x_i, y_i).  The prior over the embedding is the GP with
// covariance kx (x) ry where ry dominates the output kernel; conditioning on
// the training pairs yields
//   mean_i  = k_{x_i X} (K_xx + lambda I)^{-1} K_yy R_yy^{-1} r_{Y y_i}
//   cov_ij  = kx(x_i, x_j) ry(y_i, y_j)
//             - [k_{x_i X} (K_xx + lambda I)^{-1} k_{X x_j}]
//               [r_{y_i Y} R_yy^{-1} r_{Y y_j}]
inline std::pair<Eigen::VectorXd, Eigen::MatrixXd> bayes_cme_posterior(
    const CMEModel& model, const Eigen::MatrixXd& qx,
    const Eigen::MatrixXd& qy) {
  if (qx.rows() != qy.rows())
    throw input_error("bayes_cme_posterior: query batch sizes differ");
  if (qx.rows() == 0)
    throw input_error("bayes_cme_posterior: empty query batch");
  detail::check_query_dim(model.kx(), qx.cols(), "bayes_cme_posterior");
  detail::check_query_dim(model.ky(), qy.cols(), "bayes_cme_posterior");
  const Eigen::Index q = qx.rows();

  Eigen::MatrixXd prior =
      gram(model.kx(), qx, qx).cwiseProduct(gram(model.ry(), qy, qy));
  if (model.n() == 0)
    return {Eigen::VectorXd::Zero(q), std::move(prior)};

  Eigen::MatrixXd kqx = gram(model.kx(), qx, model.train_x());
  Eigen::MatrixXd ax = model.kxx_factor().solve(kqx.transpose());
  Eigen::MatrixXd rqy = gram(model.ry(), qy, model.train_y());
  Eigen::MatrixXd ay = model.ryy_factor().solve(rqy.transpose());

  Eigen::VectorXd mean =
      ax.cwiseProduct(model.kyy() * ay).colwise().sum().transpose();
  Eigen::MatrixXd cov = prior - (kqx * ax).cwiseProduct(rqy * ay);
  return {std::move(mean), std::move(cov)};
}

inline std::pair<double, double> bayes_cme_posterior(
    const CMEModel& model, const Eigen::VectorXd& x,
    const Eigen::VectorXd& y) {
  auto [mean, cov] =
      bayes_cme_posterior(model, Eigen::MatrixXd(x.transpose()),
                          Eigen::MatrixXd(y.transpose()));
  return {mean[0], cov(0, 0)};
}

// Gaussian posterior of the counterfactual mean embedding: the conditional
// embedding posterior averaged over a sample x'_1..x'_m from the shifted
// input distribution.  With w = (1/m) 1^T K_{x' X} (K_xx + lambda I)^{-1},
//   mean(y)      = w K_yy R_yy^{-1} r_{Y y}
//   cov(y, y')   = f ry(y, y') - g [r_{y Y} R_yy^{-1} r_{Y y'}]
//   f            = (1/m^2) 1^T K_{x' x'} 1
//   g            = (1/m^2) 1^T K_{x' X} (K_xx + lambda I)^{-1} K_{X x'} 1
// f >= g >= 0, so the posterior variance never exceeds the averaged prior.
class EmbeddingPosterior {
 public:
  EmbeddingPosterior(CMEModel model, Eigen::MatrixXd shift_points)
      : model_(std::move(model)), shift_points_(std::move(shift_points)) {
    if (shift_points_.rows() == 0)
      throw input_error("EmbeddingPosterior: empty shift sample");
    detail::check_query_dim(model_.kx(), shift_points_.cols(),
                            "EmbeddingPosterior");
    const double m = static_cast<double>(shift_points_.rows());
    f_ = gram(model_.kx(), shift_points_, shift_points_).sum() / (m * m);
    if (model_.n() == 0) {
      w_ = Eigen::RowVectorXd(0);
      c_ = Eigen::RowVectorXd(0);
      g_ = 0.0;
      return;
    }
    Eigen::VectorXd avg =
        gram(model_.kx(), model_.train_x(), shift_points_) *
        Eigen::VectorXd::Constant(shift_points_.rows(), 1.0 / m);
    w_ = model_.kxx_factor().solve(avg).col(0).transpose();
    g_ = w_.dot(avg);
    c_ = model_.ryy_factor()
             .solve(model_.kyy() * w_.transpose())
             .col(0)
             .transpose();
  }

  const CMEModel& model() const { return model_; }
  const Eigen::MatrixXd& shift_points() const { return shift_points_; }
  const Eigen::RowVectorXd& weights() const { return w_; }
  double f_term() const { return f_; }
  double g_term() const { return g_; }

  double mean(const Eigen::VectorXd& y) const {
    if (model_.n() == 0) return 0.0;
    return c_.dot(
        gram(model_.ry(), model_.train_y(), y.transpose()).col(0));
  }

  double covariance(const Eigen::VectorXd& y, const Eigen::VectorXd& y2) const {
    double prior = f_ * kernel_eval(model_.ry(), y, y2);
    if (model_.n() == 0) return prior;
    Eigen::VectorXd ry2 =
        gram(model_.ry(), model_.train_y(), y2.transpose()).col(0);
    Eigen::VectorXd ry1 =
        gram(model_.ry(), model_.train_y(), y.transpose()).col(0);
    return prior - g_ * ry1.dot(model_.ryy_factor().solve(ry2).col(0));
  }

  double variance(const Eigen::VectorXd& y) const { return covariance(y, y); }

  // Joint posterior over a grid of output points (rows).
  std::pair<Eigen::VectorXd, Eigen::MatrixXd> on_grid(
      const Eigen::MatrixXd& ygrid) const {
    if (ygrid.rows() == 0)
      throw input_error("EmbeddingPosterior::on_grid: empty grid");
    detail::check_query_dim(model_.ky(), ygrid.cols(),
                            "EmbeddingPosterior::on_grid");
    Eigen::MatrixXd prior = f_ * gram(model_.ry(), ygrid, ygrid);
    if (model_.n() == 0)
      return {Eigen::VectorXd::Zero(ygrid.rows()), std::move(prior)};
    Eigen::MatrixXd rgy = gram(model_.ry(), ygrid, model_.train_y());
    Eigen::VectorXd mean = rgy * c_.transpose();
    Eigen::MatrixXd sol = model_.ryy_factor().solve(rgy.transpose());
    Eigen::MatrixXd cov = prior - g_ * (rgy * sol);
    return {std::move(mean), std::move(cov)};
  }

 private:
  CMEModel model_;
  Eigen::MatrixXd shift_points_;
  Eigen::RowVectorXd w_, c_;
  double f_ = 0.0, g_ = 0.0;
};

inline EmbeddingPosterior bayes_cfme_posterior(
    const CMEModel& model, const Eigen::MatrixXd& shift_points) {
  return EmbeddingPosterior(model, shift_points);
}

}  // namespace cfembed
