#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <vector>

#include "cfembed/common.hpp"

namespace cfembed {

enum class KernelFamily { rbf, nuclear_rbf };

// Anisotropic squared-exponential kernel, or the kernel obtained by
// convolving that kernel with itself over Lebesgue measure on R^d.  The
// convolution kernel dominates the base one (it has a strictly larger
// diagonal and a wider profile) and is what the Gaussian-process priors in
// this library are built on; both are parameterized by the base kernel's
// lengthscales and amplitude.
//
//   rbf:          k(a, b) = amp * exp(-sum_d (a_d - b_d)^2 / (2 l_d^2))
//   nuclear_rbf:  r(a, b) = amp^2 * prod_d sqrt(pi l_d^2)
//                               * exp(-sum_d (a_d - b_d)^2 / (4 l_d^2))
struct KernelSpec {
  KernelFamily family = KernelFamily::rbf;
  Eigen::VectorXd lengthscales;
  double amplitude = 1.0;

  static KernelSpec rbf(Eigen::VectorXd ls, double amp = 1.0) {
    KernelSpec s;
    s.family = KernelFamily::rbf;
    s.lengthscales = std::move(ls);
    s.amplitude = amp;
    s.validate();
    return s;
  }

  static KernelSpec rbf(double ls, double amp = 1.0) {
    return rbf(Eigen::VectorXd::Constant(1, ls), amp);
  }

  // Convolution kernel sitting on top of a base rbf kernel.  Carries the
  // base kernel's parameters; the scale factor is applied at evaluation.
  static KernelSpec nuclear_over(const KernelSpec& base) {
    if (base.family != KernelFamily::rbf)
      throw input_error("nuclear_over: base kernel must be rbf");
    base.validate();
    KernelSpec s = base;
    s.family = KernelFamily::nuclear_rbf;
    return s;
  }

  int dim() const { return static_cast<int>(lengthscales.size()); }

  // k(x, x): amp for rbf, amp^2 * prod_d sqrt(pi) l_d for nuclear_rbf.
  double diagonal() const {
    if (family == KernelFamily::rbf) return amplitude;
    double scale = amplitude * amplitude;
    for (int d = 0; d < dim(); ++d)
      scale *= std::sqrt(M_PI) * lengthscales[d];
    return scale;
  }

  void validate() const {
    if (lengthscales.size() == 0)
      throw input_error("KernelSpec: at least one lengthscale required");
    for (int d = 0; d < dim(); ++d)
      if (!(lengthscales[d] > 0.0))
        throw input_error("KernelSpec: lengthscales must be positive");
    if (!(amplitude > 0.0))
      throw input_error("KernelSpec: amplitude must be positive");
  }
};

namespace detail {

// Per-dimension inverse denominators of the exponent: 1/(2 l^2) for the base
// kernel, 1/(4 l^2) for its self-convolution.
inline Eigen::ArrayXd exponent_weights(const KernelSpec& spec) {
  double denom = (spec.family == KernelFamily::rbf) ? 2.0 : 4.0;
  return 1.0 / (denom * spec.lengthscales.array().square());
}

inline void check_query_dim(const KernelSpec& spec, Eigen::Index dim,
                            const char* where) {
  if (dim != spec.dim())
    throw input_error(std::string(where) + ": point dimension " +
                      std::to_string(dim) + " does not match kernel dimension " +
                      std::to_string(spec.dim()));
}

}  // namespace detail

inline double kernel_eval(const KernelSpec& spec, const Eigen::VectorXd& a,
                          const Eigen::VectorXd& b) {
  spec.validate();
  detail::check_query_dim(spec, a.size(), "kernel_eval");
  detail::check_query_dim(spec, b.size(), "kernel_eval");
  const Eigen::ArrayXd w = detail::exponent_weights(spec);
  double s = ((a - b).array().square() * w).sum();
  return spec.diagonal() * std::exp(-s);
}

inline double rbf_eval(const KernelSpec& spec, const Eigen::VectorXd& a,
                       const Eigen::VectorXd& b) {
  if (spec.family != KernelFamily::rbf)
    throw input_error("rbf_eval: kernel is not rbf");
  return kernel_eval(spec, a, b);
}

inline double nuclear_rbf_eval(const KernelSpec& spec, const Eigen::VectorXd& a,
                               const Eigen::VectorXd& b) {
  if (spec.family != KernelFamily::nuclear_rbf)
    throw input_error("nuclear_rbf_eval: kernel is not nuclear_rbf");
  return kernel_eval(spec, a, b);
}

// Cross-gram matrix between two point sets (rows are points).  Entries are
// evaluated from squared differences, so gram(spec, p, p) is exactly
// symmetric in floating point.
inline Eigen::MatrixXd gram(const KernelSpec& spec, const Eigen::MatrixXd& rows,
                            const Eigen::MatrixXd& cols) {
  spec.validate();
  const Eigen::Index n = rows.rows(), m = cols.rows();
  if (n > 0) detail::check_query_dim(spec, rows.cols(), "gram");
  if (m > 0) detail::check_query_dim(spec, cols.cols(), "gram");
  const Eigen::ArrayXd w = detail::exponent_weights(spec);
  const double scale = spec.diagonal();
  const int dim = spec.dim();
  Eigen::MatrixXd g(n, m);
  for (Eigen::Index j = 0; j < m; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      double s = 0.0;
      for (int d = 0; d < dim; ++d) {
        double diff = rows(i, d) - cols(j, d);
        s += diff * diff * w[d];
      }
      g(i, j) = scale * std::exp(-s);
    }
  }
  return g;
}

// Median heuristic lengthscales: per dimension, the median of absolute
// pairwise coordinate differences over distinct index pairs.  Falls back to
// 1.0 when there are no pairs or the median is not positive (e.g. repeated
// points).
inline Eigen::VectorXd median_heuristic(const Eigen::MatrixXd& points) {
  const Eigen::Index n = points.rows();
  if (n == 0) throw input_error("median_heuristic: empty point set");
  const Eigen::Index dim = points.cols();
  if (dim == 0) throw input_error("median_heuristic: points have no coordinates");
  Eigen::VectorXd ls(dim);
  std::vector<double> diffs;
  diffs.reserve(static_cast<size_t>(n) * (n - 1) / 2);
  for (Eigen::Index d = 0; d < dim; ++d) {
    diffs.clear();
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = i + 1; j < n; ++j)
        diffs.push_back(std::abs(points(i, d) - points(j, d)));
    double med = 0.0;
    if (!diffs.empty()) {
      size_t half = diffs.size() / 2;
      std::nth_element(diffs.begin(), diffs.begin() + half, diffs.end());
      med = diffs[half];
      if (diffs.size() % 2 == 0) {
        double lower = *std::max_element(diffs.begin(), diffs.begin() + half);
        med = 0.5 * (lower + med);
      }
    }
    ls[d] = (med > 0.0) ? med : 1.0;
  }
  return ls;
}

}  // namespace cfembed
