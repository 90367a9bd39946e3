#pragma once

#include <Eigen/Dense>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <tuple>
#include <utility>
#include <vector>

#include "cfembed/common.hpp"
#include "cfembed/estimators.hpp"
#include "cfembed/kernel.hpp"
#include "cfembed/synthetic.hpp"

namespace cfembed {

// Standard normal quantile via the PPND16 rational approximation (Wichura's
// algorithm AS 241); absolute error is far below the 1e-8 this library
// requires.
inline double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0))
    throw input_error("normal_quantile: p must lie strictly in (0, 1)");
  const double q = p - 0.5;
  if (std::abs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    return q *
           (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r +
                 6.7265770927008700853e4) * r + 4.5921953931549871457e4) * r +
               1.3731693765509461125e4) * r + 1.9715909503065514427e3) * r +
             1.3314166789178437745e2) * r + 3.3871328727963666080e0) /
           (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r +
                 3.9307895800092710610e4) * r + 2.1213794301586595867e4) * r +
               5.3941960214247511077e3) * r + 6.8718700749205790830e2) * r +
             4.2313330701600911252e1) * r + 1.0);
  }
  double r = (q < 0.0) ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double z;
  if (r <= 5.0) {
    r -= 1.6;
    z = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
              2.41780725177450611770e-1) * r + 1.27045825245236838258e0) * r +
            3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r +
          4.63033784615654529590e0) * r + 1.42343711074968357734e0) /
        (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
              1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
            6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r +
          2.05319162663775882187e0) * r + 1.0);
  } else {
    r -= 5.0;
    z = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
              1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
            2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r +
          5.46378491116411436990e0) * r + 6.65790464350110377720e0) /
        (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
              1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
            1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
          5.99832206555887937690e-1) * r + 1.0);
  }
  return (q < 0.0) ? -z : z;
}

// Central credible interval of a Gaussian summary.
inline std::pair<double, double> credible_interval(const GaussianScalar& g,
                                                   double level) {
  if (!(level > 0.0 && level < 1.0))
    throw input_error("credible_interval: level must lie strictly in (0, 1)");
  const double z = normal_quantile(0.5 + 0.5 * level);
  const double half = z * std::sqrt(std::max(g.variance, 0.0));
  return {g.mean - half, g.mean + half};
}

enum class Method { plugin, cfmp, bayes_rcfme, bayes_cfmp };

inline std::string method_label(Method m) {
  switch (m) {
    case Method::plugin: return "plugin";
    case Method::cfmp: return "cfmp";
    case Method::bayes_rcfme: return "bayes_rcfme";
    case Method::bayes_cfmp: return "bayes_cfmp";
  }
  throw input_error("method_label: unknown method");
}

inline Method method_from_label(const std::string& label) {
  if (label == "plugin") return Method::plugin;
  if (label == "cfmp") return Method::cfmp;
  if (label == "bayes_rcfme") return Method::bayes_rcfme;
  if (label == "bayes_cfmp") return Method::bayes_cfmp;
  throw input_error("method_from_label: unknown method '" + label + "'");
}

struct SweepRow {
  char setting = 'A';
  double alpha = 0.0;
  Method method = Method::cfmp;
  std::uint64_t seed = 0;
  double mean = 0.0;
  double variance = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double true_eta = 0.0;
  bool ok = true;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  double level = 0.95;

  int failed_count() const {
    int n = 0;
    for (const auto& r : rows) n += r.ok ? 0 : 1;
    return n;
  }
};

inline std::vector<double> alpha_grid(double lo, double hi, int count) {
  if (count <= 0) throw input_error("alpha_grid: count must be positive");
  if (count == 1) return {lo};
  if (!(hi >= lo)) throw input_error("alpha_grid: hi must be >= lo");
  std::vector<double> g(count);
  for (int i = 0; i < count; ++i)
    g[i] = lo + (hi - lo) * static_cast<double>(i) / (count - 1);
  return g;
}

// Full experiment configuration.  Lengthscales default to the median
// heuristic computed per seed; l defaults to min(n, 100) logged contexts.
struct SweepConfig {
  int n = 200;
  int m = 200;
  std::optional<int> l;
  std::vector<double> alphas;  // empty = 33-point grid over the setting's range
  std::vector<Method> methods = {Method::cfmp, Method::bayes_rcfme,
                                 Method::bayes_cfmp};
  std::vector<std::uint64_t> seeds = {0};
  double lambda = 1e-2;
  double lambda_f = 1e-2;
  double level = 0.95;
  std::int64_t mc_samples = 1000000;
  std::uint64_t oracle_seed = 1;
  std::optional<Eigen::VectorXd> lengthscales_x, lengthscales_r;
  double amplitude = 1.0;
  SolveConfig solve;
  Theta4Kernel theta4_kernel = Theta4Kernel::base;
  int jobs = 1;

  int effective_l() const { return l ? *l : std::min(n, 100); }

  void validate() const {
    if (n <= 0 || m <= 0) throw input_error("SweepConfig: n and m must be positive");
    if (effective_l() <= 0 || effective_l() > n)
      throw input_error("SweepConfig: l must lie in [1, n]");
    if (methods.empty()) throw input_error("SweepConfig: no methods selected");
    if (seeds.empty()) throw input_error("SweepConfig: no seeds");
    if (!(level > 0.0 && level < 1.0))
      throw input_error("SweepConfig: level must lie strictly in (0, 1)");
    if (mc_samples <= 0)
      throw input_error("SweepConfig: mc_samples must be positive");
    if (!(lambda >= 0.0) || !(lambda_f >= 0.0))
      throw input_error("SweepConfig: regularizers must be >= 0");
    if (!(amplitude > 0.0))
      throw input_error("SweepConfig: amplitude must be positive");
    if (jobs <= 0) throw input_error("SweepConfig: jobs must be positive");
    solve.validate();
  }
};

namespace detail {

template <typename F>
void parallel_for(int count, int jobs, F&& body) {
  jobs = std::max(1, std::min(jobs, count));
  if (jobs == 1) {
    for (int i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(jobs);
  for (int t = 0; t < jobs; ++t)
    pool.emplace_back([&] {
      for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) body(i);
    });
  for (auto& th : pool) th.join();
}

inline KernelSpec sweep_kernel(const std::optional<Eigen::VectorXd>& explicit_ls,
                               const Eigen::MatrixXd& points, double amplitude) {
  Eigen::VectorXd ls = explicit_ls ? *explicit_ls : median_heuristic(points);
  return KernelSpec::rbf(std::move(ls), amplitude);
}

}  // namespace detail

// Assembles estimator inputs from drawn samples under a sweep configuration:
// median-heuristic (or explicit) lengthscales, with the intermediate-outcome
// kernel's scale taken from the pooled logged and link outcomes.
inline FusionInputs make_fusion_inputs(const SweepConfig& cfg,
                                       const LoggingData& d1,
                                       const LinkData& d2) {
  FusionInputs in;
  in.logged_x = d1.x();
  in.logged_r = d1.r_mat();
  in.link_r = d2.r_mat();
  in.link_y = d2.y;
  in.kx = detail::sweep_kernel(cfg.lengthscales_x, in.logged_x, cfg.amplitude);
  Eigen::MatrixXd pooled_r(in.logged_r.rows() + in.link_r.rows(),
                           in.logged_r.cols());
  pooled_r << in.logged_r, in.link_r;
  in.kr = detail::sweep_kernel(cfg.lengthscales_r, pooled_r, cfg.amplitude);
  in.lambda = cfg.lambda;
  in.lambda_f = cfg.lambda_f;
  in.solve = cfg.solve;
  in.theta4_kernel = cfg.theta4_kernel;
  return in;
}

// One experiment: for every seed, draw the three samples, fit the
// estimators, and evaluate them across the alpha grid against the Monte
// Carlo ground truth.  Rows come out ordered by (alpha, method, seed) and
// are deterministic for a fixed config regardless of the job count; a seed
// whose estimator construction fails contributes rows marked failed rather
// than aborting the sweep.
inline SweepResult run_sweep(const SettingSpec& spec, const SweepConfig& cfg) {
  cfg.validate();
  const std::vector<double> alphas =
      cfg.alphas.empty() ? alpha_grid(spec.alpha_min, spec.alpha_max, 33)
                         : cfg.alphas;
  const int na = static_cast<int>(alphas.size());
  const int nm = static_cast<int>(cfg.methods.size());
  const int ns = static_cast<int>(cfg.seeds.size());
  const int l = cfg.effective_l();

  std::vector<double> etas(na);
  detail::parallel_for(na, cfg.jobs, [&](int ai) {
    etas[ai] = true_eta(spec, alphas[ai], cfg.mc_samples, cfg.oracle_seed);
  });

  // per_seed[si][ai * nm + mi]
  std::vector<std::vector<SweepRow>> per_seed(
      ns, std::vector<SweepRow>(static_cast<size_t>(na) * nm));
  detail::parallel_for(ns, cfg.jobs, [&](int si) {
    const std::uint64_t seed = cfg.seeds[si];
    auto& rows = per_seed[si];
    for (int ai = 0; ai < na; ++ai)
      for (int mi = 0; mi < nm; ++mi) {
        SweepRow& row = rows[static_cast<size_t>(ai) * nm + mi];
        row.setting = spec.label();
        row.alpha = alphas[ai];
        row.method = cfg.methods[mi];
        row.seed = seed;
        row.true_eta = etas[ai];
        row.mean = row.variance = row.ci_low = row.ci_high =
            std::numeric_limits<double>::quiet_NaN();
        row.ok = false;
      }

    std::optional<FusionEstimator> est;
    LoggingData d1;
    try {
      LinkData d2;
      std::tie(d1, d2) = gen_logging_data(spec, cfg.n, cfg.m, seed);
      est.emplace(make_fusion_inputs(cfg, d1, d2));
    } catch (const std::exception&) {
      return;  // rows stay failed
    }

    for (int ai = 0; ai < na; ++ai) {
      PolicyData d3;
      try {
        d3 = gen_policy_d3(spec, alphas[ai], d1.u, seed, l);
      } catch (const std::exception&) {
        continue;
      }
      for (int mi = 0; mi < nm; ++mi) {
        SweepRow& row = rows[static_cast<size_t>(ai) * nm + mi];
        try {
          GaussianScalar g;
          switch (cfg.methods[mi]) {
            case Method::plugin: g = est->plugin(d3.x()); break;
            case Method::cfmp: g = est->cfmp(d3.x()); break;
            case Method::bayes_rcfme: g = est->bayes_rcfme(d3.x()); break;
            case Method::bayes_cfmp: g = est->bayes_cfmp(d3.x()); break;
          }
          auto [lo, hi] = credible_interval(g, cfg.level);
          row.mean = g.mean;
          row.variance = g.variance;
          row.ci_low = lo;
          row.ci_high = hi;
          row.ok = true;
        } catch (const std::exception&) {
          // row stays failed
        }
      }
    }
  });

  SweepResult result;
  result.level = cfg.level;
  result.rows.reserve(static_cast<size_t>(na) * nm * ns);
  for (int ai = 0; ai < na; ++ai)
    for (int mi = 0; mi < nm; ++mi)
      for (int si = 0; si < ns; ++si)
        result.rows.push_back(per_seed[si][static_cast<size_t>(ai) * nm + mi]);
  return result;
}

// Per-method fraction of successful rows whose central interval at `level`
// (recomputed from mean and variance) contains the ground truth.  Failed
// rows are excluded and counted.
struct CoverageReport {
  std::map<Method, double> fraction;
  std::map<Method, int> counted;
  int excluded = 0;
};

inline CoverageReport coverage(const SweepResult& result, double level) {
  if (result.rows.empty()) throw input_error("coverage: empty sweep result");
  if (!(level > 0.0 && level < 1.0))
    throw input_error("coverage: level must lie strictly in (0, 1)");
  const double z = normal_quantile(0.5 + 0.5 * level);
  CoverageReport report;
  std::map<Method, int> hits;
  for (const auto& row : result.rows) {
    if (!row.ok) {
      ++report.excluded;
      continue;
    }
    const double half = z * std::sqrt(std::max(row.variance, 0.0));
    const bool hit = row.true_eta >= row.mean - half &&
                     row.true_eta <= row.mean + half;
    ++report.counted[row.method];
    hits[row.method] += hit ? 1 : 0;
  }
  for (const auto& [method, count] : report.counted)
    report.fraction[method] =
        static_cast<double>(hits[method]) / static_cast<double>(count);
  return report;
}

}  // namespace cfembed
