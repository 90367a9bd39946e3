#pragma once

#include <Eigen/Dense>
#include <bit>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <utility>

#include "cfembed/common.hpp"

namespace cfembed {

enum class Setting { A, B };

// One synthetic benchmark configuration.  The generative story, shared by
// both settings:
//   context      u  ~ Normal(context_mean, context_sd)
//   logged action a | u  (setting-specific, see action_draw)
//   intermediate r = reward_mean(u, a) + reward_noise * Normal(0, 1)
//   link sample  r~ ~ Uniform(link_low, link_high),
//                y = link_mean(r~) + link_noise * Normal(0, 1)
//   target action a' = policy_mean(alpha, u) + policy_noise * Normal(0, 1)
// The estimand is eta(alpha) = E[link_mean(r)] under the target policy.
struct SettingSpec {
  Setting id = Setting::A;
  double context_mean = 5.0;
  double context_sd = 2.0;
  double action_scale = 4.0;
  double reward_noise = 0.05;
  double link_low = -2.0;
  double link_high = 2.0;
  double link_noise = 0.05;
  double policy_noise = 0.05;
  double alpha_min = -2.0;
  double alpha_max = 2.0;

  static SettingSpec setting_a() { return SettingSpec{}; }

  static SettingSpec setting_b() {
    SettingSpec s;
    s.id = Setting::B;
    s.action_scale = 3.0;
    s.reward_noise = 0.5;
    s.link_low = -2.0;
    s.link_high = 2.0;
    s.link_noise = 0.2;
    s.policy_noise = 0.5;
    s.alpha_min = -8.0;
    s.alpha_max = 8.0;
    return s;
  }

  static SettingSpec from_id(Setting which) {
    return which == Setting::A ? setting_a() : setting_b();
  }

  static SettingSpec from_label(char label) {
    if (label == 'A' || label == 'a') return setting_a();
    if (label == 'B' || label == 'b') return setting_b();
    throw input_error("SettingSpec: unknown setting label");
  }

  char label() const { return id == Setting::A ? 'A' : 'B'; }

  double reward_mean(double u, double a) const {
    return id == Setting::A ? u + a : std::cos(u) + std::sin(a);
  }

  // True link function f, also the conditional mean of y given r~.
  double link_mean(double r) const {
    return id == Setting::A ? 2.0 * std::sin(0.5 * r) : 1.5 * std::sin(r);
  }

  double policy_mean(double alpha, double u) const {
    return id == Setting::A ? alpha * u : 2.0 * std::sin(alpha);
  }

  double f_sup() const { return id == Setting::A ? 2.0 : 1.5; }
};

// Independent deterministic random streams, one per dataset role, so that
// e.g. regenerating the logging data with a different size leaves the link
// data untouched.
enum class StreamId : std::uint32_t { d1 = 1, d2 = 2, d3 = 3, oracle = 4 };

// extra carries per-call state such as the bit pattern of alpha, keeping
// policy draws independent across grid points.
inline std::mt19937_64 make_rng(std::uint64_t seed, StreamId stream,
                                std::uint64_t extra = 0) {
  std::seed_seq seq{
      static_cast<std::uint32_t>(seed & 0xffffffffu),
      static_cast<std::uint32_t>(seed >> 32),
      static_cast<std::uint32_t>(stream),
      static_cast<std::uint32_t>(extra & 0xffffffffu),
      static_cast<std::uint32_t>(extra >> 32),
  };
  return std::mt19937_64(seq);
}

// Logging experiment: contexts, logged actions, intermediate outcomes.
struct LoggingData {
  Eigen::VectorXd u, a, r;

  Eigen::MatrixXd x() const {
    Eigen::MatrixXd m(u.size(), 2);
    m.col(0) = u;
    m.col(1) = a;
    return m;
  }
  Eigen::MatrixXd r_mat() const { return r; }
};

// Link experiment: designed intermediate outcomes and noisy final outcomes.
struct LinkData {
  Eigen::VectorXd r, y;
  Eigen::MatrixXd r_mat() const { return r; }
};

// Covariate sample drawn from the target policy at a fixed alpha.
struct PolicyData {
  Eigen::VectorXd u, a;
  Eigen::MatrixXd x() const {
    Eigen::MatrixXd m(u.size(), 2);
    m.col(0) = u;
    m.col(1) = a;
    return m;
  }
};

namespace detail {

inline double action_draw(const SettingSpec& spec, std::mt19937_64& rng) {
  std::normal_distribution<double> std_normal(0.0, 1.0);
  return spec.action_scale * std_normal(rng);
}

}  // namespace detail

// Draws the logging sample (n rows) and link sample (m rows) from their own
// streams.  Row i of each sample depends only on rows < i's draws, so
// shrinking n or m truncates rather than reshuffles.
inline std::pair<LoggingData, LinkData> gen_logging_data(
    const SettingSpec& spec, int n, int m, std::uint64_t seed) {
  if (n <= 0 || m <= 0)
    throw input_error("gen_logging_data: sample sizes must be positive");
  LoggingData d1;
  d1.u.resize(n);
  d1.a.resize(n);
  d1.r.resize(n);
  {
    auto rng = make_rng(seed, StreamId::d1);
    std::normal_distribution<double> std_normal(0.0, 1.0);
    for (int i = 0; i < n; ++i) {
      d1.u[i] = spec.context_mean + spec.context_sd * std_normal(rng);
      d1.a[i] = detail::action_draw(spec, rng);
      d1.r[i] = spec.reward_mean(d1.u[i], d1.a[i]) +
                spec.reward_noise * std_normal(rng);
    }
  }
  LinkData d2;
  d2.r.resize(m);
  d2.y.resize(m);
  {
    auto rng = make_rng(seed, StreamId::d2);
    std::normal_distribution<double> std_normal(0.0, 1.0);
    std::uniform_real_distribution<double> unif(spec.link_low, spec.link_high);
    for (int i = 0; i < m; ++i) {
      d2.r[i] = unif(rng);
      d2.y[i] = spec.link_mean(d2.r[i]) + spec.link_noise * std_normal(rng);
    }
  }
  return {std::move(d1), std::move(d2)};
}

// Draws target-policy actions for the first `subsample` logged contexts (all
// of them when unset).  Alpha is folded into the stream so each grid point
// gets independent action noise.
inline PolicyData gen_policy_d3(const SettingSpec& spec, double alpha,
                                const Eigen::VectorXd& logged_u,
                                std::uint64_t seed,
                                std::optional<int> subsample = std::nullopt) {
  int l = subsample ? *subsample : static_cast<int>(logged_u.size());
  if (l <= 0) throw input_error("gen_policy_d3: subsample must be positive");
  if (l > logged_u.size())
    throw input_error("gen_policy_d3: subsample exceeds logged sample size");
  PolicyData d3;
  d3.u = logged_u.head(l);
  d3.a.resize(l);
  auto rng = make_rng(seed, StreamId::d3, std::bit_cast<std::uint64_t>(alpha));
  std::normal_distribution<double> std_normal(0.0, 1.0);
  for (int i = 0; i < l; ++i)
    d3.a[i] = spec.policy_mean(alpha, d3.u[i]) +
              spec.policy_noise * std_normal(rng);
  return d3;
}

// Monte Carlo estimate of eta(alpha) = E[f(r)] under the target policy,
// integrating over fresh contexts, policy actions, and reward noise.  The
// standard error is bounded by f_sup / sqrt(mc_samples).
inline double true_eta(const SettingSpec& spec, double alpha,
                       std::int64_t mc_samples, std::uint64_t seed) {
  if (mc_samples <= 0)
    throw input_error("true_eta: mc_samples must be positive");
  auto rng =
      make_rng(seed, StreamId::oracle, std::bit_cast<std::uint64_t>(alpha));
  std::normal_distribution<double> std_normal(0.0, 1.0);
  double acc = 0.0;
  for (std::int64_t i = 0; i < mc_samples; ++i) {
    double u = spec.context_mean + spec.context_sd * std_normal(rng);
    double a = spec.policy_mean(alpha, u) + spec.policy_noise * std_normal(rng);
    double r = spec.reward_mean(u, a) + spec.reward_noise * std_normal(rng);
    acc += spec.link_mean(r);
  }
  return acc / static_cast<double>(mc_samples);
}

}  // namespace cfembed
