// Command-line front end: synthetic data generation, single estimates,
// alpha sweeps, coverage calibration, and the Monte Carlo oracle.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cfembed/cfembed.hpp"

namespace {

struct RunConfig {
  std::string setting = "A";
  int n = 200;
  int m = 200;
  int l = 0;  // 0 = default min(n, 100)
  std::vector<double> alphas;
  std::string alpha_grid;
  std::string methods = "cfmp,bayes_rcfme,bayes_cfmp";
  std::string seeds = "1";
  double lambda = 1e-2;
  double lambda_f = 1e-2;
  double level = 0.95;
  long long mc_samples = 1000000;
  unsigned long long oracle_seed = 1;
  int jobs = 1;
  std::string out = ".";
  std::string theta4 = "K";
  std::string lengthscales_x, lengthscales_r;
  double amplitude = 1.0;
  std::string config_path;
};

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& s, const std::string& what) {
  try {
    size_t idx = 0;
    double v = std::stod(s, &idx);
    if (idx != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw cfembed::input_error("bad numeric value for " + what + ": '" + s + "'");
  }
}

long long to_int(const std::string& s, const std::string& what) {
  try {
    size_t idx = 0;
    long long v = std::stoll(s, &idx);
    if (idx != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw cfembed::input_error("bad integer value for " + what + ": '" + s + "'");
  }
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string part;
  std::istringstream is(s);
  while (std::getline(is, part, sep)) parts.push_back(part);
  return parts;
}

std::vector<cfembed::Method> parse_methods(const std::string& s) {
  std::vector<cfembed::Method> methods;
  for (const auto& tok : split(s, ',')) {
    auto t = trim(tok);
    if (t.empty()) continue;
    methods.push_back(cfembed::method_from_label(t));
  }
  if (methods.empty()) throw cfembed::input_error("no methods selected");
  return methods;
}

// Either a count ("50" = seeds 0..49) or an explicit comma-separated list.
std::vector<std::uint64_t> parse_seeds(const std::string& s) {
  std::vector<std::uint64_t> seeds;
  if (s.find(',') == std::string::npos) {
    long long count = to_int(trim(s), "--seeds");
    if (count <= 0) throw cfembed::input_error("--seeds count must be positive");
    for (long long i = 0; i < count; ++i)
      seeds.push_back(static_cast<std::uint64_t>(i));
    return seeds;
  }
  for (const auto& tok : split(s, ',')) {
    auto t = trim(tok);
    if (t.empty()) continue;
    long long v = to_int(t, "--seeds");
    if (v < 0) throw cfembed::input_error("seeds must be nonnegative");
    seeds.push_back(static_cast<std::uint64_t>(v));
  }
  if (seeds.empty()) throw cfembed::input_error("empty seed list");
  return seeds;
}

std::vector<double> parse_alpha_grid(const std::string& s) {
  auto parts = split(s, ':');
  if (parts.size() != 3)
    throw cfembed::input_error("--alpha-grid expects min:max:count, got '" + s +
                               "'");
  double lo = to_double(trim(parts[0]), "--alpha-grid min");
  double hi = to_double(trim(parts[1]), "--alpha-grid max");
  long long count = to_int(trim(parts[2]), "--alpha-grid count");
  if (count <= 0) throw cfembed::input_error("--alpha-grid count must be positive");
  return cfembed::alpha_grid(lo, hi, static_cast<int>(count));
}

Eigen::VectorXd parse_lengthscales(const std::string& s, const std::string& what) {
  std::vector<double> vals;
  for (const auto& tok : split(s, ',')) {
    auto t = trim(tok);
    if (t.empty()) continue;
    vals.push_back(to_double(t, what));
  }
  if (vals.empty()) throw cfembed::input_error("empty lengthscale list for " + what);
  Eigen::VectorXd v(vals.size());
  for (size_t i = 0; i < vals.size(); ++i) v[i] = vals[i];
  return v;
}

// Flat key=value config file; '#' starts a comment, flags given on the
// command line win over file values.
void apply_config_file(const std::string& path, RunConfig& cfg) {
  std::ifstream in(path);
  if (!in) throw cfembed::io_error("cannot open config file: " + path);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw cfembed::input_error("config line " + std::to_string(lineno) +
                                 " is not key=value: '" + line + "'");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    std::replace(key.begin(), key.end(), '_', '-');
    if (key == "setting") cfg.setting = value;
    else if (key == "n") cfg.n = static_cast<int>(to_int(value, key));
    else if (key == "m") cfg.m = static_cast<int>(to_int(value, key));
    else if (key == "l") cfg.l = static_cast<int>(to_int(value, key));
    else if (key == "alpha") cfg.alphas = {to_double(value, key)};
    else if (key == "alpha-grid") cfg.alpha_grid = value;
    else if (key == "methods") cfg.methods = value;
    else if (key == "seeds") cfg.seeds = value;
    else if (key == "lambda") cfg.lambda = to_double(value, key);
    else if (key == "lambda-f") cfg.lambda_f = to_double(value, key);
    else if (key == "level") cfg.level = to_double(value, key);
    else if (key == "mc-samples") cfg.mc_samples = to_int(value, key);
    else if (key == "oracle-seed")
      cfg.oracle_seed = static_cast<unsigned long long>(to_int(value, key));
    else if (key == "jobs") cfg.jobs = static_cast<int>(to_int(value, key));
    else if (key == "out") cfg.out = value;
    else if (key == "theta4") cfg.theta4 = value;
    else if (key == "lengthscales-x") cfg.lengthscales_x = value;
    else if (key == "lengthscales-r") cfg.lengthscales_r = value;
    else if (key == "amplitude") cfg.amplitude = to_double(value, key);
    else
      throw cfembed::input_error("unknown config key '" + key + "' (line " +
                                 std::to_string(lineno) + ")");
  }
}

cfembed::SweepConfig to_sweep_config(const RunConfig& cfg,
                                     const std::vector<double>& alphas) {
  cfembed::SweepConfig sc;
  sc.n = cfg.n;
  sc.m = cfg.m;
  if (cfg.l > 0) sc.l = cfg.l;
  sc.alphas = alphas;
  sc.methods = parse_methods(cfg.methods);
  sc.seeds = parse_seeds(cfg.seeds);
  sc.lambda = cfg.lambda;
  sc.lambda_f = cfg.lambda_f;
  sc.level = cfg.level;
  sc.mc_samples = cfg.mc_samples;
  sc.oracle_seed = cfg.oracle_seed;
  sc.jobs = cfg.jobs;
  sc.amplitude = cfg.amplitude;
  if (cfg.theta4 == "K") sc.theta4_kernel = cfembed::Theta4Kernel::base;
  else if (cfg.theta4 == "R") sc.theta4_kernel = cfembed::Theta4Kernel::nuclear;
  else throw cfembed::input_error("--theta4 must be K or R");
  if (!cfg.lengthscales_x.empty())
    sc.lengthscales_x = parse_lengthscales(cfg.lengthscales_x, "--lengthscales-x");
  if (!cfg.lengthscales_r.empty())
    sc.lengthscales_r = parse_lengthscales(cfg.lengthscales_r, "--lengthscales-r");
  return sc;
}

// Resolves the alpha list for a subcommand: explicit --alpha values win,
// then --alpha-grid, then the fallback.
std::vector<double> resolve_alphas(const RunConfig& cfg,
                                   const std::vector<double>& fallback) {
  if (!cfg.alphas.empty() && !cfg.alpha_grid.empty())
    throw cfembed::input_error("--alpha and --alpha-grid are mutually exclusive");
  if (!cfg.alphas.empty()) return cfg.alphas;
  if (!cfg.alpha_grid.empty()) return parse_alpha_grid(cfg.alpha_grid);
  return fallback;
}

std::filesystem::path ensure_out_dir(const std::string& out) {
  std::filesystem::path dir(out);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw cfembed::io_error("cannot create output directory: " + out);
  return dir;
}

int cmd_simulate(const RunConfig& cfg) {
  auto spec = cfembed::SettingSpec::from_label(cfg.setting.at(0));
  auto seeds = parse_seeds(cfg.seeds);
  auto alphas = resolve_alphas(cfg, {0.0});
  if (alphas.size() != 1)
    throw cfembed::input_error("simulate expects a single --alpha");
  auto [d1, d2] = cfembed::gen_logging_data(spec, cfg.n, cfg.m, seeds[0]);
  int l = cfg.l > 0 ? cfg.l : std::min(cfg.n, 100);
  auto d3 = cfembed::gen_policy_d3(spec, alphas[0], d1.u, seeds[0], l);
  auto dir = ensure_out_dir(cfg.out);
  cfembed::write_logging_csv((dir / "d1.csv").string(), d1);
  cfembed::write_link_csv((dir / "d2.csv").string(), d2);
  cfembed::write_policy_csv((dir / "d3.csv").string(), d3);
  std::cout << "wrote " << (dir / "d1.csv").string() << " (" << d1.u.size()
            << " rows), " << (dir / "d2.csv").string() << " (" << d2.r.size()
            << " rows), " << (dir / "d3.csv").string() << " (" << d3.u.size()
            << " rows)\n";
  return 0;
}

int cmd_estimate(const RunConfig& cfg) {
  auto spec = cfembed::SettingSpec::from_label(cfg.setting.at(0));
  auto seeds = parse_seeds(cfg.seeds);
  auto alphas = resolve_alphas(cfg, {0.0});
  if (alphas.size() != 1)
    throw cfembed::input_error("estimate expects a single --alpha");
  auto methods = parse_methods(cfg.methods);
  if (methods.size() != 1)
    throw cfembed::input_error("estimate expects a single --methods entry");
  auto sc = to_sweep_config(cfg, alphas);
  sc.seeds = {seeds[0]};
  auto [d1, d2] = cfembed::gen_logging_data(spec, sc.n, sc.m, seeds[0]);
  cfembed::FusionEstimator est(cfembed::make_fusion_inputs(sc, d1, d2));
  auto d3 = cfembed::gen_policy_d3(spec, alphas[0], d1.u, seeds[0],
                                   sc.effective_l());
  cfembed::GaussianScalar g;
  switch (methods[0]) {
    case cfembed::Method::plugin: g = est.plugin(d3.x()); break;
    case cfembed::Method::cfmp: g = est.cfmp(d3.x()); break;
    case cfembed::Method::bayes_rcfme: g = est.bayes_rcfme(d3.x()); break;
    case cfembed::Method::bayes_cfmp: g = est.bayes_cfmp(d3.x()); break;
  }
  auto [lo, hi] = cfembed::credible_interval(g, sc.level);
  nlohmann::ordered_json doc;
  doc["setting"] = std::string(1, spec.label());
  doc["alpha"] = alphas[0];
  doc["method"] = cfembed::method_label(methods[0]);
  doc["seed"] = seeds[0];
  doc["n"] = sc.n;
  doc["m"] = sc.m;
  doc["l"] = sc.effective_l();
  doc["level"] = sc.level;
  doc["mean"] = g.mean;
  doc["variance"] = g.variance;
  doc["ci_low"] = lo;
  doc["ci_high"] = hi;
  std::cout << doc.dump(2) << '\n';
  return 0;
}

int cmd_sweep(const RunConfig& cfg) {
  auto spec = cfembed::SettingSpec::from_label(cfg.setting.at(0));
  auto alphas = resolve_alphas(
      cfg, cfembed::alpha_grid(spec.alpha_min, spec.alpha_max, 33));
  auto sc = to_sweep_config(cfg, alphas);
  auto result = cfembed::run_sweep(spec, sc);
  auto dir = ensure_out_dir(cfg.out);
  cfembed::write_sweep_csv((dir / "sweep.csv").string(), result);
  cfembed::write_sweep_json((dir / "sweep.json").string(), result);
  cfembed::write_plot_csvs(dir.string(), result);
  std::cout << "wrote " << (dir / "sweep.csv").string() << ": "
            << result.rows.size() << " rows (" << result.failed_count()
            << " failed)\n";
  return 0;
}

int cmd_calibrate(const RunConfig& cfg) {
  auto spec = cfembed::SettingSpec::from_label(cfg.setting.at(0));
  auto alphas = resolve_alphas(
      cfg, cfembed::alpha_grid(spec.alpha_min, spec.alpha_max, 33));
  auto sc = to_sweep_config(cfg, alphas);
  auto result = cfembed::run_sweep(spec, sc);
  auto report = cfembed::coverage(result, sc.level);
  auto dir = ensure_out_dir(cfg.out);
  cfembed::write_sweep_csv((dir / "sweep.csv").string(), result);

  nlohmann::ordered_json doc;
  doc["setting"] = std::string(1, spec.label());
  doc["level"] = sc.level;
  doc["n"] = sc.n;
  doc["m"] = sc.m;
  doc["l"] = sc.effective_l();
  doc["seeds"] = sc.seeds.size();
  doc["alphas"] = alphas.size();
  doc["excluded"] = report.excluded;
  nlohmann::ordered_json per_method;
  for (const auto& [method, frac] : report.fraction) {
    nlohmann::ordered_json entry;
    entry["coverage"] = frac;
    entry["rows"] = report.counted.at(method);
    per_method[cfembed::method_label(method)] = std::move(entry);
  }
  doc["methods"] = std::move(per_method);
  std::ofstream out(dir / "calibration.json");
  if (!out)
    throw cfembed::io_error("cannot open for writing: " +
                            (dir / "calibration.json").string());
  out << doc.dump(2) << '\n';

  std::cout << "coverage at level " << sc.level << " (" << report.excluded
            << " rows excluded):\n";
  for (const auto& [method, frac] : report.fraction)
    std::cout << "  " << cfembed::method_label(method) << ": " << frac << " ("
              << report.counted.at(method) << " rows)\n";
  return 0;
}

int cmd_oracle(const RunConfig& cfg) {
  auto spec = cfembed::SettingSpec::from_label(cfg.setting.at(0));
  auto alphas = resolve_alphas(
      cfg, cfembed::alpha_grid(spec.alpha_min, spec.alpha_max, 33));
  std::vector<double> etas(alphas.size());
  cfembed::detail::parallel_for(
      static_cast<int>(alphas.size()), cfg.jobs, [&](int i) {
        etas[i] = cfembed::true_eta(spec, alphas[i], cfg.mc_samples,
                                    cfg.oracle_seed);
      });
  std::cout << "alpha,true_eta\n";
  for (size_t i = 0; i < alphas.size(); ++i)
    std::cout << cfembed::format_double(alphas[i]) << ','
              << cfembed::format_double(etas[i]) << '\n';
  return 0;
}

int run(int argc, char** argv) {
  RunConfig cfg;

  // The config file is applied before parsing so explicit flags override it.
  for (int i = 1; i < argc; ++i) {
    std::string arg = argv[i];
    if (arg == "--config" && i + 1 < argc) cfg.config_path = argv[i + 1];
    else if (arg.rfind("--config=", 0) == 0) cfg.config_path = arg.substr(9);
  }
  if (!cfg.config_path.empty()) apply_config_file(cfg.config_path, cfg);

  CLI::App app{"counterfactual policy-effect estimators with Gaussian uncertainty"};
  app.require_subcommand(1);

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--setting", cfg.setting, "benchmark setting (A or B)")
        ->check(CLI::IsMember({"A", "B"}));
    sub->add_option("--n", cfg.n, "logging sample size");
    sub->add_option("--m", cfg.m, "link sample size");
    sub->add_option("--l", cfg.l, "policy sample size (default min(n, 100))");
    sub->add_option("--alpha", cfg.alphas, "explicit policy parameter(s)");
    sub->add_option("--alpha-grid", cfg.alpha_grid,
                    "policy parameter grid min:max:count");
    sub->add_option("--methods", cfg.methods, "comma-separated method list");
    sub->add_option("--seeds", cfg.seeds, "seed count or comma-separated list");
    sub->add_option("--lambda", cfg.lambda, "embedding regularizer");
    sub->add_option("--lambda-f", cfg.lambda_f, "link regression regularizer");
    sub->add_option("--level", cfg.level, "credible interval level");
    sub->add_option("--mc-samples", cfg.mc_samples, "oracle Monte Carlo samples");
    sub->add_option("--oracle-seed", cfg.oracle_seed, "oracle stream seed");
    sub->add_option("--jobs", cfg.jobs, "worker thread count");
    sub->add_option("--out", cfg.out, "output directory");
    sub->add_option("--theta4", cfg.theta4,
                    "joint-uncertainty weight kernel (K or R)")
        ->check(CLI::IsMember({"K", "R"}));
    sub->add_option("--lengthscales-x", cfg.lengthscales_x,
                    "explicit covariate lengthscales (comma list)");
    sub->add_option("--lengthscales-r", cfg.lengthscales_r,
                    "explicit outcome lengthscales (comma list)");
    sub->add_option("--amplitude", cfg.amplitude, "kernel amplitude");
    sub->add_option("--config", cfg.config_path,
                    "flat key=value config file (flags win)");
  };

  CLI::App* simulate = app.add_subcommand("simulate", "write synthetic samples");
  CLI::App* estimate = app.add_subcommand("estimate", "one estimate as JSON");
  CLI::App* sweep = app.add_subcommand("sweep", "estimate across an alpha grid");
  CLI::App* calibrate =
      app.add_subcommand("calibrate", "coverage study across seeds");
  CLI::App* oracle = app.add_subcommand("oracle", "Monte Carlo ground truth");
  for (CLI::App* sub : {simulate, estimate, sweep, calibrate, oracle})
    add_common(sub);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  if (simulate->parsed()) return cmd_simulate(cfg);
  if (estimate->parsed()) return cmd_estimate(cfg);
  if (sweep->parsed()) return cmd_sweep(cfg);
  if (calibrate->parsed()) return cmd_calibrate(cfg);
  if (oracle->parsed()) return cmd_oracle(cfg);
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const cfembed::input_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const cfembed::numerical_error& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return 3;
  } catch (const cfembed::io_error& e) {
    std::cerr << "io error: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
