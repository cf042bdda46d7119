// hetreg: data generation, grid fits, theory tables, Monte-Carlo comparisons,
// the HAR pipeline and the Figure-3 toy experiment.

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "hetreg/domain.hpp"
#include "hetreg/error.hpp"
#include "hetreg/gridfit.hpp"
#include "hetreg/harness.hpp"
#include "hetreg/io.hpp"
#include "hetreg/rng.hpp"
#include "hetreg/regprofile.hpp"
#include "hetreg/theory.hpp"

namespace fs = std::filesystem;
using hetreg::io::json;

namespace {

constexpr int kConfigError = 2;
constexpr int kSolverError = 3;

// Options of one subcommand that may also come from the JSON config file.
// Keys are the long flag names with '-' replaced by '_'.
class Options {
 public:
  explicit Options(CLI::App* app) : app_(app) {
    app_->add_option("--config", config_path_, "JSON config file; flags override its values");
  }

  template <typename T>
  CLI::Option* add(const std::string& name, T& target, const std::string& help) {
    CLI::Option* opt = app_->add_option("--" + name, target, help)->capture_default_str();
    register_key(name, opt, [&target](const json& j) { target = j.get<T>(); });
    return opt;
  }

  CLI::Option* flag(const std::string& name, bool& target, const std::string& help) {
    CLI::Option* opt = app_->add_flag("--" + name, target, help);
    register_key(name, opt, [&target](const json& j) { target = j.get<bool>(); });
    return opt;
  }

  // Fills every option that was not given on the command line from the config file.
  void apply_config() {
    if (config_path_.empty()) return;
    json j;
    try {
      j = json::parse(hetreg::io::read_text(config_path_));
    } catch (const json::parse_error& e) {
      throw hetreg::ContractViolation(fmt::format("config '{}': {}", config_path_, e.what()));
    }
    if (!j.is_object()) throw hetreg::ContractViolation("config must be a JSON object");
    for (const auto& [key, value] : j.items()) {
      auto it = keys_.find(key);
      if (it == keys_.end()) {
        throw hetreg::ContractViolation(fmt::format("unknown config key '{}' for '{}'", key, app_->get_name()));
      }
      if (it->second.opt->count() > 0) continue;
      try {
        it->second.set(value);
      } catch (const json::exception& e) {
        throw hetreg::ContractViolation(fmt::format("config key '{}': {}", key, e.what()));
      }
      given_.insert(key);
    }
  }

  bool given(const std::string& name) const {
    return given_.count(name) > 0 || keys_.at(name).opt->count() > 0;
  }

 private:
  struct Key {
    CLI::Option* opt;
    std::function<void(const json&)> set;
  };

  void register_key(std::string name, CLI::Option* opt, std::function<void(const json&)> set) {
    for (char& c : name) {
      if (c == '-') c = '_';
    }
    keys_[name] = {opt, std::move(set)};
  }

  CLI::App* app_;
  std::string config_path_;
  std::map<std::string, Key> keys_;
  std::set<std::string> given_;
};

std::uint64_t resolve_seed(const Options& o, std::uint64_t value) {
  if (o.given("seed")) return value;
  if (const char* env = std::getenv("HETEROREG_SEED")) {
    try {
      std::size_t used = 0;
      const std::uint64_t s = std::stoull(env, &used);
      if (used == std::string(env).size()) return s;
    } catch (const std::exception&) {
    }
    throw hetreg::ContractViolation(fmt::format("HETEROREG_SEED='{}' is not an unsigned integer", env));
  }
  return value;
}

hetreg::ProblemSpec load_spec(const std::string& spec) {
  if (spec == "figure3" || spec == "two_group_classification") return hetreg::builtin_spec(spec);
  json j;
  try {
    j = json::parse(hetreg::io::read_text(spec));
  } catch (const json::parse_error& e) {
    throw hetreg::ContractViolation(fmt::format("spec '{}': {}", spec, e.what()));
  }
  return hetreg::io::spec_from_json(j);
}

hetreg::GroupPartition load_partition(const std::vector<double>& breakpoints, std::size_t groups) {
  if (!breakpoints.empty()) return hetreg::GroupPartition(breakpoints);
  return hetreg::GroupPartition::uniform(groups);
}

// Shared by fit, theory and har: how the regularization profile is chosen.
hetreg::RegProfile make_profile(const std::string& kind, const hetreg::ProblemSpec& spec,
                                const hetreg::GroupPartition& partition, double rho) {
  if (kind == "optimal") return hetreg::optimal_rho(spec, partition);
  if (kind == "uniform") return hetreg::uniform_profile(partition, rho);
  const auto stats = hetreg::population_group_stats(spec, partition);
  if (kind == "simplified") return hetreg::simplified_profile(stats, partition);
  if (kind == "inverse") return hetreg::inverse_profile(stats, partition);
  throw hetreg::ContractViolation(
      fmt::format("unknown profile '{}' (optimal, simplified, uniform, inverse)", kind));
}

void say(const std::string& line) { std::cout << line << '\n'; }

struct Common {
  std::string spec = "two_group_classification";
  std::uint64_t seed = 0;
  std::string out = "out";
  std::size_t workers = 1;
  std::size_t groups = 2;
  std::vector<double> breakpoints;
};

void add_common(Options& o, Common& c, bool partition = true) {
  o.add("spec", c.spec, "built-in spec (figure3, two_group_classification) or JSON spec file");
  o.add("seed", c.seed, "master seed (falls back to HETEROREG_SEED, then 0)");
  o.add("out", c.out, "output directory");
  if (partition) {
    o.add("groups", c.groups, "number of equal-width groups");
    o.add("breakpoints", c.breakpoints, "explicit group breakpoints, 0 ... 1")->delimiter(',');
  }
}

double resolve_lambda(const Options& o, double lambda, double c0, std::size_t n) {
  if (o.given("lambda")) return lambda;
  return hetreg::lambda_schedule(c0, n);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Heteroskedastic adaptive regularization experiments"};
  app.require_subcommand(1);
  std::vector<std::function<int()>> handlers;
  std::vector<CLI::App*> subs;

  // generate ---------------------------------------------------------------
  auto* gen = app.add_subcommand("generate", "sample a dataset from a spec");
  Options gen_o(gen);
  Common gen_c;
  std::size_t gen_n = 2000;
  add_common(gen_o, gen_c, false);
  gen_o.add("n", gen_n, "number of examples");
  subs.push_back(gen);
  handlers.push_back([&] {
    gen_o.apply_config();
    const auto seed = resolve_seed(gen_o, gen_c.seed);
    const auto spec = load_spec(gen_c.spec);
    const auto data = hetreg::sample_dataset(spec, gen_n, seed);
    const fs::path out = gen_c.out;
    hetreg::io::write_text(out / "dataset.csv", hetreg::io::dataset_csv(data));
    const json side = {{"spec", hetreg::io::spec_to_json(spec)}, {"seed", seed}, {"n", gen_n}};
    hetreg::io::write_text(out / "dataset.json", side.dump(2) + "\n");
    say(fmt::format("wrote {} examples to {}", data.size(), (out / "dataset.csv").string()));
    return 0;
  });

  // fit --------------------------------------------------------------------
  auto* fitc = app.add_subcommand("fit", "fit the grid model with a regularization profile or weights");
  Options fit_o(fitc);
  Common fit_c;
  std::size_t fit_n = 2000, fit_m = 257, fit_iters = 500;
  double fit_lambda = 1.0, fit_c0 = 1.0, fit_rho = 1.0, fit_tol = 1e-10;
  std::string fit_profile = "optimal", fit_data, fit_weights;
  add_common(fit_o, fit_c);
  fit_o.add("n", fit_n, "examples to sample when --data is not given");
  fit_o.add("data", fit_data, "dataset CSV (x,y); task taken from the spec");
  fit_o.add("profile", fit_profile, "optimal, simplified, uniform or inverse");
  fit_o.add("rho", fit_rho, "value of the uniform profile");
  fit_o.add("weights", fit_weights, "per-example weights CSV (index,x,tau); selects the per-example penalty");
  fit_o.add("lambda", fit_lambda, "regularization strength (default C0 n^-2/5)");
  fit_o.add("c0", fit_c0, "C0 in lambda = C0 n^-2/5");
  fit_o.add("m", fit_m, "grid size");
  fit_o.add("max-iters", fit_iters, "solver iteration limit");
  fit_o.add("grad-tol", fit_tol, "gradient sup-norm tolerance");
  subs.push_back(fitc);
  handlers.push_back([&] {
    fit_o.apply_config();
    const auto seed = resolve_seed(fit_o, fit_c.seed);
    const auto spec = load_spec(fit_c.spec);
    const auto partition = load_partition(fit_c.breakpoints, fit_c.groups);
    const auto data = fit_data.empty() ? hetreg::sample_dataset(spec, fit_n, seed)
                                       : hetreg::io::dataset_from_csv(hetreg::io::read_text(fit_data), spec.task());
    hetreg::FitConfig cfg;
    cfg.m = fit_m;
    cfg.max_iters = fit_iters;
    cfg.grad_tol = fit_tol;
    cfg.lambda = resolve_lambda(fit_o, fit_lambda, fit_c0, data.size());
    cfg.keep_log = true;
    const fs::path out = fit_c.out;
    hetreg::FitResult res;
    if (!fit_weights.empty()) {
      const auto w = hetreg::io::weights_from_csv(hetreg::io::read_text(fit_weights));
      cfg.penalty_kind = hetreg::PenaltyKind::PerExampleTau;
      res = hetreg::fit(data, w, cfg);
    } else {
      const auto profile = make_profile(fit_profile, spec, partition, fit_rho);
      hetreg::io::write_text(out / "profile.csv", hetreg::io::profile_csv(profile));
      res = hetreg::fit(data, profile, cfg);
    }
    for (const auto& w : res.warnings) std::cerr << "warning: " << w << '\n';
    hetreg::io::write_text(out / "grid.csv", hetreg::io::grid_csv(res.g));
    hetreg::io::write_text(out / "fit_log.csv", hetreg::io::fit_log_csv(res.log));
    say(fmt::format("lambda {}  iterations {}  objective {}  grad {}", cfg.lambda, res.iterations, res.objective,
                    res.grad_norm));
    say(fmt::format("empirical mse {}", hetreg::empirical_mse(res.g, spec)));
    return 0;
  });

  // eval -------------------------------------------------------------------
  auto* evalc = app.add_subcommand("eval", "integrated squared error of a fitted grid against the spec");
  Options eval_o(evalc);
  Common eval_c;
  std::string eval_grid = "out/grid.csv";
  add_common(eval_o, eval_c);
  eval_o.add("grid", eval_grid, "grid CSV (t,f) written by fit");
  subs.push_back(evalc);
  handlers.push_back([&] {
    eval_o.apply_config();
    const auto spec = load_spec(eval_c.spec);
    const auto partition = load_partition(eval_c.breakpoints, eval_c.groups);
    const auto g = hetreg::io::grid_from_csv(hetreg::io::read_text(eval_grid));
    json groups = json::array();
    for (std::size_t j = 0; j < partition.size(); ++j) {
      groups.push_back({{"lo", partition.lo(j)},
                        {"hi", partition.hi(j)},
                        {"mse", hetreg::empirical_mse(g, spec, partition.lo(j), partition.hi(j))}});
    }
    const json rep = {{"mse", hetreg::empirical_mse(g, spec)}, {"groups", groups}};
    hetreg::io::write_text(fs::path(eval_c.out) / "eval.json", rep.dump(2) + "\n");
    say(fmt::format("empirical mse {}", rep["mse"].get<double>()));
    return 0;
  });

  // theory -----------------------------------------------------------------
  auto* theo = app.add_subcommand("theory", "asymptotic MSE table of a profile");
  Options theo_o(theo);
  Common theo_c;
  std::size_t theo_n = 2000;
  double theo_lambda = 1.0, theo_c0 = 1.0, theo_rho = 1.0;
  std::string theo_profile = "optimal";
  add_common(theo_o, theo_c);
  theo_o.add("profile", theo_profile, "optimal, simplified, uniform or inverse");
  theo_o.add("rho", theo_rho, "value of the uniform profile");
  theo_o.add("lambda", theo_lambda, "lambda (default C0 n^-2/5)");
  theo_o.add("c0", theo_c0, "C0 in lambda = C0 n^-2/5");
  theo_o.add("n", theo_n, "sample size used by the lambda schedule");
  subs.push_back(theo);
  handlers.push_back([&] {
    theo_o.apply_config();
    const auto spec = load_spec(theo_c.spec);
    const auto partition = load_partition(theo_c.breakpoints, theo_c.groups);
    const auto profile = make_profile(theo_profile, spec, partition, theo_rho);
    const double lambda = resolve_lambda(theo_o, theo_lambda, theo_c0, theo_n);
    const auto rep = hetreg::asymptotic_mse(spec, profile, lambda);
    say(fmt::format("{:>10} {:>10} {:>14} {:>14} {:>14} {:>14}", "group_lo", "group_hi", "A", "B", "rho",
                    "contribution"));
    for (const auto& g : rep.groups) {
      say(fmt::format("{:>10.4g} {:>10.4g} {:>14.6g} {:>14.6g} {:>14.6g} {:>14.6g}", g.lo, g.hi, g.A, g.B, g.rho,
                      g.bias + g.variance));
    }
    say(fmt::format("lambda {}  bias {}  variance {}  total {}", rep.lambda, rep.bias_term, rep.variance_term,
                    rep.total));
    const fs::path out = theo_c.out;
    hetreg::io::write_text(out / "theory.json", hetreg::io::to_json(rep).dump(2) + "\n");
    hetreg::io::write_text(out / "profile.csv", hetreg::io::profile_csv(profile));
    return 0;
  });

  // compare ----------------------------------------------------------------
  auto* cmp = app.add_subcommand("compare", "Monte-Carlo comparison of regularization profiles");
  Options cmp_o(cmp);
  Common cmp_c;
  std::size_t cmp_n = 2000, cmp_reps = 200, cmp_m = 257;
  double cmp_lambda = 1.0, cmp_c0 = 1.0;
  add_common(cmp_o, cmp_c);
  cmp_o.add("n", cmp_n, "examples per dataset");
  cmp_o.add("reps", cmp_reps, "Monte-Carlo repetitions");
  cmp_o.add("lambda", cmp_lambda, "lambda (default C0 n^-2/5)");
  cmp_o.add("c0", cmp_c0, "C0 in lambda = C0 n^-2/5");
  cmp_o.add("m", cmp_m, "grid size");
  cmp_o.add("workers", cmp_c.workers, "worker threads");
  subs.push_back(cmp);
  handlers.push_back([&] {
    cmp_o.apply_config();
    const auto seed = resolve_seed(cmp_o, cmp_c.seed);
    const auto spec = load_spec(cmp_c.spec);
    const auto partition = load_partition(cmp_c.breakpoints, cmp_c.groups);
    hetreg::McOptions opts;
    opts.workers = cmp_c.workers;
    opts.fit.m = cmp_m;
    const double lambda = resolve_lambda(cmp_o, cmp_lambda, cmp_c0, cmp_n);
    const auto rep = hetreg::compare_profiles(spec, partition, cmp_n, lambda, cmp_reps, seed, opts);
    const fs::path out = cmp_c.out;
    hetreg::io::write_text(out / "compare.json", hetreg::io::to_json(rep).dump(2) + "\n");
    hetreg::io::write_text(out / "compare.csv", hetreg::io::compare_csv(rep));
    hetreg::io::write_text(out / "pairwise.csv", hetreg::io::pairwise_csv(rep));
    say(fmt::format("{:<14} {:>12} {:>10} {:>12}", "profile", "mean_mse", "se", "theory"));
    for (const auto& p : rep.summary) {
      say(fmt::format("{:<14} {:>12.6g} {:>10.3g} {:>12.6g}", p.name, p.mc.mean_mse, p.mc.std_error,
                      p.theory_total));
    }
    for (const auto& z : rep.pairwise) say(fmt::format("z({} - {}) = {:.3f}", z.a, z.b, z.z));
    say(fmt::format("best uniform {}  spearman {:.3f}  c* {:.6g}", rep.best_uniform, rep.spearman, rep.c_star));
    return 0;
  });

  // har --------------------------------------------------------------------
  auto* har = app.add_subcommand("har", "two-stage heteroskedastic adaptive regularization");
  Options har_o(har);
  Common har_c;
  std::size_t har_n = 5000, har_m = 257, har_epochs = 3000, har_batch = 32;
  double har_lambda = 1.0, har_c0 = 1.0, har_cap = 0.0, har_eps = 0.01, har_pilot_rho = 1.0, har_lr = 1e-2,
         har_scale = 1.0, har_mlp_lambda = 0.1;
  std::string har_pilot = "gridfit", har_data, har_jac = "loss";
  bool har_oracle = false;
  add_common(har_o, har_c);
  har_o.add("n", har_n, "examples to sample when --data is not given");
  har_o.add("data", har_data, "dataset CSV (x,y); task taken from the spec");
  har_o.add("pilot", har_pilot, "gridfit or mlp");
  har_o.add("lambda", har_lambda, "gridfit lambda (default C0 n^-2/5)");
  har_o.add("c0", har_c0, "C0 in lambda = C0 n^-2/5");
  har_o.add("lambda-cap", har_cap, "scale lambda so that max_i lambda tau_i equals this value");
  har_o.add("eps-i", har_eps, "floor on estimated uncertainty");
  har_o.add("pilot-rho", har_pilot_rho, "uniform profile of the gridfit pilot");
  har_o.flag("oracle", har_oracle, "use population (q, I) of the spec instead of estimates");
  har_o.add("m", har_m, "grid size");
  har_o.add("mlp-lambda", har_mlp_lambda, "lambda of the MLP refit");
  har_o.add("epochs", har_epochs, "MLP epochs");
  har_o.add("batch", har_batch, "MLP batch size");
  har_o.add("lr", har_lr, "MLP learning rate");
  har_o.add("init-scale", har_scale, "MLP first-layer init scale");
  har_o.add("jacobian", har_jac, "loss or model");
  subs.push_back(har);
  handlers.push_back([&] {
    har_o.apply_config();
    const auto seed = resolve_seed(har_o, har_c.seed);
    const auto spec = load_spec(har_c.spec);
    const auto partition = load_partition(har_c.breakpoints, har_c.groups);
    hetreg::HarConfig cfg;
    cfg.seed = seed;
    cfg.pilot = hetreg::pilot_kind_from_string(har_pilot);
    cfg.fit.m = har_m;
    cfg.pilot_rho = har_pilot_rho;
    cfg.eps_I = har_eps;
    if (har_o.given("lambda_cap")) cfg.lambda_cap = har_cap;
    if (har_oracle) cfg.oracle = hetreg::population_group_stats(spec, partition);
    cfg.mlp_lambda = har_mlp_lambda;
    cfg.first_layer_scale = har_scale;
    cfg.sgd.epochs = har_epochs;
    cfg.sgd.batch_size = har_batch;
    cfg.sgd.learning_rate = har_lr;
    cfg.sgd.target = hetreg::jacobian_target_from_string(har_jac);
    const auto data = har_data.empty()
                          ? hetreg::sample_dataset(spec, har_n, hetreg::derive_seed(seed, 0))
                          : hetreg::io::dataset_from_csv(hetreg::io::read_text(har_data), spec.task());
    cfg.fit.lambda = resolve_lambda(har_o, har_lambda, har_c0, data.size());
    const auto rep = hetreg::har_run(data, partition, cfg, &spec);
    const fs::path out = har_c.out;
    hetreg::io::write_text(out / "har.json", hetreg::io::to_json(rep).dump(2) + "\n");
    hetreg::io::write_text(out / "weights.csv", hetreg::io::weights_csv(data, rep.tau));
    if (rep.final_grid) hetreg::io::write_text(out / "grid.csv", hetreg::io::grid_csv(*rep.final_grid));
    if (rep.final_model) {
      hetreg::io::write_text(out / "model.json", hetreg::io::model_to_json(*rep.final_model).dump(2) + "\n");
      hetreg::io::write_text(out / "curve.csv", hetreg::io::curve_csv(rep.final_curve));
    }
    say(fmt::format("{:>6} {:>12} {:>12} {:>12}", "group", "q_hat", "I_hat", "tau"));
    for (std::size_t j = 0; j < rep.q_hat.size(); ++j) {
      say(fmt::format("{:>6} {:>12.6g} {:>12.6g} {:>12.6g}", j, rep.q_hat[j], rep.I_hat[j], rep.group_tau[j]));
    }
    say(fmt::format("lambda {}  pilot validation error {}", rep.lambda, rep.pilot_val_error));
    return 0;
  });

  // figure3 ----------------------------------------------------------------
  auto* f3 = app.add_subcommand("figure3", "toy MLP comparison of weak, strong and adaptive regularization");
  Options f3_o(f3);
  Common f3_c;
  hetreg::Figure3Config f3cfg;
  std::string f3_unc = "noise_variance", f3_jac = "loss";
  f3_o.add("seed", f3_c.seed, "master seed (falls back to HETEROREG_SEED, then 0)");
  f3_o.add("out", f3_c.out, "output directory");
  f3_o.add("workers", f3cfg.workers, "worker threads");
  f3_o.add("seeds", f3cfg.seeds, "number of datasets");
  f3_o.add("n", f3cfg.n, "examples per dataset");
  f3_o.add("lambda", f3cfg.lambda, "overall regularization scale");
  f3_o.add("uncertainty", f3_unc, "noise_variance or unit");
  f3_o.add("jacobian", f3_jac, "loss or model");
  f3_o.add("epochs", f3cfg.sgd.epochs, "SGD epochs");
  f3_o.add("batch", f3cfg.sgd.batch_size, "SGD batch size");
  f3_o.add("lr", f3cfg.sgd.learning_rate, "SGD learning rate");
  f3_o.add("init-scale", f3cfg.first_layer_scale, "first-layer init scale");
  f3_o.add("curve-points", f3cfg.curve_points, "points in the emitted curves");
  subs.push_back(f3);
  handlers.push_back([&] {
    f3_o.apply_config();
    f3cfg.seed = resolve_seed(f3_o, f3_c.seed);
    f3cfg.uncertainty = hetreg::figure3_uncertainty_from_string(f3_unc);
    f3cfg.sgd.target = hetreg::jacobian_target_from_string(f3_jac);
    const auto rep = hetreg::figure3_experiment(f3cfg);
    const fs::path out = f3_c.out;
    hetreg::io::write_text(out / "figure3.json", hetreg::io::to_json(rep).dump(2) + "\n");
    hetreg::io::write_text(out / "figure3_curves.csv", hetreg::io::figure3_curves_csv(rep));
    const auto& m = rep.mean;
    say(fmt::format("{:<10} {:>12} {:>12}", "model", "left_mse", "right_mse"));
    say(fmt::format("{:<10} {:>12.6g} {:>12.6g}", "weak", m.weak_left, m.weak_right));
    say(fmt::format("{:<10} {:>12.6g} {:>12.6g}", "strong", m.strong_left, m.strong_right));
    say(fmt::format("{:<10} {:>12.6g} {:>12.6g}", "adaptive", m.adaptive_left, m.adaptive_right));
    return 0;
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }

  try {
    for (std::size_t i = 0; i < subs.size(); ++i) {
      if (subs[i]->parsed()) return handlers[i]();
    }
    return kConfigError;
  } catch (const hetreg::SolverFailure& e) {
    std::cerr << "solver failure: " << e.what() << '\n';
    return kSolverError;
  } catch (const hetreg::ContractViolation& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const hetreg::io::IoError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const json::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  }
}
