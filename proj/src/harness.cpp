#include "hetreg/harness.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <numeric>
#include <thread>

#include <fmt/format.h>

#include "hetreg/rng.hpp"
#include "hetreg/theory.hpp"

namespace hetreg {

void run_indexed(std::size_t count, std::size_t workers, const std::function<void(std::size_t)>& fn) {
  workers = std::max<std::size_t>(1, std::min(workers, count));
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto body = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next.store(count);
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(body);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

McReport monte_carlo_mse(const ProblemSpec& spec, const McRegularizer& reg, std::size_t n, double lambda,
                         std::size_t reps, std::uint64_t seed, const McOptions& opts, std::string name) {
  if (reps < 2) throw ContractViolation("monte_carlo_mse needs reps >= 2");
  if (n < 1) throw ContractViolation("monte_carlo_mse needs n >= 1");
  FitConfig cfg = opts.fit;
  cfg.lambda = lambda;
  cfg.keep_log = false;
  cfg.penalty_kind = std::holds_alternative<RegProfile>(reg) ? PenaltyKind::IntegralRho : PenaltyKind::PerExampleTau;
  cfg.validate();

  McReport rep;
  rep.profile = std::move(name);
  rep.n = n;
  rep.lambda = lambda;
  rep.seed = seed;
  rep.reps = reps;
  rep.per_rep.assign(reps, std::numeric_limits<double>::quiet_NaN());

  run_indexed(reps, opts.workers, [&](std::size_t r) {
    const Dataset data = sample_dataset(spec, n, derive_seed(seed, r));
    try {
      FitResult res = std::holds_alternative<RegProfile>(reg)
                          ? fit(data, std::get<RegProfile>(reg), cfg)
                          : fit(data, std::get<WeightRule>(reg)(data), cfg);
      rep.per_rep[r] = empirical_mse(res.g, spec);
    } catch (const SolverFailure&) {
      // left as NaN and counted below
    }
  });

  double sum = 0.0;
  std::size_t ok = 0;
  for (double v : rep.per_rep) {
    if (std::isnan(v)) {
      ++rep.failures;
    } else {
      sum += v;
      ++ok;
    }
  }
  if (rep.failures * 10 > reps) {
    throw SolverFailure(fmt::format("{}: {} of {} Monte-Carlo fits failed", rep.profile, rep.failures, reps));
  }
  rep.mean_mse = sum / static_cast<double>(ok);
  double ss = 0.0;
  for (double v : rep.per_rep) {
    if (!std::isnan(v)) ss += (v - rep.mean_mse) * (v - rep.mean_mse);
  }
  rep.std_error = ok > 1 ? std::sqrt(ss / static_cast<double>(ok - 1)) / std::sqrt(static_cast<double>(ok)) : 0.0;
  return rep;
}

double z_score(const McReport& a, const McReport& b) {
  const double se = std::hypot(a.std_error, b.std_error);
  return se > 0.0 ? (a.mean_mse - b.mean_mse) / se : 0.0;
}

double paired_z_score(const McReport& a, const McReport& b) {
  std::vector<double> d;
  for (std::size_t r = 0; r < std::min(a.per_rep.size(), b.per_rep.size()); ++r) {
    if (!std::isnan(a.per_rep[r]) && !std::isnan(b.per_rep[r])) d.push_back(a.per_rep[r] - b.per_rep[r]);
  }
  if (d.size() < 2) return 0.0;
  const double mean = std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(d.size());
  double ss = 0.0;
  for (double x : d) ss += (x - mean) * (x - mean);
  const double se = std::sqrt(ss / static_cast<double>(d.size() - 1)) / std::sqrt(static_cast<double>(d.size()));
  return se > 0.0 ? mean / se : 0.0;
}

namespace {

std::vector<double> average_ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> rank(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) rank[idx[k]] = r;
    i = j + 1;
  }
  return rank;
}

}  // namespace

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2) throw ContractViolation("spearman needs two equal-length samples");
  const auto ra = average_ranks(a);
  const auto rb = average_ranks(b);
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

CompareReport compare_profiles(const ProblemSpec& spec, const GroupPartition& partition, std::size_t n,
                               double lambda, std::size_t reps, std::uint64_t seed, const McOptions& opts) {
  CompareReport rep;
  rep.lambda = lambda;
  const RegProfile opt = optimal_rho(spec, partition);
  const double budget = mean_rho(opt);
  const GroupStats stats = population_group_stats(spec, partition);

  std::vector<std::pair<std::string, RegProfile>> profiles;
  profiles.emplace_back("optimal", opt);
  profiles.emplace_back("simplified", rescaled(simplified_profile(stats, partition), budget));
  for (int k = -3; k <= 3; ++k) {
    profiles.emplace_back(fmt::format("uniform_2^{}", k), uniform_profile(partition, budget * std::ldexp(1.0, k)));
  }
  profiles.emplace_back("inverse", rescaled(inverse_profile(stats, partition), budget));

  for (auto& [name, profile] : profiles) {
    McReport mc = monte_carlo_mse(spec, profile, n, lambda, reps, seed, opts, name);
    const double theory = asymptotic_mse(spec, profile, rep.theory_lambda).total;
    rep.all.push_back({name, profile, std::move(mc), theory});
  }

  std::size_t best = 2;
  for (std::size_t i = 3; i < 9; ++i) {
    if (rep.all[i].mc.mean_mse < rep.all[best].mc.mean_mse) best = i;
  }
  rep.best_uniform = rep.all[best].name;
  rep.summary = {rep.all[0], rep.all[1], rep.all[best], rep.all[9]};
  rep.summary[2].name = "best_uniform";

  for (std::size_t i = 0; i < rep.summary.size(); ++i) {
    for (std::size_t j = i + 1; j < rep.summary.size(); ++j) {
      const auto& a = rep.summary[i];
      const auto& b = rep.summary[j];
      rep.pairwise.push_back({a.name, b.name, z_score(a.mc, b.mc), paired_z_score(a.mc, b.mc)});
    }
  }
  double num = 0.0, den = 0.0;
  std::vector<double> mc, th;
  for (const auto& p : rep.summary) {
    num += p.mc.mean_mse * p.theory_total;
    den += p.theory_total * p.theory_total;
    mc.push_back(p.mc.mean_mse);
    th.push_back(p.theory_total);
  }
  rep.c_star = den > 0.0 ? num / den : 0.0;
  rep.spearman = spearman(mc, th);
  return rep;
}

double uncertainty_proxy(double prob_max) {
  if (!(prob_max >= 0.0 && prob_max <= 1.0)) throw ContractViolation("probability must lie in [0, 1]");
  return 1.0 - prob_max;
}

double lambda_for_cap(const ExampleWeights& weights, double cap) {
  if (weights.size() == 0) throw ContractViolation("no weights");
  if (!(cap > 0.0)) throw ContractViolation("lambda cap must be positive");
  return cap / *std::max_element(weights.tau.begin(), weights.tau.end());
}

std::string_view to_string(PilotKind p) { return p == PilotKind::GridFit ? "gridfit" : "mlp"; }

PilotKind pilot_kind_from_string(std::string_view name) {
  if (name == "gridfit") return PilotKind::GridFit;
  if (name == "mlp") return PilotKind::Mlp;
  throw ContractViolation(fmt::format("unknown pilot kind '{}'", name));
}

std::vector<double> group_validation_error(const std::function<double(double)>& pilot, const Dataset& val,
                                           const GroupPartition& partition) {
  const std::size_t k = partition.size();
  std::vector<std::size_t> count(k, 0);
  std::vector<double> err(k, 0.0);
  for (const auto& p : val.points) {
    const std::size_t j = partition.group_of(p.x);
    const double a = pilot(p.x);
    ++count[j];
    if (val.task == TaskKind::BinaryClassification) {
      err[j] += (a >= 0.0 ? 1.0 : -1.0) != p.y ? 1.0 : 0.0;
    } else {
      err[j] += (a - p.y) * (a - p.y);
    }
  }
  for (std::size_t j = 0; j < k; ++j) {
    if (count[j] == 0) {
      throw ContractViolation(
          fmt::format("group {} [{}, {}) has no validation examples", j, partition.lo(j), partition.hi(j)));
    }
    err[j] /= static_cast<double>(count[j]);
  }
  return err;
}

HarReport har_run(const Dataset& data, const GroupPartition& partition, const HarConfig& config,
                  const ProblemSpec* spec) {
  data.validate();
  const std::size_t n = data.size();
  const std::size_t k = partition.size();
  if (n < 2) throw ContractViolation("har_run needs at least 2 examples");
  if (!(config.eps_I > 0.0)) throw ContractViolation("eps_I must be positive");

  HarReport rep;
  rep.n = n;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng split_rng(derive_seed(config.seed, 1));
  split_rng.shuffle(order.begin(), order.end());
  Dataset train_set{data.task, {}, data.seed};
  Dataset val_set{data.task, {}, data.seed};
  for (std::size_t i = 0; i < n; ++i) (i < n / 2 ? train_set : val_set).points.push_back(data.points[order[i]]);
  rep.n_train = train_set.size();
  rep.n_val = val_set.size();

  std::function<double(double)> pilot;
  std::optional<GridFunction> pilot_grid;
  std::optional<MlpModel> pilot_model;
  if (config.pilot == PilotKind::GridFit) {
    FitConfig cfg = config.fit;
    cfg.penalty_kind = PenaltyKind::IntegralRho;
    pilot_grid = fit(train_set, uniform_profile(partition, config.pilot_rho), cfg).g;
    pilot = [&](double x) { return (*pilot_grid)(x); };
  } else {
    SgdConfig sgd = config.sgd;
    sgd.seed = derive_seed(config.seed, 2);
    MlpModel init = MlpModel::initialized(config.hidden, config.activation, derive_seed(config.seed, 3),
                                          config.first_layer_scale);
    pilot_model = train_uniform(std::move(init), train_set, 0.0, sgd).model;
    pilot = [&](double x) { return forward(*pilot_model, x).prediction; };
  }

  std::vector<std::size_t> count(k, 0);
  for (const auto& p : data.points) ++count[partition.group_of(p.x)];
  rep.pilot_group_val_error = group_validation_error(pilot, val_set, partition);
  double total_err = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    std::size_t in_group = 0;
    for (const auto& p : val_set.points) in_group += partition.group_of(p.x) == j;
    total_err += rep.pilot_group_val_error[j] * static_cast<double>(in_group);
  }
  rep.pilot_val_error = total_err / static_cast<double>(val_set.size());

  if (config.oracle) {
    if (config.oracle->q.size() != k || config.oracle->I.size() != k) {
      throw ContractViolation("oracle statistics do not match the partition");
    }
    rep.q_hat = config.oracle->q;
    rep.I_hat = config.oracle->I;
  } else {
    for (std::size_t j = 0; j < k; ++j) {
      rep.q_hat.push_back(static_cast<double>(count[j]) / (static_cast<double>(n) * partition.width(j)));
      const double I = data.task == TaskKind::BinaryClassification ? rep.pilot_group_val_error[j] : 1.0;
      rep.I_hat.push_back(std::max(I, config.eps_I));
    }
  }
  std::vector<std::optional<double>> q_opt, I_opt;
  for (std::size_t j = 0; j < k; ++j) {
    if (count[j] > 0) {
      q_opt.emplace_back(rep.q_hat[j]);
      I_opt.emplace_back(rep.I_hat[j]);
      rep.group_tau.push_back(tau_value(rep.q_hat[j], rep.I_hat[j]));
    } else {
      q_opt.emplace_back();
      I_opt.emplace_back();
      rep.group_tau.push_back(std::numeric_limits<double>::quiet_NaN());
    }
  }
  rep.tau = tau_weights(data, partition, q_opt, I_opt);

  if (config.pilot == PilotKind::GridFit) {
    FitConfig cfg = config.fit;
    cfg.penalty_kind = PenaltyKind::PerExampleTau;
    if (config.lambda_cap) cfg.lambda = lambda_for_cap(rep.tau, *config.lambda_cap);
    rep.lambda = cfg.lambda;
    rep.final_grid = fit(data, rep.tau, cfg).g;
  } else {
    rep.lambda = config.lambda_cap ? lambda_for_cap(rep.tau, *config.lambda_cap) : config.mlp_lambda;
    SgdConfig sgd = config.sgd;
    sgd.seed = derive_seed(config.seed, 4);
    MlpModel init = MlpModel::initialized(config.hidden, config.activation, derive_seed(config.seed, 5),
                                          config.first_layer_scale);
    TrainResult tr = train(std::move(init), data, rep.tau, rep.lambda, sgd);
    rep.final_model = std::move(tr.model);
    rep.final_curve = std::move(tr.curve);
  }

  if (spec) {
    for (std::size_t j = 0; j < k; ++j) {
      rep.final_group_mse.push_back(rep.final_grid
                                        ? empirical_mse(*rep.final_grid, *spec, partition.lo(j), partition.hi(j))
                                        : mlp_region_mse(*rep.final_model, *spec, partition.lo(j), partition.hi(j)));
    }
  }
  return rep;
}

HarReport har_run(const ProblemSpec& spec, std::size_t n, const GroupPartition& partition, const HarConfig& config) {
  const Dataset data = sample_dataset(spec, n, derive_seed(config.seed, 0));
  return har_run(data, partition, config, &spec);
}

std::string_view to_string(Figure3Uncertainty u) {
  return u == Figure3Uncertainty::NoiseVariance ? "noise_variance" : "unit";
}

Figure3Uncertainty figure3_uncertainty_from_string(std::string_view name) {
  if (name == "noise_variance") return Figure3Uncertainty::NoiseVariance;
  if (name == "unit") return Figure3Uncertainty::Unit;
  throw ContractViolation(fmt::format("unknown figure3 uncertainty '{}'", name));
}

Figure3Report figure3_experiment(const Figure3Config& config) {
  if (config.seeds < 1) throw ContractViolation("figure3 needs at least one seed");
  const ProblemSpec spec = figure3_spec();
  const GroupPartition halves = halves_partition();
  Figure3Report rep;
  rep.runs.resize(config.seeds);
  std::vector<std::optional<MlpModel>> first(3);  // models of seed 0
  std::vector<std::array<double, 2>> taus(config.seeds);
  std::vector<std::array<std::array<double, 2>, 3>> err(config.seeds);
  std::vector<double> I{1.0, 1.0};
  if (config.uncertainty == Figure3Uncertainty::NoiseVariance) {
    const auto& sigma = *spec.noise_sigma();
    for (std::size_t j = 0; j < 2; ++j) {
      // sigma is constant on each half of figure3_spec
      const double s = sigma(0.5 * (halves.lo(j) + halves.hi(j)));
      I[j] = s * s;
    }
  }

  // Task 3s + m trains model m (weak, strong, adaptive) on seed s.
  run_indexed(3 * config.seeds, config.workers, [&](std::size_t task) {
    const std::size_t s = task / 3;
    const std::size_t which = task % 3;
    const std::uint64_t seed = derive_seed(config.seed, s);
    const Dataset data = sample_dataset(spec, config.n, derive_seed(seed, 0));
    std::vector<double> count(2, 0.0);
    for (const auto& p : data.points) ++count[halves.group_of(p.x)];
    if (count[0] == 0 || count[1] == 0) throw ContractViolation("figure3 sample left a half empty");
    std::vector<double> q_hat;
    for (std::size_t j = 0; j < 2; ++j) q_hat.push_back(count[j] / (static_cast<double>(data.size()) * halves.width(j)));
    const ExampleWeights tau = tau_weights(data, halves, q_hat, I);
    const double tau_l = tau_value(q_hat[0], I[0]);
    const double tau_r = tau_value(q_hat[1], I[1]);
    taus[s] = {tau_l, tau_r};

    SgdConfig sgd = config.sgd;
    sgd.seed = derive_seed(seed, 1);
    sgd.log_every = 0;
    MlpModel init = MlpModel::initialized(config.hidden, config.activation, derive_seed(seed, 2),
                                          config.first_layer_scale);
    MlpModel model = which == 2 ? train(std::move(init), data, tau, config.lambda, sgd).model
                                : train_uniform(std::move(init), data,
                                                config.lambda * (which == 0 ? std::min(tau_l, tau_r)
                                                                            : std::max(tau_l, tau_r)),
                                                sgd)
                                      .model;
    err[s][which] = {mlp_region_mse(model, spec, 0.0, 0.5), mlp_region_mse(model, spec, 0.5, 1.0)};
    if (s == 0) first[which] = std::move(model);
  });

  for (std::size_t s = 0; s < config.seeds; ++s) {
    auto& r = rep.runs[s];
    r.seed = derive_seed(config.seed, s);
    r.weak_left = err[s][0][0];
    r.weak_right = err[s][0][1];
    r.strong_left = err[s][1][0];
    r.strong_right = err[s][1][1];
    r.adaptive_left = err[s][2][0];
    r.adaptive_right = err[s][2][1];
    const double inv = 1.0 / static_cast<double>(config.seeds);
    rep.mean.weak_left += inv * r.weak_left;
    rep.mean.weak_right += inv * r.weak_right;
    rep.mean.strong_left += inv * r.strong_left;
    rep.mean.strong_right += inv * r.strong_right;
    rep.mean.adaptive_left += inv * r.adaptive_left;
    rep.mean.adaptive_right += inv * r.adaptive_right;
  }
  rep.tau_left = taus[0][0];
  rep.tau_right = taus[0][1];

  const std::size_t m = std::max<std::size_t>(2, config.curve_points);
  for (std::size_t u = 0; u < m; ++u) rep.t.push_back(static_cast<double>(u) / static_cast<double>(m - 1));
  for (double t : rep.t) rep.truth.push_back(spec.f(t));
  rep.weak = predict(*first[0], rep.t);
  rep.strong = predict(*first[1], rep.t);
  rep.adaptive = predict(*first[2], rep.t);
  return rep;
}

}  // namespace hetreg
