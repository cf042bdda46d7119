#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "hetreg/domain.hpp"
#include "hetreg/gridfit.hpp"
#include "hetreg/mlp.hpp"
#include "hetreg/regprofile.hpp"

namespace hetreg {

// Runs fn(0) .. fn(count - 1) on `workers` threads. Callers store results by
// index, so the outcome does not depend on scheduling.
void run_indexed(std::size_t count, std::size_t workers, const std::function<void(std::size_t)>& fn);

// Per-example weights are data dependent, so Monte Carlo takes a rule.
using WeightRule = std::function<ExampleWeights(const Dataset&)>;
using McRegularizer = std::variant<RegProfile, WeightRule>;

struct McReport {
  std::string profile;
  std::size_t n = 0;
  double lambda = 0.0;
  std::uint64_t seed = 0;
  std::size_t reps = 0;
  std::size_t failures = 0;
  double mean_mse = 0.0;
  double std_error = 0.0;
  std::vector<double> per_rep;  // NaN where the solver failed
};

struct McOptions {
  std::size_t workers = 1;
  FitConfig fit;  // lambda and penalty kind are overwritten per call
};

// Rep r fits a dataset drawn with derive_seed(seed, r), so every profile run
// with the same seed sees the same datasets. More than 10% failed fits abort
// with SolverFailure.
McReport monte_carlo_mse(const ProblemSpec& spec, const McRegularizer& reg, std::size_t n, double lambda,
                         std::size_t reps, std::uint64_t seed, const McOptions& opts = {},
                         std::string name = "profile");

// (mean_a - mean_b) / sqrt(se_a^2 + se_b^2).
double z_score(const McReport& a, const McReport& b);
// Mean of per-rep differences over its standard error (common random numbers).
double paired_z_score(const McReport& a, const McReport& b);

// Spearman rank correlation with average ranks for ties.
double spearman(const std::vector<double>& a, const std::vector<double>& b);

struct ProfileResult {
  std::string name;
  RegProfile profile;
  McReport mc;
  double theory_total = 0.0;
};

struct PairwiseZ {
  std::string a;
  std::string b;
  double z = 0.0;
  double z_paired = 0.0;
};

struct CompareReport {
  std::vector<ProfileResult> all;      // optimal, simplified, 7 uniform levels, inverse
  std::vector<ProfileResult> summary;  // optimal, simplified, best_uniform, inverse
  std::string best_uniform;            // name of the winning uniform level
  std::vector<PairwiseZ> pairwise;     // over the summary profiles
  double c_star = 0.0;                 // argmin_c sum (MC - c theory)^2 over the summary
  double spearman = 0.0;               // MC means vs theory totals over the summary
  double lambda = 0.0;
  double theory_lambda = 1.0;
};

// Simplified and inverse profiles are rescaled to the width-weighted mean of
// optimal_rho; the uniform levels are that mean times 2^-3 .. 2^3. Theory
// totals use lambda = 1, where optimal_rho is the exact minimizer.
CompareReport compare_profiles(const ProblemSpec& spec, const GroupPartition& partition, std::size_t n,
                               double lambda, std::size_t reps, std::uint64_t seed, const McOptions& opts = {});

// 1 - p for the most likely class.
double uncertainty_proxy(double prob_max);

// lambda such that max_i lambda tau_i = cap.
double lambda_for_cap(const ExampleWeights& weights, double cap);

enum class PilotKind { GridFit, Mlp };
std::string_view to_string(PilotKind p);
PilotKind pilot_kind_from_string(std::string_view name);

struct HarConfig {
  std::uint64_t seed = 0;
  PilotKind pilot = PilotKind::GridFit;
  FitConfig fit;                    // gridfit pilot and refit; fit.lambda is the refit lambda
  double pilot_rho = 1.0;           // uniform profile of the gridfit pilot
  double eps_I = 0.01;              // floor on estimated uncertainty
  std::optional<double> lambda_cap; // overrides the refit lambda with cap / max tau
  std::optional<GroupStats> oracle; // population (q, I) injected in place of estimates
  // MLP pilot and refit
  std::vector<std::size_t> hidden{64, 64};
  Activation activation = Activation::Tanh;
  double first_layer_scale = 1.0;
  double mlp_lambda = 0.1;
  SgdConfig sgd;
};

// Per-group validation error of a pilot: misclassification rate (prediction
// sign, ties to +1) or mean squared error. A group without validation
// examples is an error naming it.
std::vector<double> group_validation_error(const std::function<double(double)>& pilot, const Dataset& val,
                                           const GroupPartition& partition);

struct HarReport {
  std::size_t n = 0;
  std::size_t n_train = 0;
  std::size_t n_val = 0;
  std::vector<double> q_hat;
  std::vector<double> I_hat;
  std::vector<double> group_tau;
  ExampleWeights tau;
  double lambda = 0.0;
  double pilot_val_error = 0.0;              // misclassification rate or mean squared error
  std::vector<double> pilot_group_val_error;
  std::vector<double> final_group_mse;       // int over each group of (f_hat - f*)^2; empty without a spec
  std::optional<GridFunction> final_grid;
  std::optional<MlpModel> final_model;
  std::vector<CurvePoint> final_curve;  // MLP refit only
};

// Algorithm 1: split, pilot fit, estimate (q, I) per group, tau = I^{3/5} q^{-2/5},
// refit on the full dataset. `spec`, when given, is used only for the final
// per-group errors.
HarReport har_run(const Dataset& data, const GroupPartition& partition, const HarConfig& config,
                  const ProblemSpec* spec = nullptr);
HarReport har_run(const ProblemSpec& spec, std::size_t n, const GroupPartition& partition, const HarConfig& config);

// Uncertainty used in the Figure-3 weights: the noise variance sigma^2 of
// each half (Var(Y | X)), or 1 as in homoskedastic regression.
enum class Figure3Uncertainty { NoiseVariance, Unit };
std::string_view to_string(Figure3Uncertainty u);
Figure3Uncertainty figure3_uncertainty_from_string(std::string_view name);

struct Figure3Config {
  std::size_t n = 256;
  std::size_t seeds = 5;
  std::uint64_t seed = 0;
  double lambda = 0.2;
  Figure3Uncertainty uncertainty = Figure3Uncertainty::NoiseVariance;
  std::vector<std::size_t> hidden{64, 64};
  Activation activation = Activation::Tanh;
  double first_layer_scale = 30.0;
  SgdConfig sgd;
  std::size_t workers = 1;
  std::size_t curve_points = 501;
};

// One seed: left [0, 0.5] and right [0.5, 1] integrated squared errors.
struct Figure3Run {
  std::uint64_t seed = 0;
  double weak_left = 0.0, weak_right = 0.0;
  double strong_left = 0.0, strong_right = 0.0;
  double adaptive_left = 0.0, adaptive_right = 0.0;
};

struct Figure3Report {
  std::vector<Figure3Run> runs;
  double tau_left = 0.0;   // adaptive weight of the dense left group
  double tau_right = 0.0;  // adaptive weight of the rare right group
  Figure3Run mean;
  // Curves of the first seed on curve_points equispaced t.
  std::vector<double> t, truth, weak, strong, adaptive;
};

// Regression on figure3_spec: adaptive tau_i = I_j^{3/5} q_hat_j^{-2/5} on the two
// halves (q_hat from group counts, I_j from the spec's noise or 1), trained
// with lambda, against uniform lambda * min tau (weak) and lambda * max tau
// (strong).
Figure3Report figure3_experiment(const Figure3Config& config);

}  // namespace hetreg
