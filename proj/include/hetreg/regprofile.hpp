#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "hetreg/domain.hpp"

namespace hetreg {

// Cap applied to groups where f*'' vanishes identically (rho unbounded).
inline constexpr double kRhoMax = 1e6;

// Piecewise-constant regularization density: rho[j] on group j.
struct RegProfile {
  GroupPartition partition;
  std::vector<double> rho;
  std::vector<bool> capped;  // group hit kRhoMax

  RegProfile(GroupPartition p, std::vector<double> r);

  double at(double x) const { return rho[partition.group_of(x)]; }
};

// Per-example penalty weights aligned with a Dataset.
struct ExampleWeights {
  std::vector<double> tau;

  ExampleWeights() = default;
  explicit ExampleWeights(std::vector<double> t);
  std::size_t size() const { return tau.size(); }
};

// A_j = int r^2 f*''^2 and B_j = L0 int r^{1/2} over one group, r = 1/(q I).
struct GroupCoefficients {
  double A = 0.0;
  double B = 0.0;
};

// Uncertainty I(x) used in r = 1/(q I); defaults to fisher_info of the spec.
using UncertaintyFn = std::function<double(double)>;

GroupCoefficients group_coefficients(const ProblemSpec& spec, double lo, double hi, const UncertaintyFn& I = {});
std::vector<GroupCoefficients> group_coefficients(const ProblemSpec& spec, const GroupPartition& partition,
                                                  const UncertaintyFn& I = {});

// argmin_rho A rho^2 + B rho^{-1/2} = (B / 4A)^{2/5}; kRhoMax when A = 0.
double optimal_rho_value(double A, double B);

RegProfile optimal_rho(const ProblemSpec& spec, const GroupPartition& partition, const UncertaintyFn& I = {});

// tau = I^{3/5} q^{-2/5}.
double tau_value(double q, double I);
// q^{3/5} I^{3/5}, evaluated as tau_value(q, I) * q so that tau * q == rho bitwise.
double simplified_rho(double q, double I);

// tau_i from per-group estimates. A missing estimate (nullopt) for a group that
// holds an example is an error naming the group.
ExampleWeights tau_weights(const Dataset& data, const GroupPartition& partition,
                           std::span<const std::optional<double>> q_hat,
                           std::span<const std::optional<double>> I_hat);
ExampleWeights tau_weights(const Dataset& data, const GroupPartition& partition,
                           std::span<const double> q_hat, std::span<const double> I_hat);

RegProfile uniform_profile(const GroupPartition& partition, double value);

// Population group statistics: q_j = mass_j / width_j, I_j = int q I / int q.
struct GroupStats {
  std::vector<double> q;
  std::vector<double> I;
};
GroupStats population_group_stats(const ProblemSpec& spec, const GroupPartition& partition);

RegProfile simplified_profile(const GroupStats& stats, const GroupPartition& partition);
// rho_j = 1 / simplified_rho(q_j, I_j): regularizes where the data is dense and clean.
RegProfile inverse_profile(const GroupStats& stats, const GroupPartition& partition);

// Width-weighted mean of rho over [0, 1].
double mean_rho(const RegProfile& profile);
RegProfile rescaled(const RegProfile& profile, double target_mean);

}  // namespace hetreg
