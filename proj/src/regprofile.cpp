#include "hetreg/regprofile.hpp"

#include <cmath>

#include <fmt/format.h>

#include "hetreg/error.hpp"
#include "hetreg/quadrature.hpp"
#include "hetreg/theory.hpp"

namespace hetreg {
namespace {

std::vector<double> interior_breakpoints(const ProblemSpec& spec, double lo, double hi) {
  std::vector<double> out;
  for (double b : spec.breakpoints()) {
    if (b > lo && b < hi) out.push_back(b);
  }
  return out;
}

constexpr quadrature::Options kGroupQuad{1e-12, 1e-300, 50};

}  // namespace

RegProfile::RegProfile(GroupPartition p, std::vector<double> r)
    : partition(std::move(p)), rho(std::move(r)), capped(rho.size(), false) {
  if (rho.size() != partition.size()) {
    throw ContractViolation(fmt::format("profile has {} values for {} groups", rho.size(), partition.size()));
  }
  for (std::size_t j = 0; j < rho.size(); ++j) {
    if (!(rho[j] > 0.0) || !std::isfinite(rho[j])) {
      throw ContractViolation(fmt::format("rho[{}] = {} is not a positive finite number", j, rho[j]));
    }
  }
}

ExampleWeights::ExampleWeights(std::vector<double> t) : tau(std::move(t)) {
  for (std::size_t i = 0; i < tau.size(); ++i) {
    if (!(tau[i] > 0.0) || !std::isfinite(tau[i])) {
      throw ContractViolation(fmt::format("tau[{}] = {} is not a positive finite number", i, tau[i]));
    }
  }
}

GroupCoefficients group_coefficients(const ProblemSpec& spec, double lo, double hi, const UncertaintyFn& I) {
  const auto bp = interior_breakpoints(spec, lo, hi);
  auto r = [&](double t) { return 1.0 / (spec.q(t) * (I ? I(t) : fisher_info(spec, t))); };
  GroupCoefficients c;
  c.A = quadrature::integrate_pieces(
      [&](double t) {
        const double rt = r(t);
        const double f2 = spec.d2f(t);
        return rt * rt * f2 * f2;
      },
      lo, hi, bp, kGroupQuad);
  c.B = l0_constant() *
        quadrature::integrate_pieces([&](double t) { return std::sqrt(r(t)); }, lo, hi, bp, kGroupQuad);
  return c;
}

std::vector<GroupCoefficients> group_coefficients(const ProblemSpec& spec, const GroupPartition& partition,
                                                  const UncertaintyFn& I) {
  std::vector<GroupCoefficients> out;
  out.reserve(partition.size());
  for (std::size_t j = 0; j < partition.size(); ++j) {
    out.push_back(group_coefficients(spec, partition.lo(j), partition.hi(j), I));
  }
  return out;
}

double optimal_rho_value(double A, double B) {
  if (!(A >= 0.0) || !(B > 0.0)) throw ContractViolation("group coefficients need A >= 0 and B > 0");
  // Treat curvature at quadrature-noise level as zero.
  if (A <= 1e-300) return kRhoMax;
  return std::min(kRhoMax, std::pow(B / (4.0 * A), 0.4));
}

RegProfile optimal_rho(const ProblemSpec& spec, const GroupPartition& partition, const UncertaintyFn& I) {
  const auto coeffs = group_coefficients(spec, partition, I);
  std::vector<double> rho;
  std::vector<bool> capped;
  for (const auto& c : coeffs) {
    const double r = optimal_rho_value(c.A, c.B);
    rho.push_back(r);
    capped.push_back(r >= kRhoMax);
  }
  RegProfile profile(partition, std::move(rho));
  profile.capped = std::move(capped);
  return profile;
}

double tau_value(double q, double I) {
  if (!(q > 0.0) || !(I > 0.0)) {
    throw ContractViolation(fmt::format("q = {} and I = {} must both be positive", q, I));
  }
  return std::pow(I, 0.6) * std::pow(q, -0.4);
}

double simplified_rho(double q, double I) { return tau_value(q, I) * q; }

ExampleWeights tau_weights(const Dataset& data, const GroupPartition& partition,
                           std::span<const std::optional<double>> q_hat,
                           std::span<const std::optional<double>> I_hat) {
  const std::size_t k = partition.size();
  if (q_hat.size() != k || I_hat.size() != k) {
    throw ContractViolation(fmt::format("need {} per-group estimates", k));
  }
  std::vector<std::optional<double>> per_group(k);
  std::vector<double> tau;
  tau.reserve(data.size());
  for (const auto& p : data.points) {
    const std::size_t j = partition.group_of(p.x);
    if (!per_group[j]) {
      if (!q_hat[j] || !I_hat[j]) {
        throw ContractViolation(fmt::format("no estimate for group {} [{}, {})", j, partition.lo(j),
                                            partition.hi(j)));
      }
      per_group[j] = tau_value(*q_hat[j], *I_hat[j]);
    }
    tau.push_back(*per_group[j]);
  }
  return ExampleWeights(std::move(tau));
}

ExampleWeights tau_weights(const Dataset& data, const GroupPartition& partition, std::span<const double> q_hat,
                           std::span<const double> I_hat) {
  std::vector<std::optional<double>> q(q_hat.begin(), q_hat.end());
  std::vector<std::optional<double>> I(I_hat.begin(), I_hat.end());
  return tau_weights(data, partition, q, I);
}

RegProfile uniform_profile(const GroupPartition& partition, double value) {
  if (!(value > 0.0)) throw ContractViolation("uniform profile value must be positive");
  return RegProfile(partition, std::vector<double>(partition.size(), value));
}

GroupStats population_group_stats(const ProblemSpec& spec, const GroupPartition& partition) {
  GroupStats s;
  for (std::size_t j = 0; j < partition.size(); ++j) {
    const double lo = partition.lo(j);
    const double hi = partition.hi(j);
    const auto bp = interior_breakpoints(spec, lo, hi);
    const double mass = quadrature::integrate_pieces([&](double t) { return spec.q(t); }, lo, hi, bp, kGroupQuad);
    const double qi = quadrature::integrate_pieces([&](double t) { return spec.q(t) * fisher_info(spec, t); },
                                                   lo, hi, bp, kGroupQuad);
    s.q.push_back(mass / (hi - lo));
    s.I.push_back(qi / mass);
  }
  return s;
}

RegProfile simplified_profile(const GroupStats& stats, const GroupPartition& partition) {
  std::vector<double> rho;
  for (std::size_t j = 0; j < partition.size(); ++j) rho.push_back(simplified_rho(stats.q.at(j), stats.I.at(j)));
  return RegProfile(partition, std::move(rho));
}

RegProfile inverse_profile(const GroupStats& stats, const GroupPartition& partition) {
  std::vector<double> rho;
  for (std::size_t j = 0; j < partition.size(); ++j) {
    rho.push_back(1.0 / simplified_rho(stats.q.at(j), stats.I.at(j)));
  }
  return RegProfile(partition, std::move(rho));
}

double mean_rho(const RegProfile& profile) {
  double acc = 0.0;
  for (std::size_t j = 0; j < profile.rho.size(); ++j) acc += profile.rho[j] * profile.partition.width(j);
  return acc;
}

RegProfile rescaled(const RegProfile& profile, double target_mean) {
  if (!(target_mean > 0.0)) throw ContractViolation("target mean must be positive");
  const double c = target_mean / mean_rho(profile);
  RegProfile out = profile;
  for (double& r : out.rho) r *= c;
  return out;
}

}  // namespace hetreg
