#include "hetreg/gridfit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "hetreg/quadrature.hpp"

namespace hetreg {
namespace {

double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

struct Point {
  std::size_t cell;
  double w;  // g(x) = (1 - w) v[cell] + w v[cell + 1]
  double y;
};

// Everything about the objective that does not depend on the grid values.
struct Problem {
  TaskKind task;
  std::size_t m;
  double inv_n;
  std::vector<Point> points;
  std::vector<double> kappa;  // lambda-scaled penalty coefficient per cell: kappa_c (dv_c)^2

  double loss(double a, double y) const {
    return task == TaskKind::Regression ? 0.5 * (a - y) * (a - y) : softplus(-y * a);
  }
  double dloss(double a, double y) const {
    return task == TaskKind::Regression ? a - y : -y * sigmoid(-y * a);
  }
  double d2loss(double a) const {
    if (task == TaskKind::Regression) return 1.0;
    return sigmoid(a) * sigmoid(-a);
  }
};

std::vector<std::size_t> snapped_nodes(const GroupPartition& p, std::size_t m) {
  std::vector<std::size_t> out;
  for (double b : p.breakpoints()) {
    out.push_back(static_cast<std::size_t>(std::lround(b * static_cast<double>(m - 1))));
  }
  return out;
}

Problem build(const Dataset& data, const Regularizer& reg, const FitConfig& config, bool with_lambda = true) {
  config.validate();
  if (data.size() == 0) throw ContractViolation("dataset is empty");
  data.validate();
  const bool profile = std::holds_alternative<RegProfile>(reg);
  if (profile != (config.penalty_kind == PenaltyKind::IntegralRho)) {
    throw ContractViolation(profile ? "IntegralRho penalty needs a RegProfile, got ExampleWeights"
                                    : "PerExampleTau penalty needs ExampleWeights, got a RegProfile");
  }

  Problem pb;
  pb.task = data.task;
  pb.m = config.m;
  pb.inv_n = 1.0 / static_cast<double>(data.size());
  const double scale = static_cast<double>(config.m - 1);
  const double dt = 1.0 / scale;
  pb.points.reserve(data.size());
  for (const auto& s : data.points) {
    const double u = s.x * scale;
    const std::size_t c = std::min(static_cast<std::size_t>(u), config.m - 2);
    pb.points.push_back({c, u - static_cast<double>(c), s.y});
  }

  const double lam = with_lambda ? config.lambda : 1.0;
  pb.kappa.assign(config.m - 1, 0.0);
  if (profile) {
    const auto& rp = std::get<RegProfile>(reg);
    const auto nodes = snapped_nodes(rp.partition, config.m);
    for (std::size_t j = 0; j < rp.rho.size(); ++j) {
      for (std::size_t c = nodes[j]; c < nodes[j + 1]; ++c) pb.kappa[c] = lam * rp.rho[j] / dt;
    }
  } else {
    const auto& w = std::get<ExampleWeights>(reg);
    if (w.size() != data.size()) {
      throw ContractViolation(fmt::format("{} weights for {} examples", w.size(), data.size()));
    }
    for (std::size_t i = 0; i < data.size(); ++i) pb.kappa[pb.points[i].cell] += w.tau[i];
    const double k = lam * pb.inv_n / (dt * dt);
    for (double& kc : pb.kappa) kc *= k;
  }
  return pb;
}

ObjectiveParts parts(const Problem& pb, const std::vector<double>& v) {
  ObjectiveParts out;
  for (const auto& p : pb.points) {
    out.loss += pb.loss((1.0 - p.w) * v[p.cell] + p.w * v[p.cell + 1], p.y);
  }
  out.loss *= pb.inv_n;
  for (std::size_t c = 0; c + 1 < pb.m; ++c) {
    const double dv = v[c + 1] - v[c];
    out.penalty += pb.kappa[c] * dv * dv;
  }
  return out;
}

double value(const Problem& pb, const std::vector<double>& v) {
  const auto p = parts(pb, v);
  return p.loss + p.penalty;
}

void gradient(const Problem& pb, const std::vector<double>& v, std::vector<double>& g) {
  g.assign(pb.m, 0.0);
  for (const auto& p : pb.points) {
    const double d = pb.inv_n * pb.dloss((1.0 - p.w) * v[p.cell] + p.w * v[p.cell + 1], p.y);
    g[p.cell] += (1.0 - p.w) * d;
    g[p.cell + 1] += p.w * d;
  }
  for (std::size_t c = 0; c + 1 < pb.m; ++c) {
    const double t = 2.0 * pb.kappa[c] * (v[c + 1] - v[c]);
    g[c] -= t;
    g[c + 1] += t;
  }
}

// Tridiagonal Hessian: diag[u], off[u] couples u and u + 1.
void hessian(const Problem& pb, const std::vector<double>& v, std::vector<double>& diag, std::vector<double>& off) {
  diag.assign(pb.m, 0.0);
  off.assign(pb.m - 1, 0.0);
  for (const auto& p : pb.points) {
    const double h = pb.inv_n * pb.d2loss((1.0 - p.w) * v[p.cell] + p.w * v[p.cell + 1]);
    diag[p.cell] += h * (1.0 - p.w) * (1.0 - p.w);
    diag[p.cell + 1] += h * p.w * p.w;
    off[p.cell] += h * p.w * (1.0 - p.w);
  }
  for (std::size_t c = 0; c + 1 < pb.m; ++c) {
    diag[c] += 2.0 * pb.kappa[c];
    diag[c + 1] += 2.0 * pb.kappa[c];
    off[c] -= 2.0 * pb.kappa[c];
  }
  for (double& d : diag) d = std::max(d, 1e-12);
}

// Thomas algorithm; overwrites rhs with the solution.
bool solve_tridiagonal(std::vector<double> diag, const std::vector<double>& off, std::vector<double>& rhs) {
  const std::size_t m = diag.size();
  for (std::size_t u = 1; u < m; ++u) {
    if (!(diag[u - 1] > 0.0)) return false;
    const double f = off[u - 1] / diag[u - 1];
    diag[u] -= f * off[u - 1];
    rhs[u] -= f * rhs[u - 1];
  }
  if (!(diag[m - 1] > 0.0)) return false;
  rhs[m - 1] /= diag[m - 1];
  for (std::size_t u = m - 1; u-- > 0;) rhs[u] = (rhs[u] - off[u] * rhs[u + 1]) / diag[u];
  for (double r : rhs) {
    if (!std::isfinite(r)) return false;
  }
  return true;
}

// Sup-norm of the gradient, ignoring components that push a capped value further out.
double projected_norm(const std::vector<double>& g, const std::vector<double>& v, double cap) {
  double out = 0.0;
  for (std::size_t u = 0; u < g.size(); ++u) {
    if (v[u] >= cap && g[u] < 0.0) continue;
    if (v[u] <= -cap && g[u] > 0.0) continue;
    out = std::max(out, std::abs(g[u]));
  }
  return out;
}

}  // namespace

GridFunction::GridFunction(std::vector<double> values) : values_(std::move(values)) {
  if (values_.size() < 2) throw ContractViolation("grid needs at least 2 nodes");
  for (double x : values_) {
    if (!std::isfinite(x)) throw ContractViolation("grid values must be finite");
  }
}

GridFunction GridFunction::sampled(std::size_t m, const std::function<double(double)>& f) {
  if (m < 2) throw ContractViolation("grid needs at least 2 nodes");
  std::vector<double> v(m);
  for (std::size_t u = 0; u < m; ++u) v[u] = f(static_cast<double>(u) / static_cast<double>(m - 1));
  return GridFunction(std::move(v));
}

double GridFunction::node(std::size_t u) const {
  return u + 1 == values_.size() ? 1.0 : static_cast<double>(u) / static_cast<double>(values_.size() - 1);
}

std::size_t GridFunction::cell_of(double t) const {
  const double u = std::clamp(t, 0.0, 1.0) * static_cast<double>(values_.size() - 1);
  return std::min(static_cast<std::size_t>(u), values_.size() - 2);
}

double GridFunction::operator()(double t) const {
  const double u = t * static_cast<double>(values_.size() - 1);
  const std::size_t c = cell_of(t);
  const double w = u - static_cast<double>(c);
  if (w == 0.0) return values_[c];
  if (w == 1.0) return values_[c + 1];
  return (1.0 - w) * values_[c] + w * values_[c + 1];
}

void FitConfig::validate() const {
  if (m < 2) throw ContractViolation("grid size m must be >= 2");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ContractViolation("lambda must be finite and >= 0");
  if (!(grad_tol > 0.0)) throw ContractViolation("grad_tol must be positive");
  if (max_iters < 1) throw ContractViolation("max_iters must be >= 1");
  if (!(value_cap > 0.0)) throw ContractViolation("value_cap must be positive");
}

ObjectiveParts objective_parts(const Dataset& data, const Regularizer& reg, const FitConfig& config,
                               const GridFunction& g) {
  if (g.size() != config.m) throw ContractViolation("grid size does not match config.m");
  return parts(build(data, reg, config, false), g.values());
}

double objective(const Dataset& data, const Regularizer& reg, const FitConfig& config, const GridFunction& g) {
  if (g.size() != config.m) throw ContractViolation("grid size does not match config.m");
  return value(build(data, reg, config), g.values());
}

std::vector<double> objective_gradient(const Dataset& data, const Regularizer& reg, const FitConfig& config,
                                       const GridFunction& g) {
  if (g.size() != config.m) throw ContractViolation("grid size does not match config.m");
  std::vector<double> out;
  gradient(build(data, reg, config), g.values(), out);
  return out;
}

FitResult fit(const Dataset& data, const Regularizer& reg, const FitConfig& config) {
  const Problem pb = build(data, reg, config);
  const double cap = config.value_cap;
  std::vector<double> v(pb.m, 0.0);
  std::vector<double> g, diag, off, dir, trial;
  FitResult res;
  bool cap_warned = false;

  double f = value(pb, v);
  for (std::size_t it = 0;; ++it) {
    gradient(pb, v, g);
    const double gn = projected_norm(g, v, cap);
    if (config.keep_log) res.log.push_back({it, f, gn});
    if (!std::isfinite(f) || !std::isfinite(gn)) {
      throw FitError("objective became non-finite", GridFunction(v), gn);
    }
    res.iterations = it;
    res.objective = f;
    res.grad_norm = gn;
    if (gn <= config.grad_tol) break;
    if (it >= config.max_iters) {
      throw FitError(fmt::format("no convergence after {} iterations (gradient sup-norm {:.3g})", it, gn),
                     GridFunction(v), gn);
    }

    hessian(pb, v, diag, off);
    const double hmax = *std::max_element(diag.begin(), diag.end());

    auto line_search = [&](const std::vector<double>& d, double alpha) {
      double slope = 0.0;
      for (std::size_t u = 0; u < pb.m; ++u) slope += g[u] * d[u];
      if (!(slope < 0.0)) return false;
      for (int k = 0; k < 60; ++k, alpha *= 0.5) {
        bool clipped = false;
        trial.resize(pb.m);
        for (std::size_t u = 0; u < pb.m; ++u) {
          const double x = v[u] + alpha * d[u];
          trial[u] = std::clamp(x, -cap, cap);
          clipped |= trial[u] != x;
        }
        const double ft = value(pb, trial);
        if (ft < f && ft <= f + 1e-4 * alpha * slope) {
          if (clipped && !cap_warned) {
            res.warnings.push_back(fmt::format("fitted values clipped to |f| <= {}", cap));
            cap_warned = true;
          }
          v.swap(trial);
          f = ft;
          return true;
        }
      }
      return false;
    };

    dir.resize(pb.m);
    for (std::size_t u = 0; u < pb.m; ++u) dir[u] = -g[u];
    bool moved = solve_tridiagonal(diag, off, dir) && line_search(dir, 1.0);
    if (!moved) {
      for (std::size_t u = 0; u < pb.m; ++u) dir[u] = -g[u];
      moved = line_search(dir, 1.0 / hmax);
    }
    if (!moved) {
      double vmax = 1.0;
      for (double x : v) vmax = std::max(vmax, std::abs(x));
      const double floor = 16.0 * std::numeric_limits<double>::epsilon() * hmax * vmax * static_cast<double>(pb.m);
      if (gn <= floor) {
        res.warnings.push_back(
            fmt::format("stopped at rounding floor: gradient sup-norm {:.3g} > grad_tol {:.3g}", gn, config.grad_tol));
        break;
      }
      throw FitError(fmt::format("line search stalled (gradient sup-norm {:.3g})", gn), GridFunction(v), gn);
    }
  }
  res.g = GridFunction(std::move(v));
  return res;
}

double empirical_mse(const GridFunction& g, const ProblemSpec& spec, double lo, double hi, int refine) {
  if (!(lo >= 0.0 && hi <= 1.0 && lo <= hi)) throw ContractViolation("empirical_mse needs 0 <= lo <= hi <= 1");
  if (refine < 1) throw ContractViolation("refine must be >= 1");
  std::vector<double> cuts{lo, hi};
  for (std::size_t u = 1; u + 1 < g.size(); ++u) {
    const double t = g.node(u);
    if (t > lo && t < hi) cuts.push_back(t);
  }
  for (double b : spec.breakpoints()) {
    if (b > lo && b < hi) cuts.push_back(b);
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  auto err = [&](double t) {
    const double e = g(t) - spec.f(t);
    return e * e;
  };
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double h = (cuts[i + 1] - cuts[i]) / refine;
    for (int k = 0; k < refine; ++k) {
      const double a = cuts[i] + k * h;
      const double b = k + 1 == refine ? cuts[i + 1] : a + h;
      total += quadrature::gauss_legendre5(err, a, b);
    }
  }
  return total;
}

}  // namespace hetreg
