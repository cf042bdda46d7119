#include "hetreg/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "hetreg/rng.hpp"

namespace hetreg {
namespace {

using Eigen::ArrayXXd;
using Eigen::MatrixXd;
using Eigen::RowVectorXd;
using Eigen::VectorXd;

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double dloss(double a, double y, TaskKind task) {
  return task == TaskKind::Regression ? a - y : -y * sigmoid(-y * a);
}

double d2loss(double a, TaskKind task) {
  return task == TaskKind::Regression ? 1.0 : sigmoid(a) * sigmoid(-a);
}

struct Grads {
  std::vector<MatrixXd> W;
  std::vector<VectorXd> b;
};

// Activations of one batch; column i is example i.
struct Pass {
  std::vector<MatrixXd> Z;  // pre-activations of every layer; Z.back() is the prediction row
  std::vector<MatrixXd> A;  // A[0] = inputs, A[l] = sigma(Z[l - 1])
  std::vector<ArrayXXd> s1;  // sigma'(Z[l]) for hidden layers
};

Pass run_forward(const MlpModel& m, const RowVectorXd& x) {
  const std::size_t L = m.layers();
  Pass p;
  p.A.reserve(L);
  p.Z.reserve(L);
  p.A.push_back(x);
  for (std::size_t l = 0; l < L; ++l) {
    MatrixXd z = m.W[l] * p.A[l];
    z.colwise() += m.b[l];
    p.Z.push_back(std::move(z));
    if (l + 1 < L) {
      const auto& zl = p.Z.back();
      if (m.activation() == Activation::Tanh) {
        MatrixXd a = zl.array().tanh().matrix();
        p.s1.push_back(1.0 - a.array().square());
        p.A.push_back(std::move(a));
      } else {
        p.A.push_back(zl.cwiseMax(0.0));
        p.s1.push_back((zl.array() > 0.0).cast<double>());
      }
    }
  }
  return p;
}

// sigma''(Z[l]) for hidden layer l.
ArrayXXd second_derivative(const MlpModel& m, const Pass& p, std::size_t l) {
  if (m.activation() == Activation::ReLU) return ArrayXXd::Zero(p.Z[l].rows(), p.Z[l].cols());
  const ArrayXXd t = p.A[l + 1].array();
  return -2.0 * t * p.s1[l];
}

// Reverse sweep producing U[l] = dT/dZ[l] and D[l] = dT/dA[l + 1] = dT/dh^(l+1).
struct JacobianPass {
  std::vector<MatrixXd> U;
  std::vector<MatrixXd> D;
  RowVectorXd r;  // R per column
};

JacobianPass run_jacobian(const MlpModel& m, const Pass& p, const RowVectorXd& y, TaskKind task,
                          JacobianTarget target) {
  const std::size_t L = m.layers();
  const Eigen::Index B = y.size();
  JacobianPass j;
  j.U.resize(L);
  j.D.resize(L - 1);
  RowVectorXd top(B);
  for (Eigen::Index i = 0; i < B; ++i) {
    top[i] = target == JacobianTarget::Loss ? dloss(p.Z.back()(0, i), y[i], task) : 1.0;
  }
  j.U[L - 1] = top;
  RowVectorXd r2 = RowVectorXd::Zero(B);
  for (std::size_t l = L - 1; l-- > 0;) {
    j.D[l] = m.W[l + 1].transpose() * j.U[l + 1];
    j.U[l] = (j.D[l].array() * p.s1[l]).matrix();
    r2 += j.D[l].colwise().squaredNorm();
  }
  j.r = r2.cwiseSqrt();
  return j;
}

Grads zero_grads(const MlpModel& m) {
  Grads g;
  for (std::size_t l = 0; l < m.layers(); ++l) {
    g.W.push_back(MatrixXd::Zero(m.W[l].rows(), m.W[l].cols()));
    g.b.push_back(VectorXd::Zero(m.b[l].size()));
  }
  return g;
}

BatchTerms batch_core(const MlpModel& m, std::span<const Sample> rows, std::span<const double> coef, TaskKind task,
                      JacobianTarget target, Grads* grads) {
  const std::size_t L = m.layers();
  const auto B = static_cast<Eigen::Index>(rows.size());
  if (B == 0) throw ContractViolation("empty batch");
  if (coef.size() != rows.size()) throw ContractViolation("coefficients not aligned with batch");
  RowVectorXd x(B), y(B);
  for (Eigen::Index i = 0; i < B; ++i) {
    x[i] = rows[i].x;
    y[i] = rows[i].y;
  }
  const double invB = 1.0 / static_cast<double>(B);
  const Pass p = run_forward(m, x);
  const RowVectorXd& P = p.Z.back();

  BatchTerms out;
  for (Eigen::Index i = 0; i < B; ++i) out.loss += mlp_loss(P[i], y[i], task);
  out.loss *= invB;

  const bool regularized = std::any_of(coef.begin(), coef.end(), [](double c) { return c != 0.0; });
  JacobianPass jp;
  if (regularized) {
    jp = run_jacobian(m, p, y, task, target);
    for (Eigen::Index i = 0; i < B; ++i) out.reg += coef[i] * jp.r[i];
    out.reg *= invB;
  }
  out.objective = out.loss + out.reg;
  if (!grads) return out;

  *grads = zero_grads(m);
  Grads& g = *grads;
  std::vector<ArrayXXd> zextra(L - 1);
  MatrixXd ubar;  // adjoint of U[l + 1] accumulated by the second sweep
  if (regularized) {
    // dR_i/dD = D / R_i, weighted by coef_i / B.
    RowVectorXd c(B);
    for (Eigen::Index i = 0; i < B; ++i) c[i] = jp.r[i] > 0.0 ? coef[i] * invB / jp.r[i] : 0.0;
    ubar = MatrixXd::Zero(jp.U[0].rows(), B);
    for (std::size_t l = 0; l + 1 < L; ++l) {
      ArrayXXd dbar = jp.D[l].array().rowwise() * c.array();
      if (l > 0) {
        const ArrayXXd u = ubar.array();
        dbar += u * p.s1[l];
        zextra[l] = u * jp.D[l].array() * second_derivative(m, p, l);
      } else {
        zextra[l] = ArrayXXd::Zero(jp.D[l].rows(), B);
      }
      g.W[l + 1].noalias() += jp.U[l + 1] * dbar.matrix().transpose();
      ubar = m.W[l + 1] * dbar.matrix();
    }
  }

  MatrixXd zbar(1, B);
  for (Eigen::Index i = 0; i < B; ++i) {
    zbar(0, i) = invB * dloss(P[i], y[i], task);
    if (regularized && target == JacobianTarget::Loss) zbar(0, i) += ubar(0, i) * d2loss(P[i], task);
  }
  for (std::size_t l = L; l-- > 0;) {
    g.W[l].noalias() += zbar * p.A[l].transpose();
    g.b[l] += zbar.rowwise().sum();
    if (l == 0) break;
    MatrixXd abar = m.W[l].transpose() * zbar;
    ArrayXXd z = abar.array() * p.s1[l - 1];
    if (regularized) z += zextra[l - 1];
    zbar = z.matrix();
  }
  return out;
}

void flatten_into(const Grads& g, VectorXd& out) {
  Eigen::Index n = 0;
  for (std::size_t l = 0; l < g.W.size(); ++l) n += g.W[l].size() + g.b[l].size();
  out.resize(n);
  Eigen::Index k = 0;
  for (std::size_t l = 0; l < g.W.size(); ++l) {
    for (Eigen::Index r = 0; r < g.W[l].rows(); ++r) {
      for (Eigen::Index c = 0; c < g.W[l].cols(); ++c) out[k++] = g.W[l](r, c);
    }
    for (Eigen::Index r = 0; r < g.b[l].size(); ++r) out[k++] = g.b[l][r];
  }
}

bool finite(const MlpModel& m) {
  for (std::size_t l = 0; l < m.layers(); ++l) {
    if (!m.W[l].allFinite() || !m.b[l].allFinite()) return false;
  }
  return true;
}

TrainResult train_core(MlpModel model, const Dataset& data, const std::vector<double>& coef,
                       const SgdConfig& config) {
  config.validate();
  if (data.size() == 0) throw ContractViolation("dataset is empty");
  data.validate();
  const std::size_t n = data.size();
  Rng rng(config.seed);
  std::vector<std::size_t> perm(n);
  std::vector<Sample> rows;
  std::vector<double> bc;
  Grads g;
  TrainResult res{model, {}, 0.0};
  std::size_t step = 0;

  auto log_point = [&](const MlpModel& m) {
    const auto t = batch_core(m, data.points, coef, data.task, config.target, nullptr);
    res.curve.push_back({step, t.loss, t.reg, t.objective});
  };
  if (config.log_every > 0) log_point(model);

  MlpModel last_good = model;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    rng.shuffle(perm.begin(), perm.end());
    for (std::size_t s = 0; s < n; s += config.batch_size) {
      const std::size_t e = std::min(n, s + config.batch_size);
      rows.clear();
      bc.clear();
      for (std::size_t k = s; k < e; ++k) {
        rows.push_back(data.points[perm[k]]);
        bc.push_back(coef[perm[k]]);
      }
      const auto t = batch_core(model, rows, bc, data.task, config.target, &g);
      if (!std::isfinite(t.objective)) {
        throw TrainingDiverged(fmt::format("objective became non-finite at step {}", step), last_good);
      }
      for (std::size_t l = 0; l < model.layers(); ++l) {
        model.W[l] -= config.learning_rate * g.W[l];
        model.b[l] -= config.learning_rate * g.b[l];
      }
      ++step;
    }
    if (!finite(model)) {
      throw TrainingDiverged(fmt::format("parameters became non-finite in epoch {}", epoch), last_good);
    }
    last_good = model;
    if (config.log_every > 0 && (epoch + 1) % config.log_every == 0) log_point(model);
  }
  res.final_objective = batch_core(model, data.points, coef, data.task, config.target, nullptr).objective;
  if (!std::isfinite(res.final_objective)) throw TrainingDiverged("final objective is non-finite", last_good);
  res.model = std::move(model);
  return res;
}

}  // namespace

std::string_view to_string(Activation a) { return a == Activation::Tanh ? "tanh" : "relu"; }

Activation activation_from_string(std::string_view name) {
  if (name == "tanh") return Activation::Tanh;
  if (name == "relu") return Activation::ReLU;
  throw ContractViolation(fmt::format("unknown activation '{}'", name));
}

std::string_view to_string(JacobianTarget t) { return t == JacobianTarget::Loss ? "loss" : "model"; }

JacobianTarget jacobian_target_from_string(std::string_view name) {
  if (name == "loss") return JacobianTarget::Loss;
  if (name == "model") return JacobianTarget::Model;
  throw ContractViolation(fmt::format("unknown jacobian target '{}'", name));
}

MlpModel::MlpModel(std::vector<std::size_t> widths, Activation activation)
    : widths_(std::move(widths)), activation_(activation) {
  if (widths_.size() < 2 || widths_.front() != 1 || widths_.back() != 1) {
    throw ContractViolation("network must map 1 input to 1 output");
  }
  for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
    if (widths_[l + 1] == 0) throw ContractViolation("layer widths must be positive");
    W.push_back(MatrixXd::Zero(static_cast<Eigen::Index>(widths_[l + 1]), static_cast<Eigen::Index>(widths_[l])));
    b.push_back(VectorXd::Zero(static_cast<Eigen::Index>(widths_[l + 1])));
  }
}

MlpModel MlpModel::initialized(std::vector<std::size_t> hidden, Activation activation, std::uint64_t seed,
                               double first_layer_scale) {
  std::vector<std::size_t> widths{1};
  widths.insert(widths.end(), hidden.begin(), hidden.end());
  widths.push_back(1);
  MlpModel m(widths, activation);
  Rng rng(seed);
  for (std::size_t l = 0; l < m.layers(); ++l) {
    const double bound = l == 0 ? first_layer_scale
                                : std::sqrt(6.0 / static_cast<double>(widths[l] + widths[l + 1]));
    for (Eigen::Index r = 0; r < m.W[l].rows(); ++r) {
      for (Eigen::Index c = 0; c < m.W[l].cols(); ++c) m.W[l](r, c) = rng.uniform(-bound, bound);
    }
    if (l == 0) {
      for (Eigen::Index r = 0; r < m.b[l].size(); ++r) m.b[l][r] = rng.uniform(-bound, bound);
    }
  }
  return m;
}

std::size_t MlpModel::num_params() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < W.size(); ++l) n += static_cast<std::size_t>(W[l].size() + b[l].size());
  return n;
}

VectorXd MlpModel::flatten() const {
  Grads g{W, b};
  VectorXd out;
  flatten_into(g, out);
  return out;
}

void MlpModel::unflatten(const VectorXd& theta) {
  if (static_cast<std::size_t>(theta.size()) != num_params()) {
    throw ContractViolation(fmt::format("expected {} parameters, got {}", num_params(), theta.size()));
  }
  Eigen::Index k = 0;
  for (std::size_t l = 0; l < W.size(); ++l) {
    for (Eigen::Index r = 0; r < W[l].rows(); ++r) {
      for (Eigen::Index c = 0; c < W[l].cols(); ++c) W[l](r, c) = theta[k++];
    }
    for (Eigen::Index r = 0; r < b[l].size(); ++r) b[l][r] = theta[k++];
  }
}

double mlp_loss(double a, double y, TaskKind task) {
  if (task == TaskKind::Regression) return 0.5 * (a - y) * (a - y);
  const double z = -y * a;
  return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)));
}

ForwardResult forward(const MlpModel& model, double x) {
  RowVectorXd xs(1);
  xs[0] = x;
  const Pass p = run_forward(model, xs);
  ForwardResult out;
  out.prediction = p.Z.back()(0, 0);
  for (std::size_t l = 1; l < p.A.size(); ++l) out.hidden.push_back(p.A[l].col(0));
  return out;
}

RegTermReport jacobian_reg(const MlpModel& model, double x, double y, TaskKind task, JacobianTarget target) {
  RowVectorXd xs(1), ys(1);
  xs[0] = x;
  ys[0] = y;
  const Pass p = run_forward(model, xs);
  const JacobianPass j = run_jacobian(model, p, ys, task, target);
  RegTermReport rep;
  double sum = 0.0;
  for (const auto& d : j.D) {
    rep.layer_sq_norms.push_back(d.squaredNorm());
    sum += d.squaredNorm();
  }
  rep.r_value = std::sqrt(sum);
  return rep;
}

BatchTerms batch_objective(const MlpModel& model, std::span<const Sample> rows, std::span<const double> coef,
                           TaskKind task, JacobianTarget target, VectorXd* grad) {
  if (!grad) return batch_core(model, rows, coef, task, target, nullptr);
  Grads g;
  const auto out = batch_core(model, rows, coef, task, target, &g);
  flatten_into(g, *grad);
  return out;
}

BatchTerms full_objective(const MlpModel& model, const Dataset& data, const ExampleWeights& weights, double lambda,
                          JacobianTarget target) {
  if (weights.size() != data.size()) throw ContractViolation("weights not aligned with dataset");
  std::vector<double> coef(data.size());
  for (std::size_t i = 0; i < coef.size(); ++i) coef[i] = lambda * weights.tau[i];
  return batch_core(model, data.points, coef, data.task, target, nullptr);
}

void SgdConfig::validate() const {
  if (batch_size < 1) throw ContractViolation("batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw ContractViolation("learning_rate must be positive");
}

TrainResult train(MlpModel model, const Dataset& data, const ExampleWeights& weights, double lambda,
                  const SgdConfig& config) {
  if (weights.size() != data.size()) {
    throw ContractViolation(fmt::format("{} weights for {} examples", weights.size(), data.size()));
  }
  if (!(lambda >= 0.0)) throw ContractViolation("lambda must be >= 0");
  std::vector<double> coef(data.size());
  for (std::size_t i = 0; i < coef.size(); ++i) coef[i] = lambda * weights.tau[i];
  return train_core(std::move(model), data, coef, config);
}

TrainResult train_uniform(MlpModel model, const Dataset& data, double lambda, const SgdConfig& config) {
  if (!(lambda >= 0.0)) throw ContractViolation("lambda must be >= 0");
  std::vector<double> coef(data.size(), lambda * 1.0);
  return train_core(std::move(model), data, coef, config);
}

std::vector<double> predict(const MlpModel& model, std::span<const double> t) {
  if (t.empty()) return {};
  const RowVectorXd x = Eigen::Map<const RowVectorXd>(t.data(), static_cast<Eigen::Index>(t.size()));
  const Pass p = run_forward(model, x);
  const RowVectorXd& P = p.Z.back();
  return std::vector<double>(P.data(), P.data() + P.size());
}

double mlp_region_mse(const MlpModel& model, const ProblemSpec& spec, double lo, double hi, int panels) {
  if (!(lo < hi) || panels < 1) throw ContractViolation("mlp_region_mse needs lo < hi and panels >= 1");
  static constexpr double kNodes[5] = {0.0, -0.5384693101056830910363144, 0.5384693101056830910363144,
                                       -0.9061798459386639927976269, 0.9061798459386639927976269};
  static constexpr double kWeights[5] = {0.5688888888888888888888889, 0.4786286704993664680412915,
                                         0.4786286704993664680412915, 0.2369268850561890875142640,
                                         0.2369268850561890875142640};
  const double h = (hi - lo) / panels;
  std::vector<double> t;
  std::vector<double> w;
  t.reserve(5 * static_cast<std::size_t>(panels));
  for (int k = 0; k < panels; ++k) {
    const double mid = lo + (k + 0.5) * h;
    for (int q = 0; q < 5; ++q) {
      t.push_back(mid + 0.5 * h * kNodes[q]);
      w.push_back(0.5 * h * kWeights[q]);
    }
  }
  const auto p = predict(model, t);
  double total = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double e = p[i] - spec.f(t[i]);
    total += w[i] * e * e;
  }
  return total;
}

}  // namespace hetreg
