#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "hetreg/domain.hpp"
#include "hetreg/error.hpp"
#include "hetreg/regprofile.hpp"

namespace hetreg {

enum class Activation { Tanh, ReLU };
std::string_view to_string(Activation a);
Activation activation_from_string(std::string_view name);

// Differentiate R through the loss (the default) or through the network output.
enum class JacobianTarget { Loss, Model };
std::string_view to_string(JacobianTarget t);
JacobianTarget jacobian_target_from_string(std::string_view name);

// Feed-forward net 1 -> hidden... -> 1 with a linear output layer.
// Layer l maps width[l] to width[l + 1]: z = W[l] a + b[l].
class MlpModel {
 public:
  MlpModel(std::vector<std::size_t> widths, Activation activation);

  // Glorot-uniform weights and zero biases, except the first layer whose
  // weights and biases are uniform on [-first_layer_scale, first_layer_scale].
  static MlpModel initialized(std::vector<std::size_t> hidden, Activation activation, std::uint64_t seed,
                              double first_layer_scale = 1.0);

  const std::vector<std::size_t>& widths() const { return widths_; }
  Activation activation() const { return activation_; }
  std::size_t layers() const { return W.size(); }
  std::size_t hidden_layers() const { return W.size() - 1; }
  std::size_t num_params() const;

  // Layer by layer: W row-major, then b.
  Eigen::VectorXd flatten() const;
  void unflatten(const Eigen::VectorXd& theta);

  std::vector<Eigen::MatrixXd> W;
  std::vector<Eigen::VectorXd> b;

 private:
  std::vector<std::size_t> widths_;
  Activation activation_;
};

struct ForwardResult {
  double prediction = 0.0;
  std::vector<Eigen::VectorXd> hidden;  // h^(1) .. h^(L-1)
};

ForwardResult forward(const MlpModel& model, double x);

struct RegTermReport {
  std::vector<double> layer_sq_norms;  // |dT/dh^(j)|^2
  double r_value = 0.0;                // sqrt of their sum
};

// R(x) = (sum_j |dT/dh^(j)|^2)^{1/2} with T = loss(f(x), y) or T = f(x).
RegTermReport jacobian_reg(const MlpModel& model, double x, double y, TaskKind task,
                           JacobianTarget target = JacobianTarget::Loss);

// Per-example loss: (y - a)^2 / 2 or log(1 + exp(-y a)).
double mlp_loss(double a, double y, TaskKind task);

struct BatchTerms {
  double loss = 0.0;       // mean loss
  double reg = 0.0;        // mean coef_i R_i
  double objective = 0.0;  // loss + reg
};

// Mean over the given rows of loss_i + coef_i R_i, with coef_i = lambda tau_i.
// With `grad` non-null also writes the parameter gradient (flatten() layout),
// the regularizer part obtained by a second reverse sweep through the
// Jacobian computation.
BatchTerms batch_objective(const MlpModel& model, std::span<const Sample> rows, std::span<const double> coef,
                           TaskKind task, JacobianTarget target, Eigen::VectorXd* grad = nullptr);

// Full-dataset objective (1/n) sum_i [loss_i + lambda tau_i R_i].
BatchTerms full_objective(const MlpModel& model, const Dataset& data, const ExampleWeights& weights, double lambda,
                          JacobianTarget target = JacobianTarget::Loss);

struct SgdConfig {
  std::size_t batch_size = 32;
  double learning_rate = 1e-2;
  std::size_t epochs = 3000;
  std::uint64_t seed = 0;
  JacobianTarget target = JacobianTarget::Loss;
  std::size_t log_every = 100;  // epochs between curve points; 0 disables

  void validate() const;
};

struct CurvePoint {
  std::size_t step = 0;
  double loss = 0.0;
  double reg = 0.0;
  double objective = 0.0;
};

struct TrainResult {
  MlpModel model;
  std::vector<CurvePoint> curve;
  double final_objective = 0.0;
};

class TrainingDiverged : public SolverFailure {
 public:
  TrainingDiverged(const std::string& what, MlpModel last) : SolverFailure(what), last_(std::move(last)) {}
  const MlpModel& last_finite() const { return last_; }

 private:
  MlpModel last_;
};

// Mini-batch SGD on (1/n) sum_i [loss_i + lambda tau_i R_i]. Each epoch visits a
// permutation drawn from Rng(config.seed).
TrainResult train(MlpModel model, const Dataset& data, const ExampleWeights& weights, double lambda,
                  const SgdConfig& config);
// Same trainer with tau_i = 1.
TrainResult train_uniform(MlpModel model, const Dataset& data, double lambda, const SgdConfig& config);

// Model predictions at each t.
std::vector<double> predict(const MlpModel& model, std::span<const double> t);

// int_lo^hi (f_theta - f*)^2 dt, five-point Gauss-Legendre on `panels` equal panels.
double mlp_region_mse(const MlpModel& model, const ProblemSpec& spec, double lo, double hi, int panels = 512);

}  // namespace hetreg
