#pragma once

// Small multilayer perceptron: tanh hidden layer, linear output, optional
// cascade connection from the inputs straight to the output layer.
//
// Parameters flatten in the order W1 (row-major), b1, W2 (row-major), b2,
// Wc (row-major, cascade only). Weight initialisation and the Jacobian use
// the same order.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace mtlfault {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct MlpSpec {
  int input_dim = 20;
  int hidden_dim = 10;
  int output_dim = 1;
  bool cascade = false;

  friend bool operator==(const MlpSpec&, const MlpSpec&) = default;
};

struct MlpWeights {
  MlpSpec spec;
  RowMatrix w1;  // hidden x input
  Eigen::VectorXd b1;
  RowMatrix w2;  // output x hidden
  Eigen::VectorXd b2;
  RowMatrix wc;  // output x input, empty unless cascade

  static MlpWeights zeros(const MlpSpec& spec);
  static std::size_t parameter_count(const MlpSpec& spec);
  Eigen::VectorXd flatten() const;
  static MlpWeights unflatten(const MlpSpec& spec, const Eigen::VectorXd& theta);
};

enum class TrainAlgorithm { kLevenbergMarquardt, kScaledConjugateGradient, kGradientDescentAdaptive };

std::string to_string(TrainAlgorithm a);
TrainAlgorithm train_algorithm_from_string(const std::string& s);

struct TrainConfigNN {
  TrainAlgorithm algorithm = TrainAlgorithm::kLevenbergMarquardt;
  int max_epochs = 1000;
  double grad_tol = 1e-7;
  double goal_mse = 0.0;
  std::uint64_t seed = 1;
  // Levenberg-Marquardt
  double mu0 = 1e-3;
  double mu_inc = 10.0;
  double mu_dec = 0.1;
  double mu_max = 1e10;
  // gradient descent, momentum, adaptive rate
  double lr = 0.01;
  double momentum = 0.9;
  double lr_inc = 1.05;
  double lr_dec = 0.7;
  double max_perf_inc = 1.04;
  // scaled conjugate gradient
  double sigma = 5e-5;
  double lambda = 5e-7;
};

void validate(const MlpSpec& spec);
void validate(const TrainConfigNN& cfg);

struct TrainResult {
  MlpWeights weights;
  int epochs_run = 0;
  double final_mse = 0.0;
  std::vector<double> mse_trace;  // entry 0 is the initial MSE
  std::string stop_reason;
};

/// Uniform in [-0.5, 0.5) from a splitmix64 stream, flatten order.
MlpWeights init_weights(const MlpSpec& spec, std::uint64_t seed);

Eigen::VectorXd forward(const MlpWeights& w, std::span<const double> x);

/// Rows: one per sample and output (sample-major), columns: parameters.
/// Entries are d(target - output)/d(theta).
Eigen::MatrixXd jacobian(const MlpWeights& w, const RowMatrix& x);

/// Mean squared error over all samples and outputs.
double mse(const MlpWeights& w, const RowMatrix& x, const RowMatrix& targets);

/// Full-batch training. Targets have one row per sample.
TrainResult train(const MlpSpec& spec, const TrainConfigNN& cfg, const RowMatrix& x,
                  const RowMatrix& targets);

namespace detail {
/// splitmix64 step; advances `state`.
std::uint64_t splitmix64(std::uint64_t& state);
}  // namespace detail

}  // namespace mtlfault
