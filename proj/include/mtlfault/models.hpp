#pragma once

// Trained estimators as a single value type: feature standardisation,
// target scale and one of the model families. Predictions are made in
// normalized target units (distance / section length) and converted to km
// with the stored scale.

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "mtlfault/neural_net.hpp"
#include "mtlfault/regression.hpp"

namespace mtlfault {

/// Per-feature z-score from training statistics. Constant features get
/// scale 1, so they map to 0.
struct FeatureScaler {
  std::vector<double> mean;
  std::vector<double> scale;

  static FeatureScaler fit(const Eigen::MatrixXd& x);
  Eigen::MatrixXd transform(const Eigen::MatrixXd& x) const;
  std::vector<double> transform(std::span<const double> x) const;
};

enum class ModelFamily { kMlp, kLinear, kTree, kGpr };

std::string to_string(ModelFamily f);
ModelFamily model_family_from_string(const std::string& s);

struct MlpModelConfig {
  int hidden_dim = 10;
  bool cascade = false;
  TrainConfigNN train;
};

/// One roster entry: a named model family and its hyperparameters.
struct ModelConfig {
  std::string name;
  ModelFamily family = ModelFamily::kMlp;
  MlpModelConfig mlp;
  LinearVariant linear_variant = LinearVariant::kOls;
  LinearFitOptions linear;
  int min_leaf = 4;
  GprKernel kernel = GprKernel::kSquaredExponential;
  GprFitOptions gpr;
};

struct FittedModel {
  std::string name;
  FeatureScaler scaler;
  double target_scale_km = 1.0;
  std::variant<MlpWeights, LinearModel, TreeModel, GprModel> body;
  /// Fit diagnostics (epochs, stop reason, selected terms...), in insertion order.
  std::vector<std::pair<std::string, std::string>> info;

  ModelFamily family() const;
  std::size_t input_dim() const { return scaler.mean.size(); }
  /// Raw (unscaled) features in, normalized target out.
  double predict_normalized(std::span<const double> raw) const;
  double predict_km(std::span<const double> raw) const { return predict_normalized(raw) * target_scale_km; }
};

/// Fits `cfg` on raw features and normalized targets. `seed` feeds network
/// initialisation; other families are deterministic without it.
FittedModel fit_model(const ModelConfig& cfg, const Eigen::MatrixXd& raw_x, const Eigen::VectorXd& y_norm,
                      double target_scale_km, std::uint64_t seed);

/// Versioned flat text; doubles written with 17 significant digits.
std::string serialize(const FittedModel& m);
FittedModel deserialize(const std::string& text);

}  // namespace mtlfault
