#pragma once

// Train/test splitting, location-error metrics and the per-dataset model
// comparison exported as report.json and the CSV tables.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace mtlfault {

enum class SplitPolicy { kSystematic, kSeededRandom };

std::string to_string(SplitPolicy p);
SplitPolicy split_policy_from_string(const std::string& s);

struct DatasetSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
  SplitPolicy policy = SplitPolicy::kSystematic;
};

/// Every `test_every`-th sample (0-based indices test_every-1, 2*test_every-1, ...) is held out.
DatasetSplit systematic_split(std::size_t n, std::size_t test_every = 5);
/// floor(n / test_every) samples held out, chosen by a seeded shuffle; both lists sorted.
DatasetSplit seeded_random_split(std::size_t n, std::size_t test_every, std::uint64_t seed);

/// |actual - predicted| / total * 100.
double percent_error(double actual_km, double predicted_km, double total_km);
double rmse(std::span<const double> x, std::span<const double> y);

struct EvalRecord {
  std::string scenario_id;
  double actual_km = 0.0;
  double predicted_km = 0.0;
  double total_length_km = 0.0;
  double percent_error = 0.0;
};

struct ModelEval {
  std::string name;
  double train_rmse = 0.0;  // normalized units
  double test_rmse = 0.0;   // normalized units
  double test_rmse_km = 0.0;
  double max_percent_error = 0.0;
  std::vector<EvalRecord> test_records;
};

struct EvalReport {
  std::string dataset;
  double total_length_km = 0.0;
  SplitPolicy policy = SplitPolicy::kSystematic;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  /// Leaderboard: ascending test RMSE, ties broken by name.
  std::vector<ModelEval> models;
  /// Models that could not be fitted, with the reason.
  std::vector<std::pair<std::string, std::string>> failed;

  const ModelEval& best() const;
  const ModelEval* find(const std::string& name) const;
};

/// A fitted model seen through its normalized-target prediction.
struct NamedPredictor {
  std::string name;
  std::function<double(std::span<const double>)> predict;
};

/// `features` holds one row per scenario, `targets` the normalized distances,
/// `total_km` converts normalized units to km.
EvalReport evaluate(const std::string& dataset, std::span<const NamedPredictor> models,
                    const Eigen::MatrixXd& features, const Eigen::VectorXd& targets, double total_km,
                    const DatasetSplit& split, const std::vector<std::string>& scenario_ids);

std::string report_json(const std::vector<EvalReport>& reports);
std::string table_rmse_csv(const std::vector<EvalReport>& reports);
std::string table_best_csv(const std::vector<EvalReport>& reports);
std::string plot_csv(const std::vector<EvalReport>& reports);

}  // namespace mtlfault
