#include "mtlfault/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "mtlfault/errors.hpp"

namespace mtlfault {

namespace {

std::string fixed3(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// NaN ranks after every finite value.
double rank_key(double v) { return std::isnan(v) ? std::numeric_limits<double>::infinity() : v; }

}  // namespace

std::string to_string(SplitPolicy p) {
  return p == SplitPolicy::kSystematic ? "systematic" : "seeded-random";
}

SplitPolicy split_policy_from_string(const std::string& s) {
  if (s == "systematic") return SplitPolicy::kSystematic;
  if (s == "seeded-random") return SplitPolicy::kSeededRandom;
  throw ValidationError("unknown split policy '" + s + "'");
}

DatasetSplit systematic_split(std::size_t n, std::size_t test_every) {
  if (test_every < 2) throw ValidationError("test_every must be >= 2");
  if (n < test_every) {
    throw ValidationError("dataset of " + std::to_string(n) + " samples is smaller than test_every " +
                          std::to_string(test_every));
  }
  DatasetSplit s;
  for (std::size_t i = 0; i < n; ++i) ((i + 1) % test_every == 0 ? s.test : s.train).push_back(i);
  return s;
}

DatasetSplit seeded_random_split(std::size_t n, std::size_t test_every, std::uint64_t seed) {
  if (test_every < 2) throw ValidationError("test_every must be >= 2");
  if (n < test_every) {
    throw ValidationError("dataset of " + std::to_string(n) + " samples is smaller than test_every " +
                          std::to_string(test_every));
  }
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  // Fisher-Yates with an explicit generator so the permutation is portable.
  std::mt19937_64 rng(seed);
  for (std::size_t i = n - 1; i > 0; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % (i + 1));
    std::swap(idx[i], idx[j]);
  }
  DatasetSplit s;
  s.policy = SplitPolicy::kSeededRandom;
  const std::size_t n_test = n / test_every;
  s.test.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_test));
  s.train.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_test), idx.end());
  std::sort(s.test.begin(), s.test.end());
  std::sort(s.train.begin(), s.train.end());
  return s;
}

double percent_error(double actual_km, double predicted_km, double total_km) {
  if (!(total_km > 0.0)) throw ValidationError("total line length must be > 0");
  return std::abs(actual_km - predicted_km) / total_km * 100.0;
}

double rmse(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DimensionError("rmse: length mismatch");
  if (x.empty()) throw DimensionError("rmse: empty input");
  double ss = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) ss += (x[i] - y[i]) * (x[i] - y[i]);
  return std::sqrt(ss / static_cast<double>(x.size()));
}

const ModelEval& EvalReport::best() const {
  if (models.empty()) throw std::logic_error("report for '" + dataset + "' has no models");
  return models.front();
}

const ModelEval* EvalReport::find(const std::string& name) const {
  for (const auto& m : models) {
    if (m.name == name) return &m;
  }
  return nullptr;
}

EvalReport evaluate(const std::string& dataset, std::span<const NamedPredictor> models,
                    const Eigen::MatrixXd& features, const Eigen::VectorXd& targets, double total_km,
                    const DatasetSplit& split, const std::vector<std::string>& scenario_ids) {
  if (!(total_km > 0.0)) throw ValidationError("total line length must be > 0");
  if (features.rows() != targets.size() || scenario_ids.size() != static_cast<std::size_t>(targets.size())) {
    throw DimensionError("evaluate: features, targets and ids disagree in length");
  }
  if (split.train.empty() || split.test.empty()) throw ValidationError("evaluate: empty train or test split");
  EvalReport rep;
  rep.dataset = dataset;
  rep.total_length_km = total_km;
  rep.policy = split.policy;
  rep.n_train = split.train.size();
  rep.n_test = split.test.size();

  const auto predict_rows = [&](const NamedPredictor& m, const std::vector<std::size_t>& rows) {
    std::vector<double> out;
    out.reserve(rows.size());
    std::vector<double> row(static_cast<std::size_t>(features.cols()));
    for (const std::size_t i : rows) {
      for (Eigen::Index j = 0; j < features.cols(); ++j) {
        row[static_cast<std::size_t>(j)] = features(static_cast<Eigen::Index>(i), j);
      }
      try {
        out.push_back(m.predict(row));
      } catch (const std::exception& e) {
        throw std::runtime_error("model '" + m.name + "' failed on " + scenario_ids[i] + ": " + e.what());
      }
    }
    return out;
  };
  const auto gather = [&](const std::vector<std::size_t>& rows) {
    std::vector<double> out;
    out.reserve(rows.size());
    for (const std::size_t i : rows) out.push_back(targets(static_cast<Eigen::Index>(i)));
    return out;
  };
  const std::vector<double> t_train = gather(split.train);
  const std::vector<double> t_test = gather(split.test);

  for (const auto& m : models) {
    ModelEval me;
    me.name = m.name;
    const std::vector<double> p_train = predict_rows(m, split.train);
    const std::vector<double> p_test = predict_rows(m, split.test);
    me.train_rmse = rmse(p_train, t_train);
    me.test_rmse = rmse(p_test, t_test);
    me.test_rmse_km = me.test_rmse * total_km;
    for (std::size_t k = 0; k < split.test.size(); ++k) {
      EvalRecord r;
      r.scenario_id = scenario_ids[split.test[k]];
      r.actual_km = t_test[k] * total_km;
      r.predicted_km = p_test[k] * total_km;
      r.total_length_km = total_km;
      r.percent_error = percent_error(r.actual_km, r.predicted_km, total_km);
      me.max_percent_error = std::max(me.max_percent_error, rank_key(r.percent_error));
      me.test_records.push_back(std::move(r));
    }
    rep.models.push_back(std::move(me));
  }
  std::sort(rep.models.begin(), rep.models.end(), [](const ModelEval& a, const ModelEval& b) {
    const double ka = rank_key(a.test_rmse);
    const double kb = rank_key(b.test_rmse);
    if (ka != kb) return ka < kb;
    return a.name < b.name;
  });
  return rep;
}

std::string report_json(const std::vector<EvalReport>& reports) {
  nlohmann::ordered_json root;
  root["metric_units"] = {{"rmse", "normalized distance (distance_in_section / section length)"},
                          {"rmse_km", "km"},
                          {"percent_error", "|actual - predicted| / section length * 100"}};
  root["datasets"] = nlohmann::ordered_json::array();
  for (const auto& rep : reports) {
    nlohmann::ordered_json d;
    d["dataset"] = rep.dataset;
    d["total_length_km"] = rep.total_length_km;
    d["split"] = {{"policy", to_string(rep.policy)}, {"n_train", rep.n_train}, {"n_test", rep.n_test}};
    d["best_model"] = rep.models.empty() ? nlohmann::ordered_json() : nlohmann::ordered_json(rep.best().name);
    d["models"] = nlohmann::ordered_json::array();
    for (std::size_t rank = 0; rank < rep.models.size(); ++rank) {
      const auto& m = rep.models[rank];
      nlohmann::ordered_json jm;
      jm["rank"] = rank + 1;
      jm["name"] = m.name;
      jm["train_rmse"] = m.train_rmse;
      jm["test_rmse"] = m.test_rmse;
      jm["test_rmse_km"] = m.test_rmse_km;
      jm["max_percent_error"] = m.max_percent_error;
      jm["n"] = m.test_records.size();
      jm["records"] = nlohmann::ordered_json::array();
      for (const auto& r : m.test_records) {
        jm["records"].push_back({{"scenario_id", r.scenario_id},
                                 {"actual_km", r.actual_km},
                                 {"predicted_km", r.predicted_km},
                                 {"total_length_km", r.total_length_km},
                                 {"percent_error", r.percent_error}});
      }
      d["models"].push_back(std::move(jm));
    }
    d["failed"] = nlohmann::ordered_json::array();
    for (const auto& [name, why] : rep.failed) d["failed"].push_back({{"name", name}, {"reason", why}});
    root["datasets"].push_back(std::move(d));
  }
  return root.dump(2) + "\n";
}

std::string table_rmse_csv(const std::vector<EvalReport>& reports) {
  std::ostringstream os;
  os << "dataset,rank,model,train_rmse,test_rmse,test_rmse_km,max_percent_error\n";
  for (const auto& rep : reports) {
    for (std::size_t rank = 0; rank < rep.models.size(); ++rank) {
      const auto& m = rep.models[rank];
      os << rep.dataset << ',' << rank + 1 << ',' << m.name << ',' << g17(m.train_rmse) << ',' << g17(m.test_rmse)
         << ',' << g17(m.test_rmse_km) << ',' << fixed3(m.max_percent_error) << '\n';
    }
  }
  return os.str();
}

std::string table_best_csv(const std::vector<EvalReport>& reports) {
  std::ostringstream os;
  os << "dataset,model,scenario_id,actual_km,predicted_km,total_length_km,percent_error\n";
  for (const auto& rep : reports) {
    if (rep.models.empty()) continue;
    const auto& m = rep.best();
    for (const auto& r : m.test_records) {
      os << rep.dataset << ',' << m.name << ',' << r.scenario_id << ',' << g17(r.actual_km) << ','
         << g17(r.predicted_km) << ',' << g17(r.total_length_km) << ',' << fixed3(r.percent_error) << '\n';
    }
  }
  return os.str();
}

std::string plot_csv(const std::vector<EvalReport>& reports) {
  std::ostringstream os;
  os << "actual_km,predicted_km,model\n";
  for (const auto& rep : reports) {
    for (const auto& m : rep.models) {
      for (const auto& r : m.test_records) {
        os << g17(r.actual_km) << ',' << g17(r.predicted_km) << ',' << rep.dataset << '/' << m.name << '\n';
      }
    }
  }
  return os.str();
}

}  // namespace mtlfault
