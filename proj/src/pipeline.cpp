#include "mtlfault/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "mtlfault/errors.hpp"

namespace mtlfault {

namespace fs = std::filesystem;

namespace {

std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::uint64_t fnv1a(std::uint64_t h, const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

constexpr std::uint64_t kFnvBasis = 0xcbf29ce484222325ULL;

std::string hex16(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read '" + p.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + p.string() + "'");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw std::runtime_error("write failed for '" + p.string() + "'");
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

double to_double(const std::string& s, const fs::path& file, std::size_t line) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw FormatError(file.string() + ":" + std::to_string(line) + ": bad number '" + s + "'");
  }
  return v;
}

std::size_t to_index(const std::string& s, const fs::path& file, std::size_t line) {
  std::size_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw FormatError(file.string() + ":" + std::to_string(line) + ": bad integer '" + s + "'");
  }
  return v;
}

// Reads a CSV with a fixed header; returns the data rows as fields.
std::vector<std::vector<std::string>> read_csv(const fs::path& path, const std::string& header) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line) || line != header) {
    throw FormatError(path.string() + ": unexpected header (want '" + header + "')");
  }
  const std::size_t width = split_csv_line(header).size();
  std::vector<std::vector<std::string>> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (fields.size() != width) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": expected " + std::to_string(width) +
                        " fields");
    }
    rows.push_back(std::move(fields));
  }
  return rows;
}

void require(const fs::path& p, const std::string& upstream) {
  if (!fs::exists(p)) {
    throw MissingArtifactError("missing '" + p.string() + "'; run the '" + upstream + "' stage first");
  }
}

// Runs body(i) for i in [0, n) on up to worker_count() threads. The first
// exception (lowest index) is rethrown.
template <typename F>
void parallel_for(std::size_t n, F&& body) {
  const std::size_t workers = std::min<std::size_t>(worker_count(), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          body(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::string scenarios_header() { return "scenario_id,section,distance_km,absolute_km,zf_ohm"; }
std::string locus_header() { return "scenario_id,sample_index,r_ohm,x_ohm"; }

std::string features_header() {
  std::string h = "scenario_id,section,distance_km,target_norm";
  for (const auto& n : feature_names()) h += "," + n;
  return h;
}

fs::path locus_path(const std::string& id) { return fs::path("loci") / dataset_of(id) / (id + ".csv"); }
fs::path image_path(const std::string& id) { return fs::path("images") / dataset_of(id) / (id + ".pgm"); }
fs::path model_path(const std::string& dataset, const std::string& name) {
  return fs::path("models") / dataset / (name + ".model");
}
fs::path failed_path(const std::string& dataset, const std::string& name) {
  return fs::path("models") / dataset / (name + ".failed");
}

void check_known_datasets(const PipelineConfig& cfg, const std::vector<std::string>& seen, const std::string& file) {
  for (const auto& d : seen) {
    bool known = false;
    for (const auto& c : cfg.datasets) known = known || c.name == d;
    if (!known) {
      throw MissingArtifactError(file + " contains dataset '" + d +
                                 "' that is not in the config; rerun the 'simulate' stage");
    }
  }
}

StageRecord stage_simulate(const PipelineConfig& cfg, const fs::path& out) {
  StageRecord rec{Stage::kSimulate, {}, 0.0};
  const RelayPhasors pre = prefault_state(cfg.line);
  const RelaySettings settings = cfg.relay_settings();

  struct Job {
    std::string id;
    FaultScenario scenario;
  };
  std::vector<Job> jobs;
  for (const auto& d : cfg.datasets) {
    const auto grid = scenario_grid(cfg.line, d.section, d.start_km, d.step_km, d.count, cfg.zf_ohm);
    for (std::size_t k = 0; k < grid.size(); ++k) jobs.push_back({scenario_id(d.name, k), grid[k]});
  }
  std::vector<std::string> locus_text(jobs.size());
  parallel_for(jobs.size(), [&](std::size_t i) {
    const RelayPhasors fault = solve_slg_fault(cfg.line, jobs[i].scenario);
    const ImpedanceLocus locus = impedance_trajectory(pre, fault, settings);
    std::string text = locus_header() + "\n";
    for (std::size_t n = 0; n < locus.points.size(); ++n) {
      text += jobs[i].id + "," + std::to_string(n) + "," + g17(locus.points[n].r) + "," + g17(locus.points[n].x) + "\n";
    }
    locus_text[i] = std::move(text);
  });

  std::string scen = scenarios_header() + "\n";
  for (const auto& j : jobs) {
    scen += j.id + "," + std::to_string(j.scenario.section_index) + "," + g17(j.scenario.distance_in_section_km) +
            "," + g17(absolute_km(cfg.line, j.scenario)) + "," + g17(j.scenario.zf_ohm) + "\n";
  }
  write_file(out / "scenarios.csv", scen);
  rec.artifacts.push_back("scenarios.csv");
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const fs::path rel = locus_path(jobs[i].id);
    write_file(out / rel, locus_text[i]);
    rec.artifacts.push_back(rel.generic_string());
  }
  return rec;
}

ImpedanceLocus read_locus(const fs::path& path, const std::string& id) {
  const auto rows = read_csv(path, locus_header());
  ImpedanceLocus locus;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i][0] != id || to_index(rows[i][1], path, i + 2) != i) {
      throw FormatError(path.string() + ": rows out of order or for another scenario");
    }
    locus.points.push_back({to_double(rows[i][2], path, i + 2), to_double(rows[i][3], path, i + 2)});
  }
  locus.undefined.assign(locus.points.size(), false);
  return locus;
}

StageRecord stage_render(const PipelineConfig& cfg, const fs::path& out) {
  StageRecord rec{Stage::kRender, {}, 0.0};
  require(out / "scenarios.csv", "simulate");
  const auto all = read_scenarios_csv(out / "scenarios.csv");
  std::vector<std::string> seen;
  for (const auto& r : all) {
    if (std::find(seen.begin(), seen.end(), r.dataset) == seen.end()) seen.push_back(r.dataset);
  }
  check_known_datasets(cfg, seen, "scenarios.csv");

  const RelaySettings settings = cfg.relay_settings();
  std::vector<std::vector<ImpedancePoint>> zones;
  if (cfg.render.draw_zones) {
    zones.push_back(zone_characteristic(cfg.line, settings, 1));
    zones.push_back(zone_characteristic(cfg.line, settings, 2));
  }
  for (const auto& r : all) require(out / locus_path(r.id), "simulate");
  std::map<std::string, ViewWindow> windows;
  for (const auto& d : cfg.datasets) windows.emplace(d.name, cfg.window_for(d));
  std::vector<std::string> rels(all.size());
  parallel_for(all.size(), [&](std::size_t i) {
    const auto& r = all[i];
    const ImpedanceLocus locus = read_locus(out / locus_path(r.id), r.id);
    const ViewWindow& w = windows.at(r.dataset);
    const GrayImage img = render_scene(locus, zones, w, cfg.render.width, cfg.render.height);
    const fs::path rel = image_path(r.id);
    fs::create_directories((out / rel).parent_path());
    write_pgm(img, out / rel);
    rels[i] = rel.generic_string();
  });
  rec.artifacts = std::move(rels);
  return rec;
}

StageRecord stage_features(const PipelineConfig& cfg, const fs::path& out) {
  StageRecord rec{Stage::kFeatures, {}, 0.0};
  require(out / "scenarios.csv", "simulate");
  const auto all = read_scenarios_csv(out / "scenarios.csv");
  for (const auto& r : all) require(out / image_path(r.id), "render");
  std::vector<FeatureRow> rows(all.size());
  parallel_for(all.size(), [&](std::size_t i) {
    const auto& s = all[i];
    if (s.section >= cfg.line.sections.size()) {
      throw MissingArtifactError("scenarios.csv section index out of range; rerun the 'simulate' stage");
    }
    const GrayImage img = read_pgm(out / image_path(s.id));
    const LevelMatrix lm = quantize(img, cfg.glcm.levels);
    const Glcm g = compute_glcm(lm, cfg.glcm.offsets, cfg.glcm.symmetric);
    FeatureRow& row = rows[i];
    row.id = s.id;
    row.dataset = s.dataset;
    row.section = s.section;
    row.distance_km = s.distance_km;
    row.target_norm = s.distance_km / cfg.line.sections[s.section].length_km;
    row.f = features20(g);
  });
  write_file(out / "features.csv", features_csv(rows));
  rec.artifacts.push_back("features.csv");
  return rec;
}

struct DatasetData {
  std::vector<std::string> ids;
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
};

DatasetData dataset_rows(const std::vector<FeatureRow>& rows, const std::string& dataset) {
  DatasetData d;
  std::vector<const FeatureRow*> sel;
  for (const auto& r : rows) {
    if (r.dataset == dataset) sel.push_back(&r);
  }
  if (sel.empty()) {
    throw MissingArtifactError("features.csv has no rows for dataset '" + dataset + "'; rerun the 'features' stage");
  }
  d.x.resize(static_cast<Eigen::Index>(sel.size()), kFeatureCount);
  d.y.resize(static_cast<Eigen::Index>(sel.size()));
  for (std::size_t i = 0; i < sel.size(); ++i) {
    d.ids.push_back(sel[i]->id);
    for (std::size_t j = 0; j < kFeatureCount; ++j) d.x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = sel[i]->f[j];
    d.y(static_cast<Eigen::Index>(i)) = sel[i]->target_norm;
  }
  return d;
}

DatasetSplit make_split(const PipelineConfig& cfg, const std::string& dataset, std::size_t n) {
  if (cfg.split.policy == SplitPolicy::kSystematic) return systematic_split(n, cfg.split.test_every);
  const std::uint64_t h = fnv1a(kFnvBasis, dataset.data(), dataset.size());
  return seeded_random_split(n, cfg.split.test_every, cfg.seed ^ h);
}

std::uint64_t model_seed(std::uint64_t master, const std::string& dataset, const std::string& model) {
  const std::string key = dataset + "/" + model;
  std::uint64_t state = master ^ fnv1a(kFnvBasis, key.data(), key.size());
  return detail::splitmix64(state);
}

Eigen::MatrixXd select_rows(const Eigen::MatrixXd& x, const std::vector<std::size_t>& idx) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(idx.size()), x.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(idx[i]));
  return out;
}

Eigen::VectorXd select_rows(const Eigen::VectorXd& y, const std::vector<std::size_t>& idx) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) out(static_cast<Eigen::Index>(i)) = y(static_cast<Eigen::Index>(idx[i]));
  return out;
}

StageRecord stage_train(const PipelineConfig& cfg, const fs::path& out) {
  StageRecord rec{Stage::kTrain, {}, 0.0};
  require(out / "features.csv", "features");
  const auto rows = read_features_csv(out / "features.csv");
  for (const auto& d : cfg.datasets) {
    const DatasetData data = dataset_rows(rows, d.name);
    const DatasetSplit split = make_split(cfg, d.name, data.ids.size());
    const Eigen::MatrixXd x = select_rows(data.x, split.train);
    const Eigen::VectorXd y = select_rows(data.y, split.train);
    const double scale = cfg.line.sections[d.section].length_km;
    for (const auto& m : cfg.models) {
      const fs::path ok = model_path(d.name, m.name);
      const fs::path bad = failed_path(d.name, m.name);
      try {
        const FittedModel fitted = fit_model(m, x, y, scale, model_seed(cfg.seed, d.name, m.name));
        write_file(out / ok, serialize(fitted));
        fs::remove(out / bad);
        rec.artifacts.push_back(ok.generic_string());
      } catch (const RankError& e) {
        write_file(out / bad, std::string(e.what()) + "\n");
        fs::remove(out / ok);
        rec.artifacts.push_back(bad.generic_string());
      } catch (const ConditioningError& e) {
        write_file(out / bad, std::string(e.what()) + "\n");
        fs::remove(out / ok);
        rec.artifacts.push_back(bad.generic_string());
      } catch (const TrainingError& e) {
        write_file(out / bad, std::string(e.what()) + "\n");
        fs::remove(out / ok);
        rec.artifacts.push_back(bad.generic_string());
      }
    }
  }
  return rec;
}

StageRecord stage_eval(const PipelineConfig& cfg, const fs::path& out) {
  StageRecord rec{Stage::kEval, {}, 0.0};
  require(out / "features.csv", "features");
  const auto rows = read_features_csv(out / "features.csv");
  std::vector<EvalReport> reports;
  for (const auto& d : cfg.datasets) {
    const DatasetData data = dataset_rows(rows, d.name);
    const DatasetSplit split = make_split(cfg, d.name, data.ids.size());
    std::vector<FittedModel> fitted;
    std::vector<std::pair<std::string, std::string>> failed;
    for (const auto& m : cfg.models) {
      const fs::path ok = out / model_path(d.name, m.name);
      const fs::path bad = out / failed_path(d.name, m.name);
      if (fs::exists(ok)) {
        FittedModel fm = deserialize(read_file(ok));
        if (fm.name != m.name || fm.input_dim() != static_cast<std::size_t>(kFeatureCount)) {
          throw MissingArtifactError("'" + ok.string() + "' does not match the config; rerun the 'train' stage");
        }
        fitted.push_back(std::move(fm));
      } else if (fs::exists(bad)) {
        std::string why = read_file(bad);
        while (!why.empty() && (why.back() == '\n' || why.back() == '\r')) why.pop_back();
        failed.emplace_back(m.name, why);
      } else {
        require(ok, "train");
      }
    }
    std::vector<NamedPredictor> preds;
    for (const auto& fm : fitted) {
      preds.push_back({fm.name, [&fm](std::span<const double> x) { return fm.predict_normalized(x); }});
    }
    EvalReport rep = evaluate(d.name, preds, data.x, data.y, cfg.line.sections[d.section].length_km, split, data.ids);
    rep.failed = std::move(failed);
    reports.push_back(std::move(rep));
  }
  write_file(out / "report.json", report_json(reports));
  write_file(out / "table_rmse.csv", table_rmse_csv(reports));
  write_file(out / "table_best.csv", table_best_csv(reports));
  write_file(out / "plot_actual_vs_pred.csv", plot_csv(reports));
  rec.artifacts = {"report.json", "table_rmse.csv", "table_best.csv", "plot_actual_vs_pred.csv"};
  return rec;
}

}  // namespace

std::string to_string(Stage s) {
  switch (s) {
    case Stage::kSimulate:
      return "simulate";
    case Stage::kRender:
      return "render";
    case Stage::kFeatures:
      return "features";
    case Stage::kTrain:
      return "train";
    case Stage::kEval:
      return "eval";
  }
  return "?";
}

Stage stage_from_string(const std::string& s) {
  for (const Stage st : all_stages()) {
    if (to_string(st) == s) return st;
  }
  throw ValidationError("unknown stage '" + s + "' (expected simulate, render, features, train, eval)");
}

std::vector<Stage> all_stages() {
  return {Stage::kSimulate, Stage::kRender, Stage::kFeatures, Stage::kTrain, Stage::kEval};
}

std::vector<Stage> parse_stages(const std::string& list) {
  std::vector<Stage> picked;
  for (const auto& tok : split_csv_line(list)) {
    if (tok.empty()) continue;
    picked.push_back(stage_from_string(tok));
  }
  if (picked.empty()) throw ValidationError("no stages selected");
  std::vector<Stage> ordered;
  for (const Stage s : all_stages()) {
    if (std::find(picked.begin(), picked.end(), s) != picked.end()) ordered.push_back(s);
  }
  return ordered;
}

std::string scenario_id(const std::string& dataset, std::size_t k) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%03zu", k);
  return dataset + "_" + buf;
}

std::string dataset_of(const std::string& id) {
  const auto pos = id.rfind('_');
  if (pos == std::string::npos || pos == 0) throw FormatError("malformed scenario id '" + id + "'");
  return id.substr(0, pos);
}

std::vector<ScenarioRow> read_scenarios_csv(const fs::path& path) {
  std::vector<ScenarioRow> out;
  const auto rows = read_csv(path, scenarios_header());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& f = rows[i];
    ScenarioRow r;
    r.id = f[0];
    r.dataset = dataset_of(f[0]);
    r.section = to_index(f[1], path, i + 2);
    r.distance_km = to_double(f[2], path, i + 2);
    r.absolute_km = to_double(f[3], path, i + 2);
    r.zf_ohm = to_double(f[4], path, i + 2);
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<FeatureRow> read_features_csv(const fs::path& path) {
  std::vector<FeatureRow> out;
  const auto rows = read_csv(path, features_header());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& f = rows[i];
    FeatureRow r;
    r.id = f[0];
    r.dataset = dataset_of(f[0]);
    r.section = to_index(f[1], path, i + 2);
    r.distance_km = to_double(f[2], path, i + 2);
    r.target_norm = to_double(f[3], path, i + 2);
    for (std::size_t k = 0; k < r.f.size(); ++k) r.f[k] = to_double(f[4 + k], path, i + 2);
    out.push_back(std::move(r));
  }
  return out;
}

std::string features_csv(const std::vector<FeatureRow>& rows) {
  std::string text = features_header() + "\n";
  for (const auto& r : rows) {
    text += r.id + "," + std::to_string(r.section) + "," + g17(r.distance_km) + "," + g17(r.target_norm);
    for (const double v : r.f) text += "," + g17(v);
    text += "\n";
  }
  return text;
}

unsigned worker_count() {
  if (const char* env = std::getenv("MTLFAULT_THREADS")) {
    unsigned n = 0;
    const std::string s(env);
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), n);
    if (ec == std::errc{} && ptr == s.data() + s.size() && n > 0) return n;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

RunManifest run_pipeline(const PipelineConfig& cfg, const std::vector<Stage>& stages, const fs::path& out) {
  RunManifest m;
  m.config_hash = config_hash(cfg);
  m.seed = cfg.seed;
  m.warnings = cfg.warnings;
  fs::create_directories(out);
  for (const Stage s : all_stages()) {
    if (std::find(stages.begin(), stages.end(), s) == stages.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    StageRecord rec;
    switch (s) {
      case Stage::kSimulate:
        rec = stage_simulate(cfg, out);
        break;
      case Stage::kRender:
        rec = stage_render(cfg, out);
        break;
      case Stage::kFeatures:
        rec = stage_features(cfg, out);
        break;
      case Stage::kTrain:
        rec = stage_train(cfg, out);
        break;
      case Stage::kEval:
        rec = stage_eval(cfg, out);
        break;
    }
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    m.stages.push_back(std::move(rec));
  }
  std::vector<std::string> paths;
  for (const auto& st : m.stages) paths.insert(paths.end(), st.artifacts.begin(), st.artifacts.end());
  std::sort(paths.begin(), paths.end());
  std::uint64_t h = kFnvBasis;
  for (const auto& p : paths) {
    const std::string bytes = read_file(out / p);
    h = fnv1a(h, p.data(), p.size() + 1);
    h = fnv1a(h, bytes.data(), bytes.size());
  }
  m.content_hash = hex16(h);
  write_file(out / "manifest.json", manifest_json(m));
  return m;
}

std::string manifest_json(const RunManifest& m) {
  nlohmann::ordered_json j;
  j["tool"] = "mtlfault";
  j["tool_version"] = m.tool_version;
  j["config_hash"] = m.config_hash;
  j["seed"] = m.seed;
  j["content_hash"] = m.content_hash;
  j["warnings"] = m.warnings;
  j["stages"] = nlohmann::ordered_json::array();
  for (const auto& s : m.stages) {
    j["stages"].push_back({{"stage", to_string(s.stage)}, {"seconds", s.seconds}, {"artifacts", s.artifacts}});
  }
  return j.dump(2) + "\n";
}

}  // namespace mtlfault
