#include "mtlfault/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <json.hpp>

#include "mtlfault/errors.hpp"

namespace mtlfault {

namespace {

using json = nlohmann::ordered_json;

// Reads keys out of one JSON object, remembering which ones were consumed so
// leftovers can be reported as unknown.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ValidationError("config: '" + display() + "' must be an object");
  }

  const json* child(const std::string& key) {
    const auto it = j_.find(key);
    if (it == j_.end()) return nullptr;
    seen_.insert(key);
    return &*it;
  }

  std::string path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  void get(const std::string& key, double& out) {
    if (const json* v = child(key)) {
      if (!v->is_number()) fail(key, "must be a number");
      out = v->get<double>();
    }
  }
  void get(const std::string& key, bool& out) {
    if (const json* v = child(key)) {
      if (!v->is_boolean()) fail(key, "must be true or false");
      out = v->get<bool>();
    }
  }
  void get(const std::string& key, std::string& out) {
    if (const json* v = child(key)) {
      if (!v->is_string()) fail(key, "must be a string");
      out = v->get<std::string>();
    }
  }
  void get(const std::string& key, int& out) {
    if (const json* v = child(key)) out = static_cast<int>(integer(key, *v, std::numeric_limits<int>::min(),
                                                                   std::numeric_limits<int>::max()));
  }
  void get(const std::string& key, std::size_t& out) {
    if (const json* v = child(key)) out = static_cast<std::size_t>(integer(key, *v, 0, std::numeric_limits<long long>::max()));
  }
  void get_u64(const std::string& key, std::uint64_t& out) {
    if (const json* v = child(key)) {
      if (!v->is_number_integer() || (v->is_number_integer() && !v->is_number_unsigned() && v->get<long long>() < 0)) {
        fail(key, "must be a non-negative integer");
      }
      out = v->get<std::uint64_t>();
    }
  }
  void get(const std::string& key, Complex& out) {
    if (const json* v = child(key)) {
      if (!v->is_array() || v->size() != 2 || !(*v)[0].is_number() || !(*v)[1].is_number()) {
        fail(key, "must be [real, imag]");
      }
      out = {(*v)[0].get<double>(), (*v)[1].get<double>()};
    }
  }

  [[noreturn]] void fail(const std::string& key, const std::string& what) const {
    throw ValidationError("config: '" + path(key) + "' " + what);
  }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.count(k)) throw ValidationError("config: unknown key '" + path(k) + "'");
    }
  }

 private:
  long long integer(const std::string& key, const json& v, long long lo, long long hi) const {
    if (!v.is_number_integer()) fail(key, "must be an integer");
    if (v.is_number_unsigned() && v.get<std::uint64_t>() > static_cast<std::uint64_t>(hi)) fail(key, "is out of range");
    const long long x = v.get<long long>();
    if (x < lo || x > hi) fail(key, "is out of range");
    return x;
  }
  std::string display() const { return path_.empty() ? "<root>" : path_; }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

std::size_t line_of_offset(const std::string& text, std::size_t offset) {
  std::size_t line = 1;
  for (std::size_t i = 0; i < offset && i < text.size(); ++i) line += text[i] == '\n';
  return line;
}

void read_params(ObjectReader& r, SequenceParams& p) {
  r.get("r1", p.r1);
  r.get("x1", p.x1);
  r.get("r0", p.r0);
  r.get("x0", p.x0);
  r.get("c1_nf", p.c1_nf);
  r.get("c0_nf", p.c0_nf);
  r.finish();
}

void read_source(ObjectReader& r, SourceSpec& s) {
  r.get("emf_kv", s.emf_kv);
  r.get("angle_deg", s.angle_deg);
  r.get("z1", s.z1);
  r.get("z0", s.z0);
  r.finish();
}

void read_window(ObjectReader& r, ViewWindow& w) {
  r.get("r_min", w.r_min);
  r.get("r_max", w.r_max);
  r.get("x_min", w.x_min);
  r.get("x_max", w.x_max);
  r.finish();
}

void read_line(ObjectReader& r, MixedLineSpec& line) {
  r.get("nominal_kv", line.nominal_kv);
  r.get("frequency_hz", line.frequency_hz);
  r.get("load_mw", line.load_mw);
  if (const json* secs = r.child("sections")) {
    if (!secs->is_array()) r.fail("sections", "must be an array");
    line.sections.clear();
    for (std::size_t i = 0; i < secs->size(); ++i) {
      ObjectReader sr((*secs)[i], r.path("sections") + "[" + std::to_string(i) + "]");
      LineSection s;
      std::string kind = "OHL";
      sr.get("kind", kind);
      try {
        s.kind = section_kind_from_string(kind);
      } catch (const std::exception&) {
        sr.fail("kind", "must be \"OHL\" or \"UGC\"");
      }
      s.params = s.kind == SectionKind::kCable ? SequenceParams::cable_default() : SequenceParams::overhead_default();
      sr.get("length_km", s.length_km);
      if (const json* p = sr.child("params")) {
        ObjectReader pr(*p, sr.path("params"));
        read_params(pr, s.params);
      }
      sr.finish();
      line.sections.push_back(s);
    }
  }
  if (const json* s = r.child("source_s")) {
    ObjectReader sr(*s, r.path("source_s"));
    read_source(sr, line.source_s);
  }
  if (const json* s = r.child("source_r")) {
    if (s->is_null()) {
      line.source_r.reset();
    } else {
      ObjectReader sr(*s, r.path("source_r"));
      SourceSpec src = line.source_r.value_or(SourceSpec{});
      read_source(sr, src);
      line.source_r = src;
    }
  }
  r.finish();
}

ModelConfig read_model(const json& j, const std::string& path) {
  ObjectReader r(j, path);
  ModelConfig m;
  r.get("name", m.name);
  std::string family;
  r.get("family", family);
  if (family.empty()) r.fail("family", "is required");
  try {
    m.family = model_family_from_string(family);
  } catch (const std::exception&) {
    r.fail("family", "must be one of mlp, linear, tree, gpr");
  }
  m.linear.drop_dependent = true;
  switch (m.family) {
    case ModelFamily::kMlp: {
      auto& t = m.mlp.train;
      r.get("hidden_dim", m.mlp.hidden_dim);
      r.get("cascade", m.mlp.cascade);
      std::string alg = to_string(t.algorithm);
      r.get("algorithm", alg);
      try {
        t.algorithm = train_algorithm_from_string(alg);
      } catch (const std::exception&) {
        r.fail("algorithm", "must be one of LM, SCG, GDX");
      }
      r.get("max_epochs", t.max_epochs);
      r.get("grad_tol", t.grad_tol);
      r.get("goal_mse", t.goal_mse);
      r.get("mu0", t.mu0);
      r.get("mu_inc", t.mu_inc);
      r.get("mu_dec", t.mu_dec);
      r.get("mu_max", t.mu_max);
      r.get("lr", t.lr);
      r.get("momentum", t.momentum);
      r.get("lr_inc", t.lr_inc);
      r.get("lr_dec", t.lr_dec);
      r.get("max_perf_inc", t.max_perf_inc);
      r.get("sigma", t.sigma);
      r.get("lambda", t.lambda);
      break;
    }
    case ModelFamily::kLinear: {
      std::string v = to_string(m.linear_variant);
      r.get("variant", v);
      try {
        m.linear_variant = linear_variant_from_string(v);
      } catch (const std::exception&) {
        r.fail("variant", "must be one of ols, interactions, robust, stepwise");
      }
      r.get("drop_dependent", m.linear.drop_dependent);
      r.get("rank_tol", m.linear.rank_tol);
      r.get("robust_tune", m.linear.robust_tune);
      r.get("robust_tol", m.linear.robust_tol);
      r.get("robust_max_iter", m.linear.robust_max_iter);
      r.get("p_enter", m.linear.p_enter);
      r.get("p_remove", m.linear.p_remove);
      break;
    }
    case ModelFamily::kTree:
      r.get("min_leaf", m.min_leaf);
      break;
    case ModelFamily::kGpr: {
      std::string k = to_string(m.kernel);
      r.get("kernel", k);
      try {
        m.kernel = gpr_kernel_from_string(k);
      } catch (const std::exception&) {
        r.fail("kernel", "must be one of squared_exponential, matern52, exponential, rational_quadratic");
      }
      r.get("optimize", m.gpr.optimize);
      r.get("sigma_f", m.gpr.initial.sigma_f);
      r.get("length", m.gpr.initial.length);
      r.get("sigma_n", m.gpr.initial.sigma_n);
      r.get("alpha", m.gpr.initial.alpha);
      r.get("noise_floor_rel", m.gpr.noise_floor_rel);
      r.get("max_evaluations", m.gpr.max_evaluations);
      break;
    }
  }
  r.finish();
  return m;
}

json window_json(const ViewWindow& w) {
  return {{"r_min", w.r_min}, {"r_max", w.r_max}, {"x_min", w.x_min}, {"x_max", w.x_max}};
}

json source_json(const SourceSpec& s) {
  return {{"emf_kv", s.emf_kv},
          {"angle_deg", s.angle_deg},
          {"z1", {s.z1.real(), s.z1.imag()}},
          {"z0", {s.z0.real(), s.z0.imag()}}};
}

json model_json(const ModelConfig& m) {
  json j;
  j["name"] = m.name;
  j["family"] = to_string(m.family);
  switch (m.family) {
    case ModelFamily::kMlp: {
      const auto& t = m.mlp.train;
      j["hidden_dim"] = m.mlp.hidden_dim;
      j["cascade"] = m.mlp.cascade;
      j["algorithm"] = to_string(t.algorithm);
      j["max_epochs"] = t.max_epochs;
      j["grad_tol"] = t.grad_tol;
      j["goal_mse"] = t.goal_mse;
      j["mu0"] = t.mu0;
      j["mu_inc"] = t.mu_inc;
      j["mu_dec"] = t.mu_dec;
      j["mu_max"] = t.mu_max;
      j["lr"] = t.lr;
      j["momentum"] = t.momentum;
      j["lr_inc"] = t.lr_inc;
      j["lr_dec"] = t.lr_dec;
      j["max_perf_inc"] = t.max_perf_inc;
      j["sigma"] = t.sigma;
      j["lambda"] = t.lambda;
      break;
    }
    case ModelFamily::kLinear:
      j["variant"] = to_string(m.linear_variant);
      j["drop_dependent"] = m.linear.drop_dependent;
      j["rank_tol"] = m.linear.rank_tol;
      j["robust_tune"] = m.linear.robust_tune;
      j["robust_tol"] = m.linear.robust_tol;
      j["robust_max_iter"] = m.linear.robust_max_iter;
      j["p_enter"] = m.linear.p_enter;
      j["p_remove"] = m.linear.p_remove;
      break;
    case ModelFamily::kTree:
      j["min_leaf"] = m.min_leaf;
      break;
    case ModelFamily::kGpr:
      j["kernel"] = to_string(m.kernel);
      j["optimize"] = m.gpr.optimize;
      j["sigma_f"] = m.gpr.initial.sigma_f;
      j["length"] = m.gpr.initial.length;
      j["sigma_n"] = m.gpr.initial.sigma_n;
      j["alpha"] = m.gpr.initial.alpha;
      j["noise_floor_rel"] = m.gpr.noise_floor_rel;
      j["max_evaluations"] = m.gpr.max_evaluations;
      break;
  }
  return j;
}

bool valid_name(const std::string& s) {
  if (s.empty()) return false;
  for (const char c : s) {
    if (!((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' || c == '-')) {
      return false;
    }
  }
  return true;
}

}  // namespace

RelaySettings PipelineConfig::relay_settings() const {
  RelaySettings s = RelaySettings::for_line(line);
  s.samples_per_cycle = relay.samples_per_cycle;
  s.prefault_cycles = relay.prefault_cycles;
  s.fault_cycles = relay.fault_cycles;
  s.zone1_reach = relay.zone1_reach;
  s.zone2_reach = relay.zone2_reach;
  return s;
}

ViewWindow PipelineConfig::window_for(const DatasetConfig& d) const {
  if (d.window) return *d.window;
  if (!d.auto_window) return render.window;
  const RelayPhasors pre = prefault_state(line);
  const RelaySettings s = relay_settings();
  const auto grid = scenario_grid(line, d.section, d.start_km, d.step_km, d.count, zf_ohm);
  if (grid.empty()) return render.window;
  double r_lo = 0, r_hi = 0, x_lo = 0, x_hi = 0;
  bool first = true;
  for (const FaultScenario* f : {&grid.front(), &grid.back()}) {
    const ImpedanceLocus locus = impedance_trajectory(pre, solve_slg_fault(line, *f), s);
    const ImpedancePoint p = locus.points.back();
    r_lo = first ? p.r : std::min(r_lo, p.r);
    r_hi = first ? p.r : std::max(r_hi, p.r);
    x_lo = first ? p.x : std::min(x_lo, p.x);
    x_hi = first ? p.x : std::max(x_hi, p.x);
    first = false;
  }
  const double pad = std::max({r_hi - r_lo, x_hi - x_lo, 1e-6}) * render.auto_margin + 1e-6;
  return {r_lo - pad, r_hi + pad, x_lo - pad, x_hi + pad};
}

const DatasetConfig& PipelineConfig::dataset(const std::string& name) const {
  for (const auto& d : datasets) {
    if (d.name == name) return d;
  }
  throw ValidationError("unknown dataset '" + name + "'");
}

std::vector<ModelConfig> default_roster() {
  std::vector<ModelConfig> roster;
  for (const bool cascade : {false, true}) {
    for (const auto alg : {TrainAlgorithm::kLevenbergMarquardt, TrainAlgorithm::kScaledConjugateGradient,
                           TrainAlgorithm::kGradientDescentAdaptive}) {
      ModelConfig m;
      m.family = ModelFamily::kMlp;
      m.mlp.cascade = cascade;
      m.mlp.train.algorithm = alg;
      std::string a = to_string(alg);
      for (auto& c : a) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      m.name = std::string(cascade ? "cf_" : "ff_") + a;
      roster.push_back(m);
    }
  }
  for (const auto v : {LinearVariant::kOls, LinearVariant::kInteractions, LinearVariant::kRobust,
                       LinearVariant::kStepwise}) {
    ModelConfig m;
    m.family = ModelFamily::kLinear;
    m.linear_variant = v;
    m.linear.drop_dependent = true;
    m.name = "linear_" + to_string(v);
    roster.push_back(m);
  }
  for (const auto& [name, leaf] : {std::pair{"tree_fine", 4}, std::pair{"tree_medium", 12}, std::pair{"tree_coarse", 36}}) {
    ModelConfig m;
    m.family = ModelFamily::kTree;
    m.min_leaf = leaf;
    m.name = name;
    roster.push_back(m);
  }
  for (const auto& [name, kernel] :
       {std::pair{"gpr_se", GprKernel::kSquaredExponential}, std::pair{"gpr_matern52", GprKernel::kMatern52},
        std::pair{"gpr_exponential", GprKernel::kExponential},
        std::pair{"gpr_rq", GprKernel::kRationalQuadratic}}) {
    ModelConfig m;
    m.family = ModelFamily::kGpr;
    m.kernel = kernel;
    m.name = name;
    roster.push_back(m);
  }
  return roster;
}

PipelineConfig PipelineConfig::defaults() {
  PipelineConfig c;
  c.datasets = {{"ohl", 0, 5.0, 5.0, 40, std::nullopt, true}, {"ugc", 1, 0.2, 0.2, 50, std::nullopt, true}};
  c.models = default_roster();
  return c;
}

PipelineConfig parse_config(const std::string& text) {
  json root;
  try {
    root = json::parse(text, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ValidationError("config: syntax error at line " + std::to_string(line_of_offset(text, e.byte)) + ": " +
                          e.what());
  }
  PipelineConfig cfg = PipelineConfig::defaults();
  ObjectReader r(root, "");
  r.get_u64("seed", cfg.seed);
  r.get("output_dir", cfg.output_dir);
  if (const json* j = r.child("line")) {
    ObjectReader lr(*j, "line");
    read_line(lr, cfg.line);
  }
  if (const json* j = r.child("fault")) {
    ObjectReader fr(*j, "fault");
    fr.get("zf_ohm", cfg.zf_ohm);
    fr.finish();
  }
  if (const json* j = r.child("datasets")) {
    if (!j->is_array()) r.fail("datasets", "must be an array");
    cfg.datasets.clear();
    for (std::size_t i = 0; i < j->size(); ++i) {
      ObjectReader dr((*j)[i], "datasets[" + std::to_string(i) + "]");
      DatasetConfig d;
      dr.get("name", d.name);
      dr.get("section", d.section);
      dr.get("start_km", d.start_km);
      dr.get("step_km", d.step_km);
      dr.get("count", d.count);
      if (const json* w = dr.child("window")) {
        if (w->is_string()) {
          if (w->get<std::string>() != "auto") dr.fail("window", "must be an object or \"auto\"");
          d.auto_window = true;
        }
      }
      if (const json* w = d.auto_window ? nullptr : dr.child("window")) {
        ObjectReader wr(*w, dr.path("window"));
        ViewWindow vw;
        read_window(wr, vw);
        d.window = vw;
      }
      dr.finish();
      cfg.datasets.push_back(d);
    }
  }
  if (const json* j = r.child("relay")) {
    ObjectReader rr(*j, "relay");
    rr.get("samples_per_cycle", cfg.relay.samples_per_cycle);
    rr.get("prefault_cycles", cfg.relay.prefault_cycles);
    rr.get("fault_cycles", cfg.relay.fault_cycles);
    rr.get("zone1_reach", cfg.relay.zone1_reach);
    rr.get("zone2_reach", cfg.relay.zone2_reach);
    rr.finish();
  }
  if (const json* j = r.child("render")) {
    ObjectReader rr(*j, "render");
    rr.get("width", cfg.render.width);
    rr.get("height", cfg.render.height);
    rr.get("draw_zones", cfg.render.draw_zones);
    rr.get("auto_margin", cfg.render.auto_margin);
    if (const json* w = rr.child("window")) {
      ObjectReader wr(*w, "render.window");
      read_window(wr, cfg.render.window);
    }
    rr.finish();
  }
  if (const json* j = r.child("glcm")) {
    ObjectReader gr(*j, "glcm");
    gr.get("levels", cfg.glcm.levels);
    gr.get("symmetric", cfg.glcm.symmetric);
    if (const json* o = gr.child("offsets")) {
      if (!o->is_array() || o->empty()) gr.fail("offsets", "must be a non-empty array of [drow, dcol]");
      cfg.glcm.offsets.clear();
      for (const auto& e : *o) {
        if (!e.is_array() || e.size() != 2 || !e[0].is_number_integer() || !e[1].is_number_integer()) {
          gr.fail("offsets", "entries must be [drow, dcol] integer pairs");
        }
        cfg.glcm.offsets.push_back({e[0].get<int>(), e[1].get<int>()});
      }
    }
    gr.finish();
  }
  if (const json* j = r.child("split")) {
    ObjectReader sr(*j, "split");
    std::string policy = to_string(cfg.split.policy);
    sr.get("policy", policy);
    try {
      cfg.split.policy = split_policy_from_string(policy);
    } catch (const std::exception&) {
      sr.fail("policy", "must be \"systematic\" or \"seeded-random\"");
    }
    sr.get("test_every", cfg.split.test_every);
    sr.finish();
  }
  if (const json* j = r.child("models")) {
    if (!j->is_array()) r.fail("models", "must be an array");
    cfg.models.clear();
    for (std::size_t i = 0; i < j->size(); ++i) {
      cfg.models.push_back(read_model((*j)[i], "models[" + std::to_string(i) + "]"));
    }
  }
  r.finish();
  validate(cfg);
  return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("config: cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

void validate(PipelineConfig& cfg) {
  validate(cfg.line);
  validate(cfg.relay_settings());
  if (!(cfg.zf_ohm >= 0.0)) throw ValidationError("config: 'fault.zf_ohm' must be >= 0");
  if (cfg.output_dir.empty()) throw ValidationError("config: 'output_dir' must not be empty");
  if (cfg.render.width < 2 || cfg.render.height < 2) throw ValidationError("config: render size must be at least 2x2");
  validate(cfg.render.window);
  if (!(cfg.render.auto_margin >= 0.0)) throw ValidationError("config: 'render.auto_margin' must be >= 0");
  if (cfg.glcm.levels < 2 || cfg.glcm.levels > 256) throw ValidationError("config: 'glcm.levels' must be in [2, 256]");
  if (cfg.split.test_every < 2) throw ValidationError("config: 'split.test_every' must be >= 2");
  if (cfg.datasets.empty()) throw ValidationError("config: 'datasets' must not be empty");
  std::set<std::string> names;
  for (std::size_t i = 0; i < cfg.datasets.size(); ++i) {
    const auto& d = cfg.datasets[i];
    const std::string at = "config: 'datasets[" + std::to_string(i) + "]";
    if (!valid_name(d.name)) throw ValidationError(at + ".name' must be a non-empty [A-Za-z0-9_-] identifier");
    if (!names.insert(d.name).second) throw ValidationError(at + ".name' duplicates '" + d.name + "'");
    if (d.section >= cfg.line.sections.size()) throw ValidationError(at + ".section' is out of range");
    if (d.count < cfg.split.test_every) {
      throw ValidationError(at + ".count' must be at least split.test_every");
    }
    if (d.window) validate(*d.window);
    scenario_grid(cfg.line, d.section, d.start_km, d.step_km, d.count, cfg.zf_ohm);
  }
  if (cfg.models.empty()) throw ValidationError("config: 'models' must not be empty");
  names.clear();
  for (std::size_t i = 0; i < cfg.models.size(); ++i) {
    const auto& m = cfg.models[i];
    const std::string at = "config: 'models[" + std::to_string(i) + "]";
    if (!valid_name(m.name)) throw ValidationError(at + ".name' must be a non-empty [A-Za-z0-9_-] identifier");
    if (!names.insert(m.name).second) throw ValidationError(at + ".name' duplicates '" + m.name + "'");
    if (m.family == ModelFamily::kMlp) {
      validate(MlpSpec{kFeatureCount, m.mlp.hidden_dim, 1, m.mlp.cascade});
      validate(m.mlp.train);
    }
    if (m.family == ModelFamily::kTree && m.min_leaf < 1) throw ValidationError(at + ".min_leaf' must be >= 1");
    if (m.family == ModelFamily::kGpr && m.gpr.max_evaluations < 1) {
      throw ValidationError(at + ".max_evaluations' must be >= 1");
    }
  }
  cfg.warnings = parameter_ratio_warnings(cfg.line);
}

std::string to_json(const PipelineConfig& cfg, bool include_output_dir) {
  json j;
  j["seed"] = cfg.seed;
  if (include_output_dir) j["output_dir"] = cfg.output_dir;
  json line;
  line["nominal_kv"] = cfg.line.nominal_kv;
  line["frequency_hz"] = cfg.line.frequency_hz;
  line["load_mw"] = cfg.line.load_mw;
  line["sections"] = json::array();
  for (const auto& s : cfg.line.sections) {
    const auto& p = s.params;
    line["sections"].push_back({{"kind", to_string(s.kind)},
                                {"length_km", s.length_km},
                                {"params",
                                 {{"r1", p.r1}, {"x1", p.x1}, {"r0", p.r0}, {"x0", p.x0}, {"c1_nf", p.c1_nf},
                                  {"c0_nf", p.c0_nf}}}});
  }
  line["source_s"] = source_json(cfg.line.source_s);
  line["source_r"] = cfg.line.source_r ? source_json(*cfg.line.source_r) : json();
  j["line"] = line;
  j["fault"] = {{"zf_ohm", cfg.zf_ohm}};
  j["datasets"] = json::array();
  for (const auto& d : cfg.datasets) {
    json jd = {{"name", d.name},
               {"section", d.section},
               {"start_km", d.start_km},
               {"step_km", d.step_km},
               {"count", d.count}};
    if (d.auto_window) {
      jd["window"] = "auto";
    } else if (d.window) {
      jd["window"] = window_json(*d.window);
    }
    j["datasets"].push_back(jd);
  }
  j["relay"] = {{"samples_per_cycle", cfg.relay.samples_per_cycle},
                {"prefault_cycles", cfg.relay.prefault_cycles},
                {"fault_cycles", cfg.relay.fault_cycles},
                {"zone1_reach", cfg.relay.zone1_reach},
                {"zone2_reach", cfg.relay.zone2_reach}};
  j["render"] = {{"width", cfg.render.width},
                 {"height", cfg.render.height},
                 {"window", window_json(cfg.render.window)},
                 {"draw_zones", cfg.render.draw_zones},
                 {"auto_margin", cfg.render.auto_margin}};
  json offsets = json::array();
  for (const auto& o : cfg.glcm.offsets) offsets.push_back({o.drow, o.dcol});
  j["glcm"] = {{"levels", cfg.glcm.levels}, {"offsets", offsets}, {"symmetric", cfg.glcm.symmetric}};
  j["split"] = {{"policy", to_string(cfg.split.policy)}, {"test_every", cfg.split.test_every}};
  j["models"] = json::array();
  for (const auto& m : cfg.models) j["models"].push_back(model_json(m));
  return j.dump(2) + "\n";
}

std::string config_hash(const PipelineConfig& cfg) {
  const std::string text = to_json(cfg, false);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace mtlfault
