#include "mtlfault/models.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "mtlfault/errors.hpp"

namespace mtlfault {

namespace {

constexpr const char* kMagic = "mtlfault-model";
constexpr int kVersion = 1;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& tok) {
  double v = 0.0;
  const auto* first = tok.data();
  const auto* last = tok.data() + tok.size();
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || ptr != last) throw FormatError("model: bad number '" + tok + "'");
  return v;
}

long parse_long(const std::string& tok) {
  long v = 0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc{} || ptr != tok.data() + tok.size()) {
    throw FormatError("model: bad integer '" + tok + "'");
  }
  return v;
}

class Writer {
 public:
  void line(const std::string& key, const std::string& value) { os_ << key << ' ' << value << '\n'; }
  void num(const std::string& key, double v) { line(key, fmt(v)); }
  void integer(const std::string& key, long v) { line(key, std::to_string(v)); }
  template <typename It>
  void list(const std::string& key, It begin, It end) {
    os_ << key << ' ' << std::distance(begin, end);
    for (It it = begin; it != end; ++it) os_ << ' ' << fmt(*it);
    os_ << '\n';
  }
  std::string str() const { return os_.str(); }

 private:
  std::ostringstream os_;
};

class Reader {
 public:
  explicit Reader(const std::string& text) : is_(text) {}

  // Reads the next line, which must start with `key`; returns the rest as tokens.
  std::vector<std::string> expect(const std::string& key) {
    std::string line;
    do {
      if (!std::getline(is_, line)) throw FormatError("model: missing '" + key + "'");
      ++line_no_;
    } while (line.empty());
    std::istringstream ls(line);
    std::string k;
    ls >> k;
    if (k != key) {
      throw FormatError("model line " + std::to_string(line_no_) + ": expected '" + key + "', got '" + k + "'");
    }
    std::vector<std::string> toks;
    for (std::string t; ls >> t;) toks.push_back(t);
    return toks;
  }
  std::string word(const std::string& key) {
    auto t = expect(key);
    if (t.size() != 1) throw FormatError("model: '" + key + "' needs one value");
    return t[0];
  }
  double num(const std::string& key) { return parse_double(word(key)); }
  long integer(const std::string& key) { return parse_long(word(key)); }
  std::vector<double> list(const std::string& key) {
    auto t = expect(key);
    if (t.empty()) throw FormatError("model: '" + key + "' missing count");
    const auto n = static_cast<std::size_t>(parse_long(t[0]));
    if (t.size() != n + 1) throw FormatError("model: '" + key + "' count mismatch");
    std::vector<double> v;
    v.reserve(n);
    for (std::size_t i = 1; i < t.size(); ++i) v.push_back(parse_double(t[i]));
    return v;
  }

 private:
  std::istringstream is_;
  int line_no_ = 0;
};

void write_body(Writer& w, const MlpWeights& m) {
  w.integer("mlp.input_dim", m.spec.input_dim);
  w.integer("mlp.hidden_dim", m.spec.hidden_dim);
  w.integer("mlp.output_dim", m.spec.output_dim);
  w.integer("mlp.cascade", m.spec.cascade ? 1 : 0);
  const Eigen::VectorXd theta = m.flatten();
  w.list("mlp.theta", theta.data(), theta.data() + theta.size());
}

void write_body(Writer& w, const LinearModel& m) {
  w.line("linear.variant", to_string(m.variant));
  w.integer("linear.input_dim", m.input_dim);
  w.integer("linear.converged", m.converged ? 1 : 0);
  std::ostringstream terms;
  terms << m.terms.size();
  for (const auto& t : m.terms) terms << ' ' << t.a << ' ' << t.b;
  w.line("linear.terms", terms.str());
  w.list("linear.coefficients", m.coefficients.begin(), m.coefficients.end());
}

void write_body(Writer& w, const TreeModel& m) {
  w.integer("tree.input_dim", m.input_dim);
  w.integer("tree.min_leaf", m.min_leaf);
  w.integer("tree.nodes", static_cast<long>(m.nodes.size()));
  for (const auto& n : m.nodes) {
    w.line("node", std::to_string(n.feature) + ' ' + fmt(n.threshold) + ' ' + std::to_string(n.left) + ' ' +
                       std::to_string(n.right) + ' ' + fmt(n.value) + ' ' + std::to_string(n.count));
  }
}

void write_body(Writer& w, const GprModel& m) {
  w.line("gpr.kernel", to_string(m.kernel));
  w.num("gpr.sigma_f", m.hyper.sigma_f);
  w.num("gpr.length", m.hyper.length);
  w.num("gpr.sigma_n", m.hyper.sigma_n);
  w.num("gpr.alpha", m.hyper.alpha);
  w.num("gpr.y_offset", m.y_offset);
  w.num("gpr.jitter", m.jitter);
  w.num("gpr.log_marginal_likelihood", m.log_marginal_likelihood);
  w.integer("gpr.rows", m.x_train.rows());
  w.integer("gpr.cols", m.x_train.cols());
  w.list("gpr.x_train", m.x_train.data(), m.x_train.data() + m.x_train.size());
  w.list("gpr.weights", m.weights.data(), m.weights.data() + m.weights.size());
}

MlpWeights read_mlp(Reader& r) {
  MlpSpec spec;
  spec.input_dim = static_cast<int>(r.integer("mlp.input_dim"));
  spec.hidden_dim = static_cast<int>(r.integer("mlp.hidden_dim"));
  spec.output_dim = static_cast<int>(r.integer("mlp.output_dim"));
  spec.cascade = r.integer("mlp.cascade") != 0;
  validate(spec);
  const auto theta = r.list("mlp.theta");
  return MlpWeights::unflatten(spec, Eigen::Map<const Eigen::VectorXd>(theta.data(), static_cast<Eigen::Index>(theta.size())));
}

LinearModel read_linear(Reader& r) {
  LinearModel m;
  m.variant = linear_variant_from_string(r.word("linear.variant"));
  m.input_dim = static_cast<int>(r.integer("linear.input_dim"));
  m.converged = r.integer("linear.converged") != 0;
  const auto t = r.expect("linear.terms");
  if (t.empty()) throw FormatError("model: linear.terms missing count");
  const auto n = static_cast<std::size_t>(parse_long(t[0]));
  if (t.size() != 1 + 2 * n) throw FormatError("model: linear.terms count mismatch");
  for (std::size_t k = 0; k < n; ++k) {
    LinearTerm term{static_cast<int>(parse_long(t[1 + 2 * k])), static_cast<int>(parse_long(t[2 + 2 * k]))};
    if (term.a >= m.input_dim || term.b >= m.input_dim) throw FormatError("model: term index out of range");
    m.terms.push_back(term);
  }
  m.coefficients = r.list("linear.coefficients");
  if (m.coefficients.size() != m.terms.size()) throw FormatError("model: coefficient count mismatch");
  return m;
}

TreeModel read_tree(Reader& r) {
  TreeModel m;
  m.input_dim = static_cast<int>(r.integer("tree.input_dim"));
  m.min_leaf = static_cast<int>(r.integer("tree.min_leaf"));
  const long count = r.integer("tree.nodes");
  if (count < 1) throw FormatError("model: tree has no nodes");
  for (long i = 0; i < count; ++i) {
    const auto t = r.expect("node");
    if (t.size() != 6) throw FormatError("model: malformed tree node");
    TreeNode n;
    n.feature = static_cast<int>(parse_long(t[0]));
    n.threshold = parse_double(t[1]);
    n.left = static_cast<int>(parse_long(t[2]));
    n.right = static_cast<int>(parse_long(t[3]));
    n.value = parse_double(t[4]);
    n.count = static_cast<int>(parse_long(t[5]));
    const bool leaf = n.feature < 0;
    if (!leaf && (n.feature >= m.input_dim || n.left <= i || n.right <= i || n.left >= count || n.right >= count)) {
      throw FormatError("model: tree node " + std::to_string(i) + " has invalid links");
    }
    m.nodes.push_back(n);
  }
  return m;
}

GprModel read_gpr(Reader& r) {
  GprModel m;
  m.kernel = gpr_kernel_from_string(r.word("gpr.kernel"));
  m.hyper.sigma_f = r.num("gpr.sigma_f");
  m.hyper.length = r.num("gpr.length");
  m.hyper.sigma_n = r.num("gpr.sigma_n");
  m.hyper.alpha = r.num("gpr.alpha");
  m.y_offset = r.num("gpr.y_offset");
  m.jitter = r.num("gpr.jitter");
  m.log_marginal_likelihood = r.num("gpr.log_marginal_likelihood");
  const long rows = r.integer("gpr.rows");
  const long cols = r.integer("gpr.cols");
  const auto xs = r.list("gpr.x_train");
  if (rows < 1 || cols < 1 || xs.size() != static_cast<std::size_t>(rows * cols)) {
    throw FormatError("model: gpr training matrix size mismatch");
  }
  m.x_train.resize(rows, cols);
  std::copy(xs.begin(), xs.end(), m.x_train.data());
  const auto ws = r.list("gpr.weights");
  if (ws.size() != static_cast<std::size_t>(rows)) throw FormatError("model: gpr weight count mismatch");
  m.weights = Eigen::Map<const Eigen::VectorXd>(ws.data(), rows);
  return m;
}

}  // namespace

FeatureScaler FeatureScaler::fit(const Eigen::MatrixXd& x) {
  FeatureScaler s;
  const auto n = static_cast<double>(x.rows());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const double mean = x.col(j).mean();
    double ss = 0.0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) ss += (x(i, j) - mean) * (x(i, j) - mean);
    const double sd = x.rows() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    s.mean.push_back(mean);
    s.scale.push_back(sd > 0.0 ? sd : 1.0);
  }
  return s;
}

Eigen::MatrixXd FeatureScaler::transform(const Eigen::MatrixXd& x) const {
  if (static_cast<std::size_t>(x.cols()) != mean.size()) throw DimensionError("scaler: feature count mismatch");
  Eigen::MatrixXd out(x.rows(), x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const auto k = static_cast<std::size_t>(j);
    out.col(j) = (x.col(j).array() - mean[k]) / scale[k];
  }
  return out;
}

std::vector<double> FeatureScaler::transform(std::span<const double> x) const {
  if (x.size() != mean.size()) {
    throw DimensionError("input has " + std::to_string(x.size()) + " features, model expects " +
                         std::to_string(mean.size()));
  }
  std::vector<double> out(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) out[k] = (x[k] - mean[k]) / scale[k];
  return out;
}

std::string to_string(ModelFamily f) {
  switch (f) {
    case ModelFamily::kMlp:
      return "mlp";
    case ModelFamily::kLinear:
      return "linear";
    case ModelFamily::kTree:
      return "tree";
    case ModelFamily::kGpr:
      return "gpr";
  }
  return "?";
}

ModelFamily model_family_from_string(const std::string& s) {
  if (s == "mlp") return ModelFamily::kMlp;
  if (s == "linear") return ModelFamily::kLinear;
  if (s == "tree") return ModelFamily::kTree;
  if (s == "gpr") return ModelFamily::kGpr;
  throw ValidationError("unknown model family '" + s + "'");
}

ModelFamily FittedModel::family() const { return static_cast<ModelFamily>(body.index()); }

double FittedModel::predict_normalized(std::span<const double> raw) const {
  const std::vector<double> z = scaler.transform(raw);
  return std::visit(
      [&](const auto& m) -> double {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, MlpWeights>) {
          return forward(m, z)(0);
        } else {
          return predict(m, z);
        }
      },
      body);
}

FittedModel fit_model(const ModelConfig& cfg, const Eigen::MatrixXd& raw_x, const Eigen::VectorXd& y_norm,
                      double target_scale_km, std::uint64_t seed) {
  if (!(target_scale_km > 0.0)) throw ValidationError("target scale must be > 0");
  FittedModel out;
  out.name = cfg.name;
  out.target_scale_km = target_scale_km;
  out.scaler = FeatureScaler::fit(raw_x);
  const Eigen::MatrixXd z = out.scaler.transform(raw_x);
  switch (cfg.family) {
    case ModelFamily::kMlp: {
      MlpSpec spec{static_cast<int>(z.cols()), cfg.mlp.hidden_dim, 1, cfg.mlp.cascade};
      TrainConfigNN tc = cfg.mlp.train;
      tc.seed = seed;
      const RowMatrix x = z;
      const RowMatrix t = y_norm;
      TrainResult r = train(spec, tc, x, t);
      out.info = {{"algorithm", to_string(tc.algorithm)},
                  {"epochs", std::to_string(r.epochs_run)},
                  {"stop", r.stop_reason},
                  {"train_mse", fmt(r.final_mse)}};
      out.body = std::move(r.weights);
      break;
    }
    case ModelFamily::kLinear: {
      LinearModel m = fit_linear(z, y_norm, cfg.linear_variant, cfg.linear);
      std::string terms;
      for (const auto& t : m.terms) terms += (terms.empty() ? "" : " ") + t.name();
      out.info = {{"variant", to_string(m.variant)}, {"terms", terms}};
      if (!m.dropped.empty()) out.info.emplace_back("dropped", std::to_string(m.dropped.size()));
      if (m.variant == LinearVariant::kRobust) {
        out.info.emplace_back("irls_iterations", std::to_string(m.iterations));
        out.info.emplace_back("converged", m.converged ? "yes" : "no");
      }
      out.body = std::move(m);
      break;
    }
    case ModelFamily::kTree: {
      TreeModel m = fit_tree(z, y_norm, cfg.min_leaf);
      out.info = {{"min_leaf", std::to_string(m.min_leaf)}, {"leaves", std::to_string(m.leaf_count())}};
      out.body = std::move(m);
      break;
    }
    case ModelFamily::kGpr: {
      GprModel m = fit_gpr(z, y_norm, cfg.kernel, cfg.gpr);
      out.info = {{"kernel", to_string(m.kernel)},
                  {"sigma_f", fmt(m.hyper.sigma_f)},
                  {"length", fmt(m.hyper.length)},
                  {"sigma_n", fmt(m.hyper.sigma_n)},
                  {"log_marginal_likelihood", fmt(m.log_marginal_likelihood)}};
      out.body = std::move(m);
      break;
    }
  }
  return out;
}

std::string serialize(const FittedModel& m) {
  Writer w;
  w.line(kMagic, std::to_string(kVersion));
  w.line("name", m.name);
  w.line("family", to_string(m.family()));
  w.num("target_scale_km", m.target_scale_km);
  w.list("scaler.mean", m.scaler.mean.begin(), m.scaler.mean.end());
  w.list("scaler.scale", m.scaler.scale.begin(), m.scaler.scale.end());
  w.integer("info_count", static_cast<long>(m.info.size()));
  for (const auto& [k, v] : m.info) w.line("info", k + ' ' + (v.empty() ? "-" : v));
  std::visit([&](const auto& body) { write_body(w, body); }, m.body);
  w.line("end", "");
  return w.str();
}

FittedModel deserialize(const std::string& text) {
  Reader r(text);
  const long version = parse_long(r.word(kMagic));
  if (version != kVersion) throw FormatError("model: unsupported version " + std::to_string(version));
  FittedModel m;
  m.name = r.word("name");
  const ModelFamily family = model_family_from_string(r.word("family"));
  m.target_scale_km = r.num("target_scale_km");
  m.scaler.mean = r.list("scaler.mean");
  m.scaler.scale = r.list("scaler.scale");
  if (m.scaler.mean.size() != m.scaler.scale.size()) throw FormatError("model: scaler size mismatch");
  const long n_info = r.integer("info_count");
  for (long i = 0; i < n_info; ++i) {
    auto t = r.expect("info");
    if (t.empty()) throw FormatError("model: empty info entry");
    std::string value;
    for (std::size_t k = 1; k < t.size(); ++k) value += (k > 1 ? " " : "") + t[k];
    m.info.emplace_back(t[0], value == "-" ? "" : value);
  }
  switch (family) {
    case ModelFamily::kMlp:
      m.body = read_mlp(r);
      break;
    case ModelFamily::kLinear:
      m.body = read_linear(r);
      break;
    case ModelFamily::kTree:
      m.body = read_tree(r);
      break;
    case ModelFamily::kGpr:
      m.body = read_gpr(r);
      break;
  }
  r.expect("end");
  const auto dim = m.scaler.mean.size();
  const bool dims_ok = std::visit(
      [&](const auto& b) {
        using T = std::decay_t<decltype(b)>;
        if constexpr (std::is_same_v<T, MlpWeights>) return static_cast<std::size_t>(b.spec.input_dim) == dim;
        else if constexpr (std::is_same_v<T, GprModel>) return static_cast<std::size_t>(b.x_train.cols()) == dim;
        else return static_cast<std::size_t>(b.input_dim) == dim;
      },
      m.body);
  if (!dims_ok) throw FormatError("model: body input dimension does not match scaler");
  return m;
}

}  // namespace mtlfault
