// Acceptance runner: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mtlfault/config.hpp"
#include "mtlfault/evaluation.hpp"
#include "mtlfault/fault_simulator.hpp"
#include "mtlfault/glcm_features.hpp"
#include "mtlfault/neural_net.hpp"
#include "mtlfault/pipeline.hpp"
#include "mtlfault/regression.hpp"
#include "mtlfault/relay_model.hpp"

using namespace mtlfault;
namespace fs = std::filesystem;
using Json = nlohmann::json;

namespace {

int failures = 0;

void report(int id, bool ok, const std::string& detail) {
  std::printf("%s criterion %d: %s\n", ok ? "PASS" : "FAIL", id, detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

void info(const std::string& line) {
  std::printf("INFO %s\n", line.c_str());
  std::fflush(stdout);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

const Json& dataset_entry(const Json& report, const std::string& name) {
  for (const auto& d : report["datasets"]) {
    if (d["dataset"] == name) return d;
  }
  throw std::runtime_error("dataset missing from report: " + name);
}

struct RankingCheck {
  bool ok = false;
  std::string detail;
};

RankingCheck check_ranking(const Json& report) {
  const std::vector<std::string> nn{"ff_lm", "ff_scg", "ff_gdx", "cf_lm", "cf_scg", "cf_gdx"};
  std::vector<std::pair<double, std::string>> nn_scores;
  for (const auto& m : dataset_entry(report, "ohl")["models"]) {
    if (std::find(nn.begin(), nn.end(), m["name"].get<std::string>()) != nn.end()) {
      nn_scores.emplace_back(m["test_rmse"].get<double>(), m["name"].get<std::string>());
    }
  }
  std::sort(nn_scores.begin(), nn_scores.end());
  int lm_rank = 0;
  for (std::size_t i = 0; i < nn_scores.size(); ++i) {
    if (nn_scores[i].second == "ff_lm") lm_rank = static_cast<int>(i) + 1;
  }
  const auto& ugc = dataset_entry(report, "ugc")["models"];
  const double best = ugc.at(0)["test_rmse"].get<double>();
  double linear = INFINITY;
  std::string linear_name;
  for (const auto& m : ugc) {
    const std::string n = m["name"];
    if ((n == "linear_stepwise" || n == "linear_ols") && m["test_rmse"].get<double>() < linear) {
      linear = m["test_rmse"].get<double>();
      linear_name = n;
    }
  }
  RankingCheck r;
  r.ok = lm_rank >= 1 && lm_rank <= 2 && linear <= 2.0 * best;
  r.detail = "ff_lm rank " + std::to_string(lm_rank) + "/" + std::to_string(nn_scores.size()) +
             " among NN trainers on ohl; " + linear_name + " ugc rmse " + fmt("%.3g", linear) + " vs best " +
             fmt("%.3g", best) + " (ratio " + fmt("%.2f", linear / best) + ")";
  return r;
}

void criteria_pipeline(const fs::path& root) {
  const PipelineConfig cfg = PipelineConfig::defaults();
  const fs::path a = root / "run_a";
  const fs::path b = root / "run_b";

  const auto t0 = std::chrono::steady_clock::now();
  run_pipeline(cfg, all_stages(), a);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const Json rep = Json::parse(slurp(a / "report.json"));

  {
    const Json& ohl = dataset_entry(rep, "ohl");
    const Json& ugc = dataset_entry(rep, "ugc");
    const double e_ohl = ohl["models"].at(0)["max_percent_error"].get<double>();
    const double e_ugc = ugc["models"].at(0)["max_percent_error"].get<double>();
    const bool ok = e_ohl <= 3.0 && e_ugc <= 3.0 && seconds < 300.0;
    report(1, ok,
           "best ohl " + ohl["best_model"].get<std::string>() + " max " + fmt("%.3f", e_ohl) + "%, best ugc " +
               ugc["best_model"].get<std::string>() + " max " + fmt("%.3f", e_ugc) + "%, runtime " +
               fmt("%.1f", seconds) + " s");
  }
  {
    const RankingCheck r = check_ranking(rep);
    report(2, r.ok, r.detail);
  }

  run_pipeline(cfg, all_stages(), b);
  {
    std::vector<std::string> files{"features.csv", "report.json"};
    for (const auto& e : fs::recursive_directory_iterator(a / "models")) {
      if (e.is_regular_file()) files.push_back(fs::relative(e.path(), a).string());
    }
    std::size_t differing = 0;
    for (const auto& f : files) {
      if (!fs::exists(b / f) || slurp(a / f) != slurp(b / f)) ++differing;
    }
    const bool ok = differing == 0 && files.size() > 2;
    report(7, ok, std::to_string(files.size()) + " artifacts compared, " + std::to_string(differing) + " differ");
  }

  for (std::uint64_t seed = 2; seed <= 5; ++seed) {
    PipelineConfig c = cfg;
    c.seed = seed;
    const fs::path out = root / ("seed_" + std::to_string(seed));
    run_pipeline(c, all_stages(), out);
    const Json r = Json::parse(slurp(out / "report.json"));
    const RankingCheck rc = check_ranking(r);
    info("seed " + std::to_string(seed) + ": ranking " + (rc.ok ? "holds" : "does not hold") + " (" + rc.detail +
         "); max% ohl " + fmt("%.3f", dataset_entry(r, "ohl")["models"].at(0)["max_percent_error"].get<double>()) +
         " ugc " + fmt("%.3f", dataset_entry(r, "ugc")["models"].at(0)["max_percent_error"].get<double>()));
    fs::remove_all(out);
  }
}

void criterion_metric() {
  struct Row {
    double actual, predicted, total, printed;
  };
  const std::vector<Row> rows{
      {20, 19.1112, 200, 0.444},     {45, 42.4392, 200, 1.280},      {70, 70.3472, 200, 0.1736},
      {95, 94.8647, 200, 0.0676},    {120, 119.8546, 200, 0.0727},   {145, 143.1658, 200, 0.9171},
      {170, 169.8743, 200, 0.0628},  {195, 195.0882, 200, 0.0441},   {0.8, 0.835775, 10, 0.357},
      {1.8, 1.707975, 10, 0.921},    {2.8, 2.687975, 10, 1.121},     {3.8, 3.7623, 10, 0.377},
      {4.8, 4.817025, 10, 0.17},     {5.8, 5.7321, 10, 0.679},       {6.8, 6.720675, 10, 0.794},
      {7.8, 7.757025, 10, 0.43},     {8.8, 8.66965, 10, 1.304},      {9.8, 9.755, 10, 0.45},
  };
  int exact = 0;
  double worst = 0.0;
  for (const auto& r : rows) {
    const double pe = percent_error(r.actual, r.predicted, r.total);
    const double diff = std::abs(pe - r.printed);
    worst = std::max(worst, diff);
    if (std::round(pe * 1000.0) == std::round(r.printed * 1000.0)) ++exact;
  }
  report(3, worst <= 1e-3,
         std::to_string(rows.size()) + " rows, max |computed - printed| " + fmt("%.5f", worst) + ", " +
             std::to_string(exact) + " identical after rounding to 3 d.p.");
}

void criterion_relay() {
  MixedLineSpec spec;
  auto p = SequenceParams::overhead_default();
  p.c1_nf = p.c0_nf = 0.0;
  spec.sections = {{SectionKind::kOverhead, 200.0, p}};
  const Complex k0 = RelaySettings::for_line(spec).k0;
  double worst = 0.0;
  for (int i = 1; i <= 10; ++i) {
    const double d = 20.0 * i;
    const ImpedancePoint z = ground_loop_impedance(solve_slg_fault(spec, {0, d, 0.0}), k0);
    const Complex expect = p.z1() * d;
    worst = std::max(worst, std::abs(Complex{z.r, z.x} - expect) / std::abs(expect));
  }
  report(4, worst < 1e-6, "10 distances, max relative error " + fmt("%.2e", worst));
}

Glcm naive_glcm(const LevelMatrix& lm, const std::vector<GlcmOffset>& offsets, bool symmetric) {
  const int L = lm.levels;
  Glcm g{L, std::vector<double>(static_cast<std::size_t>(L * L), 0.0)};
  for (const auto& o : offsets) {
    std::vector<double> c(static_cast<std::size_t>(L * L), 0.0);
    double total = 0.0;
    for (int r = 0; r < lm.height; ++r) {
      for (int col = 0; col < lm.width; ++col) {
        const int r2 = r + o.drow;
        const int c2 = col + o.dcol;
        if (r2 < 0 || r2 >= lm.height || c2 < 0 || c2 >= lm.width) continue;
        const int i = lm.at(col, r);
        const int j = lm.at(c2, r2);
        c[static_cast<std::size_t>(i * L + j)] += 1.0;
        total += 1.0;
        if (symmetric) {
          c[static_cast<std::size_t>(j * L + i)] += 1.0;
          total += 1.0;
        }
      }
    }
    for (std::size_t k = 0; k < c.size(); ++k) g.p[k] += c[k] / total;
  }
  for (auto& v : g.p) v /= static_cast<double>(offsets.size());
  return g;
}

void criterion_glcm() {
  std::vector<std::string> bad;
  std::mt19937_64 rng(2024);
  int matched = 0;
  double worst_sum = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::uint8_t> data(64);
    for (auto& v : data) v = static_cast<std::uint8_t>(rng() % 8);
    const LevelMatrix lm{8, 8, 8, data};
    const Glcm g = compute_glcm(lm, default_offsets(), true);
    double s = 0.0;
    for (double v : g.p) s += v;
    worst_sum = std::max(worst_sum, std::abs(s - 1.0));
    if (g.p == naive_glcm(lm, default_offsets(), true).p && g.p == g.transposed().p) ++matched;
  }
  if (matched != 50) bad.push_back("oracle/symmetry " + std::to_string(matched) + "/50");
  if (worst_sum > 1e-12) bad.push_back("normalization");

  const FeatureVector fc = features20(compute_glcm({5, 5, 8, std::vector<std::uint8_t>(25, 2)}, default_offsets(), true));
  if (fc[3] != 1.0 || fc[2] != 0.0) bad.push_back("constant image");

  const FeatureVector fk = features20(compute_glcm({2, 2, 2, {0, 1, 1, 0}}, {{0, 1}}, true));
  if (std::abs(fk[4] - 1.0) > 1e-12 || std::abs(fk[3] - 0.5) > 1e-12 || std::abs(fk[2] - 1.0) > 1e-12 ||
      std::abs(fk[5] + 1.0) > 1e-12) {
    bad.push_back("checkerboard");
  }
  std::string detail = "50 random 8x8 matrices match the naive oracle, max |sum p - 1| " + fmt("%.1e", worst_sum) +
                       ", constant and checkerboard hand values";
  for (const auto& b : bad) detail += "; failed: " + b;
  report(5, bad.empty(), detail);
}

RowMatrix random_rows(std::mt19937_64& rng, int n, int d) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  RowMatrix x(n, d);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) x(i, j) = u(rng);
  }
  return x;
}

void criterion_numerics() {
  std::vector<std::string> parts;
  bool ok = true;

  std::mt19937_64 rng(99);
  double jac_worst = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    const MlpSpec s{1 + static_cast<int>(rng() % 6), 1 + static_cast<int>(rng() % 6),
                    1 + static_cast<int>(rng() % 2), trial % 2 == 1};
    const MlpWeights w = init_weights(s, static_cast<std::uint64_t>(trial) + 100);
    const RowMatrix x = random_rows(rng, 7, s.input_dim);
    const Eigen::MatrixXd ja = jacobian(w, x);
    const Eigen::VectorXd theta = w.flatten();
    Eigen::MatrixXd jn(ja.rows(), ja.cols());
    const double h = 1e-6;
    for (Eigen::Index k = 0; k < theta.size(); ++k) {
      Eigen::VectorXd tp = theta, tm = theta;
      tp(k) += h;
      tm(k) -= h;
      const MlpWeights wp = MlpWeights::unflatten(s, tp);
      const MlpWeights wm = MlpWeights::unflatten(s, tm);
      for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const std::span<const double> xi(x.row(i).data(), static_cast<std::size_t>(x.cols()));
        const Eigen::VectorXd d = (forward(wp, xi) - forward(wm, xi)) / (2.0 * h);
        for (int o = 0; o < s.output_dim; ++o) jn(i * s.output_dim + o, k) = -d(o);
      }
    }
    jac_worst = std::max(jac_worst, (ja - jn).cwiseAbs().maxCoeff() / std::max(1.0, jn.cwiseAbs().maxCoeff()));
  }
  ok = ok && jac_worst < 1e-4;
  parts.push_back("jacobian rel err " + fmt("%.1e", jac_worst));

  {
    std::mt19937_64 r(4);
    const RowMatrix x = random_rows(r, 30, 3);
    RowMatrix t(30, 1);
    for (int i = 0; i < 30; ++i) t(i, 0) = 2.0 * x(i, 0);
    TrainConfigNN cfg;
    cfg.max_epochs = 25;
    cfg.seed = 12;
    const TrainResult res = train({3, 4, 1, true}, cfg, x, t);
    ok = ok && res.final_mse < 1e-10 && res.epochs_run <= 25;
    parts.push_back("LM mse " + fmt("%.1e", res.final_mse) + " in " + std::to_string(res.epochs_run) + " epochs");
  }

  std::mt19937_64 gr(23);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  {
    Eigen::MatrixXd x(20, 2);
    for (int i = 0; i < 20; ++i) x.row(i) << u(gr), u(gr);
    Eigen::VectorXd y(20);
    for (int i = 0; i < 20; ++i) y(i) = std::cos(x(i, 0)) * x(i, 1);
    GprFitOptions opt;
    opt.optimize = false;
    opt.initial = {1.0, 1.0, 1e-8, 1.0};
    const GprModel m = fit_gpr(x, y, GprKernel::kSquaredExponential, opt);
    double worst = 0.0;
    for (int i = 0; i < 20; ++i) {
      const std::vector<double> xi{x(i, 0), x(i, 1)};
      worst = std::max(worst, std::abs(predict(m, xi) - y(i)));
    }
    ok = ok && worst < 1e-4;
    parts.push_back("GPR interpolation err " + fmt("%.1e", worst));
  }
  {
    Eigen::MatrixXd x(15, 2);
    for (int i = 0; i < 15; ++i) x.row(i) << u(gr), u(gr);
    Eigen::VectorXd y(15);
    for (int i = 0; i < 15; ++i) y(i) = std::sin(x(i, 0)) + 0.2 * x(i, 1);
    y.array() -= y.mean();
    const GprHyper hyp{0.9, 1.3, 0.2, 1.0};
    Eigen::VectorXd g;
    log_marginal_likelihood(GprKernel::kSquaredExponential, hyp, x, y, &g);
    double worst = 0.0;
    const double eps = 1e-6;
    for (Eigen::Index p = 0; p < g.size(); ++p) {
      auto shifted = [&](double s) {
        GprHyper t = hyp;
        double* field = p == 0 ? &t.sigma_f : p == 1 ? &t.length : &t.sigma_n;
        *field *= std::exp(s);
        return log_marginal_likelihood(GprKernel::kSquaredExponential, t, x, y);
      };
      const double fd = (shifted(eps) - shifted(-eps)) / (2.0 * eps);
      worst = std::max(worst, std::abs(g(p) - fd) / std::max(1.0, std::abs(fd)));
    }
    ok = ok && worst < 1e-4;
    parts.push_back("SE LML gradient rel err " + fmt("%.1e", worst));
  }
  std::string detail;
  for (const auto& p : parts) detail += (detail.empty() ? "" : ", ") + p;
  report(6, ok, detail);
}

void guarded(const std::vector<int>& ids, const std::function<void()>& f) {
  try {
    f();
  } catch (const std::exception& e) {
    for (int id : ids) report(id, false, std::string("exception: ") + e.what());
  }
}

}  // namespace

int main() {
  const fs::path root = fs::temp_directory_path() / "mtlfault_acceptance";
  fs::remove_all(root);
  guarded({3}, criterion_metric);
  guarded({4}, criterion_relay);
  guarded({5}, criterion_glcm);
  guarded({6}, criterion_numerics);
  guarded({1, 2, 7}, [&] { criteria_pipeline(root); });
  fs::remove_all(root);
  std::printf("%s\n", failures == 0 ? "all criteria PASS" : "some criteria FAIL");
  return failures == 0 ? 0 : 1;
}
