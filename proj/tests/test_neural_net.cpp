#include <doctest.h>

#include <cmath>
#include <random>

#include "mtlfault/errors.hpp"
#include "mtlfault/neural_net.hpp"

using namespace mtlfault;

namespace {

RowMatrix random_matrix(std::mt19937_64& rng, int rows, int cols) {
  std::normal_distribution<double> n(0.0, 1.0);
  RowMatrix m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) m(i, j) = n(rng);
  }
  return m;
}

// Central-difference Jacobian of e = t - y, parameter by parameter.
Eigen::MatrixXd numeric_jacobian(const MlpWeights& w, const RowMatrix& x, double h) {
  const Eigen::VectorXd theta = w.flatten();
  const auto rows = x.rows() * w.spec.output_dim;
  Eigen::MatrixXd j(rows, theta.size());
  for (Eigen::Index k = 0; k < theta.size(); ++k) {
    Eigen::VectorXd tp = theta, tm = theta;
    tp(k) += h;
    tm(k) -= h;
    const MlpWeights wp = MlpWeights::unflatten(w.spec, tp);
    const MlpWeights wm = MlpWeights::unflatten(w.spec, tm);
    for (Eigen::Index s = 0; s < x.rows(); ++s) {
      const std::span<const double> row(x.row(s).data(), static_cast<std::size_t>(x.cols()));
      const Eigen::VectorXd yp = forward(wp, row);
      const Eigen::VectorXd ym = forward(wm, row);
      for (int o = 0; o < w.spec.output_dim; ++o) j(s * w.spec.output_dim + o, k) = -(yp(o) - ym(o)) / (2.0 * h);
    }
  }
  return j;
}

}  // namespace

TEST_CASE("parameter layout and flatten round trip") {
  const MlpSpec ff{20, 10, 1, false};
  const MlpSpec cf{20, 10, 1, true};
  CHECK(MlpWeights::parameter_count(ff) == 221);
  CHECK(MlpWeights::parameter_count(cf) == 241);
  const MlpWeights w = init_weights(cf, 3);
  const Eigen::VectorXd theta = w.flatten();
  CHECK(theta(0) == w.w1(0, 0));
  CHECK(theta(1) == w.w1(0, 1));
  CHECK(theta(200) == w.b1(0));
  CHECK(theta(210) == w.w2(0, 0));
  CHECK(theta(220) == w.b2(0));
  CHECK(theta(221) == w.wc(0, 0));
  CHECK(MlpWeights::unflatten(cf, theta).flatten() == theta);
}

TEST_CASE("initialisation") {
  const MlpSpec s{20, 10, 1, true};
  const auto a = init_weights(s, 42).flatten();
  const auto b = init_weights(s, 42).flatten();
  const auto c = init_weights(s, 43).flatten();
  CHECK(a == b);
  CHECK(a != c);
  CHECK(a.minCoeff() >= -0.5);
  CHECK(a.maxCoeff() <= 0.5);
}

TEST_CASE("forward pass hand values") {
  const MlpSpec s{2, 2, 1, false};
  MlpWeights w = MlpWeights::zeros(s);
  const std::vector<double> x{1.0, -1.0};
  CHECK(forward(w, x)(0) == 0.0);
  w.w1.setOnes();
  w.w2.setOnes();
  w.b2(0) = 0.3;
  CHECK(forward(w, x)(0) == doctest::Approx(0.3));  // tanh(1 - 1) = 0 in both units
  w.b1 << 0.5, -0.25;
  CHECK(forward(w, x)(0) == doctest::Approx(std::tanh(0.5) + std::tanh(-0.25) + 0.3));

  const MlpSpec c{3, 4, 1, true};
  MlpWeights wc = MlpWeights::zeros(c);
  wc.wc << 1.0, 2.0, -3.0;
  CHECK(forward(wc, std::vector<double>{1.0, 1.0, 1.0})(0) == doctest::Approx(0.0));
  CHECK(forward(wc, std::vector<double>{2.0, 0.5, 0.0})(0) == doctest::Approx(3.0));
  CHECK_THROWS_AS(forward(wc, std::vector<double>{1.0}), DimensionError);
}

TEST_CASE("cascade with zero shortcut equals feed-forward") {
  std::mt19937_64 rng(1);
  const MlpWeights ff = init_weights({5, 3, 1, false}, 8);
  MlpWeights cf = MlpWeights::zeros({5, 3, 1, true});
  cf.w1 = ff.w1;
  cf.b1 = ff.b1;
  cf.w2 = ff.w2;
  cf.b2 = ff.b2;
  const RowMatrix x = random_matrix(rng, 6, 5);
  for (int i = 0; i < 6; ++i) {
    const std::span<const double> row(x.row(i).data(), 5);
    CHECK(forward(ff, row)(0) == forward(cf, row)(0));
  }
}

TEST_CASE("jacobian matches central differences on random nets") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 10; ++trial) {
    const MlpSpec s{1 + static_cast<int>(rng() % 6), 1 + static_cast<int>(rng() % 6), 1 + static_cast<int>(rng() % 2),
                    trial % 2 == 1};
    const MlpWeights w = init_weights(s, static_cast<std::uint64_t>(trial) + 100);
    const RowMatrix x = random_matrix(rng, 7, s.input_dim);
    const Eigen::MatrixXd ja = jacobian(w, x);
    const Eigen::MatrixXd jn = numeric_jacobian(w, x, 1e-6);
    REQUIRE(ja.rows() == jn.rows());
    REQUIRE(ja.cols() == jn.cols());
    const double err = (ja - jn).cwiseAbs().maxCoeff() / std::max(1.0, jn.cwiseAbs().maxCoeff());
    CHECK(err < 1e-4);
  }
}

TEST_CASE("jacobian structure") {
  const MlpSpec s{3, 2, 1, false};
  const MlpWeights w = init_weights(s, 5);
  RowMatrix x = RowMatrix::Zero(2, 3);
  x(1, 0) = 1.0;
  const Eigen::MatrixXd j = jacobian(w, x);
  // Zero input: every W1 column is zero for that sample.
  for (int k = 0; k < 6; ++k) CHECK(j(0, k) == 0.0);
  // W1 (6), b1 (2), W2 (2), b2: de/db2 = -1 for a linear output.
  CHECK(j.cols() == 11);
  CHECK(j(0, 10) == -1.0);
  CHECK(j(1, 10) == -1.0);
  CHECK(j(0, 8) == doctest::Approx(-std::tanh(w.b1(0))));
}

TEST_CASE("LM on noise-free linear targets") {
  std::mt19937_64 rng(4);
  const RowMatrix x = random_matrix(rng, 30, 3);
  RowMatrix t(30, 1);
  for (int i = 0; i < 30; ++i) t(i, 0) = 2.0 * x(i, 0);
  TrainConfigNN cfg;
  cfg.max_epochs = 25;
  cfg.seed = 12;
  const TrainResult r = train({3, 4, 1, true}, cfg, x, t);
  CHECK(r.final_mse < 1e-10);
  CHECK(r.epochs_run <= 25);
  CHECK(r.mse_trace.front() >= r.mse_trace.back());
  for (std::size_t i = 1; i < r.mse_trace.size(); ++i) CHECK(r.mse_trace[i] <= r.mse_trace[i - 1]);
}

TEST_CASE("all trainers fit constant targets with the bias") {
  std::mt19937_64 rng(6);
  const RowMatrix x = random_matrix(rng, 12, 4);
  const RowMatrix t = RowMatrix::Constant(12, 1, 0.7);
  for (const auto alg : {TrainAlgorithm::kLevenbergMarquardt, TrainAlgorithm::kScaledConjugateGradient,
                         TrainAlgorithm::kGradientDescentAdaptive}) {
    TrainConfigNN cfg;
    cfg.algorithm = alg;
    cfg.max_epochs = alg == TrainAlgorithm::kGradientDescentAdaptive ? 20000 : 2000;
    cfg.grad_tol = 1e-12;
    const TrainResult r = train({4, 3, 1, false}, cfg, x, t);
    INFO(to_string(alg), " stop=", r.stop_reason, " mse=", r.final_mse);
    CHECK(r.final_mse < (alg == TrainAlgorithm::kGradientDescentAdaptive ? 1e-6 : 1e-12));
  }
}

TEST_CASE("training is deterministic and traces are finite") {
  std::mt19937_64 rng(10);
  const RowMatrix x = random_matrix(rng, 20, 5);
  RowMatrix t(20, 1);
  for (int i = 0; i < 20; ++i) t(i, 0) = std::sin(x(i, 0)) + 0.1 * x(i, 1) * x(i, 2);
  for (const auto alg : {TrainAlgorithm::kLevenbergMarquardt, TrainAlgorithm::kScaledConjugateGradient,
                         TrainAlgorithm::kGradientDescentAdaptive}) {
    TrainConfigNN cfg;
    cfg.algorithm = alg;
    cfg.max_epochs = 200;
    const TrainResult a = train({5, 6, 1, false}, cfg, x, t);
    const TrainResult b = train({5, 6, 1, false}, cfg, x, t);
    CHECK(a.weights.flatten() == b.weights.flatten());
    CHECK(a.mse_trace == b.mse_trace);
    CHECK(a.mse_trace.size() == static_cast<std::size_t>(a.epochs_run) + 1);
    for (double v : a.mse_trace) CHECK(std::isfinite(v));
    CHECK(a.final_mse <= a.mse_trace.front());
    CHECK(a.final_mse == mse(a.weights, x, t));
  }
}

TEST_CASE("training preconditions") {
  const RowMatrix x = RowMatrix::Zero(1, 2);
  const RowMatrix t = RowMatrix::Zero(1, 1);
  CHECK_THROWS_AS(train({2, 2, 1, false}, {}, x, t), DimensionError);
  TrainConfigNN bad;
  bad.mu_inc = 0.5;
  CHECK_THROWS_AS(validate(bad), ValidationError);
  CHECK_THROWS_AS(validate(MlpSpec{0, 1, 1, false}), ValidationError);
}
