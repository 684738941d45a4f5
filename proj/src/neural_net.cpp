#include "mtlfault/neural_net.hpp"

#include <cmath>
#include <sstream>

#include "mtlfault/errors.hpp"
#include "mtlfault/simd/kernels.hpp"

namespace mtlfault {

namespace {

struct Batch {
  RowMatrix hidden;  // N x H, tanh activations
  RowMatrix output;  // N x O
};

Batch run_batch(const MlpWeights& w, const RowMatrix& x) {
  const auto& s = w.spec;
  const Eigen::Index n = x.rows();
  Batch b{RowMatrix(n, s.hidden_dim), RowMatrix(n, s.output_dim)};
  for (Eigen::Index r = 0; r < n; ++r) {
    const std::span<const double> xr(x.row(r).data(), static_cast<std::size_t>(s.input_dim));
    for (int k = 0; k < s.hidden_dim; ++k) {
      const std::span<const double> wk(w.w1.row(k).data(), static_cast<std::size_t>(s.input_dim));
      b.hidden(r, k) = std::tanh(simd::dot(wk, xr) + w.b1(k));
    }
    const std::span<const double> hr(b.hidden.row(r).data(),
                                     static_cast<std::size_t>(s.hidden_dim));
    for (int o = 0; o < s.output_dim; ++o) {
      const std::span<const double> w2o(w.w2.row(o).data(),
                                        static_cast<std::size_t>(s.hidden_dim));
      double y = simd::dot(w2o, hr) + w.b2(o);
      if (s.cascade) {
        const std::span<const double> wco(w.wc.row(o).data(),
                                          static_cast<std::size_t>(s.input_dim));
        y += simd::dot(wco, xr);
      }
      b.output(r, o) = y;
    }
  }
  return b;
}

Eigen::VectorXd errors(const Batch& b, const RowMatrix& targets) {
  const Eigen::Index n = b.output.rows();
  const Eigen::Index o = b.output.cols();
  Eigen::VectorXd e(n * o);
  for (Eigen::Index r = 0; r < n; ++r) {
    for (Eigen::Index k = 0; k < o; ++k) e(r * o + k) = targets(r, k) - b.output(r, k);
  }
  return e;
}

Eigen::MatrixXd jacobian_from(const MlpWeights& w, const RowMatrix& x, const Batch& b) {
  const auto& s = w.spec;
  const int in = s.input_dim, hid = s.hidden_dim, out = s.output_dim;
  const Eigen::Index n = x.rows();
  const Eigen::Index b1_off = static_cast<Eigen::Index>(hid) * in;
  const Eigen::Index w2_off = b1_off + hid;
  const Eigen::Index b2_off = w2_off + static_cast<Eigen::Index>(out) * hid;
  const Eigen::Index wc_off = b2_off + out;
  Eigen::MatrixXd j =
      Eigen::MatrixXd::Zero(n * out, static_cast<Eigen::Index>(MlpWeights::parameter_count(s)));
  for (Eigen::Index r = 0; r < n; ++r) {
    for (int o = 0; o < out; ++o) {
      const Eigen::Index row = r * out + o;
      for (int k = 0; k < hid; ++k) {
        const double h = b.hidden(r, k);
        const double delta = -w.w2(o, k) * (1.0 - h * h);
        for (int i = 0; i < in; ++i) j(row, static_cast<Eigen::Index>(k) * in + i) = delta * x(r, i);
        j(row, b1_off + k) = delta;
        j(row, w2_off + static_cast<Eigen::Index>(o) * hid + k) = -h;
      }
      j(row, b2_off + o) = -1.0;
      if (s.cascade) {
        for (int i = 0; i < in; ++i) {
          j(row, wc_off + static_cast<Eigen::Index>(o) * in + i) = -x(r, i);
        }
      }
    }
  }
  return j;
}

double mean_square(const Eigen::VectorXd& e) { return e.squaredNorm() / static_cast<double>(e.size()); }

struct Evaluation {
  double mse;
  Eigen::VectorXd grad;  // of MSE with respect to theta
};

class Objective {
 public:
  Objective(const MlpSpec& spec, const RowMatrix& x, const RowMatrix& t)
      : spec_(spec), x_(x), t_(t) {}

  double value(const Eigen::VectorXd& theta) const {
    const auto w = MlpWeights::unflatten(spec_, theta);
    return mean_square(errors(run_batch(w, x_), t_));
  }

  Evaluation value_and_grad(const Eigen::VectorXd& theta) const {
    const auto w = MlpWeights::unflatten(spec_, theta);
    const Batch b = run_batch(w, x_);
    const Eigen::VectorXd e = errors(b, t_);
    const Eigen::MatrixXd j = jacobian_from(w, x_, b);
    return {mean_square(e), (2.0 / static_cast<double>(e.size())) * (j.transpose() * e)};
  }

 private:
  const MlpSpec& spec_;
  const RowMatrix& x_;
  const RowMatrix& t_;
};

void check_finite(double v, TrainAlgorithm a, int epoch) {
  if (!std::isfinite(v)) {
    std::ostringstream os;
    os << to_string(a) << ": non-finite loss at epoch " << epoch;
    throw TrainingError(os.str());
  }
}

TrainResult finish(const MlpSpec& spec, const Eigen::VectorXd& theta, std::vector<double> trace,
                   std::string reason) {
  TrainResult r;
  r.weights = MlpWeights::unflatten(spec, theta);
  r.epochs_run = static_cast<int>(trace.size()) - 1;
  r.final_mse = trace.back();
  r.mse_trace = std::move(trace);
  r.stop_reason = std::move(reason);
  return r;
}

TrainResult train_lm(const MlpSpec& spec, const TrainConfigNN& cfg, const RowMatrix& x,
                     const RowMatrix& t, Eigen::VectorXd theta) {
  auto w = MlpWeights::unflatten(spec, theta);
  Batch b = run_batch(w, x);
  Eigen::VectorXd e = errors(b, t);
  double perf = mean_square(e);
  check_finite(perf, cfg.algorithm, 0);
  std::vector<double> trace{perf};
  double mu = cfg.mu0;
  const auto p = static_cast<Eigen::Index>(theta.size());
  std::string reason = "max_epochs";
  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    if (perf <= cfg.goal_mse) {
      reason = "goal";
      break;
    }
    const Eigen::MatrixXd j = jacobian_from(w, x, b);
    const Eigen::VectorXd jte = j.transpose() * e;
    const double grad_norm = (2.0 / static_cast<double>(e.size())) * jte.norm();
    if (grad_norm < cfg.grad_tol) {
      reason = "grad_tol";
      break;
    }
    const Eigen::MatrixXd jtj = j.transpose() * j;
    bool accepted = false;
    while (!accepted) {
      const Eigen::MatrixXd system = jtj + mu * Eigen::MatrixXd::Identity(p, p);
      const Eigen::LDLT<Eigen::MatrixXd> ldlt(system);
      Eigen::VectorXd step;
      bool solved = ldlt.info() == Eigen::Success;
      if (solved) {
        step = ldlt.solve(jte);
        solved = step.allFinite();
      }
      if (solved) {
        const Eigen::VectorXd candidate = theta - step;
        auto cw = MlpWeights::unflatten(spec, candidate);
        Batch cb = run_batch(cw, x);
        Eigen::VectorXd ce = errors(cb, t);
        const double cperf = mean_square(ce);
        if (std::isfinite(cperf) && cperf < perf) {
          theta = candidate;
          w = std::move(cw);
          b = std::move(cb);
          e = std::move(ce);
          perf = cperf;
          mu *= cfg.mu_dec;
          accepted = true;
          break;
        }
      } else if (mu >= cfg.mu_max) {
        std::ostringstream os;
        os << "LM: damped system unsolvable at mu = " << mu << " (epoch " << epoch << ")";
        throw TrainingError(os.str());
      }
      mu *= cfg.mu_inc;
      if (mu > cfg.mu_max) break;
    }
    if (!accepted) {
      reason = "mu_max";
      break;
    }
    trace.push_back(perf);
  }
  return finish(spec, theta, std::move(trace), reason);
}

TrainResult train_gdx(const MlpSpec& spec, const TrainConfigNN& cfg, const RowMatrix& x,
                      const RowMatrix& t, Eigen::VectorXd theta) {
  const Objective obj(spec, x, t);
  Evaluation cur = obj.value_and_grad(theta);
  check_finite(cur.mse, cfg.algorithm, 0);
  std::vector<double> trace{cur.mse};
  double lr = cfg.lr;
  double mc = cfg.momentum;
  Eigen::VectorXd dx = Eigen::VectorXd::Zero(theta.size());
  std::string reason = "max_epochs";
  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    if (cur.mse <= cfg.goal_mse) {
      reason = "goal";
      break;
    }
    if (cur.grad.norm() < cfg.grad_tol) {
      reason = "grad_tol";
      break;
    }
    dx = mc * dx - (1.0 - mc) * lr * cur.grad;
    const Eigen::VectorXd candidate = theta + dx;
    Evaluation next = obj.value_and_grad(candidate);
    check_finite(next.mse, cfg.algorithm, epoch);
    if (next.mse > cur.mse * cfg.max_perf_inc) {
      // Reject: shrink the rate and drop the accumulated momentum.
      lr *= cfg.lr_dec;
      dx.setZero();
    } else {
      if (next.mse < cur.mse) lr *= cfg.lr_inc;
      theta = candidate;
      cur = std::move(next);
    }
    trace.push_back(cur.mse);
  }
  return finish(spec, theta, std::move(trace), reason);
}

// Moller's scaled conjugate gradient.
TrainResult train_scg(const MlpSpec& spec, const TrainConfigNN& cfg, const RowMatrix& x,
                      const RowMatrix& t, Eigen::VectorXd theta) {
  const Objective obj(spec, x, t);
  Evaluation cur = obj.value_and_grad(theta);
  check_finite(cur.mse, cfg.algorithm, 0);
  std::vector<double> trace{cur.mse};
  const auto n_params = theta.size();
  Eigen::VectorXd r = -cur.grad;
  Eigen::VectorXd p = r;
  double lambda = cfg.lambda;
  double lambda_bar = 0.0;
  bool success = true;
  double delta = 0.0;
  std::string reason = "max_epochs";
  int since_restart = 0;
  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    if (cur.mse <= cfg.goal_mse) {
      reason = "goal";
      break;
    }
    if (r.norm() < cfg.grad_tol) {
      reason = "grad_tol";
      break;
    }
    const double p2 = p.squaredNorm();
    if (success) {
      const double sigma_k = cfg.sigma / std::sqrt(p2);
      const Eigen::VectorXd g_probe = obj.value_and_grad(theta + sigma_k * p).grad;
      delta = p.dot(g_probe - cur.grad) / sigma_k;
    }
    delta += (lambda - lambda_bar) * p2;
    if (delta <= 0.0) {
      lambda_bar = 2.0 * (lambda - delta / p2);
      delta = -delta + lambda * p2;
      lambda = lambda_bar;
    }
    const double mu = p.dot(r);
    const double alpha = mu / delta;
    const Eigen::VectorXd candidate = theta + alpha * p;
    Evaluation next = obj.value_and_grad(candidate);
    check_finite(next.mse, cfg.algorithm, epoch);
    const double comparison = 2.0 * delta * (cur.mse - next.mse) / (mu * mu);
    if (comparison >= 0.0 && next.mse <= cur.mse) {
      theta = candidate;
      const Eigen::VectorXd r_new = -next.grad;
      cur = std::move(next);
      lambda_bar = 0.0;
      success = true;
      if (++since_restart >= n_params) {
        p = r_new;
        since_restart = 0;
      } else {
        const double beta = (r_new.squaredNorm() - r_new.dot(r)) / mu;
        p = r_new + beta * p;
      }
      r = r_new;
      if (comparison >= 0.75) lambda *= 0.25;
    } else {
      lambda_bar = lambda;
      success = false;
    }
    if (comparison < 0.25) lambda += delta * (1.0 - comparison) / p2;
    if (!std::isfinite(lambda) || lambda > 1e100) {
      reason = "lambda_max";
      trace.push_back(cur.mse);
      break;
    }
    trace.push_back(cur.mse);
  }
  return finish(spec, theta, std::move(trace), reason);
}

}  // namespace

std::string to_string(TrainAlgorithm a) {
  switch (a) {
    case TrainAlgorithm::kLevenbergMarquardt:
      return "LM";
    case TrainAlgorithm::kScaledConjugateGradient:
      return "SCG";
    case TrainAlgorithm::kGradientDescentAdaptive:
      return "GDX";
  }
  return "?";
}

TrainAlgorithm train_algorithm_from_string(const std::string& s) {
  if (s == "LM") return TrainAlgorithm::kLevenbergMarquardt;
  if (s == "SCG") return TrainAlgorithm::kScaledConjugateGradient;
  if (s == "GDX") return TrainAlgorithm::kGradientDescentAdaptive;
  throw ValidationError("unknown training algorithm '" + s + "' (expected LM, SCG or GDX)");
}

void validate(const MlpSpec& spec) {
  if (spec.input_dim < 1 || spec.hidden_dim < 1 || spec.output_dim < 1) {
    throw ValidationError("network dimensions must be >= 1");
  }
}

void validate(const TrainConfigNN& c) {
  if (c.max_epochs < 0) throw ValidationError("max_epochs must be >= 0");
  const bool positive = c.grad_tol > 0 && c.mu0 > 0 && c.mu_inc > 1 && c.mu_dec > 0 &&
                        c.mu_dec < 1 && c.mu_max > 0 && c.lr > 0 && c.momentum >= 0 &&
                        c.momentum < 1 && c.lr_inc > 1 && c.lr_dec > 0 && c.lr_dec < 1 &&
                        c.max_perf_inc >= 1 && c.sigma > 0 && c.lambda > 0 && c.goal_mse >= 0;
  if (!positive) throw ValidationError("training hyperparameters out of range");
}

std::size_t MlpWeights::parameter_count(const MlpSpec& s) {
  const auto in = static_cast<std::size_t>(s.input_dim);
  const auto hid = static_cast<std::size_t>(s.hidden_dim);
  const auto out = static_cast<std::size_t>(s.output_dim);
  return hid * in + hid + out * hid + out + (s.cascade ? out * in : 0);
}

MlpWeights MlpWeights::zeros(const MlpSpec& s) {
  MlpWeights w;
  w.spec = s;
  w.w1 = RowMatrix::Zero(s.hidden_dim, s.input_dim);
  w.b1 = Eigen::VectorXd::Zero(s.hidden_dim);
  w.w2 = RowMatrix::Zero(s.output_dim, s.hidden_dim);
  w.b2 = Eigen::VectorXd::Zero(s.output_dim);
  if (s.cascade) w.wc = RowMatrix::Zero(s.output_dim, s.input_dim);
  return w;
}

Eigen::VectorXd MlpWeights::flatten() const {
  Eigen::VectorXd theta(static_cast<Eigen::Index>(parameter_count(spec)));
  Eigen::Index k = 0;
  auto put = [&](const double* data, Eigen::Index n) {
    for (Eigen::Index i = 0; i < n; ++i) theta(k++) = data[i];
  };
  put(w1.data(), w1.size());
  put(b1.data(), b1.size());
  put(w2.data(), w2.size());
  put(b2.data(), b2.size());
  if (spec.cascade) put(wc.data(), wc.size());
  return theta;
}

MlpWeights MlpWeights::unflatten(const MlpSpec& spec, const Eigen::VectorXd& theta) {
  if (static_cast<std::size_t>(theta.size()) != parameter_count(spec)) {
    throw DimensionError("parameter vector has " + std::to_string(theta.size()) +
                         " entries, network needs " + std::to_string(parameter_count(spec)));
  }
  MlpWeights w = zeros(spec);
  Eigen::Index k = 0;
  auto take = [&](double* data, Eigen::Index n) {
    for (Eigen::Index i = 0; i < n; ++i) data[i] = theta(k++);
  };
  take(w.w1.data(), w.w1.size());
  take(w.b1.data(), w.b1.size());
  take(w.w2.data(), w.w2.size());
  take(w.b2.data(), w.b2.size());
  if (spec.cascade) take(w.wc.data(), w.wc.size());
  return w;
}

namespace detail {
std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}
}  // namespace detail

MlpWeights init_weights(const MlpSpec& spec, std::uint64_t seed) {
  validate(spec);
  Eigen::VectorXd theta(static_cast<Eigen::Index>(MlpWeights::parameter_count(spec)));
  std::uint64_t state = seed;
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    const double u = static_cast<double>(detail::splitmix64(state) >> 11) * 0x1.0p-53;
    theta(i) = u - 0.5;
  }
  return MlpWeights::unflatten(spec, theta);
}

Eigen::VectorXd forward(const MlpWeights& w, std::span<const double> x) {
  if (x.size() != static_cast<std::size_t>(w.spec.input_dim)) {
    throw DimensionError("input has " + std::to_string(x.size()) + " features, network expects " +
                         std::to_string(w.spec.input_dim));
  }
  RowMatrix row(1, w.spec.input_dim);
  for (int i = 0; i < w.spec.input_dim; ++i) row(0, i) = x[static_cast<std::size_t>(i)];
  return run_batch(w, row).output.row(0).transpose();
}

Eigen::MatrixXd jacobian(const MlpWeights& w, const RowMatrix& x) {
  if (x.cols() != w.spec.input_dim) throw DimensionError("jacobian: input width mismatch");
  if (x.rows() == 0) throw DimensionError("jacobian: empty batch");
  return jacobian_from(w, x, run_batch(w, x));
}

double mse(const MlpWeights& w, const RowMatrix& x, const RowMatrix& targets) {
  return mean_square(errors(run_batch(w, x), targets));
}

TrainResult train(const MlpSpec& spec, const TrainConfigNN& cfg, const RowMatrix& x,
                  const RowMatrix& targets) {
  validate(spec);
  validate(cfg);
  if (x.rows() < 2) throw DimensionError("training needs at least 2 samples");
  if (x.cols() != spec.input_dim) throw DimensionError("training inputs have wrong width");
  if (targets.rows() != x.rows() || targets.cols() != spec.output_dim) {
    throw DimensionError("targets do not match inputs/outputs");
  }
  Eigen::VectorXd theta = init_weights(spec, cfg.seed).flatten();
  switch (cfg.algorithm) {
    case TrainAlgorithm::kLevenbergMarquardt:
      return train_lm(spec, cfg, x, targets, std::move(theta));
    case TrainAlgorithm::kScaledConjugateGradient:
      return train_scg(spec, cfg, x, targets, std::move(theta));
    case TrainAlgorithm::kGradientDescentAdaptive:
      return train_gdx(spec, cfg, x, targets, std::move(theta));
  }
  throw ValidationError("unknown training algorithm");
}

}  // namespace mtlfault
