#include "mtlfault/regression.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>

#include <boost/math/distributions/fisher_f.hpp>

#include "mtlfault/errors.hpp"
#include "mtlfault/simd/kernels.hpp"

namespace mtlfault {

namespace {

using RowMajorX = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void check_xy(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const char* who) {
  if (x.rows() != y.size()) {
    throw DimensionError(std::string(who) + ": X has " + std::to_string(x.rows()) +
                         " rows but y has " + std::to_string(y.size()));
  }
  if (x.rows() == 0 || x.cols() == 0) throw DimensionError(std::string(who) + ": empty data");
  if (!x.allFinite() || !y.allFinite()) throw ValidationError(std::string(who) + ": non-finite data");
}

void check_dim(std::size_t got, int want) {
  if (got != static_cast<std::size_t>(want)) {
    throw DimensionError("input has " + std::to_string(got) + " features, model expects " +
                         std::to_string(want));
  }
}

// ------------------------------------------------------------------ linear

Eigen::VectorXd term_column(const Eigen::MatrixXd& x, const LinearTerm& t) {
  if (t.is_constant()) return Eigen::VectorXd::Ones(x.rows());
  if (t.b < 0) return x.col(t.a);
  return x.col(t.a).cwiseProduct(x.col(t.b));
}

Eigen::MatrixXd design(const Eigen::MatrixXd& x, const std::vector<LinearTerm>& terms) {
  Eigen::MatrixXd d(x.rows(), static_cast<Eigen::Index>(terms.size()));
  for (std::size_t k = 0; k < terms.size(); ++k) d.col(static_cast<Eigen::Index>(k)) = term_column(x, terms[k]);
  return d;
}

// True when `col` lies (numerically) in the span of `basis`.
bool dependent_on(const Eigen::MatrixXd& basis, const Eigen::VectorXd& col, double tol) {
  const double norm = col.norm();
  if (norm == 0.0) return true;
  if (basis.cols() == 0) return false;
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(basis);
  const Eigen::VectorXd coef = qr.solve(col);
  return (col - basis * coef).norm() <= tol * norm;
}

Eigen::VectorXd least_squares(const Eigen::MatrixXd& d, const Eigen::VectorXd& y) {
  return d.householderQr().solve(y);
}

double sse(const Eigen::MatrixXd& d, const Eigen::VectorXd& y) {
  if (d.cols() == 0) return y.squaredNorm();
  return (y - d * least_squares(d, y)).squaredNorm();
}

// Keeps candidate terms in order while they add rank and do not outnumber
// the rows.
std::vector<LinearTerm> independent_terms(const Eigen::MatrixXd& x, const std::vector<LinearTerm>& cand,
                                          const LinearFitOptions& opt, std::vector<LinearTerm>& dropped) {
  std::vector<LinearTerm> kept;
  Eigen::MatrixXd basis(x.rows(), 0);
  std::vector<std::string> dependent;
  for (const auto& t : cand) {
    const Eigen::VectorXd col = term_column(x, t);
    const bool no_dof = static_cast<Eigen::Index>(kept.size()) + 1 > x.rows();
    if (no_dof || dependent_on(basis, col, opt.rank_tol)) {
      if (!opt.drop_dependent) {
        if (no_dof) {
          throw RankError("design has " + std::to_string(cand.size()) + " terms but only " +
                          std::to_string(x.rows()) + " rows");
        }
        dependent.push_back(t.name());
        continue;
      }
      dropped.push_back(t);
      continue;
    }
    kept.push_back(t);
    basis.conservativeResize(Eigen::NoChange, basis.cols() + 1);
    basis.col(basis.cols() - 1) = col;
  }
  if (!dependent.empty()) {
    std::string msg = "rank-deficient design; dependent columns:";
    for (const auto& n : dependent) msg += " " + n;
    throw RankError(msg);
  }
  return kept;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

void fit_robust(const Eigen::MatrixXd& d, const Eigen::VectorXd& y, const LinearFitOptions& opt,
                LinearModel& m) {
  const Eigen::Index n = d.rows();
  const Eigen::Index p = d.cols();
  Eigen::VectorXd beta = least_squares(d, y);

  // Leverage adjustment from the unweighted design.
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(d);
  const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, p);
  Eigen::VectorXd adj(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double h = std::min(q.row(i).squaredNorm(), 0.9999);
    adj(i) = 1.0 / std::sqrt(1.0 - h);
  }
  const double y_scale = std::max(1.0, y.cwiseAbs().maxCoeff());

  m.converged = false;
  for (int it = 1; it <= opt.robust_max_iter; ++it) {
    m.iterations = it;
    const Eigen::VectorXd r = (y - d * beta).cwiseProduct(adj);
    std::vector<double> abs_r(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) abs_r[static_cast<std::size_t>(i)] = std::abs(r(i));
    std::sort(abs_r.begin(), abs_r.end());
    // Skip the p-1 smallest residuals, which the fit can zero exactly.
    const std::vector<double> tail(abs_r.begin() + std::min<Eigen::Index>(p - 1, n - 1), abs_r.end());
    const double s = std::max(median(tail) / 0.6745, 1e-12 * y_scale);
    Eigen::VectorXd sw(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double u = r(i) / (opt.robust_tune * s);
      sw(i) = std::abs(u) < 1.0 ? (1.0 - u * u) : 0.0;  // sqrt of the bisquare weight
    }
    const Eigen::MatrixXd dw = sw.asDiagonal() * d;
    const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> wqr(dw);
    if (wqr.rank() < p) break;  // too many rows rejected; keep last iterate
    const Eigen::VectorXd next = wqr.solve(sw.cwiseProduct(y));
    const double change = (next - beta).cwiseAbs().maxCoeff();
    const double size = std::max(next.cwiseAbs().maxCoeff(), beta.cwiseAbs().maxCoeff());
    beta = next;
    if (change <= opt.robust_tol * std::max(size, 1e-300)) {
      m.converged = true;
      break;
    }
  }
  m.coefficients.assign(beta.data(), beta.data() + beta.size());
}

void fit_stepwise(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const LinearFitOptions& opt,
                  LinearModel& m) {
  const Eigen::Index n = x.rows();
  const double sst = (y.array() - y.mean()).square().sum();
  const double tiny = 1e-20 * std::max(sst, std::numeric_limits<double>::min());
  std::vector<LinearTerm> in{LinearTerm{}};
  auto design_of = [&](const std::vector<LinearTerm>& terms) { return design(x, terms); };
  auto contains = [&](int f) {
    return std::any_of(in.begin(), in.end(), [f](const LinearTerm& t) { return t.a == f && t.b < 0; });
  };

  for (int guard = 0; guard < 4 * static_cast<int>(x.cols()) + 8; ++guard) {
    const Eigen::MatrixXd cur = design_of(in);
    const double sse_cur = sse(cur, y);
    const Eigen::Index df_after_add = n - static_cast<Eigen::Index>(in.size()) - 1;

    // Forward: smallest p-value among admissible additions.
    double best_p = 2.0;
    int best_f = -1;
    if (sse_cur > tiny && df_after_add > 0) {
      for (int f = 0; f < x.cols(); ++f) {
        if (contains(f)) continue;
        const Eigen::VectorXd col = x.col(f);
        if (dependent_on(cur, col, opt.rank_tol)) continue;
        Eigen::MatrixXd with(n, cur.cols() + 1);
        with << cur, col;
        const double sse_new = sse(with, y);
        double pv = 0.0;
        if (sse_new > tiny) {
          const double fstat = (sse_cur - sse_new) / (sse_new / static_cast<double>(df_after_add));
          pv = detail::f_test_p_value(fstat, 1.0, static_cast<double>(df_after_add));
        }
        if (pv < best_p) {
          best_p = pv;
          best_f = f;
        }
      }
    }
    if (best_f >= 0 && best_p < opt.p_enter) {
      in.push_back(LinearTerm{best_f, -1});
      m.steps.push_back({true, in.back(), best_p});
      continue;
    }

    // Backward: largest p-value among current non-constant terms.
    double worst_p = -1.0;
    std::size_t worst_k = 0;
    const Eigen::Index df_cur = n - static_cast<Eigen::Index>(in.size());
    for (std::size_t k = 1; k < in.size(); ++k) {
      std::vector<LinearTerm> without = in;
      without.erase(without.begin() + static_cast<std::ptrdiff_t>(k));
      const double sse_without = sse(design_of(without), y);
      double pv;
      if (sse_cur <= tiny) {
        pv = sse_without <= tiny ? 1.0 : 0.0;
      } else {
        const double fstat = (sse_without - sse_cur) / (sse_cur / static_cast<double>(df_cur));
        pv = detail::f_test_p_value(fstat, 1.0, static_cast<double>(df_cur));
      }
      if (pv > worst_p) {
        worst_p = pv;
        worst_k = k;
      }
    }
    if (worst_p > opt.p_remove) {
      m.steps.push_back({false, in[worst_k], worst_p});
      in.erase(in.begin() + static_cast<std::ptrdiff_t>(worst_k));
      continue;
    }
    break;
  }
  m.terms = in;
  const Eigen::VectorXd beta = least_squares(design_of(in), y);
  m.coefficients.assign(beta.data(), beta.data() + beta.size());
}

// ------------------------------------------------------------------- tree

struct SplitChoice {
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;
};

double node_sse(const Eigen::VectorXd& y, const std::vector<int>& idx) {
  double mean = 0.0;
  for (int i : idx) mean += y(i);
  mean /= static_cast<double>(idx.size());
  double s = 0.0;
  for (int i : idx) s += (y(i) - mean) * (y(i) - mean);
  return s;
}

SplitChoice best_split(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const std::vector<int>& idx,
                       int min_leaf, double parent_sse) {
  SplitChoice best;
  const auto n = static_cast<int>(idx.size());
  std::vector<int> order(idx);
  std::vector<double> left_sse(static_cast<std::size_t>(n) + 1, 0.0);
  std::vector<double> right_sse(static_cast<std::size_t>(n) + 1, 0.0);
  for (int f = 0; f < x.cols(); ++f) {
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return x(a, f) < x(b, f); });
    // Welford prefix/suffix sums of squared deviations.
    double mean = 0.0, m2 = 0.0;
    for (int k = 0; k < n; ++k) {
      const double v = y(order[static_cast<std::size_t>(k)]);
      const double d = v - mean;
      mean += d / (k + 1);
      m2 += d * (v - mean);
      left_sse[static_cast<std::size_t>(k) + 1] = m2;
    }
    mean = 0.0;
    m2 = 0.0;
    for (int k = n - 1; k >= 0; --k) {
      const double v = y(order[static_cast<std::size_t>(k)]);
      const double d = v - mean;
      const int count = n - k;
      mean += d / count;
      m2 += d * (v - mean);
      right_sse[static_cast<std::size_t>(k)] = m2;
    }
    for (int k = min_leaf; k <= n - min_leaf; ++k) {
      const double lo = x(order[static_cast<std::size_t>(k) - 1], f);
      const double hi = x(order[static_cast<std::size_t>(k)], f);
      if (!(lo < hi)) continue;
      const double gain = parent_sse - (left_sse[static_cast<std::size_t>(k)] + right_sse[static_cast<std::size_t>(k)]);
      if (gain > best.gain) {
        double thr = 0.5 * (lo + hi);
        if (!(thr < hi)) thr = lo;
        best = {f, thr, gain};
      }
    }
  }
  return best;
}

int grow(TreeModel& t, const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const std::vector<int>& idx) {
  const int id = static_cast<int>(t.nodes.size());
  t.nodes.emplace_back();
  double mean = 0.0;
  for (int i : idx) mean += y(i);
  mean /= static_cast<double>(idx.size());
  t.nodes[static_cast<std::size_t>(id)].value = mean;
  t.nodes[static_cast<std::size_t>(id)].count = static_cast<int>(idx.size());

  const bool all_same = std::all_of(idx.begin(), idx.end(), [&](int i) { return y(i) == y(idx.front()); });
  if (all_same || static_cast<int>(idx.size()) < 2 * t.min_leaf) return id;
  const double parent = node_sse(y, idx);
  const SplitChoice s = best_split(x, y, idx, t.min_leaf, parent);
  if (s.feature < 0 || !(s.gain > 1e-12 * parent)) return id;

  std::vector<int> left, right;
  for (int i : idx) (x(i, s.feature) <= s.threshold ? left : right).push_back(i);
  const int l = grow(t, x, y, left);
  const int r = grow(t, x, y, right);
  auto& node = t.nodes[static_cast<std::size_t>(id)];
  node.feature = s.feature;
  node.threshold = s.threshold;
  node.left = l;
  node.right = r;
  return id;
}

// -------------------------------------------------------------------- GPR

RowMajorX to_row_major(const Eigen::MatrixXd& x) { return RowMajorX(x); }

Eigen::MatrixXd distances(const RowMajorX& x) {
  const Eigen::Index n = x.rows();
  const auto dim = static_cast<std::size_t>(x.cols());
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < i; ++j) {
      const double v = std::sqrt(simd::squared_distance({x.row(i).data(), dim}, {x.row(j).data(), dim}));
      d(i, j) = v;
      d(j, i) = v;
    }
  }
  return d;
}

// dk/dlog(length) and, for rational quadratic, dk/dlog(alpha).
double kernel_dlog_length(GprKernel k, const GprHyper& h, double d) {
  const double sf2 = h.sigma_f * h.sigma_f;
  const double r = d / h.length;
  switch (k) {
    case GprKernel::kSquaredExponential:
      return sf2 * std::exp(-0.5 * r * r) * r * r;
    case GprKernel::kMatern52: {
      const double s5 = std::sqrt(5.0) * r;
      return sf2 * (5.0 / 3.0) * r * r * (1.0 + s5) * std::exp(-s5);
    }
    case GprKernel::kExponential:
      return sf2 * std::exp(-r) * r;
    case GprKernel::kRationalQuadratic: {
      const double base = 1.0 + r * r / (2.0 * h.alpha);
      return sf2 * std::pow(base, -h.alpha - 1.0) * r * r;
    }
  }
  return 0.0;
}

double kernel_dlog_alpha(const GprHyper& h, double d) {
  const double r = d / h.length;
  const double base = 1.0 + r * r / (2.0 * h.alpha);
  const double k = h.sigma_f * h.sigma_f * std::pow(base, -h.alpha);
  return k * h.alpha * ((base - 1.0) / base - std::log(base));
}

struct Factor {
  Eigen::LLT<Eigen::MatrixXd> llt;
  double jitter = 0.0;
};

Factor factorize(const Eigen::MatrixXd& k) {
  const Eigen::Index n = k.rows();
  double jitter = 0.0;
  for (;;) {
    Factor f{Eigen::LLT<Eigen::MatrixXd>(k + jitter * Eigen::MatrixXd::Identity(n, n)), jitter};
    if (f.llt.info() == Eigen::Success && f.llt.matrixLLT().diagonal().allFinite() &&
        (f.llt.matrixLLT().diagonal().array() > 0.0).all()) {
      return f;
    }
    jitter = jitter == 0.0 ? 1e-10 : jitter * 10.0;
    if (jitter > 1e-6 * (1.0 + 1e-9)) {
      throw ConditioningError("kernel matrix not positive definite even with jitter 1e-6");
    }
  }
}

Eigen::MatrixXd covariance(GprKernel k, const GprHyper& h, const Eigen::MatrixXd& dist) {
  const Eigen::Index n = dist.rows();
  Eigen::MatrixXd c(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      const double v = kernel_value(k, h, dist(i, j));
      c(i, j) = v;
      c(j, i) = v;
    }
  }
  c.diagonal().array() += h.sigma_n * h.sigma_n;
  return c;
}

double lml_from_distances(GprKernel k, const GprHyper& h, const Eigen::MatrixXd& dist,
                          const Eigen::VectorXd& y, Eigen::VectorXd* grad, Factor* keep = nullptr,
                          Eigen::VectorXd* weights = nullptr) {
  const Eigen::Index n = dist.rows();
  Factor f = factorize(covariance(k, h, dist));
  const Eigen::VectorXd alpha = f.llt.solve(y);
  const double log_det = 2.0 * f.llt.matrixLLT().diagonal().array().log().sum();
  const double lml = -0.5 * y.dot(alpha) - 0.5 * log_det -
                     0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
  if (grad != nullptr) {
    const bool rq = k == GprKernel::kRationalQuadratic;
    grad->resize(rq ? 4 : 3);
    const Eigen::MatrixXd w = alpha * alpha.transpose() - f.llt.solve(Eigen::MatrixXd::Identity(n, n));
    double g_sf = 0.0, g_len = 0.0, g_alpha = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        const double d = dist(i, j);
        g_sf += w(i, j) * 2.0 * kernel_value(k, h, d);
        g_len += w(i, j) * kernel_dlog_length(k, h, d);
        if (rq) g_alpha += w(i, j) * kernel_dlog_alpha(h, d);
      }
    }
    (*grad)(0) = 0.5 * g_sf;
    (*grad)(1) = 0.5 * g_len;
    (*grad)(2) = 0.5 * w.trace() * 2.0 * h.sigma_n * h.sigma_n;
    if (rq) (*grad)(3) = 0.5 * g_alpha;
  }
  if (weights != nullptr) *weights = alpha;
  if (keep != nullptr) *keep = std::move(f);
  return lml;
}

}  // namespace

// ------------------------------------------------------------ public linear

double LinearTerm::evaluate(std::span<const double> x) const {
  if (is_constant()) return 1.0;
  const double va = x[static_cast<std::size_t>(a)];
  return b < 0 ? va : va * x[static_cast<std::size_t>(b)];
}

std::string LinearTerm::name() const {
  auto f = [](int i) {
    std::ostringstream os;
    os << 'f' << (i + 1 < 10 ? "0" : "") << i + 1;
    return os.str();
  };
  if (is_constant()) return "(const)";
  if (b < 0) return f(a);
  return f(a) + ":" + f(b);
}

std::string to_string(LinearVariant v) {
  switch (v) {
    case LinearVariant::kOls:
      return "ols";
    case LinearVariant::kInteractions:
      return "interactions";
    case LinearVariant::kRobust:
      return "robust";
    case LinearVariant::kStepwise:
      return "stepwise";
  }
  return "?";
}

LinearVariant linear_variant_from_string(const std::string& s) {
  if (s == "ols") return LinearVariant::kOls;
  if (s == "interactions") return LinearVariant::kInteractions;
  if (s == "robust") return LinearVariant::kRobust;
  if (s == "stepwise") return LinearVariant::kStepwise;
  throw ValidationError("unknown linear variant '" + s + "'");
}

std::vector<LinearTerm> candidate_terms(LinearVariant v, int input_dim) {
  std::vector<LinearTerm> t{LinearTerm{}};
  for (int i = 0; i < input_dim; ++i) t.push_back({i, -1});
  if (v == LinearVariant::kInteractions) {
    for (int i = 0; i < input_dim; ++i) {
      for (int j = i + 1; j < input_dim; ++j) t.push_back({i, j});
    }
  }
  return t;
}

LinearModel fit_linear(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, LinearVariant variant,
                       const LinearFitOptions& opt) {
  check_xy(x, y, "fit_linear");
  LinearModel m;
  m.variant = variant;
  m.input_dim = static_cast<int>(x.cols());
  if (variant == LinearVariant::kStepwise) {
    fit_stepwise(x, y, opt, m);
    return m;
  }
  m.terms = independent_terms(x, candidate_terms(variant, m.input_dim), opt, m.dropped);
  const Eigen::MatrixXd d = design(x, m.terms);
  if (variant == LinearVariant::kRobust) {
    fit_robust(d, y, opt, m);
  } else {
    const Eigen::VectorXd beta = least_squares(d, y);
    m.coefficients.assign(beta.data(), beta.data() + beta.size());
  }
  return m;
}

double predict(const LinearModel& m, std::span<const double> x) {
  check_dim(x.size(), m.input_dim);
  double y = 0.0;
  for (std::size_t k = 0; k < m.terms.size(); ++k) y += m.coefficients[k] * m.terms[k].evaluate(x);
  return y;
}

// -------------------------------------------------------------- public tree

std::size_t TreeModel::leaf_count() const {
  return static_cast<std::size_t>(
      std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.feature < 0; }));
}

TreeModel fit_tree(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, int min_leaf) {
  check_xy(x, y, "fit_tree");
  if (min_leaf < 1) throw ValidationError("min_leaf must be >= 1");
  TreeModel t;
  t.input_dim = static_cast<int>(x.cols());
  t.min_leaf = min_leaf;
  std::vector<int> idx(static_cast<std::size_t>(x.rows()));
  std::iota(idx.begin(), idx.end(), 0);
  grow(t, x, y, idx);
  return t;
}

double predict(const TreeModel& m, std::span<const double> x) {
  check_dim(x.size(), m.input_dim);
  int id = 0;
  for (;;) {
    const auto& n = m.nodes[static_cast<std::size_t>(id)];
    if (n.feature < 0) return n.value;
    id = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
  }
}

// --------------------------------------------------------------- public GPR

std::string to_string(GprKernel k) {
  switch (k) {
    case GprKernel::kSquaredExponential:
      return "squared_exponential";
    case GprKernel::kMatern52:
      return "matern52";
    case GprKernel::kExponential:
      return "exponential";
    case GprKernel::kRationalQuadratic:
      return "rational_quadratic";
  }
  return "?";
}

GprKernel gpr_kernel_from_string(const std::string& s) {
  if (s == "squared_exponential") return GprKernel::kSquaredExponential;
  if (s == "matern52") return GprKernel::kMatern52;
  if (s == "exponential") return GprKernel::kExponential;
  if (s == "rational_quadratic") return GprKernel::kRationalQuadratic;
  throw ValidationError("unknown GPR kernel '" + s + "'");
}

double kernel_value(GprKernel k, const GprHyper& h, double d) {
  const double sf2 = h.sigma_f * h.sigma_f;
  const double r = d / h.length;
  switch (k) {
    case GprKernel::kSquaredExponential:
      return sf2 * std::exp(-0.5 * r * r);
    case GprKernel::kMatern52: {
      const double s5 = std::sqrt(5.0) * r;
      return sf2 * (1.0 + s5 + 5.0 * r * r / 3.0) * std::exp(-s5);
    }
    case GprKernel::kExponential:
      return sf2 * std::exp(-r);
    case GprKernel::kRationalQuadratic:
      return sf2 * std::pow(1.0 + r * r / (2.0 * h.alpha), -h.alpha);
  }
  return 0.0;
}

Eigen::MatrixXd kernel_matrix(GprKernel k, const GprHyper& h, const Eigen::MatrixXd& x) {
  const Eigen::MatrixXd dist = distances(to_row_major(x));
  GprHyper noiseless = h;
  noiseless.sigma_n = 0.0;
  return covariance(k, noiseless, dist);
}

double log_marginal_likelihood(GprKernel k, const GprHyper& h, const Eigen::MatrixXd& x,
                               const Eigen::VectorXd& y_centered, Eigen::VectorXd* grad) {
  return lml_from_distances(k, h, distances(to_row_major(x)), y_centered, grad);
}

GprModel fit_gpr(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, GprKernel kernel,
                 const GprFitOptions& opt) {
  check_xy(x, y, "fit_gpr");
  if (x.rows() < 2) throw DimensionError("fit_gpr needs at least 2 samples");
  GprModel m;
  m.kernel = kernel;
  m.x_train = to_row_major(x);
  m.y_offset = y.mean();
  const Eigen::VectorXd yc = y.array() - m.y_offset;
  const Eigen::MatrixXd dist = distances(m.x_train);

  GprHyper hyper = opt.initial;
  if (opt.optimize) {
    const double sd = std::sqrt(yc.squaredNorm() / static_cast<double>(yc.size()));
    const double sd_eff = sd > 0.0 ? sd : 1.0;
    const double noise_floor = opt.noise_floor_rel * sd_eff;
    std::vector<double> pair;
    for (Eigen::Index i = 0; i < dist.rows(); ++i) {
      for (Eigen::Index j = 0; j < i; ++j) pair.push_back(dist(i, j));
    }
    double scale = pair.empty() ? 1.0 : median(pair);
    if (!(scale > 0.0)) scale = 1.0;
    const bool rq = kernel == GprKernel::kRationalQuadratic;

    auto unpack = [&](const Eigen::VectorXd& t) {
      GprHyper h;
      h.sigma_f = std::exp(t(0));
      h.length = std::exp(t(1));
      h.sigma_n = std::max(std::exp(t(2)), noise_floor);
      h.alpha = rq ? std::exp(t(3)) : 1.0;
      return h;
    };
    auto objective = [&](const Eigen::VectorXd& t) {
      if ((t.array().abs() > 30.0).any()) return 1e300;
      try {
        const double v = -lml_from_distances(kernel, unpack(t), dist, yc, nullptr);
        return std::isfinite(v) ? v : 1e300;
      } catch (const ConditioningError&) {
        return 1e300;
      }
    };

    double best = std::numeric_limits<double>::infinity();
    Eigen::VectorXd best_t;
    for (double mult : {0.1, 0.5, 1.0, 2.0, 5.0}) {
      Eigen::VectorXd t0(rq ? 4 : 3);
      t0(0) = std::log(sd_eff / std::sqrt(2.0));
      t0(1) = std::log(mult * scale);
      t0(2) = std::log(std::max(sd_eff / std::sqrt(2.0), noise_floor));
      if (rq) t0(3) = 0.0;
      double value = 0.0;
      const Eigen::VectorXd t = detail::nelder_mead(objective, t0, 0.5, opt.max_evaluations, &value);
      if (value < best) {
        best = value;
        best_t = t;
      }
    }
    if (!std::isfinite(best) || best >= 1e300) {
      throw ConditioningError("GPR hyperparameter search found no factorizable kernel matrix");
    }
    hyper = unpack(best_t);
  }
  if (!(hyper.sigma_f > 0.0 && hyper.length > 0.0 && hyper.sigma_n > 0.0 && hyper.alpha > 0.0)) {
    throw ValidationError("GPR hyperparameters must be positive");
  }
  m.hyper = hyper;
  Factor f;
  m.log_marginal_likelihood = lml_from_distances(kernel, hyper, dist, yc, nullptr, &f, &m.weights);
  m.jitter = f.jitter;
  return m;
}

double predict(const GprModel& m, std::span<const double> x) {
  check_dim(x.size(), static_cast<int>(m.x_train.cols()));
  double y = m.y_offset;
  const auto dim = static_cast<std::size_t>(m.x_train.cols());
  for (Eigen::Index i = 0; i < m.x_train.rows(); ++i) {
    const double d = std::sqrt(simd::squared_distance({m.x_train.row(i).data(), dim}, x));
    y += kernel_value(m.kernel, m.hyper, d) * m.weights(i);
  }
  return y;
}

// ------------------------------------------------------------------ detail

namespace detail {

Eigen::VectorXd nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                            Eigen::VectorXd start, double initial_step, int max_evaluations,
                            double* best_value) {
  const Eigen::Index n = start.size();
  std::vector<Eigen::VectorXd> pts(static_cast<std::size_t>(n) + 1, start);
  std::vector<double> val(static_cast<std::size_t>(n) + 1);
  for (Eigen::Index i = 0; i < n; ++i) pts[static_cast<std::size_t>(i) + 1](i) += initial_step;
  int evals = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    val[i] = f(pts[i]);
    ++evals;
  }
  std::vector<std::size_t> order(pts.size());
  while (evals < max_evaluations) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return val[a] < val[b]; });
    const std::size_t best = order.front(), worst = order.back(), second = order[order.size() - 2];
    double spread_x = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      spread_x = std::max(spread_x, (pts[i] - pts[best]).cwiseAbs().maxCoeff());
    }
    if (std::abs(val[worst] - val[best]) <= 1e-10 * (1.0 + std::abs(val[best])) && spread_x <= 1e-8) break;

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (i != worst) centroid += pts[i];
    }
    centroid /= static_cast<double>(n);
    const Eigen::VectorXd reflected = centroid + (centroid - pts[worst]);
    const double fr = f(reflected);
    ++evals;
    if (fr < val[best]) {
      const Eigen::VectorXd expanded = centroid + 2.0 * (centroid - pts[worst]);
      const double fe = f(expanded);
      ++evals;
      if (fe < fr) {
        pts[worst] = expanded;
        val[worst] = fe;
      } else {
        pts[worst] = reflected;
        val[worst] = fr;
      }
      continue;
    }
    if (fr < val[second]) {
      pts[worst] = reflected;
      val[worst] = fr;
      continue;
    }
    const bool outside = fr < val[worst];
    const Eigen::VectorXd contracted =
        outside ? Eigen::VectorXd(centroid + 0.5 * (reflected - centroid))
                : Eigen::VectorXd(centroid + 0.5 * (pts[worst] - centroid));
    const double fc = f(contracted);
    ++evals;
    if (fc < (outside ? fr : val[worst])) {
      pts[worst] = contracted;
      val[worst] = fc;
      continue;
    }
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (i == best) continue;
      pts[i] = pts[best] + 0.5 * (pts[i] - pts[best]);
      val[i] = f(pts[i]);
      ++evals;
    }
  }
  const auto it = std::min_element(val.begin(), val.end());
  if (best_value != nullptr) *best_value = *it;
  return pts[static_cast<std::size_t>(it - val.begin())];
}

double f_test_p_value(double f, double d1, double d2) {
  if (!(f > 0.0)) return 1.0;
  if (!std::isfinite(f)) return 0.0;
  const boost::math::fisher_f_distribution<double> dist(d1, d2);
  return boost::math::cdf(boost::math::complement(dist, f));
}

}  // namespace detail

}  // namespace mtlfault
