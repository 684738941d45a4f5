#pragma once

// Native regression families: linear (ordinary, pairwise interactions,
// bisquare-robust, stepwise), CART regression trees and Gaussian-process
// regression. All fitters expect z-scored inputs and work on normalized
// targets; models are immutable once fitted.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace mtlfault {

// ---------------------------------------------------------------- linear

enum class LinearVariant { kOls, kInteractions, kRobust, kStepwise };

std::string to_string(LinearVariant v);
LinearVariant linear_variant_from_string(const std::string& s);

/// Constant (a < 0), linear in feature a (b < 0) or product of features a, b.
struct LinearTerm {
  int a = -1;
  int b = -1;

  bool is_constant() const { return a < 0; }
  double evaluate(std::span<const double> x) const;
  std::string name() const;

  friend bool operator==(const LinearTerm&, const LinearTerm&) = default;
};

struct StepwiseStep {
  bool added = true;  // false: removed
  LinearTerm term;
  double p_value = 0.0;
};

struct LinearModel {
  LinearVariant variant = LinearVariant::kOls;
  int input_dim = 0;
  std::vector<LinearTerm> terms;
  std::vector<double> coefficients;
  std::vector<LinearTerm> dropped;  // candidates removed as linearly dependent
  std::vector<StepwiseStep> steps;  // stepwise history
  int iterations = 0;               // IRLS iterations
  bool converged = true;            // false: IRLS hit its iteration cap
};

struct LinearFitOptions {
  /// Drop candidate terms that are linearly dependent on earlier ones instead
  /// of failing with RankError.
  bool drop_dependent = false;
  double rank_tol = 1e-9;
  double robust_tune = 4.685;
  double robust_tol = 1e-8;
  int robust_max_iter = 50;
  double p_enter = 0.05;
  double p_remove = 0.10;
};

/// Candidate terms of a variant: constant + linear (+ pairwise products).
std::vector<LinearTerm> candidate_terms(LinearVariant v, int input_dim);

LinearModel fit_linear(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, LinearVariant variant,
                       const LinearFitOptions& opt = {});

double predict(const LinearModel& m, std::span<const double> x);

// ------------------------------------------------------------------ tree

struct TreeNode {
  int feature = -1;  // -1: leaf
  double threshold = 0.0;
  int left = -1;   // x[feature] <= threshold
  int right = -1;
  double value = 0.0;  // mean target of the samples reaching this node
  int count = 0;
};

struct TreeModel {
  int input_dim = 0;
  int min_leaf = 1;
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  std::size_t leaf_count() const;
};

TreeModel fit_tree(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, int min_leaf);

double predict(const TreeModel& m, std::span<const double> x);

// ------------------------------------------------------------------- GPR

enum class GprKernel { kSquaredExponential, kMatern52, kExponential, kRationalQuadratic };

std::string to_string(GprKernel k);
GprKernel gpr_kernel_from_string(const std::string& s);

struct GprHyper {
  double sigma_f = 1.0;
  double length = 1.0;
  double sigma_n = 0.1;
  double alpha = 1.0;  // rational quadratic only
};

struct GprModel {
  GprKernel kernel = GprKernel::kSquaredExponential;
  GprHyper hyper;
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> x_train;
  Eigen::VectorXd weights;  // (K + sn^2 I)^-1 (y - offset)
  double y_offset = 0.0;    // constant basis
  double jitter = 0.0;
  double log_marginal_likelihood = 0.0;
};

struct GprFitOptions {
  bool optimize = true;
  GprHyper initial;  // used as-is when optimize is false
  /// Lower bound on sigma_n relative to the target standard deviation.
  double noise_floor_rel = 1e-3;
  int max_evaluations = 1500;
};

double kernel_value(GprKernel k, const GprHyper& h, double distance);

Eigen::MatrixXd kernel_matrix(GprKernel k, const GprHyper& h, const Eigen::MatrixXd& x);

/// Log marginal likelihood of centered targets. When `grad` is non-null it
/// receives the derivatives with respect to (log sigma_f, log length,
/// log sigma_n[, log alpha]). Throws ConditioningError if K + sn^2 I cannot be
/// factorized with jitter up to 1e-6.
double log_marginal_likelihood(GprKernel k, const GprHyper& h, const Eigen::MatrixXd& x,
                               const Eigen::VectorXd& y_centered, Eigen::VectorXd* grad = nullptr);

GprModel fit_gpr(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, GprKernel kernel,
                 const GprFitOptions& opt = {});

double predict(const GprModel& m, std::span<const double> x);

namespace detail {

/// Downhill simplex minimiser. Returns the best point found.
Eigen::VectorXd nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                            Eigen::VectorXd start, double initial_step, int max_evaluations,
                            double* best_value = nullptr);

/// Upper tail of F(d1, d2).
double f_test_p_value(double f, double d1, double d2);

}  // namespace detail

}  // namespace mtlfault
