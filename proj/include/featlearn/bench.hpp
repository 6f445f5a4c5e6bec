#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "featlearn/losses.hpp"
#include "featlearn/polybasis.hpp"
#include "featlearn/regression.hpp"
#include "featlearn/sampling.hpp"
#include "featlearn/surrogate.hpp"

namespace featlearn {

/// Q_k = 1/2 (1_{i-j=k-1} + 1_{j-i=k-1}), so Q_1 = I.
Eigen::MatrixXd ua_matrix(int k, int d);

/// u_a(x, y) = sum_{k=1}^a (x^T Q_k x)^2 sin(pi k y / (2a)), y scalar.
struct UaOracle {
  int a = 1;
  int d = 8;
  std::vector<Eigen::MatrixXd> Q;

  UaOracle(int a, int d = 8);
  double value(const Eigen::VectorXd& x, double y) const;
  Eigen::VectorXd gradient(const Eigen::VectorXd& x, double y) const;
  /// Upper bound on ||grad_x u_a|| over (-1, 1)^d x (-1, 1): 4 a d^{3/2}.
  double sup_grad_bound() const;
  GradientOracle as_oracle() const;
};

enum class Method { Sur, Baseline };
std::string method_name(Method m);
Method parse_method(const std::string& name);

struct ExperimentConfig {
  int a = 3;
  int m = 3;
  int d = 8;
  int n_y = 5;
  std::vector<int> n_x = {10, 30, 50};
  int n_test = 1000;
  int realizations = 20;
  int degree = 2;
  std::vector<Method> methods = {Method::Sur, Method::Baseline};
  std::uint64_t seed = 0;
  int cv_folds = 10;
  std::vector<double> gamma_grid = default_gamma_grid();
  std::vector<double> alpha_grid = default_alpha_grid();
  int baseline_max_iter = 200;
  bool record_timing = false;
  int threads = 1;

  /// Throws std::invalid_argument on the first violated constraint.
  void validate() const;
};

struct MethodRun {
  FeatureMap feature_map;
  KrrModel model;
  LossReport train;  // J_trunc_hat, L_hat, epsilon_hat are NaN for the baseline
  double J_test = 0.0;
  double e_test = 0.0;
  double wall_ms = 0.0;
};

/// Surrogate solve on a tensorized LHS sample of n_x x config.n_y pairs, then
/// KRR with cross-validation and evaluation on a fresh LHS test sample.
MethodRun run_sur(const ExperimentConfig& config, int n_x, std::uint64_t realization_seed);

/// Linear initialization plus Riemannian descent on a plain LHS sample of the
/// same total size, then the same regression and evaluation as run_sur.
MethodRun run_baseline(const ExperimentConfig& config, int n_x, std::uint64_t realization_seed);

struct DescentOptions {
  int max_iter = 200;
  double armijo_c = 1e-4;
  double shrink = 0.5;
  double grad_tol = 1e-8;
  int max_backtracks = 60;
};

struct DescentResult {
  FeatureMap feature_map;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  int iterations = 0;
  double final_grad_norm = 0.0;
};

/// Best linear feature map for the given gradients: the m leading eigenvectors
/// of mean grad grad^T, written in the degree-1 Legendre coefficients.
FeatureMap active_subspace_init(std::shared_ptr<const PolynomialBasis> basis, const Eigen::MatrixXd& R,
                                const Eigen::MatrixXd& grads, int m);

/// Riemannian gradient descent on {G : G^T R G = I} minimizing the empirical
/// J over the pairs (x rows with matching gradient rows).
DescentResult riemannian_descent(const FeatureMap& init, const Eigen::MatrixXd& R, const Eigen::MatrixXd& x,
                                 const Eigen::MatrixXd& grads, const DescentOptions& options = {});

struct ResultRow {
  Method method;
  int a;
  int m;
  int n_train;
  int realization;
  double J_hat_train;
  double J_test;
  double e_hat_train;
  double e_test;
  double eps_m;
  double wall_ms;
};

struct QuantileRow {
  Method method;
  int n_train;
  std::string metric;
  double q50;
  double q90;
  double q100;
};

struct ExperimentResult {
  std::vector<ResultRow> rows;  // ordered by (n_x, realization, method)
  std::vector<QuantileRow> quantiles;
};

/// Nearest-rank quantile: the ceil(p n)-th smallest value, p in (0, 1].
double nearest_rank_quantile(std::vector<double> values, double p);

/// Seed of one realization for one training size.
std::uint64_t realization_seed(std::uint64_t seed, int n_x, int realization);

/// All realizations x training sizes x methods. `on_row` (optional) is called
/// once per finished row, serialized, in completion order.
ExperimentResult run_experiment(const ExperimentConfig& config,
                                const std::function<void(const ResultRow&)>& on_row = {});

std::vector<QuantileRow> aggregate_quantiles(const std::vector<ResultRow>& rows);

struct FeatureRankEntry {
  std::string label;
  double epsilon = 0.0;
  double threshold = 0.0;
  bool expect_zero = false;  // pass iff epsilon <= threshold, otherwise epsilon > threshold
  bool pass = false;
};

struct FeatureRankDemo {
  std::vector<FeatureRankEntry> entries;
  int n_x = 0;
  int n_y = 0;
  bool all_pass = true;
};

/// epsilon_1 on (-1, 1)^3 with x = (x1, x2) and y = x3 for
/// v = (x1 + x2) + (x1 + x2)^2 x3, x1 + x2^2 x3 and x1 + (x1^2 + x2^2) x3.
FeatureRankDemo feature_rank_demo(int n_x = 200, int n_y = 10, std::uint64_t seed = 7);

}  // namespace featlearn
