#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "featlearn/polybasis.hpp"
#include "featlearn/sampling.hpp"

namespace featlearn {

/// u(x, y) together with its x-gradient. `d_y` may be zero for functions of x alone.
struct GradientOracle {
  int d = 0;
  int d_y = 0;
  std::function<double(const Eigen::VectorXd& x, const Eigen::VectorXd& y)> value;
  std::function<Eigen::VectorXd(const Eigen::VectorXd& x, const Eigen::VectorXd& y)> gradient_x;
  /// Upper bound on sup ||grad_x u||_2 when one is known.
  std::optional<double> sup_grad_bound;
};

/// Largest |analytic - central difference| over random points of the box.
double gradient_check(const GradientOracle& oracle, const BoxDomain& x_domain, const BoxDomain& y_domain,
                      int n_points, std::uint64_t seed, double step = 1e-5);

/// Returns c * u, with the gradient and sup bound scaled accordingly.
GradientOracle scale_oracle(const GradientOracle& oracle, double factor);

/// x-gradients at every pair of a sample, one row per pair.
Eigen::MatrixXd pair_gradients(const GradientOracle& oracle, const PairSample& pairs);
Eigen::VectorXd pair_values(const GradientOracle& oracle, const PairSample& pairs);

/// Weight applied to the misalignment term of the surrogate.
enum class SurrogateWeight {
  LambdaMax,  ///< lambda_1(M(x)), the default
  LambdaM,    ///< lambda_m(M(x))
};

/// Per-x eigendecomposition of the conditional gradient covariance
/// M(x_i) = mean_j grad u(x_i, y_j) grad u(x_i, y_j)^T.
struct ConditionalSpectrum {
  struct Entry {
    Eigen::MatrixXd M;       // d x d
    Eigen::VectorXd lambda;  // d eigenvalues, descending
    Eigen::MatrixXd V;       // d x m leading eigenvectors
  };

  int m = 0;
  int n_y = 0;
  std::uint64_t sample_fingerprint = 0;
  std::vector<Entry> entries;

  int n_x() const { return static_cast<int>(entries.size()); }
  int dim() const { return entries.empty() ? 0 : static_cast<int>(entries.front().M.rows()); }

  /// Throws std::invalid_argument if this spectrum was not computed on `sample`.
  void check_matches(const TensorizedSample& sample) const;

  /// Weight used by the surrogate at sample i.
  double weight(int i, SurrogateWeight w = SurrogateWeight::LambdaMax) const;
};

/// Relative cutoff below which eigenvalues of M count as zero in rank checks.
inline constexpr double kEigenZeroTolerance = 1e-12;

/// Spectrum from the x-gradients already evaluated on the expanded sample
/// (row i * n_Y + j holds grad u(x_i, y_j)).
ConditionalSpectrum conditional_spectrum_from_gradients(const Eigen::MatrixXd& grads, int n_x, int n_y, int m,
                                                        std::uint64_t fingerprint = 0);

ConditionalSpectrum estimate_conditional_spectrum(const GradientOracle& oracle, const TensorizedSample& sample,
                                                  int m);

/// Mean over x-samples of the tail eigenvalue mass sum_{k > m} lambda_k.
/// Uses the spectrum's own m unless `m_override` is given.
double epsilon_m(const ConditionalSpectrum& spectrum, std::optional<int> m_override = std::nullopt);

/// Number of eigenvalues above kEigenZeroTolerance * lambda_1 at sample i.
int effective_rank(const ConditionalSpectrum& spectrum, int i);

/// The pair (H, R): L(G^T Phi) = trace(G^T H G) with G^T R G = I_m.
struct SurrogatePencil {
  std::shared_ptr<const PolynomialBasis> basis;
  Eigen::MatrixXd H;   // H1 - H2
  Eigen::MatrixXd H1;  // mean w(x) grad Phi^T grad Phi
  Eigen::MatrixXd H2;  // mean w(x) grad Phi^T V V^T grad Phi
  Eigen::MatrixXd R;
  int m = 0;
  SurrogateWeight weight = SurrogateWeight::LambdaMax;

  double quadratic_form(const Eigen::MatrixXd& G) const { return (G.transpose() * H * G).trace(); }
};

SurrogatePencil assemble_pencil(const ConditionalSpectrum& spectrum, const TensorizedSample& sample,
                                std::shared_ptr<const PolynomialBasis> basis,
                                SurrogateWeight weight = SurrogateWeight::LambdaMax);
SurrogatePencil assemble_pencil(const GradientOracle& oracle, const TensorizedSample& sample,
                                std::shared_ptr<const PolynomialBasis> basis, int m,
                                SurrogateWeight weight = SurrogateWeight::LambdaMax);

struct SurrogateSolution {
  FeatureMap feature_map;
  Eigen::VectorXd eigenvalues;  // the m smallest generalized eigenvalues, ascending
  double objective = 0.0;       // trace(G^T H G) at the minimizer
};

/// All generalized eigenvalues of (H, R), ascending.
Eigen::VectorXd generalized_eigenvalues(const Eigen::MatrixXd& H, const Eigen::MatrixXd& R);

/// Minimizes trace(G^T H G) subject to G^T R G = I_m by Cholesky reduction to a
/// standard symmetric eigenproblem. Columns are sign-fixed so that each one's
/// largest-magnitude entry is positive.
struct TraceMinimizer {
  Eigen::MatrixXd G;            // K x m
  Eigen::VectorXd eigenvalues;  // m smallest, ascending
};
TraceMinimizer minimize_trace(const Eigen::MatrixXd& H, const Eigen::MatrixXd& R, int m);

/// minimize_trace on the pencil, wrapped as a FeatureMap.
SurrogateSolution minimize_surrogate(const SurrogatePencil& pencil);

}  // namespace featlearn
