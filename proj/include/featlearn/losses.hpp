#pragma once

#include <cstdint>
#include <functional>
#include <limits>

#include <Eigen/Dense>

#include "featlearn/polybasis.hpp"
#include "featlearn/sampling.hpp"
#include "featlearn/surrogate.hpp"

namespace featlearn {

/// Relative rank cutoff used by every projector in this module.
inline constexpr double kProjectorRankTolerance = 1e-12;

/// Orthonormal basis (d x r) of col-span(B), rank decided by column-pivoted QR
/// with cutoff kProjectorRankTolerance relative to the leading pivot.
Eigen::MatrixXd orthonormal_range(const Eigen::MatrixXd& B);

/// Orthogonal projector onto col-span(B). B may be rank deficient or zero.
Eigen::MatrixXd projector(const Eigen::MatrixXd& B);

/// Monte-Carlo estimate of J: mean over pairs of ||(I - Pi_{grad g(x)}) grad_x u||^2.
double loss_J(const GradientOracle& oracle, const FeatureMap& g, const PairSample& pairs);
/// Same estimator on precomputed gradients (row k of `grads` belongs to pair k).
double loss_J(const FeatureMap& g, const Eigen::MatrixXd& x, const Eigen::MatrixXd& grads);

/// Euclidean gradient of G -> loss_J(G^T Phi) (K x m), valid where every
/// Jacobian has full column rank.
Eigen::MatrixXd loss_J_gradient(const FeatureMap& g, const Eigen::MatrixXd& x, const Eigen::MatrixXd& grads);

/// Truncated loss: mean over (i, j) of ||(I - Pi_{grad g(x_i)}) V_i V_i^T grad u(x_i, y_j)||^2.
double loss_J_truncated(const GradientOracle& oracle, const FeatureMap& g, const TensorizedSample& sample,
                        const ConditionalSpectrum& spectrum);
double loss_J_truncated(const FeatureMap& g, const TensorizedSample& sample, const ConditionalSpectrum& spectrum,
                        const Eigen::MatrixXd& grads);

/// Surrogate: mean over i of w_i ||(I - V_i V_i^T) grad g(x_i)||_F^2, computed
/// through projectors rather than through the pencil.
double loss_L(const FeatureMap& g, const TensorizedSample& sample, const ConditionalSpectrum& spectrum,
              SurrogateWeight weight = SurrogateWeight::LambdaMax);

/// Mean squared x-gradient norm over pairs.
double gradient_energy(const Eigen::MatrixXd& grads);

/// Both sides of ||Pi_W^perp V||_F^2 = ||Pi_V^perp W||_F^2 + (n - m) for
/// orthonormal V (d x n) and W (d x m).
struct LemmaSides {
  double lhs = 0.0;
  double rhs = 0.0;
};
LemmaSides projection_norm_lemma_check(const Eigen::MatrixXd& V, const Eigen::MatrixXd& W);

/// Pieces of the small-deviation upper bound J_trunc <= 2 kappa^{2lm/(1+2lm)} L^{1/(1+2lm)}.
struct DeviationBound {
  double J_trunc = 0.0;
  double L_hat = 0.0;
  double q_median = 0.0;  // median of det(grad g^T grad g)
  double kappa = 0.0;
  double bound_rhs = 0.0;
};

/// Evaluates both sides of the deviation bound for one feature map.
/// Requires m >= 2, ell >= 1 with the basis total degree <= ell + 1, and
/// ||grad_x u|| <= 1 (rescale the oracle first). The median is taken over
/// `n_median` fresh uniform draws.
DeviationBound deviation_bound_check(const GradientOracle& oracle, const FeatureMap& g,
                                     const TensorizedSample& sample, const ConditionalSpectrum& spectrum, int ell,
                                     int n_median, std::uint64_t seed);

/// Profile function f(z, y) applied to features z = g(x).
using ProfileFunction = std::function<double(const Eigen::VectorXd& z, const Eigen::VectorXd& y)>;

/// Root-mean-square of u - f(g(x), y) over the pairs.
double regression_error(const GradientOracle& oracle, const FeatureMap& g, const ProfileFunction& f,
                        const PairSample& pairs);
/// RMS of targets - predictions.
double rms_error(const Eigen::VectorXd& targets, const Eigen::VectorXd& predictions);

struct LossReport {
  double J_hat = 0.0;
  double J_trunc_hat = 0.0;
  double L_hat = 0.0;
  double epsilon_hat = 0.0;
  double grad_energy = 0.0;
  double e_hat = std::numeric_limits<double>::quiet_NaN();
};

/// All four losses of `g` on one tensorized sample.
LossReport evaluate_losses(const GradientOracle& oracle, const FeatureMap& g, const TensorizedSample& sample,
                           const ConditionalSpectrum& spectrum);

}  // namespace featlearn
