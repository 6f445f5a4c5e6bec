#include "featlearn/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace featlearn {

namespace {

void require_orthonormal(const Eigen::MatrixXd& V, const char* name) {
  const Eigen::MatrixXd defect = V.transpose() * V - Eigen::MatrixXd::Identity(V.cols(), V.cols());
  if (defect.size() > 0 && defect.cwiseAbs().maxCoeff() > 1e-10)
    throw std::invalid_argument(std::string("projection_norm_lemma_check: ") + name +
                                " does not have orthonormal columns");
}

}  // namespace

Eigen::MatrixXd orthonormal_range(const Eigen::MatrixXd& B) {
  const Eigen::Index d = B.rows();
  if (B.cols() == 0 || d == 0) return Eigen::MatrixXd(d, 0);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(B);
  qr.setThreshold(kProjectorRankTolerance);
  const Eigen::Index r = qr.rank();
  if (r == 0) return Eigen::MatrixXd(d, 0);
  return qr.householderQ() * Eigen::MatrixXd::Identity(d, r);
}

Eigen::MatrixXd projector(const Eigen::MatrixXd& B) {
  const Eigen::MatrixXd Q = orthonormal_range(B);
  return Q * Q.transpose();
}

double gradient_energy(const Eigen::MatrixXd& grads) {
  if (grads.rows() == 0) return 0.0;
  return grads.rowwise().squaredNorm().sum() / static_cast<double>(grads.rows());
}

double loss_J(const FeatureMap& g, const Eigen::MatrixXd& x, const Eigen::MatrixXd& grads) {
  if (x.rows() == 0) throw std::invalid_argument("loss_J: empty pair list");
  if (x.rows() != grads.rows()) throw std::invalid_argument("loss_J: x and gradient rows differ");
  double total = 0.0;
  for (Eigen::Index k = 0; k < x.rows(); ++k) {
    const Eigen::MatrixXd Q = orthonormal_range(g.jacobian(x.row(k).transpose()));
    const Eigen::VectorXd b = grads.row(k).transpose();
    total += (b - Q * (Q.transpose() * b)).squaredNorm();
  }
  return total / static_cast<double>(x.rows());
}

double loss_J(const GradientOracle& oracle, const FeatureMap& g, const PairSample& pairs) {
  return loss_J(g, pairs.x, pair_gradients(oracle, pairs));
}

Eigen::MatrixXd loss_J_gradient(const FeatureMap& g, const Eigen::MatrixXd& x, const Eigen::MatrixXd& grads) {
  // d/dA ||Pi_A b||^2 = 2 r c^T with c the least-squares coefficients and r = b - A c.
  const Eigen::Index n = x.rows();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(g.coefficients().rows(), g.features());
  for (Eigen::Index k = 0; k < n; ++k) {
    const Eigen::MatrixXd dphi = g.basis().gradient(x.row(k).transpose());
    const Eigen::MatrixXd A = dphi * g.coefficients();
    const Eigen::VectorXd b = grads.row(k).transpose();
    const Eigen::VectorXd c = A.colPivHouseholderQr().solve(b);
    const Eigen::VectorXd r = b - A * c;
    out.noalias() -= 2.0 * dphi.transpose() * r * c.transpose();
  }
  return out / static_cast<double>(n);
}

double loss_J_truncated(const FeatureMap& g, const TensorizedSample& sample, const ConditionalSpectrum& spectrum,
                        const Eigen::MatrixXd& grads) {
  spectrum.check_matches(sample);
  const int nx = sample.n_x(), ny = sample.n_y();
  double total = 0.0;
  for (int i = 0; i < nx; ++i) {
    const Eigen::MatrixXd Q = orthonormal_range(g.jacobian(sample.x_points.row(i).transpose()));
    const Eigen::MatrixXd& V = spectrum.entries[i].V;
    for (int j = 0; j < ny; ++j) {
      const Eigen::VectorXd b = V * (V.transpose() * grads.row(i * ny + j).transpose());
      total += (b - Q * (Q.transpose() * b)).squaredNorm();
    }
  }
  return total / (static_cast<double>(nx) * ny);
}

double loss_J_truncated(const GradientOracle& oracle, const FeatureMap& g, const TensorizedSample& sample,
                        const ConditionalSpectrum& spectrum) {
  return loss_J_truncated(g, sample, spectrum, pair_gradients(oracle, sample.expand()));
}

double loss_L(const FeatureMap& g, const TensorizedSample& sample, const ConditionalSpectrum& spectrum,
              SurrogateWeight weight) {
  spectrum.check_matches(sample);
  double total = 0.0;
  for (int i = 0; i < sample.n_x(); ++i) {
    const Eigen::MatrixXd Pperp =
        Eigen::MatrixXd::Identity(spectrum.dim(), spectrum.dim()) - projector(spectrum.entries[i].V);
    total += spectrum.weight(i, weight) * (Pperp * g.jacobian(sample.x_points.row(i).transpose())).squaredNorm();
  }
  return total / sample.n_x();
}

LemmaSides projection_norm_lemma_check(const Eigen::MatrixXd& V, const Eigen::MatrixXd& W) {
  if (V.rows() != W.rows()) throw std::invalid_argument("projection_norm_lemma_check: row count mismatch");
  require_orthonormal(V, "V");
  require_orthonormal(W, "W");
  const Eigen::Index d = V.rows();
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(d, d);
  LemmaSides s;
  s.lhs = ((I - W * W.transpose()) * V).squaredNorm();
  s.rhs = ((I - V * V.transpose()) * W).squaredNorm() + static_cast<double>(V.cols() - W.cols());
  return s;
}

DeviationBound deviation_bound_check(const GradientOracle& oracle, const FeatureMap& g,
                                     const TensorizedSample& sample, const ConditionalSpectrum& spectrum, int ell,
                                     int n_median, std::uint64_t seed) {
  const int m = g.features();
  if (m < 2) throw std::invalid_argument("deviation_bound_check: requires m >= 2");
  if (ell < 1) throw std::invalid_argument("deviation_bound_check: requires ell >= 1");
  if (g.basis().degree_bound() > ell + 1)
    throw std::invalid_argument("deviation_bound_check: feature map degree exceeds ell + 1");
  if (n_median < 1) throw std::invalid_argument("deviation_bound_check: n_median must be >= 1");
  if (oracle.sup_grad_bound && *oracle.sup_grad_bound > 1.0 + 1e-12)
    throw std::invalid_argument("deviation_bound_check: rescale u so that ||grad u|| <= 1");

  const Eigen::MatrixXd grads = pair_gradients(oracle, sample.expand());
  if (grads.rowwise().norm().maxCoeff() > 1.0 + 1e-12)
    throw std::invalid_argument("deviation_bound_check: sampled ||grad u|| exceeds 1; rescale u");

  DeviationBound out;
  out.J_trunc = loss_J_truncated(g, sample, spectrum, grads);
  out.L_hat = std::max(loss_L(g, sample, spectrum), 0.0);

  const Eigen::MatrixXd xs = sample_uniform(g.basis().domain(), n_median, seed);
  std::vector<double> dets(n_median);
  for (int k = 0; k < n_median; ++k) {
    const Eigen::MatrixXd J = g.jacobian(xs.row(k).transpose());
    dets[k] = (J.transpose() * J).determinant();
  }
  std::sort(dets.begin(), dets.end());
  out.q_median = (n_median % 2 == 1) ? dets[n_median / 2] : 0.5 * (dets[n_median / 2 - 1] + dets[n_median / 2]);
  if (!(out.q_median > 0.0))
    throw std::runtime_error("degenerate feature map (Jacobian singular at median)");

  const double s = g.basis().domain().s_concavity();
  const double lm2 = 2.0 * ell * m;
  out.kappa = 32.0 / s * std::pow(static_cast<double>(m), 1.0 / (4.0 * ell)) * std::pow(out.q_median, -1.0 / lm2);
  out.bound_rhs = 2.0 * std::pow(out.kappa, lm2 / (1.0 + lm2)) * std::pow(out.L_hat, 1.0 / (1.0 + lm2));
  return out;
}

double rms_error(const Eigen::VectorXd& targets, const Eigen::VectorXd& predictions) {
  if (targets.size() == 0) throw std::invalid_argument("rms_error: empty input");
  if (targets.size() != predictions.size()) throw std::invalid_argument("rms_error: size mismatch");
  return std::sqrt((targets - predictions).squaredNorm() / static_cast<double>(targets.size()));
}

double regression_error(const GradientOracle& oracle, const FeatureMap& g, const ProfileFunction& f,
                        const PairSample& pairs) {
  if (pairs.size() == 0) throw std::invalid_argument("regression_error: empty pair list");
  Eigen::VectorXd pred(pairs.size());
  for (int k = 0; k < pairs.size(); ++k) {
    const Eigen::VectorXd x = pairs.x.row(k).transpose();
    pred[k] = f(g.eval(x), pairs.y.row(k).transpose());
  }
  return rms_error(pair_values(oracle, pairs), pred);
}

LossReport evaluate_losses(const GradientOracle& oracle, const FeatureMap& g, const TensorizedSample& sample,
                           const ConditionalSpectrum& spectrum) {
  const PairSample pairs = sample.expand();
  const Eigen::MatrixXd grads = pair_gradients(oracle, pairs);
  LossReport r;
  r.J_hat = loss_J(g, pairs.x, grads);
  r.J_trunc_hat = loss_J_truncated(g, sample, spectrum, grads);
  r.L_hat = loss_L(g, sample, spectrum);
  r.epsilon_hat = epsilon_m(spectrum);
  r.grad_energy = gradient_energy(grads);
  return r;
}

}  // namespace featlearn
