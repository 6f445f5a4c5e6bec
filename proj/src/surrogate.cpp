#include "featlearn/surrogate.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/Eigenvalues>

namespace featlearn {

double gradient_check(const GradientOracle& oracle, const BoxDomain& x_domain, const BoxDomain& y_domain,
                      int n_points, std::uint64_t seed, double step) {
  const Eigen::MatrixXd xs = sample_uniform(x_domain, n_points, derive_seed(seed, 1));
  Eigen::MatrixXd ys;
  if (oracle.d_y > 0) ys = sample_uniform(y_domain, n_points, derive_seed(seed, 2));
  double worst = 0.0;
  for (int i = 0; i < n_points; ++i) {
    Eigen::VectorXd x = xs.row(i).transpose();
    const Eigen::VectorXd y = oracle.d_y > 0 ? Eigen::VectorXd(ys.row(i).transpose()) : Eigen::VectorXd();
    const Eigen::VectorXd g = oracle.gradient_x(x, y);
    for (int k = 0; k < oracle.d; ++k) {
      const double xk = x[k];
      x[k] = xk + step;
      const double fp = oracle.value(x, y);
      x[k] = xk - step;
      const double fm = oracle.value(x, y);
      x[k] = xk;
      worst = std::max(worst, std::abs(g[k] - (fp - fm) / (2.0 * step)));
    }
  }
  return worst;
}

GradientOracle scale_oracle(const GradientOracle& oracle, double factor) {
  GradientOracle out = oracle;
  out.value = [f = oracle.value, factor](const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
    return factor * f(x, y);
  };
  out.gradient_x = [g = oracle.gradient_x, factor](const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
    return Eigen::VectorXd(factor * g(x, y));
  };
  if (oracle.sup_grad_bound) out.sup_grad_bound = std::abs(factor) * *oracle.sup_grad_bound;
  return out;
}

Eigen::MatrixXd pair_gradients(const GradientOracle& oracle, const PairSample& pairs) {
  if (pairs.x.cols() != oracle.d) throw std::invalid_argument("pair_gradients: x dimension mismatch");
  Eigen::MatrixXd grads(pairs.size(), oracle.d);
  for (int k = 0; k < pairs.size(); ++k) {
    const Eigen::VectorXd x = pairs.x.row(k).transpose();
    const Eigen::VectorXd y = pairs.y.row(k).transpose();
    grads.row(k) = oracle.gradient_x(x, y).transpose();
  }
  return grads;
}

Eigen::VectorXd pair_values(const GradientOracle& oracle, const PairSample& pairs) {
  Eigen::VectorXd vals(pairs.size());
  for (int k = 0; k < pairs.size(); ++k)
    vals[k] = oracle.value(pairs.x.row(k).transpose(), pairs.y.row(k).transpose());
  return vals;
}

void ConditionalSpectrum::check_matches(const TensorizedSample& sample) const {
  if (sample.n_x() != n_x() || sample.n_y() != n_y || sample.x_points.cols() != dim())
    throw std::invalid_argument("conditional spectrum does not match the sample (shape)");
  if (sample_fingerprint != 0 && sample_fingerprint != sample.fingerprint())
    throw std::invalid_argument("conditional spectrum was computed on a different sample");
}

double ConditionalSpectrum::weight(int i, SurrogateWeight w) const {
  const Eigen::VectorXd& lam = entries[i].lambda;
  const double v = (w == SurrogateWeight::LambdaMax) ? lam[0] : lam[m - 1];
  return std::max(v, 0.0);
}

ConditionalSpectrum conditional_spectrum_from_gradients(const Eigen::MatrixXd& grads, int n_x, int n_y, int m,
                                                        std::uint64_t fingerprint) {
  const int d = static_cast<int>(grads.cols());
  if (m < 1 || m > d) throw std::invalid_argument("conditional spectrum: need 1 <= m <= d");
  if (n_y < 1) throw std::invalid_argument("conditional spectrum: need n_Y >= 1");
  if (grads.rows() != static_cast<Eigen::Index>(n_x) * n_y)
    throw std::invalid_argument("conditional spectrum: gradient rows must equal n_X * n_Y");
  ConditionalSpectrum spec;
  spec.m = m;
  spec.n_y = n_y;
  spec.sample_fingerprint = fingerprint;
  spec.entries.resize(n_x);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(d);
  for (int i = 0; i < n_x; ++i) {
    const auto block = grads.middleRows(static_cast<Eigen::Index>(i) * n_y, n_y);
    Eigen::MatrixXd M = (block.transpose() * block) / n_y;
    M = 0.5 * (M + M.transpose());
    eig.compute(M);
    auto& e = spec.entries[i];
    e.lambda = eig.eigenvalues().reverse();
    e.V = eig.eigenvectors().rowwise().reverse().leftCols(m);
    e.M = std::move(M);
  }
  return spec;
}

ConditionalSpectrum estimate_conditional_spectrum(const GradientOracle& oracle, const TensorizedSample& sample,
                                                  int m) {
  const Eigen::MatrixXd grads = pair_gradients(oracle, sample.expand());
  return conditional_spectrum_from_gradients(grads, sample.n_x(), sample.n_y(), m, sample.fingerprint());
}

double epsilon_m(const ConditionalSpectrum& spectrum, std::optional<int> m_override) {
  const int m = m_override.value_or(spectrum.m);
  if (spectrum.entries.empty()) return 0.0;
  const int d = spectrum.dim();
  if (m < 0 || m > d) throw std::invalid_argument("epsilon_m: m out of range");
  double total = 0.0;
  for (const auto& e : spectrum.entries) {
    const double cutoff = kEigenZeroTolerance * std::max(e.lambda[0], 0.0);
    double tail = 0.0;
    for (int k = m; k < d; ++k)
      if (e.lambda[k] > cutoff) tail += e.lambda[k];
    total += tail;
  }
  return total / spectrum.n_x();
}

int effective_rank(const ConditionalSpectrum& spectrum, int i) {
  const auto& lam = spectrum.entries.at(i).lambda;
  if (lam[0] <= 0.0) return 0;
  int r = 0;
  for (Eigen::Index k = 0; k < lam.size(); ++k)
    if (lam[k] > kEigenZeroTolerance * lam[0]) ++r;
  return r;
}

SurrogatePencil assemble_pencil(const ConditionalSpectrum& spectrum, const TensorizedSample& sample,
                                std::shared_ptr<const PolynomialBasis> basis, SurrogateWeight weight) {
  spectrum.check_matches(sample);
  if (!basis) throw std::invalid_argument("assemble_pencil: null basis");
  if (basis->dim() != spectrum.dim()) throw std::invalid_argument("assemble_pencil: basis dimension mismatch");
  const int K = basis->size();
  if (K < spectrum.m) throw std::invalid_argument("assemble_pencil: basis smaller than m");

  SurrogatePencil pencil;
  pencil.m = spectrum.m;
  pencil.weight = weight;
  pencil.H = Eigen::MatrixXd::Zero(K, K);
  pencil.H1 = Eigen::MatrixXd::Zero(K, K);
  pencil.H2 = Eigen::MatrixXd::Zero(K, K);
  for (int i = 0; i < spectrum.n_x(); ++i) {
    const double w = spectrum.weight(i, weight);
    if (w == 0.0) continue;
    const Eigen::MatrixXd dphi = basis->gradient(sample.x_points.row(i).transpose());
    const Eigen::MatrixXd& V = spectrum.entries[i].V;
    const Eigen::MatrixXd aligned = V.transpose() * dphi;   // m x K
    const Eigen::MatrixXd residual = dphi - V * aligned;    // (I - V V^T) grad Phi
    pencil.H1.noalias() += w * dphi.transpose() * dphi;
    pencil.H2.noalias() += w * aligned.transpose() * aligned;
    pencil.H.noalias() += w * residual.transpose() * residual;
  }
  const double inv_n = 1.0 / spectrum.n_x();
  pencil.H1 *= inv_n;
  pencil.H2 *= inv_n;
  pencil.H *= inv_n;
  pencil.H = 0.5 * (pencil.H + pencil.H.transpose()).eval();
  pencil.R = basis->gram_matrix();
  pencil.basis = std::move(basis);
  return pencil;
}

SurrogatePencil assemble_pencil(const GradientOracle& oracle, const TensorizedSample& sample,
                                std::shared_ptr<const PolynomialBasis> basis, int m, SurrogateWeight weight) {
  return assemble_pencil(estimate_conditional_spectrum(oracle, sample, m), sample, std::move(basis), weight);
}

namespace {

struct ReducedProblem {
  Eigen::LLT<Eigen::MatrixXd> llt;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig;
};

void reduce(const Eigen::MatrixXd& H, const Eigen::MatrixXd& R, ReducedProblem& out) {
  if (H.rows() != H.cols() || R.rows() != R.cols() || H.rows() != R.rows())
    throw std::invalid_argument("generalized eigenproblem: H and R must be square of equal size");
  out.llt.compute(R);
  if (out.llt.info() != Eigen::Success)
    throw std::runtime_error("generalized eigenproblem: Cholesky factorization of R failed (R not SPD)");
  // C = L^{-1} H L^{-T}
  const auto L = out.llt.matrixL();
  Eigen::MatrixXd C = L.solve(H);
  C = L.solve(C.transpose().eval()).eval();
  C = 0.5 * (C + C.transpose()).eval();
  out.eig.compute(C);
  if (out.eig.info() != Eigen::Success) throw std::runtime_error("generalized eigenproblem: eigensolver failed");
}

}  // namespace

Eigen::VectorXd generalized_eigenvalues(const Eigen::MatrixXd& H, const Eigen::MatrixXd& R) {
  ReducedProblem p;
  reduce(H, R, p);
  return p.eig.eigenvalues();
}

TraceMinimizer minimize_trace(const Eigen::MatrixXd& H, const Eigen::MatrixXd& R, int m) {
  if (m < 1 || m > R.rows()) throw std::invalid_argument("minimize_trace: need 1 <= m <= K");
  ReducedProblem p;
  reduce(H, R, p);
  const Eigen::MatrixXd W = p.eig.eigenvectors().leftCols(m);
  TraceMinimizer out{p.llt.matrixU().solve(W), p.eig.eigenvalues().head(m)};  // G = L^{-T} W
  for (int c = 0; c < m; ++c) {
    Eigen::Index at;
    out.G.col(c).cwiseAbs().maxCoeff(&at);
    if (out.G(at, c) < 0.0) out.G.col(c) *= -1.0;
  }
  return out;
}

SurrogateSolution minimize_surrogate(const SurrogatePencil& pencil) {
  TraceMinimizer tm = minimize_trace(pencil.H, pencil.R, pencil.m);
  SurrogateSolution sol{FeatureMap(pencil.basis, std::move(tm.G)), std::move(tm.eigenvalues), 0.0};
  sol.objective = pencil.quadratic_form(sol.feature_map.coefficients());
  return sol;
}

}  // namespace featlearn
