#include "featlearn/regression.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/Eigenvalues>

#include "featlearn/sampling.hpp"

namespace featlearn {

Eigen::MatrixXd gaussian_kernel(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, double gamma) {
  if (A.cols() != B.cols()) throw std::invalid_argument("gaussian_kernel: feature dimension mismatch");
  Eigen::MatrixXd K(A.rows(), B.rows());
  for (Eigen::Index j = 0; j < B.rows(); ++j)
    for (Eigen::Index i = 0; i < A.rows(); ++i) K(i, j) = std::exp(-gamma * (A.row(i) - B.row(j)).squaredNorm());
  return K;
}

KrrModel krr_fit(const Eigen::MatrixXd& Z, const Eigen::VectorXd& u, double gamma, double alpha) {
  if (Z.rows() < 1) throw std::invalid_argument("krr_fit: need at least one training point");
  if (Z.rows() != u.size()) throw std::invalid_argument("krr_fit: Z rows and u size differ");
  if (!(gamma > 0.0) || !(alpha > 0.0)) throw std::invalid_argument("krr_fit: gamma and alpha must be > 0");
  Eigen::MatrixXd K = gaussian_kernel(Z, Z, gamma);
  K.diagonal().array() += alpha;
  Eigen::LLT<Eigen::MatrixXd> llt(K);
  if (llt.info() != Eigen::Success) throw std::runtime_error("krr_fit: Cholesky of K + alpha I failed");
  return KrrModel{Z, llt.solve(u), gamma, alpha};
}

Eigen::VectorXd krr_predict(const KrrModel& model, const Eigen::MatrixXd& Z_new) {
  if (Z_new.cols() != model.train_features.cols())
    throw std::invalid_argument("krr_predict: expected " + std::to_string(model.train_features.cols()) +
                                " features, got " + std::to_string(Z_new.cols()));
  return gaussian_kernel(Z_new, model.train_features, model.gamma) * model.coeffs;
}

std::vector<double> log10_grid(double lo, double hi, int n) {
  if (n < 1) throw std::invalid_argument("log10_grid: n must be >= 1");
  std::vector<double> g(n);
  for (int k = 0; k < n; ++k) {
    const double e = (n == 1) ? lo : lo + (hi - lo) * k / (n - 1);
    g[k] = std::pow(10.0, e);
  }
  return g;
}

std::vector<double> default_gamma_grid() { return log10_grid(-6.0, -2.0, 30); }
std::vector<double> default_alpha_grid() { return log10_grid(-11.0, -5.0, 40); }

std::vector<int> fold_assignment(int n, int folds, std::uint64_t seed) {
  if (folds < 2) throw std::invalid_argument("cross_validate: need at least 2 folds");
  if (n < folds)
    throw std::invalid_argument("cross_validate: " + std::to_string(n) + " samples is fewer than " +
                                std::to_string(folds) + " folds");
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  SplitMix64 rng(seed);
  shuffle_indices(order, rng);
  const int block = n / folds;
  std::vector<int> fold(n);
  for (int p = 0; p < n; ++p) fold[order[p]] = std::min(p / block, folds - 1);
  return fold;
}

CvResult cross_validate(const Eigen::MatrixXd& Z, const Eigen::VectorXd& u, int folds,
                        const std::vector<double>& gamma_grid, const std::vector<double>& alpha_grid,
                        std::uint64_t seed) {
  if (Z.rows() != u.size()) throw std::invalid_argument("cross_validate: Z rows and u size differ");
  if (gamma_grid.empty() || alpha_grid.empty()) throw std::invalid_argument("cross_validate: empty grid");
  for (double v : gamma_grid)
    if (!(v > 0.0)) throw std::invalid_argument("cross_validate: gamma values must be > 0");
  for (double v : alpha_grid)
    if (!(v > 0.0)) throw std::invalid_argument("cross_validate: alpha values must be > 0");
  const int n = static_cast<int>(Z.rows());
  const std::vector<int> fold = fold_assignment(n, folds, seed);

  std::vector<std::vector<int>> train_idx(folds), test_idx(folds);
  for (int i = 0; i < n; ++i)
    for (int f = 0; f < folds; ++f) (fold[i] == f ? test_idx[f] : train_idx[f]).push_back(i);

  const int ng = static_cast<int>(gamma_grid.size()), na = static_cast<int>(alpha_grid.size());
  CvResult out;
  out.scores = Eigen::MatrixXd::Zero(ng, na);
  Eigen::MatrixXd fold_mse(folds, na);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig;
  for (int g = 0; g < ng; ++g) {
    const Eigen::MatrixXd K = gaussian_kernel(Z, Z, gamma_grid[g]);
    for (int f = 0; f < folds; ++f) {
      const auto& tr = train_idx[f];
      const auto& te = test_idx[f];
      const Eigen::MatrixXd Ktr = K(tr, tr);
      // One eigendecomposition of K_train serves every alpha.
      eig.compute(Ktr);
      if (eig.info() != Eigen::Success) throw std::runtime_error("cross_validate: eigensolver failed");
      const Eigen::VectorXd lam = eig.eigenvalues().cwiseMax(0.0);
      const Eigen::VectorXd b = eig.eigenvectors().transpose() * u(tr);
      const Eigen::MatrixXd P = K(te, tr) * eig.eigenvectors();
      const Eigen::VectorXd ute = u(te);
      for (int a = 0; a < na; ++a) {
        const Eigen::VectorXd c = b.array() / (lam.array() + alpha_grid[a]);
        fold_mse(f, a) = (ute - P * c).squaredNorm() / static_cast<double>(te.size());
      }
    }
    for (int a = 0; a < na; ++a) {
      out.scores(g, a) = fold_mse.col(a).mean();
      for (int f = 0; f < folds; ++f) out.table.push_back({gamma_grid[g], alpha_grid[a], f, fold_mse(f, a)});
    }
  }

  int bg = 0, ba = 0;
  for (int g = 0; g < ng; ++g)
    for (int a = 0; a < na; ++a) {
      const double s = out.scores(g, a), best = out.scores(bg, ba);
      const bool better = s < best || (s == best && (alpha_grid[a] < alpha_grid[ba] ||
                                                     (alpha_grid[a] == alpha_grid[ba] && gamma_grid[g] < gamma_grid[bg])));
      if (better) bg = g, ba = a;
    }
  out.gamma = gamma_grid[bg];
  out.alpha = alpha_grid[ba];
  out.score = out.scores(bg, ba);
  return out;
}

}  // namespace featlearn
