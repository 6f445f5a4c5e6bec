#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace featlearn {

/// Kernel ridge regression model with the Gaussian kernel exp(-gamma ||z - z'||^2).
struct KrrModel {
  Eigen::MatrixXd train_features;  // N x p
  Eigen::VectorXd coeffs;          // (K + alpha I)^{-1} u
  double gamma = 0.0;
  double alpha = 0.0;
};

/// Gram matrix K_ij = exp(-gamma ||a_i - b_j||^2) between the rows of A and B.
Eigen::MatrixXd gaussian_kernel(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, double gamma);

KrrModel krr_fit(const Eigen::MatrixXd& Z, const Eigen::VectorXd& u, double gamma, double alpha);
Eigen::VectorXd krr_predict(const KrrModel& model, const Eigen::MatrixXd& Z_new);

/// 30 values with log10(gamma) evenly spaced on [-6, -2].
std::vector<double> default_gamma_grid();
/// 40 values with log10(alpha) evenly spaced on [-11, -5].
std::vector<double> default_alpha_grid();
/// n values with log10 evenly spaced on [lo, hi], both ends included.
std::vector<double> log10_grid(double lo, double hi, int n);

struct CvRow {
  double gamma;
  double alpha;
  int fold;
  double mse;
};

struct CvResult {
  double gamma = 0.0;
  double alpha = 0.0;
  double score = 0.0;       // mean held-out MSE of the selected pair
  Eigen::MatrixXd scores;   // gamma_grid.size() x alpha_grid.size() mean MSE
  std::vector<CvRow> table; // one row per (gamma, alpha, fold)
};

/// Fold id of every row: seeded shuffle, then contiguous blocks of N / folds
/// rows, the last block absorbing the remainder.
std::vector<int> fold_assignment(int n, int folds, std::uint64_t seed);

/// Grid search over (gamma, alpha) by k-fold cross-validation. The score of a
/// pair is the unweighted mean of the per-fold MSE; ties go to the smaller
/// alpha, then the smaller gamma.
CvResult cross_validate(const Eigen::MatrixXd& Z, const Eigen::VectorXd& u, int folds,
                        const std::vector<double>& gamma_grid, const std::vector<double>& alpha_grid,
                        std::uint64_t seed);

}  // namespace featlearn
