#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "featlearn/polybasis.hpp"
#include "featlearn/sampling.hpp"
#include "featlearn/surrogate.hpp"

namespace featlearn {

/// Disjoint, non-empty groups of coordinates (0-based) covering {0, ..., d-1}.
/// Each group is stored sorted ascending.
struct GroupPartition {
  int d = 0;
  std::vector<std::vector<int>> groups;

  GroupPartition() = default;
  GroupPartition(int d, std::vector<std::vector<int>> groups);

  int size() const { return static_cast<int>(groups.size()); }
  /// Coordinates outside group k, ascending.
  std::vector<int> complement(int k) const;
};

/// Dense order-N tensor, row-major (last index fastest).
struct CoefficientTensor {
  std::vector<int> dims;
  Eigen::VectorXd data;
  std::vector<std::string> labels;  // one per mode, optional
  std::string basis = "legendre";   // basis family of every mode
  std::vector<int> degrees;         // per-mode total degree, optional

  CoefficientTensor() = default;
  explicit CoefficientTensor(std::vector<int> dims);

  int order() const { return static_cast<int>(dims.size()); }
  Eigen::Index numel() const { return data.size(); }
  double norm_squared() const { return data.squaredNorm(); }

  Eigen::Index flat_index(const std::vector<int>& idx) const;
  double& at(const std::vector<int>& idx) { return data[flat_index(idx)]; }
  double at(const std::vector<int>& idx) const { return data[flat_index(idx)]; }
};

/// Mode-k unfolding: rows index mode k, columns run over the remaining modes
/// in ascending order, row-major (the last remaining mode varies fastest).
Eigen::MatrixXd unfold(const CoefficientTensor& T, int mode);
CoefficientTensor fold(const Eigen::MatrixXd& M, const std::vector<int>& dims, int mode);

/// Matricization with the given modes (ascending) as rows and the rest as columns.
Eigen::MatrixXd matricize(const CoefficientTensor& T, const std::vector<int>& row_modes);

/// T x_k M, i.e. every mode-k fiber multiplied by M (new size M.rows()).
CoefficientTensor mode_product(const CoefficientTensor& T, const Eigen::MatrixXd& M, int mode);

/// Scalar function of the full input x.
using ScalarField = std::function<double(const Eigen::VectorXd& x)>;

/// Coefficients <tensor product of phi_{i_k}, u> over the per-group orthonormal
/// Legendre bases (total degree <= degrees[k] on group k, constant included),
/// by tensorized Gauss-Legendre quadrature with `nodes` points per coordinate.
CoefficientTensor project_coefficients(const ScalarField& u, const GroupPartition& partition,
                                       const BoxDomain& domain, const std::vector<int>& degrees, int nodes);

/// E[u^2] under the uniform measure by tensorized Gauss-Legendre quadrature.
double mean_square(const ScalarField& u, const BoxDomain& domain, int nodes);

/// Evaluates the function represented by T at x.
double evaluate_expansion(const CoefficientTensor& T, const GroupPartition& partition, const BoxDomain& domain,
                          const Eigen::VectorXd& x);

struct SvdReduction {
  Eigen::MatrixXd left_vectors;       // rows(A) x m
  Eigen::MatrixXd right_vectors;      // cols(A) x m
  Eigen::VectorXd singular_values;    // m, descending
  Eigen::VectorXd all_singular_values;
  double tail_energy = 0.0;           // sum_{k > m} sigma_k^2

  Eigen::MatrixXd reconstruction() const;
};

/// Thin SVD truncated to m terms; requires 1 <= m <= min(rows, cols).
SvdReduction two_group_svd(const Eigen::MatrixXd& A, int m);

/// ||u - P u||^2 + sum_{k > m} sigma_k^2.
double bilinear_error(const Eigen::MatrixXd& A, int m, double full_projection_residual);

struct HosvdResult {
  std::vector<Eigen::MatrixXd> factors;  // dims[k] x ranks[k], orthonormal columns
  CoefficientTensor core;
  double error_sq = 0.0;                 // ||T - reconstruction||_F^2
  std::vector<double> mode_tail_energy;  // per-mode discarded singular energy
};

HosvdResult hosvd(const CoefficientTensor& T, const std::vector<int>& ranks);

/// T contracted with factors^T, then expanded back with factors.
CoefficientTensor multilinear_reconstruction(const CoefficientTensor& T, const std::vector<Eigen::MatrixXd>& factors);

/// ||T - T x_1 U_1 U_1^T ... x_N U_N U_N^T||^2 for orthonormal factors.
double multilinear_error_sq(const CoefficientTensor& T, const std::vector<Eigen::MatrixXd>& factors);

struct NearOptimalityReport {
  bool all_pass = true;
  double hosvd_error_sq = 0.0;
  double worst_margin = 0.0;    // min over candidates of N E(g) - (N-1) r^2 - E(HOSVD)
  std::vector<double> margins;  // one per candidate
};

/// Checks E(HOSVD) <= N E(g) - (N-1) r^2 against every candidate, where
/// E(g) = r^2 + multilinear_error_sq and r^2 is the projection residual.
NearOptimalityReport hosvd_near_optimality_check(const CoefficientTensor& T, const std::vector<int>& ranks,
                                                 const std::vector<std::vector<Eigen::MatrixXd>>& candidates,
                                                 double residual_sq = 0.0);

/// Product design: one point set per group; point (i_1, ..., i_N) combines
/// row i_k of every group's set (row-major over groups).
struct GridSample {
  std::vector<Eigen::MatrixXd> group_points;

  Eigen::Index size() const;
  Eigen::VectorXd point(const GroupPartition& partition, Eigen::Index flat) const;
};

GridSample build_grid(const GroupPartition& partition, const BoxDomain& domain, const std::vector<int>& n_per_group,
                      std::uint64_t seed);

struct GroupedLoss {
  double total = 0.0;
  std::vector<double> per_group;
  double identity_gap = 0.0;  // |total - sum(per_group)|
};

/// J of the block-diagonal map (g^1, ..., g^N) on the grid, and each group's
/// collective J with the other groups' coordinates acting as y. The two are
/// computed independently and must agree to 1e-10 relative (std::logic_error
/// otherwise). `oracle` must be a function of x alone (d_y == 0).
GroupedLoss loss_J_grouped(const GradientOracle& oracle, const GroupPartition& partition,
                           const std::vector<FeatureMap>& maps, const GridSample& grid);

/// Collective oracle on group k: x = x_group, y = the remaining coordinates.
GradientOracle restrict_to_group(const GradientOracle& oracle, const GroupPartition& partition, int k);

}  // namespace featlearn
