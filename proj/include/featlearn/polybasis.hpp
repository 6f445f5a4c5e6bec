#pragma once

#include <memory>
#include <vector>

#include <Eigen/Dense>

#include "featlearn/sampling.hpp"

namespace featlearn {

/// Orthonormal Legendre polynomial of degree n on (lo, hi) under the uniform
/// probability measure, and its derivative.
double legendre_orthonormal(int n, double x, double lo = -1.0, double hi = 1.0);
double legendre_orthonormal_derivative(int n, double x, double lo = -1.0, double hi = 1.0);

/// Values (and derivatives) of degrees 0..max_degree at x, in one recurrence pass.
void legendre_orthonormal_all(int max_degree, double x, double lo, double hi,
                              Eigen::Ref<Eigen::VectorXd> values,
                              Eigen::Ref<Eigen::VectorXd> derivatives);

/// Gauss-Legendre rule on (lo, hi) with weights summing to one (uniform
/// probability measure). Exact for polynomials of degree <= 2n - 1.
struct QuadratureRule {
  Eigen::VectorXd nodes;
  Eigen::VectorXd weights;
};
QuadratureRule gauss_legendre(int n, double lo = -1.0, double hi = 1.0);

using MultiIndex = std::vector<int>;

/// Tensorized orthonormal Legendre dictionary of total degree <= degree_bound.
///
/// Multi-indices are ordered graded-lexicographically: by total degree first,
/// then with larger leading exponents first, e.g. for d = 2:
/// (1,0) (0,1) (2,0) (1,1) (0,2). The constant polynomial is excluded unless
/// requested (the grouped projections need it; the feature dictionary must not
/// contain it, so that no gradient column vanishes identically).
class PolynomialBasis {
public:
  PolynomialBasis(BoxDomain domain, int degree_bound, bool include_constant = false);

  int dim() const { return domain_.dim(); }
  int degree_bound() const { return degree_bound_; }
  bool includes_constant() const { return include_constant_; }
  int size() const { return static_cast<int>(indices_.size()); }
  const std::vector<MultiIndex>& multi_indices() const { return indices_; }
  const BoxDomain& domain() const { return domain_; }

  /// Position of a multi-index in the ordering, or -1.
  int index_of(const MultiIndex& alpha) const;

  /// K-vector of basis values.
  Eigen::VectorXd eval(const Eigen::Ref<const Eigen::VectorXd>& x) const;

  /// d x K matrix; column j is the gradient of basis function j.
  Eigen::MatrixXd gradient(const Eigen::Ref<const Eigen::VectorXd>& x) const;

  /// Exact R = E[grad Phi^T grad Phi] under the uniform measure.
  ///
  /// Uses the separable structure of the tensorized Gauss-Legendre rule with
  /// degree_bound + 1 nodes per coordinate, which integrates every product of
  /// two basis functions (or their derivatives) exactly. Throws if the result
  /// is not numerically positive definite.
  Eigen::MatrixXd gram_matrix() const;

private:
  void check_point(const Eigen::Ref<const Eigen::VectorXd>& x) const;

  BoxDomain domain_;
  int degree_bound_;
  bool include_constant_;
  std::vector<MultiIndex> indices_;
};

/// Total-degree multi-indices in graded lexicographic order.
std::vector<MultiIndex> total_degree_indices(int d, int degree_bound, bool include_constant);

/// g(x) = G^T Phi(x) with G^T R G = I_m.
class FeatureMap {
public:
  /// Takes G as given; callers that need the constraint enforced go through
  /// orthonormalize(). `validate` checks G^T R G = I_m to 1e-8 in max-norm.
  FeatureMap(std::shared_ptr<const PolynomialBasis> basis, Eigen::MatrixXd G, bool validate = false);

  const PolynomialBasis& basis() const { return *basis_; }
  std::shared_ptr<const PolynomialBasis> basis_ptr() const { return basis_; }
  const Eigen::MatrixXd& coefficients() const { return G_; }
  int features() const { return static_cast<int>(G_.cols()); }
  int input_dim() const { return basis_->dim(); }

  Eigen::VectorXd eval(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  /// Rows are points; returns n x m.
  Eigen::MatrixXd eval_rows(const Eigen::Ref<const Eigen::MatrixXd>& x) const;
  /// d x m transposed Jacobian, grad Phi(x) G.
  Eigen::MatrixXd jacobian(const Eigen::Ref<const Eigen::VectorXd>& x) const;

  /// max |G^T R G - I|.
  double orthonormality_defect(const Eigen::MatrixXd& R) const;

private:
  std::shared_ptr<const PolynomialBasis> basis_;
  Eigen::MatrixXd G_;
};

/// Thrown when a coefficient matrix does not have full column rank in the
/// R-inner product.
class RankDeficientError : public std::runtime_error {
public:
  RankDeficientError(int rank, int expected);
  int rank() const { return rank_; }

private:
  int rank_;
};

/// Generalized QR: returns G with span(G) = span(G_raw) and G^T R G = I_m.
FeatureMap orthonormalize(std::shared_ptr<const PolynomialBasis> basis, const Eigen::MatrixXd& R,
                          const Eigen::MatrixXd& G_raw);
FeatureMap orthonormalize(std::shared_ptr<const PolynomialBasis> basis, const Eigen::MatrixXd& G_raw);

/// Coefficients (K x m) of the linear features x -> W^T x (W is d x m),
/// up to an additive constant. Requires a dictionary of degree >= 1.
Eigen::MatrixXd linear_feature_coefficients(const PolynomialBasis& basis, const Eigen::MatrixXd& W);

}  // namespace featlearn
