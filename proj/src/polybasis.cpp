#include "featlearn/polybasis.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/Eigenvalues>

namespace featlearn {

namespace {

// Affine map of (lo, hi) onto (-1, 1), and its derivative.
double to_reference(double x, double lo, double hi) { return (2.0 * x - lo - hi) / (hi - lo); }

void collect_degree(int d, int remaining, int pos, MultiIndex& cur, std::vector<MultiIndex>& out) {
  if (pos == d - 1) {
    cur[pos] = remaining;
    out.push_back(cur);
    return;
  }
  for (int e = remaining; e >= 0; --e) {
    cur[pos] = e;
    collect_degree(d, remaining - e, pos + 1, cur, out);
  }
  cur[pos] = 0;
}

}  // namespace

void legendre_orthonormal_all(int max_degree, double x, double lo, double hi,
                              Eigen::Ref<Eigen::VectorXd> values,
                              Eigen::Ref<Eigen::VectorXd> derivatives) {
  const double t = to_reference(x, lo, hi);
  const double dt = 2.0 / (hi - lo);
  // Unnormalized P_n and P_n' by the three-term recurrences, then scaled by sqrt(2n+1).
  double p_prev = 1.0, p_cur = t;
  double dp_prev = 0.0, dp_cur = 1.0;
  for (int n = 0; n <= max_degree; ++n) {
    double p, dp;
    if (n == 0) {
      p = 1.0;
      dp = 0.0;
    } else if (n == 1) {
      p = t;
      dp = 1.0;
    } else {
      p = ((2.0 * n - 1.0) * t * p_cur - (n - 1.0) * p_prev) / n;
      dp = dp_prev + (2.0 * n - 1.0) * p_cur;
      p_prev = p_cur;
      p_cur = p;
      dp_prev = dp_cur;
      dp_cur = dp;
    }
    const double scale = std::sqrt(2.0 * n + 1.0);
    values[n] = scale * p;
    derivatives[n] = scale * dp * dt;
  }
}

double legendre_orthonormal(int n, double x, double lo, double hi) {
  Eigen::VectorXd v(n + 1), dv(n + 1);
  legendre_orthonormal_all(n, x, lo, hi, v, dv);
  return v[n];
}

double legendre_orthonormal_derivative(int n, double x, double lo, double hi) {
  Eigen::VectorXd v(n + 1), dv(n + 1);
  legendre_orthonormal_all(n, x, lo, hi, v, dv);
  return dv[n];
}

QuadratureRule gauss_legendre(int n, double lo, double hi) {
  if (n < 1) throw std::invalid_argument("gauss_legendre: n must be >= 1");
  // Golub-Welsch on the Jacobi matrix of the Legendre recurrence.
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k) {
    const double b = k / std::sqrt(4.0 * k * k - 1.0);
    J(k, k - 1) = b;
    J(k - 1, k) = b;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(J);
  QuadratureRule rule;
  rule.nodes = 0.5 * (lo + hi) + 0.5 * (hi - lo) * eig.eigenvalues().array();
  rule.weights = eig.eigenvectors().row(0).array().square().transpose();
  rule.weights /= rule.weights.sum();
  return rule;
}

std::vector<MultiIndex> total_degree_indices(int d, int degree_bound, bool include_constant) {
  if (d < 1) throw std::invalid_argument("total_degree_indices: d must be >= 1");
  if (degree_bound < 0) throw std::invalid_argument("total_degree_indices: negative degree");
  std::vector<MultiIndex> out;
  MultiIndex cur(d, 0);
  for (int deg = include_constant ? 0 : 1; deg <= degree_bound; ++deg) collect_degree(d, deg, 0, cur, out);
  return out;
}

PolynomialBasis::PolynomialBasis(BoxDomain domain, int degree_bound, bool include_constant)
    : domain_(std::move(domain)), degree_bound_(degree_bound), include_constant_(include_constant) {
  if (domain_.degenerate()) throw std::invalid_argument("PolynomialBasis: degenerate domain");
  if (degree_bound < 1 && !include_constant)
    throw std::invalid_argument("PolynomialBasis: degree bound must be >= 1");
  indices_ = total_degree_indices(domain_.dim(), degree_bound, include_constant);
}

int PolynomialBasis::index_of(const MultiIndex& alpha) const {
  for (std::size_t j = 0; j < indices_.size(); ++j)
    if (indices_[j] == alpha) return static_cast<int>(j);
  return -1;
}

void PolynomialBasis::check_point(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  if (x.size() != dim())
    throw std::invalid_argument("PolynomialBasis: point has dimension " + std::to_string(x.size()) +
                                ", expected " + std::to_string(dim()));
}

Eigen::VectorXd PolynomialBasis::eval(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  check_point(x);
  const int d = dim(), p = degree_bound_;
  Eigen::MatrixXd vals(p + 1, d), ders(p + 1, d);
  for (int k = 0; k < d; ++k)
    legendre_orthonormal_all(p, x[k], domain_.lo(k), domain_.hi(k), vals.col(k), ders.col(k));
  Eigen::VectorXd out(size());
  for (int j = 0; j < size(); ++j) {
    double v = 1.0;
    for (int k = 0; k < d; ++k) v *= vals(indices_[j][k], k);
    out[j] = v;
  }
  return out;
}

Eigen::MatrixXd PolynomialBasis::gradient(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  check_point(x);
  const int d = dim(), p = degree_bound_;
  Eigen::MatrixXd vals(p + 1, d), ders(p + 1, d);
  for (int k = 0; k < d; ++k)
    legendre_orthonormal_all(p, x[k], domain_.lo(k), domain_.hi(k), vals.col(k), ders.col(k));
  Eigen::MatrixXd grad(d, size());
  for (int j = 0; j < size(); ++j) {
    const MultiIndex& a = indices_[j];
    for (int k = 0; k < d; ++k) {
      if (a[k] == 0) {
        grad(k, j) = 0.0;
        continue;
      }
      double g = ders(a[k], k);
      for (int l = 0; l < d; ++l)
        if (l != k) g *= vals(a[l], l);
      grad(k, j) = g;
    }
  }
  return grad;
}

Eigen::MatrixXd PolynomialBasis::gram_matrix() const {
  const int d = dim(), p = degree_bound_, K = size();
  // Per-coordinate 1D moment tables: mass(a, b) = E[phi_a phi_b], stiff(a, b) = E[phi_a' phi_b'].
  std::vector<Eigen::MatrixXd> mass(d), stiff(d);
  for (int k = 0; k < d; ++k) {
    const QuadratureRule rule = gauss_legendre(p + 1, domain_.lo(k), domain_.hi(k));
    mass[k] = Eigen::MatrixXd::Zero(p + 1, p + 1);
    stiff[k] = Eigen::MatrixXd::Zero(p + 1, p + 1);
    Eigen::VectorXd v(p + 1), dv(p + 1);
    for (Eigen::Index q = 0; q < rule.nodes.size(); ++q) {
      legendre_orthonormal_all(p, rule.nodes[q], domain_.lo(k), domain_.hi(k), v, dv);
      mass[k] += rule.weights[q] * v * v.transpose();
      stiff[k] += rule.weights[q] * dv * dv.transpose();
    }
  }
  Eigen::MatrixXd R = Eigen::MatrixXd::Zero(K, K);
  for (int a = 0; a < K; ++a) {
    for (int b = a; b < K; ++b) {
      const MultiIndex& ia = indices_[a];
      const MultiIndex& ib = indices_[b];
      double total = 0.0;
      for (int k = 0; k < d; ++k) {
        double term = stiff[k](ia[k], ib[k]);
        for (int l = 0; l < d && term != 0.0; ++l)
          if (l != k) term *= mass[l](ia[l], ib[l]);
        total += term;
      }
      R(a, b) = total;
      R(b, a) = total;
    }
  }
  if (!include_constant_) {
    Eigen::LLT<Eigen::MatrixXd> llt(R);
    if (llt.info() != Eigen::Success)
      throw std::runtime_error("gram_matrix: R is not positive definite (basis construction error)");
  }
  return R;
}

FeatureMap::FeatureMap(std::shared_ptr<const PolynomialBasis> basis, Eigen::MatrixXd G, bool validate)
    : basis_(std::move(basis)), G_(std::move(G)) {
  if (!basis_) throw std::invalid_argument("FeatureMap: null basis");
  if (G_.rows() != basis_->size())
    throw std::invalid_argument("FeatureMap: G has " + std::to_string(G_.rows()) + " rows, basis has " +
                                std::to_string(basis_->size()) + " functions");
  if (G_.cols() < 1 || G_.cols() > G_.rows())
    throw std::invalid_argument("FeatureMap: need 1 <= m <= K, got m = " + std::to_string(G_.cols()));
  if (validate) {
    const double defect = orthonormality_defect(basis_->gram_matrix());
    if (defect > 1e-8)
      throw std::invalid_argument("FeatureMap: G^T R G deviates from identity by " + std::to_string(defect));
  }
}

Eigen::VectorXd FeatureMap::eval(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  return G_.transpose() * basis_->eval(x);
}

Eigen::MatrixXd FeatureMap::eval_rows(const Eigen::Ref<const Eigen::MatrixXd>& x) const {
  Eigen::MatrixXd out(x.rows(), features());
  for (Eigen::Index i = 0; i < x.rows(); ++i) out.row(i) = eval(x.row(i).transpose()).transpose();
  return out;
}

Eigen::MatrixXd FeatureMap::jacobian(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  return basis_->gradient(x) * G_;
}

double FeatureMap::orthonormality_defect(const Eigen::MatrixXd& R) const {
  const Eigen::MatrixXd C = G_.transpose() * R * G_;
  return (C - Eigen::MatrixXd::Identity(C.rows(), C.cols())).cwiseAbs().maxCoeff();
}

RankDeficientError::RankDeficientError(int rank, int expected)
    : std::runtime_error("coefficient matrix is rank deficient in the R-inner product: numerical rank " +
                         std::to_string(rank) + " < " + std::to_string(expected)),
      rank_(rank) {}

FeatureMap orthonormalize(std::shared_ptr<const PolynomialBasis> basis, const Eigen::MatrixXd& R,
                          const Eigen::MatrixXd& G_raw) {
  const Eigen::Index K = R.rows(), m = G_raw.cols();
  if (G_raw.rows() != K) throw std::invalid_argument("orthonormalize: G_raw row count does not match R");
  if (m < 1 || m > K) throw std::invalid_argument("orthonormalize: need 1 <= m <= K");
  Eigen::LLT<Eigen::MatrixXd> llt(R);
  if (llt.info() != Eigen::Success) throw std::runtime_error("orthonormalize: R is not positive definite");
  // With R = L L^T, R-orthonormality of G is Euclidean orthonormality of L^T G.
  const Eigen::MatrixXd A = llt.matrixU() * G_raw;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
  qr.setThreshold(1e-12);
  const int rank = static_cast<int>(qr.rank());
  if (rank < m) throw RankDeficientError(rank, static_cast<int>(m));
  Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(K, m);
  Eigen::MatrixXd G = llt.matrixU().solve(Q);
  return FeatureMap(std::move(basis), std::move(G));
}

FeatureMap orthonormalize(std::shared_ptr<const PolynomialBasis> basis, const Eigen::MatrixXd& G_raw) {
  const Eigen::MatrixXd R = basis->gram_matrix();
  return orthonormalize(std::move(basis), R, G_raw);
}

Eigen::MatrixXd linear_feature_coefficients(const PolynomialBasis& basis, const Eigen::MatrixXd& W) {
  const int d = basis.dim();
  if (W.rows() != d) throw std::invalid_argument("linear_feature_coefficients: W must have d rows");
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(basis.size(), W.cols());
  for (int k = 0; k < d; ++k) {
    MultiIndex e(d, 0);
    e[k] = 1;
    const int j = basis.index_of(e);
    if (j < 0) throw std::invalid_argument("linear_feature_coefficients: basis lacks degree-1 terms");
    // phi_{e_k}(x) = sqrt(3) * (2 x_k - lo - hi) / (hi - lo)
    const double slope = std::sqrt(3.0) * 2.0 / (basis.domain().hi(k) - basis.domain().lo(k));
    G.row(j) = W.row(k) / slope;
  }
  return G;
}

}  // namespace featlearn
