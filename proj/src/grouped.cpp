#include "featlearn/grouped.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

#include <Eigen/SVD>

#include "featlearn/losses.hpp"

namespace featlearn {

namespace {

Eigen::Index product(const std::vector<int>& dims) {
  Eigen::Index p = 1;
  for (int v : dims) p *= v;
  return p;
}

std::vector<int> decode(Eigen::Index flat, const std::vector<int>& dims) {
  std::vector<int> idx(dims.size());
  for (int k = static_cast<int>(dims.size()) - 1; k >= 0; --k) {
    idx[k] = static_cast<int>(flat % dims[k]);
    flat /= dims[k];
  }
  return idx;
}

// Row-major offset of idx restricted to `modes`.
Eigen::Index offset(const std::vector<int>& idx, const std::vector<int>& dims, const std::vector<int>& modes) {
  Eigen::Index off = 0;
  for (int k : modes) off = off * dims[k] + idx[k];
  return off;
}

std::vector<int> other_modes(int order, const std::vector<int>& modes) {
  std::vector<int> rest;
  for (int k = 0; k < order; ++k)
    if (std::find(modes.begin(), modes.end(), k) == modes.end()) rest.push_back(k);
  return rest;
}

void check_ranks(const CoefficientTensor& T, const std::vector<int>& ranks) {
  if (static_cast<int>(ranks.size()) != T.order())
    throw std::invalid_argument("hosvd: need one rank per mode");
  for (int k = 0; k < T.order(); ++k)
    if (ranks[k] < 1 || ranks[k] > T.dims[k])
      throw std::invalid_argument("hosvd: rank " + std::to_string(ranks[k]) + " invalid for mode " +
                                  std::to_string(k) + " of size " + std::to_string(T.dims[k]));
}

// Leading left singular vectors of the mode unfolding, plus the discarded energy.
std::pair<Eigen::MatrixXd, double> mode_factor(const CoefficientTensor& T, int mode, int rank) {
  const Eigen::MatrixXd A = unfold(T, mode);
  Eigen::BDCSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeThinU);
  const Eigen::VectorXd& s = svd.singularValues();
  const double tail = s.size() > rank ? s.tail(s.size() - rank).squaredNorm() : 0.0;
  Eigen::MatrixXd U = Eigen::MatrixXd::Zero(A.rows(), rank);
  const Eigen::Index avail = std::min<Eigen::Index>(rank, svd.matrixU().cols());
  U.leftCols(avail) = svd.matrixU().leftCols(avail);
  if (avail < rank) {
    // Fewer columns than rows in the unfolding: complete the basis.
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(U.leftCols(avail));
    const Eigen::MatrixXd Q = qr.householderQ();
    U.rightCols(rank - avail) = Q.middleCols(avail, rank - avail);
  }
  return {U, tail};
}

}  // namespace

GroupPartition::GroupPartition(int d_, std::vector<std::vector<int>> groups_) : d(d_), groups(std::move(groups_)) {
  if (d < 1) throw std::invalid_argument("GroupPartition: d must be >= 1");
  if (groups.size() < 2) throw std::invalid_argument("GroupPartition: need at least two groups");
  std::vector<int> seen(d, 0);
  for (auto& g : groups) {
    if (g.empty()) throw std::invalid_argument("GroupPartition: empty group");
    std::sort(g.begin(), g.end());
    for (int c : g) {
      if (c < 0 || c >= d) throw std::invalid_argument("GroupPartition: coordinate out of range");
      if (seen[c]++) throw std::invalid_argument("GroupPartition: groups overlap on coordinate " + std::to_string(c));
    }
  }
  for (int c = 0; c < d; ++c)
    if (!seen[c]) throw std::invalid_argument("GroupPartition: coordinate " + std::to_string(c) + " not covered");
}

std::vector<int> GroupPartition::complement(int k) const {
  std::vector<int> rest;
  for (int c = 0; c < d; ++c)
    if (std::find(groups[k].begin(), groups[k].end(), c) == groups[k].end()) rest.push_back(c);
  return rest;
}

CoefficientTensor::CoefficientTensor(std::vector<int> dims_) : dims(std::move(dims_)) {
  for (int v : dims)
    if (v < 1) throw std::invalid_argument("CoefficientTensor: every dimension must be >= 1");
  data = Eigen::VectorXd::Zero(product(dims));
}

Eigen::Index CoefficientTensor::flat_index(const std::vector<int>& idx) const {
  if (idx.size() != dims.size()) throw std::invalid_argument("CoefficientTensor: index order mismatch");
  Eigen::Index off = 0;
  for (std::size_t k = 0; k < dims.size(); ++k) {
    if (idx[k] < 0 || idx[k] >= dims[k]) throw std::out_of_range("CoefficientTensor: index out of range");
    off = off * dims[k] + idx[k];
  }
  return off;
}

Eigen::MatrixXd matricize(const CoefficientTensor& T, const std::vector<int>& row_modes) {
  std::vector<int> rows_m = row_modes;
  std::sort(rows_m.begin(), rows_m.end());
  for (int k : rows_m)
    if (k < 0 || k >= T.order()) throw std::invalid_argument("matricize: mode out of range");
  const std::vector<int> cols_m = other_modes(T.order(), rows_m);
  Eigen::Index nr = 1, nc = 1;
  for (int k : rows_m) nr *= T.dims[k];
  for (int k : cols_m) nc *= T.dims[k];
  Eigen::MatrixXd M(nr, nc);
  for (Eigen::Index f = 0; f < T.numel(); ++f) {
    const std::vector<int> idx = decode(f, T.dims);
    M(offset(idx, T.dims, rows_m), offset(idx, T.dims, cols_m)) = T.data[f];
  }
  return M;
}

Eigen::MatrixXd unfold(const CoefficientTensor& T, int mode) { return matricize(T, {mode}); }

CoefficientTensor fold(const Eigen::MatrixXd& M, const std::vector<int>& dims, int mode) {
  CoefficientTensor T(dims);
  if (M.rows() != dims[mode] || M.cols() * M.rows() != T.numel())
    throw std::invalid_argument("fold: matrix shape does not match the dimensions");
  const std::vector<int> cols_m = other_modes(static_cast<int>(dims.size()), {mode});
  for (Eigen::Index f = 0; f < T.numel(); ++f) {
    const std::vector<int> idx = decode(f, dims);
    T.data[f] = M(idx[mode], offset(idx, dims, cols_m));
  }
  return T;
}

CoefficientTensor mode_product(const CoefficientTensor& T, const Eigen::MatrixXd& M, int mode) {
  if (mode < 0 || mode >= T.order()) throw std::invalid_argument("mode_product: mode out of range");
  if (M.cols() != T.dims[mode]) throw std::invalid_argument("mode_product: matrix columns != mode size");
  std::vector<int> dims = T.dims;
  dims[mode] = static_cast<int>(M.rows());
  CoefficientTensor out = fold(M * unfold(T, mode), dims, mode);
  out.labels = T.labels;
  out.basis = T.basis;
  return out;
}

namespace {

// Calls visit(x, weight) on every node of the tensorized Gauss-Legendre grid.
template <typename Visit>
void for_each_node(const BoxDomain& domain, int nodes, Visit&& visit) {
  const int d = domain.dim();
  std::vector<QuadratureRule> rules;
  for (int k = 0; k < d; ++k) rules.push_back(gauss_legendre(nodes, domain.lo(k), domain.hi(k)));
  std::vector<int> pos(d, 0);
  Eigen::VectorXd x(d);
  while (true) {
    double w = 1.0;
    for (int k = 0; k < d; ++k) {
      x[k] = rules[k].nodes[pos[k]];
      w *= rules[k].weights[pos[k]];
    }
    visit(x, w);
    int k = d - 1;
    while (k >= 0 && ++pos[k] == nodes) pos[k--] = 0;
    if (k < 0) break;
  }
}

std::vector<PolynomialBasis> group_bases(const GroupPartition& partition, const BoxDomain& domain,
                                         const std::vector<int>& degrees) {
  if (static_cast<int>(degrees.size()) != partition.size())
    throw std::invalid_argument("project_coefficients: need one degree per group");
  std::vector<PolynomialBasis> bases;
  for (int k = 0; k < partition.size(); ++k)
    bases.emplace_back(domain.restrict_to(partition.groups[k]), degrees[k], true);
  return bases;
}

Eigen::VectorXd gather(const Eigen::VectorXd& x, const std::vector<int>& coords) {
  Eigen::VectorXd out(coords.size());
  for (std::size_t k = 0; k < coords.size(); ++k) out[k] = x[coords[k]];
  return out;
}

// Adds scale * (v_1 outer ... outer v_N) to T.
void add_outer(CoefficientTensor& T, const std::vector<Eigen::VectorXd>& v, double scale) {
  for (Eigen::Index f = 0; f < T.numel(); ++f) {
    const std::vector<int> idx = decode(f, T.dims);
    double p = scale;
    for (std::size_t k = 0; k < v.size() && p != 0.0; ++k) p *= v[k][idx[k]];
    T.data[f] += p;
  }
}

}  // namespace

CoefficientTensor project_coefficients(const ScalarField& u, const GroupPartition& partition,
                                       const BoxDomain& domain, const std::vector<int>& degrees, int nodes) {
  if (domain.dim() != partition.d) throw std::invalid_argument("project_coefficients: domain dimension mismatch");
  if (nodes < 1) throw std::invalid_argument("project_coefficients: nodes must be >= 1");
  const std::vector<PolynomialBasis> bases = group_bases(partition, domain, degrees);
  std::vector<int> dims;
  for (const auto& b : bases) dims.push_back(b.size());
  CoefficientTensor T(dims);
  T.degrees = degrees;
  std::vector<Eigen::VectorXd> vals(bases.size());
  for_each_node(domain, nodes, [&](const Eigen::VectorXd& x, double w) {
    const double ux = u(x);
    if (ux == 0.0) return;
    for (std::size_t k = 0; k < bases.size(); ++k) vals[k] = bases[k].eval(gather(x, partition.groups[k]));
    add_outer(T, vals, w * ux);
  });
  return T;
}

double mean_square(const ScalarField& u, const BoxDomain& domain, int nodes) {
  double total = 0.0;
  for_each_node(domain, nodes, [&](const Eigen::VectorXd& x, double w) {
    const double v = u(x);
    total += w * v * v;
  });
  return total;
}

double evaluate_expansion(const CoefficientTensor& T, const GroupPartition& partition, const BoxDomain& domain,
                          const Eigen::VectorXd& x) {
  if (T.degrees.size() != static_cast<std::size_t>(partition.size()))
    throw std::invalid_argument("evaluate_expansion: tensor lacks per-group degrees");
  const std::vector<PolynomialBasis> bases = group_bases(partition, domain, T.degrees);
  std::vector<Eigen::VectorXd> vals;
  for (int k = 0; k < partition.size(); ++k) vals.push_back(bases[k].eval(gather(x, partition.groups[k])));
  double total = 0.0;
  for (Eigen::Index f = 0; f < T.numel(); ++f) {
    const std::vector<int> idx = decode(f, T.dims);
    double p = T.data[f];
    for (std::size_t k = 0; k < vals.size(); ++k) p *= vals[k][idx[k]];
    total += p;
  }
  return total;
}

Eigen::MatrixXd SvdReduction::reconstruction() const {
  return left_vectors * singular_values.asDiagonal() * right_vectors.transpose();
}

SvdReduction two_group_svd(const Eigen::MatrixXd& A, int m) {
  const Eigen::Index k = std::min(A.rows(), A.cols());
  if (m < 1 || m > k)
    throw std::invalid_argument("two_group_svd: m = " + std::to_string(m) + " must be in [1, " +
                                std::to_string(k) + "]");
  Eigen::BDCSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  SvdReduction r;
  r.all_singular_values = svd.singularValues();
  r.singular_values = r.all_singular_values.head(m);
  r.left_vectors = svd.matrixU().leftCols(m);
  r.right_vectors = svd.matrixV().leftCols(m);
  r.tail_energy = r.all_singular_values.tail(k - m).squaredNorm();
  return r;
}

double bilinear_error(const Eigen::MatrixXd& A, int m, double full_projection_residual) {
  if (full_projection_residual < 0.0) throw std::invalid_argument("bilinear_error: negative residual");
  return full_projection_residual + two_group_svd(A, m).tail_energy;
}

CoefficientTensor multilinear_reconstruction(const CoefficientTensor& T, const std::vector<Eigen::MatrixXd>& factors) {
  if (static_cast<int>(factors.size()) != T.order())
    throw std::invalid_argument("multilinear_reconstruction: need one factor per mode");
  CoefficientTensor out = T;
  for (int k = 0; k < T.order(); ++k) {
    if (factors[k].rows() != T.dims[k])
      throw std::invalid_argument("multilinear_reconstruction: factor rows != mode size");
    out = mode_product(out, factors[k] * factors[k].transpose(), k);
  }
  return out;
}

double multilinear_error_sq(const CoefficientTensor& T, const std::vector<Eigen::MatrixXd>& factors) {
  return (T.data - multilinear_reconstruction(T, factors).data).squaredNorm();
}

HosvdResult hosvd(const CoefficientTensor& T, const std::vector<int>& ranks) {
  check_ranks(T, ranks);
  HosvdResult r;
  for (int k = 0; k < T.order(); ++k) {
    auto [U, tail] = mode_factor(T, k, ranks[k]);
    r.factors.push_back(std::move(U));
    r.mode_tail_energy.push_back(tail);
  }
  r.core = T;
  for (int k = 0; k < T.order(); ++k) r.core = mode_product(r.core, r.factors[k].transpose(), k);
  CoefficientTensor recon = r.core;
  for (int k = 0; k < T.order(); ++k) recon = mode_product(recon, r.factors[k], k);
  r.error_sq = (T.data - recon.data).squaredNorm();
  return r;
}

NearOptimalityReport hosvd_near_optimality_check(const CoefficientTensor& T, const std::vector<int>& ranks,
                                                 const std::vector<std::vector<Eigen::MatrixXd>>& candidates,
                                                 double residual_sq) {
  const HosvdResult h = hosvd(T, ranks);
  const double N = T.order();
  const double tol = 1e-12 * std::max(T.norm_squared(), 1e-300);
  NearOptimalityReport rep;
  rep.hosvd_error_sq = h.error_sq;
  rep.worst_margin = std::numeric_limits<double>::infinity();
  for (const auto& cand : candidates) {
    if (static_cast<int>(cand.size()) != T.order())
      throw std::invalid_argument("hosvd_near_optimality_check: candidate needs one factor per mode");
    for (int k = 0; k < T.order(); ++k) {
      const Eigen::MatrixXd& U = cand[k];
      if (U.rows() != T.dims[k] || U.cols() != ranks[k])
        throw std::invalid_argument("hosvd_near_optimality_check: candidate factor has the wrong shape");
      if ((U.transpose() * U - Eigen::MatrixXd::Identity(ranks[k], ranks[k])).cwiseAbs().maxCoeff() > 1e-10)
        throw std::invalid_argument("hosvd_near_optimality_check: candidate factor is not orthonormal");
    }
    const double cand_err = residual_sq + multilinear_error_sq(T, cand);
    const double margin = N * cand_err - (N - 1.0) * residual_sq - (residual_sq + h.error_sq);
    rep.margins.push_back(margin);
    rep.worst_margin = std::min(rep.worst_margin, margin);
    if (margin < -tol) rep.all_pass = false;
  }
  if (candidates.empty()) rep.worst_margin = 0.0;
  return rep;
}

Eigen::Index GridSample::size() const {
  Eigen::Index n = group_points.empty() ? 0 : 1;
  for (const auto& p : group_points) n *= p.rows();
  return n;
}

Eigen::VectorXd GridSample::point(const GroupPartition& partition, Eigen::Index flat) const {
  Eigen::VectorXd x(partition.d);
  for (int k = partition.size() - 1; k >= 0; --k) {
    const Eigen::Index n = group_points[k].rows();
    const Eigen::Index i = flat % n;
    flat /= n;
    for (std::size_t c = 0; c < partition.groups[k].size(); ++c)
      x[partition.groups[k][c]] = group_points[k](i, static_cast<Eigen::Index>(c));
  }
  return x;
}

GridSample build_grid(const GroupPartition& partition, const BoxDomain& domain, const std::vector<int>& n_per_group,
                      std::uint64_t seed) {
  if (static_cast<int>(n_per_group.size()) != partition.size())
    throw std::invalid_argument("build_grid: need one sample size per group");
  GridSample grid;
  for (int k = 0; k < partition.size(); ++k)
    grid.group_points.push_back(
        latin_hypercube(domain.restrict_to(partition.groups[k]), n_per_group[k], derive_seed(seed, 100 + k)));
  return grid;
}

GradientOracle restrict_to_group(const GradientOracle& oracle, const GroupPartition& partition, int k) {
  const std::vector<int> own = partition.groups.at(k);
  const std::vector<int> rest = partition.complement(k);
  const int d = partition.d;
  auto assemble = [own, rest, d](const Eigen::VectorXd& xa, const Eigen::VectorXd& y) {
    Eigen::VectorXd x(d);
    for (std::size_t c = 0; c < own.size(); ++c) x[own[c]] = xa[c];
    for (std::size_t c = 0; c < rest.size(); ++c) x[rest[c]] = y[c];
    return x;
  };
  GradientOracle out;
  out.d = static_cast<int>(own.size());
  out.d_y = static_cast<int>(rest.size());
  const Eigen::VectorXd none;
  out.value = [f = oracle.value, assemble, none](const Eigen::VectorXd& xa, const Eigen::VectorXd& y) {
    return f(assemble(xa, y), none);
  };
  out.gradient_x = [g = oracle.gradient_x, assemble, own, none](const Eigen::VectorXd& xa, const Eigen::VectorXd& y) {
    return gather(g(assemble(xa, y), none), own);
  };
  out.sup_grad_bound = oracle.sup_grad_bound;
  return out;
}

GroupedLoss loss_J_grouped(const GradientOracle& oracle, const GroupPartition& partition,
                           const std::vector<FeatureMap>& maps, const GridSample& grid) {
  if (oracle.d != partition.d) throw std::invalid_argument("loss_J_grouped: oracle dimension != partition");
  if (oracle.d_y != 0) throw std::invalid_argument("loss_J_grouped: oracle must depend on x only");
  if (static_cast<int>(maps.size()) != partition.size() ||
      static_cast<int>(grid.group_points.size()) != partition.size())
    throw std::invalid_argument("loss_J_grouped: need one feature map and one point set per group");
  int total_m = 0;
  for (int k = 0; k < partition.size(); ++k) {
    if (maps[k].input_dim() != static_cast<int>(partition.groups[k].size()) ||
        grid.group_points[k].cols() != static_cast<Eigen::Index>(partition.groups[k].size()))
      throw std::invalid_argument("loss_J_grouped: partition mismatch on group " + std::to_string(k));
    total_m += maps[k].features();
  }

  const Eigen::Index n = grid.size();
  const Eigen::VectorXd none;
  Eigen::MatrixXd xs(n, partition.d), grads(n, partition.d);
  for (Eigen::Index p = 0; p < n; ++p) {
    xs.row(p) = grid.point(partition, p).transpose();
    grads.row(p) = oracle.gradient_x(xs.row(p).transpose(), none).transpose();
  }

  // Route 1: full block-diagonal Jacobian.
  GroupedLoss out;
  for (Eigen::Index p = 0; p < n; ++p) {
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(partition.d, total_m);
    int col = 0;
    for (int k = 0; k < partition.size(); ++k) {
      const auto& grp = partition.groups[k];
      const Eigen::MatrixXd Jk = maps[k].jacobian(gather(xs.row(p).transpose(), grp));
      for (std::size_t c = 0; c < grp.size(); ++c) J.row(grp[c]).segment(col, Jk.cols()) = Jk.row(c);
      col += static_cast<int>(Jk.cols());
    }
    const Eigen::MatrixXd Q = orthonormal_range(J);
    const Eigen::VectorXd b = grads.row(p).transpose();
    out.total += (b - Q * (Q.transpose() * b)).squaredNorm();
  }
  out.total /= static_cast<double>(n);

  // Route 2: one collective loss per group.
  for (int k = 0; k < partition.size(); ++k) {
    const auto& own = partition.groups[k];
    const std::vector<int> rest = partition.complement(k);
    PairSample pairs{Eigen::MatrixXd(n, own.size()), Eigen::MatrixXd(n, rest.size())};
    for (Eigen::Index p = 0; p < n; ++p) {
      pairs.x.row(p) = gather(xs.row(p).transpose(), own).transpose();
      pairs.y.row(p) = gather(xs.row(p).transpose(), rest).transpose();
    }
    out.per_group.push_back(loss_J(restrict_to_group(oracle, partition, k), maps[k], pairs));
  }

  const double sum = std::accumulate(out.per_group.begin(), out.per_group.end(), 0.0);
  out.identity_gap = std::abs(out.total - sum);
  const double scale = std::max(std::abs(out.total), 1e-8 * gradient_energy(grads));
  if (out.identity_gap > 1e-10 * scale && out.identity_gap > 1e-300)
    throw std::logic_error("loss_J_grouped: block decomposition identity violated");
  return out;
}

}  // namespace featlearn
