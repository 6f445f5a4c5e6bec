// Acceptance checks for the primary component. Prints one PASS/FAIL line per
// criterion and exits nonzero if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "featlearn/bench.hpp"
#include "featlearn/cli.hpp"
#include "featlearn/grouped.hpp"
#include "featlearn/io.hpp"
#include "featlearn/losses.hpp"
#include "featlearn/regression.hpp"

using namespace featlearn;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

char buf[512];

template <class... Args>
std::string fmt(const char* f, Args... args) {
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::shared_ptr<const PolynomialBasis> u3_basis() {
  return std::make_shared<const PolynomialBasis>(BoxDomain(8), 2);
}

Eigen::MatrixXd random_orthonormal(int n, int r, std::uint64_t seed) {
  const Eigen::MatrixXd Q =
      Eigen::HouseholderQR<Eigen::MatrixXd>(sample_uniform(BoxDomain(n), n, seed)).householderQ();
  return Q.leftCols(r);
}

FeatureMap random_feature_map(std::shared_ptr<const PolynomialBasis> b, const Eigen::MatrixXd& R, int m,
                              std::uint64_t seed) {
  return orthonormalize(b, R, sample_uniform(BoxDomain(m), b->size(), seed));
}

// Residual of grad after projecting onto the column span of J (SVD based).
double residual_sq(const Eigen::MatrixXd& J, const Eigen::VectorXd& v) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(J, Eigen::ComputeThinU);
  const Eigen::VectorXd& s = svd.singularValues();
  int r = 0;
  while (r < s.size() && s[r] > 1e-12 * s[0]) ++r;
  const Eigen::MatrixXd U = svd.matrixU().leftCols(r);
  return (v - U * (U.transpose() * v)).squaredNorm();
}

// Independent evaluation of J, truncated J and epsilon_m on a tensorized sample.
struct Direct {
  double J = 0.0, Jt = 0.0, eps = 0.0, energy = 0.0;
};
Direct direct_losses(const GradientOracle& o, const FeatureMap& g, const TensorizedSample& s, int m) {
  Direct out;
  const int d = o.d;
  for (int i = 0; i < s.n_x(); ++i) {
    const Eigen::VectorXd x = s.x_points.row(i).transpose();
    Eigen::MatrixXd grads(s.n_y(), d);
    for (int j = 0; j < s.n_y(); ++j) grads.row(j) = o.gradient_x(x, s.y_points.row(j).transpose()).transpose();
    const Eigen::MatrixXd M = grads.transpose() * grads / s.n_y();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(M);
    const Eigen::MatrixXd V = eig.eigenvectors().rightCols(m);  // ascending order: largest m at the right
    for (int k = 0; k < d - m; ++k) out.eps += std::max(eig.eigenvalues()[k], 0.0);
    const Eigen::MatrixXd Jg = g.jacobian(x);
    for (int j = 0; j < s.n_y(); ++j) {
      const Eigen::VectorXd v = grads.row(j).transpose();
      out.J += residual_sq(Jg, v);
      out.Jt += residual_sq(Jg, V * (V.transpose() * v));
      out.energy += v.squaredNorm();
    }
  }
  const double nx = s.n_x(), n = static_cast<double>(s.total_size());
  out.J /= n;
  out.Jt /= n;
  out.energy /= n;
  out.eps /= nx;
  return out;
}

bool close(double a, double b, double rel) { return std::abs(a - b) <= rel * std::max({std::abs(a), std::abs(b), 1e-300}); }

// 1. Exact recovery of u3 with three features.
Outcome exact_recovery() {
  Outcome o;
  ExperimentConfig cfg;  // a = 3, m = 3, n_Y = 5, N_test = 1000
  const GradientOracle u = UaOracle(3).as_oracle();
  for (int n_x : {10, 30, 50}) {
    const std::uint64_t seed = realization_seed(cfg.seed, n_x, 0);
    const auto t0 = std::chrono::steady_clock::now();
    const MethodRun run = run_sur(cfg, n_x, seed);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    const TensorizedSample train =
        build_tensorized(BoxDomain(8), BoxDomain(1), n_x, cfg.n_y, derive_seed(seed, 1));
    const Direct tr = direct_losses(u, run.feature_map, train, 3);
    const PairSample test = latin_hypercube_pairs(BoxDomain(8), BoxDomain(1), cfg.n_test, derive_seed(seed, 4));
    double J_test = 0.0, e_test = 0.0;
    for (int k = 0; k < test.size(); ++k) {
      const Eigen::VectorXd v = u.gradient_x(test.x.row(k).transpose(), test.y.row(k).transpose());
      J_test += residual_sq(run.feature_map.jacobian(test.x.row(k).transpose()), v);
      e_test += v.squaredNorm();
    }
    J_test /= test.size();
    e_test /= test.size();

    const double r_train = tr.J / tr.energy, r_test = J_test / e_test;
    const bool agree = std::abs(run.train.J_hat - tr.J) <= 1e-10 * tr.energy &&
                       std::abs(run.J_test - J_test) <= 1e-10 * e_test;
    const bool ok = tr.J <= 1e-6 * tr.energy && J_test <= 1e-4 * e_test && secs < 60.0 && agree;
    o.pass = o.pass && ok;
    o.detail += fmt("n_X=%d: J/E train %.2e test %.2e, %.1fs; ", n_x, r_train, r_test, secs);
  }
  return o;
}

// 2. Sandwich between J, truncated J and epsilon_m.
Outcome sandwich() {
  Outcome o;
  const GradientOracle u = UaOracle(3).as_oracle();
  auto b = u3_basis();
  const Eigen::MatrixXd R = b->gram_matrix();
  const TensorizedSample s = build_tensorized(BoxDomain(8), BoxDomain(1), 30, 5, 2024);
  double worst_up = -INFINITY, worst_low = -INFINITY, worst_half = -INFINITY, worst_agree = 0.0;
  int count = 0;
  for (int m : {1, 2, 3}) {
    const ConditionalSpectrum sp = estimate_conditional_spectrum(u, s, m);
    const double eps = epsilon_m(sp);
    for (int t = 0; t < 50; ++t, ++count) {
      const FeatureMap g = random_feature_map(b, R, m, 7000 + 100 * m + t);
      const LossReport r = evaluate_losses(u, g, s, sp);
      const Direct d = direct_losses(u, g, s, m);
      worst_agree = std::max({worst_agree, std::abs(r.J_hat - d.J) / d.energy, std::abs(r.J_trunc_hat - d.Jt) / d.energy,
                              std::abs(eps - d.eps) / d.energy});
      const double scale = r.J_hat + eps;
      worst_low = std::max(worst_low, (r.J_trunc_hat - r.J_hat) / scale);
      worst_up = std::max(worst_up, (r.J_hat - r.J_trunc_hat - eps) / scale);
      worst_half = std::max(worst_half, (0.5 * (r.J_trunc_hat + eps) - r.J_hat) / scale);
    }
  }
  o.pass = worst_low <= 1e-9 && worst_up <= 1e-9 && worst_half <= 1e-9 && worst_agree <= 1e-9;
  o.detail = fmt("%d maps, m in {1,2,3}; max violations (rel) lower %.1e upper %.1e half %.1e; oracle gap %.1e",
                 count, worst_low, worst_up, worst_half, worst_agree);
  return o;
}

// 3. The surrogate as a quadratic form with a PSD matrix.
Outcome quadratic_form() {
  Outcome o;
  const GradientOracle u = UaOracle(3).as_oracle();
  auto b = u3_basis();
  const TensorizedSample s = build_tensorized(BoxDomain(8), BoxDomain(1), 30, 5, 31);
  double worst = 0.0, worst_eig = INFINITY;
  for (int m : {2, 3}) {
    const ConditionalSpectrum sp = estimate_conditional_spectrum(u, s, m);
    const SurrogatePencil p = assemble_pencil(sp, s, b);
    for (int t = 0; t < 50; ++t) {
      const FeatureMap g = random_feature_map(b, p.R, m, 3100 + 50 * m + t);
      const double L = loss_L(g, s, sp);
      const double q = p.quadratic_form(g.coefficients());
      worst = std::max(worst, std::abs(L - q) / std::max(std::abs(L), 1e-300));
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(p.H);
    const double norm2 = eig.eigenvalues().cwiseAbs().maxCoeff();
    worst_eig = std::min(worst_eig, eig.eigenvalues().minCoeff() / norm2);
  }
  o.pass = worst <= 1e-8 && worst_eig >= -1e-8;
  o.detail = fmt("100 random G: max rel gap %.2e; min eig(H)/||H|| = %.2e", worst, worst_eig);
  return o;
}

// 4. Projection-norm identity.
Outcome projection_lemma() {
  Outcome o;
  SplitMix64 rng(404);
  double worst = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const int d = 1 + static_cast<int>(rng.below(8));
    const int n = 1 + static_cast<int>(rng.below(d));
    const int m = 1 + static_cast<int>(rng.below(d));
    const LemmaSides s =
        projection_norm_lemma_check(random_orthonormal(d, n, 2 * t + 11), random_orthonormal(d, m, 2 * t + 12));
    worst = std::max(worst, std::abs(s.lhs - s.rhs));
  }
  o.pass = worst <= 1e-12;
  o.detail = fmt("1000 pairs, d <= 8: max |lhs - rhs| = %.2e", worst);
  return o;
}

// 5. Optimality of the generalized-eigenvector solution.
Outcome generalized_eigen() {
  Outcome o;
  const GradientOracle u = UaOracle(3).as_oracle();
  auto b = u3_basis();
  const TensorizedSample s = build_tensorized(BoxDomain(8), BoxDomain(1), 30, 5, 55);
  double worst_gap = 0.0, worst_margin = INFINITY;
  for (int m : {1, 2, 3}) {
    const SurrogatePencil p = assemble_pencil(u, s, b, m);
    const SurrogateSolution sol = minimize_surrogate(p);
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ges(p.H, p.R);
    const double ref = ges.eigenvalues().head(m).sum();
    worst_gap = std::max(worst_gap, std::abs(sol.objective - ref) / std::max(1.0, std::abs(ref)));
    for (int t = 0; t < 100; ++t) {
      const FeatureMap g = random_feature_map(b, p.R, m, 5500 + 100 * m + t);
      worst_margin = std::min(worst_margin, p.quadratic_form(g.coefficients()) - sol.objective);
    }
  }
  o.pass = worst_gap <= 1e-10 && worst_margin >= 0.0;
  o.detail = fmt("m in {1,2,3}, 100 competitors each: min margin %.3e; |objective - sum of eigenvalues| %.2e",
                 worst_margin, worst_gap);
  return o;
}

// 6. Grouped J splits into per-group collective losses.
Outcome grouped_decomposition() {
  Outcome o;
  // u3 at a fixed y, as a function of x alone.
  const UaOracle ua(3);
  GradientOracle u;
  u.d = 8;
  u.d_y = 0;
  u.value = [ua](const Eigen::VectorXd& x, const Eigen::VectorXd&) { return ua.value(x, 0.7); };
  u.gradient_x = [ua](const Eigen::VectorXd& x, const Eigen::VectorXd&) { return ua.gradient(x, 0.7); };

  const std::vector<std::pair<GroupPartition, std::vector<int>>> cases = {
      {GroupPartition(8, {{0, 1, 2, 3}, {4, 5, 6, 7}}), {12, 12}},
      {GroupPartition(8, {{0, 3, 6}, {1, 4, 7}, {2, 5}}), {5, 5, 5}},
      {GroupPartition(8, {{0, 1}, {2, 3}, {4, 5}, {6, 7}}), {3, 3, 3, 3}},
  };
  double worst = 0.0;
  std::uint64_t seed = 600;
  for (const auto& [part, sizes] : cases) {
    std::vector<FeatureMap> maps;
    for (int k = 0; k < part.size(); ++k) {
      const int dk = static_cast<int>(part.groups[k].size());
      auto b = std::make_shared<const PolynomialBasis>(BoxDomain(dk), 2);
      maps.push_back(random_feature_map(b, b->gram_matrix(), 1 + (k % std::max(1, dk - 1)), ++seed));
    }
    const GridSample grid = build_grid(part, BoxDomain(8), sizes, ++seed);

    // Independent evaluation of both sides.
    double total = 0.0, sum = 0.0;
    for (Eigen::Index p = 0; p < grid.size(); ++p) {
      const Eigen::VectorXd x = grid.point(part, p);
      const Eigen::VectorXd v = u.gradient_x(x, Eigen::VectorXd());
      int cols = 0;
      for (const auto& mp : maps) cols += mp.features();
      Eigen::MatrixXd J = Eigen::MatrixXd::Zero(8, cols);
      int c0 = 0;
      for (int k = 0; k < part.size(); ++k) {
        const auto& grp = part.groups[k];
        Eigen::VectorXd xk(grp.size()), vk(grp.size());
        for (std::size_t c = 0; c < grp.size(); ++c) {
          xk[c] = x[grp[c]];
          vk[c] = v[grp[c]];
        }
        const Eigen::MatrixXd Jk = maps[k].jacobian(xk);
        for (std::size_t c = 0; c < grp.size(); ++c) J.row(grp[c]).segment(c0, Jk.cols()) = Jk.row(c);
        c0 += static_cast<int>(Jk.cols());
        sum += residual_sq(Jk, vk);
      }
      total += residual_sq(J, v);
    }
    total /= grid.size();
    sum /= grid.size();
    const GroupedLoss gl = loss_J_grouped(u, part, maps, grid);
    const double lib_sum = std::accumulate(gl.per_group.begin(), gl.per_group.end(), 0.0);
    worst = std::max({worst, std::abs(total - sum) / total, std::abs(gl.total - lib_sum) / gl.total,
                      std::abs(gl.total - total) / total});
  }
  o.pass = worst <= 1e-10;
  o.detail = fmt("N in {2,3,4}: max relative gap %.2e", worst);
  return o;
}

// 7. SVD truncation identity and HOSVD near-optimality.
Outcome svd_and_hosvd() {
  Outcome o;
  SplitMix64 rng(77);
  double worst = 0.0;
  std::vector<std::pair<int, int>> shapes = {{50, 50}, {1, 50}, {50, 1}, {20, 35}};
  for (int t = 0; t < 26; ++t)
    shapes.emplace_back(1 + static_cast<int>(rng.below(50)), 1 + static_cast<int>(rng.below(50)));
  int idx = 0;
  for (const auto& [r, c] : shapes) {
    const Eigen::MatrixXd A = sample_uniform(BoxDomain(c), r, 700 + idx++);
    const Eigen::VectorXd sv = Eigen::JacobiSVD<Eigen::MatrixXd>(A).singularValues();
    for (int m = 1; m <= std::min(r, c); m += std::max(1, std::min(r, c) / 5)) {
      const SvdReduction red = two_group_svd(A, m);
      const double tail = sv.tail(sv.size() - m).squaredNorm();
      const double err = (A - red.reconstruction()).squaredNorm();
      worst = std::max(worst, std::abs(err - tail) / A.squaredNorm());
    }
  }

  double worst_margin = INFINITY;
  int checked = 0;
  const std::vector<std::vector<int>> rank_sets = {{1, 1, 1}, {2, 2, 2}, {1, 2, 3}, {3, 3, 3}, {2, 3, 1}};
  for (int t = 0; t < 10; ++t) {
    CoefficientTensor T({4, 4, 4});
    for (Eigen::Index i = 0; i < T.numel(); ++i) T.data[i] = 2.0 * rng.uniform() - 1.0;
    const auto& ranks = rank_sets[t % rank_sets.size()];
    std::vector<std::vector<Eigen::MatrixXd>> cands;
    for (int c = 0; c < 100; ++c) {
      std::vector<Eigen::MatrixXd> f;
      for (int k = 0; k < 3; ++k) f.push_back(random_orthonormal(4, ranks[k], 90000 + 1000 * t + 3 * c + k));
      cands.push_back(f);
    }
    const double r2 = 0.05 * t;
    const NearOptimalityReport rep = hosvd_near_optimality_check(T, ranks, cands, r2);
    // Recompute the margins from scratch.
    const double e_h = r2 + multilinear_error_sq(T, hosvd(T, ranks).factors);
    for (const auto& f : cands) {
      const double e_g = r2 + multilinear_error_sq(T, f);
      worst_margin = std::min(worst_margin, 3 * e_g - 2 * r2 - e_h);
      ++checked;
    }
    o.pass = o.pass && rep.all_pass;
  }
  o.pass = o.pass && worst <= 1e-10 && worst_margin >= 0.0;
  o.detail = fmt("SVD: max |error - tail| / ||A||^2 = %.2e on %zu matrices up to 50x50; HOSVD: %d candidates, "
                 "min margin %.3e",
                 worst, shapes.size(), checked, worst_margin);
  return o;
}

// 8. Small-deviation bound on rescaled u3.
Outcome deviation_bound() {
  Outcome o;
  const UaOracle ua(3);
  const GradientOracle u = scale_oracle(ua.as_oracle(), 1.0 / ua.sup_grad_bound());
  auto b = u3_basis();
  const Eigen::MatrixXd R = b->gram_matrix();
  const TensorizedSample s = build_tensorized(BoxDomain(8), BoxDomain(1), 30, 5, 808);
  const ConditionalSpectrum sp = estimate_conditional_spectrum(u, s, 2);
  double worst_ratio = 0.0;
  for (int t = 0; t < 20; ++t) {
    const FeatureMap g = random_feature_map(b, R, 2, 8000 + t);
    const DeviationBound r = deviation_bound_check(u, g, s, sp, 1, 1001, 8100 + t);
    worst_ratio = std::max(worst_ratio, r.J_trunc / r.bound_rhs);
    o.pass = o.pass && r.J_trunc <= r.bound_rhs;
  }
  o.detail = fmt("20 random degree-2 maps, m = 2: max J_trunc / bound = %.3e", worst_ratio);
  return o;
}

// 9. Feature-rank example.
Outcome feature_rank() {
  Outcome o;
  const FeatureRankDemo demo = feature_rank_demo();
  o.pass = demo.all_pass && demo.entries.size() == 3 && demo.entries[0].expect_zero &&
           demo.entries[0].epsilon <= 1e-8 && !demo.entries[1].expect_zero && !demo.entries[2].expect_zero;
  for (const auto& e : demo.entries)
    o.detail += fmt("%.3e (%s %.0e); ", e.epsilon, e.expect_zero ? "<=" : ">", e.threshold);
  return o;
}

// 10. Kernel ridge regression.
Outcome krr() {
  Outcome o;
  double worst = 0.0;
  for (std::uint64_t seed : {1, 2, 3}) {
    const Eigen::MatrixXd Z = sample_uniform(BoxDomain(4), 50, seed);
    Eigen::VectorXd y(50);
    for (int i = 0; i < 50; ++i) y[i] = std::cos(Z(i, 0) + 2 * Z(i, 1)) + Z(i, 2) * Z(i, 3);
    const KrrModel m = krr_fit(Z, y, 1.0, 1e-11);
    worst = std::max(worst, (krr_predict(m, Z) - y).norm() / y.norm());
  }
  const auto g = default_gamma_grid();
  const auto a = default_alpha_grid();
  auto log_uniform = [](const std::vector<double>& v, double lo, double hi) {
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double expected = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(v.size() - 1);
      if (std::abs(std::log10(v[i]) - expected) > 1e-12) return false;
    }
    return true;
  };
  const bool grids = g.size() == 30 && a.size() == 40 && log_uniform(g, -6, -2) && log_uniform(a, -11, -5) &&
                     close(g.front(), 1e-6, 1e-14) && close(g.back(), 1e-2, 1e-14) && close(a.front(), 1e-11, 1e-14) &&
                     close(a.back(), 1e-5, 1e-14);
  o.pass = worst <= 1e-4 && grids;
  o.detail = fmt("interpolation rel RMS %.2e at alpha=1e-11; grids 30 gamma on [1e-6,1e-2], 40 alpha on [1e-11,1e-5]: %s",
                 worst, grids ? "ok" : "mismatch");
  return o;
}

// 11. Byte-identical bench output for identical configs.
Outcome determinism() {
  Outcome o;
  const fs::path root = fs::temp_directory_path() / "featlearn_acceptance_determinism";
  fs::remove_all(root);
  fs::create_directories(root);
  const std::string cfg = (root / "bench.json").string();
  std::ofstream(cfg) << R"({"a": 3, "m": 3, "n_Y": 5, "n_X": [10, 30], "N_test": 200, "realizations": 3,
                            "baseline_max_iter": 20, "seed": 11, "threads": 0})";
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  std::ostringstream sink;
  bool same = true;
  std::size_t bytes = 0;
  for (int run = 0; run < 2; ++run) {
    cli::CommonOptions opt;
    opt.config_path = cfg;
    opt.out = (root / ("run" + std::to_string(run))).string();
    if (cli::cmd_bench(opt, sink, sink) != cli::kExitOk) same = false;
  }
  for (const char* f : {"results.csv", "quantiles.csv"}) {
    const std::string a = slurp(root / "run0" / f), b = slurp(root / "run1" / f);
    same = same && !a.empty() && a == b;
    bytes += a.size();
  }
  fs::remove_all(root);
  o.pass = same;
  o.detail = fmt("two runs, 12 rows, all threads: %s (%zu bytes compared)", same ? "identical" : "DIFFERENT", bytes);
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"exact recovery of u3 by SUR", exact_recovery},
      {"sandwich J_m <= J <= J_m + eps_m", sandwich},
      {"surrogate equals trace(G^T H G), H PSD", quadratic_form},
      {"projection-norm identity", projection_lemma},
      {"generalized-eigenproblem optimality", generalized_eigen},
      {"grouped J decomposition", grouped_decomposition},
      {"SVD tail identity and HOSVD near-optimality", svd_and_hosvd},
      {"small-deviation bound", deviation_bound},
      {"feature-rank example", feature_rank},
      {"KRR interpolation and default grids", krr},
      {"bench determinism", determinism},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome out;
    try {
      out = criteria[i].second();
    } catch (const std::exception& e) {
      out.pass = false;
      out.detail = std::string("exception: ") + e.what();
    }
    failures += out.pass ? 0 : 1;
    std::printf("[%s] %zu. %s: %s\n", out.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, out.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
