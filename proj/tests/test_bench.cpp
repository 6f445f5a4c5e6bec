#include "doctest.h"

#include <cmath>

#include "featlearn/bench.hpp"

using namespace featlearn;

namespace {

ExperimentConfig small_config() {
  ExperimentConfig cfg;
  cfg.n_x = {10};
  cfg.realizations = 2;
  cfg.n_test = 100;
  cfg.cv_folds = 5;
  cfg.gamma_grid = {1e-3, 1e-2};
  cfg.alpha_grid = {1e-8, 1e-6};
  cfg.baseline_max_iter = 5;
  return cfg;
}

bool same(double a, double b) { return (std::isnan(a) && std::isnan(b)) || a == b; }

}  // namespace

TEST_CASE("banded matrices Q_k") {
  CHECK(ua_matrix(1, 4) == Eigen::MatrixXd::Identity(4, 4));
  const Eigen::MatrixXd Q2 = ua_matrix(2, 4);
  Eigen::MatrixXd expected = Eigen::MatrixXd::Zero(4, 4);
  for (int i = 0; i + 1 < 4; ++i) expected(i, i + 1) = expected(i + 1, i) = 0.5;
  CHECK(Q2 == expected);
  const Eigen::MatrixXd Q3 = ua_matrix(3, 4);
  CHECK(Q3(0, 2) == 0.5);
  CHECK(Q3(3, 1) == 0.5);
  CHECK(Q3.cwiseAbs().sum() == doctest::Approx(2.0));
}

TEST_CASE("u_a values") {
  const UaOracle u1(1), u3(3);
  CHECK(u3.value(Eigen::VectorXd::Zero(8), 0.4) == 0.0);
  CHECK(u3.gradient(Eigen::VectorXd::Zero(8), 0.4).norm() == 0.0);
  const Eigen::VectorXd x = sample_uniform(BoxDomain(8), 1, 3).row(0).transpose();
  CHECK(u1.value(x, 1.0) == doctest::Approx(std::pow(x.squaredNorm(), 2)).epsilon(1e-14));
  CHECK(u1.value(x, 0.0) == 0.0);
  CHECK(u3.sup_grad_bound() == doctest::Approx(4.0 * 3 * std::pow(8.0, 1.5)));
}

TEST_CASE("u_a gradients match finite differences and respect the sup bound") {
  for (int a : {1, 2, 3}) {
    const UaOracle ua(a);
    const GradientOracle o = ua.as_oracle();
    CHECK(o.d == 8);
    CHECK(o.d_y == 1);
    CHECK(gradient_check(o, BoxDomain(8), BoxDomain(1), 100, a) <= 1e-5);
    const PairSample p = build_tensorized(BoxDomain(8), BoxDomain(1), 100, 5, a).expand();
    CHECK(pair_gradients(o, p).rowwise().norm().maxCoeff() <= ua.sup_grad_bound());
    CHECK(*o.sup_grad_bound == ua.sup_grad_bound());
  }
}

TEST_CASE("method names round trip") {
  CHECK(method_name(Method::Sur) == "SUR");
  CHECK(method_name(Method::Baseline) == "BASELINE");
  CHECK(parse_method("SUR") == Method::Sur);
  CHECK(parse_method("BASELINE") == Method::Baseline);
  CHECK_THROWS_AS(parse_method("sur2"), std::invalid_argument);
}

TEST_CASE("config validation") {
  ExperimentConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.m = 9;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = ExperimentConfig{};
  cfg.n_x = {1};
  cfg.n_y = 5;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);  // 5 pairs < 10 folds
  cfg = ExperimentConfig{};
  cfg.realizations = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("SUR pipeline recovers u3 with three features") {
  ExperimentConfig cfg;
  cfg.n_test = 300;
  const std::uint64_t seed = realization_seed(0, 10, 0);
  const MethodRun run = run_sur(cfg, 10, seed);
  CHECK(run.feature_map.features() == 3);
  CHECK(run.train.J_hat <= 1e-6 * run.train.grad_energy);
  CHECK(run.train.J_trunc_hat <= 1e-6 * run.train.grad_energy);
  CHECK(run.train.epsilon_hat <= 1e-10 * run.train.grad_energy);
  const PairSample test = latin_hypercube_pairs(BoxDomain(8), BoxDomain(1), 300, derive_seed(seed, 4));
  const double test_energy = gradient_energy(pair_gradients(UaOracle(3).as_oracle(), test));
  CHECK(run.J_test <= 1e-4 * test_energy);
  CHECK(run.e_test >= 0.0);
  CHECK(run.wall_ms == 0.0);
}

TEST_CASE("active-subspace initialization is exact for a linear ridge function") {
  GradientOracle o;
  o.d = 4;
  o.d_y = 1;
  const Eigen::Vector4d w(1.0, 2.0, 0.0, -1.0);
  o.value = [w](const Eigen::VectorXd& x, const Eigen::VectorXd& y) { return w.dot(x) * y[0]; };
  o.gradient_x = [w](const Eigen::VectorXd&, const Eigen::VectorXd& y) { return (w * y[0]).eval(); };
  auto basis = std::make_shared<const PolynomialBasis>(BoxDomain(4), 2);
  const Eigen::MatrixXd R = basis->gram_matrix();
  const PairSample p = latin_hypercube_pairs(BoxDomain(4), BoxDomain(1), 40, 1);
  const Eigen::MatrixXd grads = pair_gradients(o, p);
  const FeatureMap g = active_subspace_init(basis, R, grads, 1);
  CHECK(g.orthonormality_defect(R) <= 1e-10);
  CHECK(loss_J(g, p.x, grads) <= 1e-20 * gradient_energy(grads));
  const Eigen::VectorXd dir = g.jacobian(Eigen::VectorXd::Zero(4)).col(0);
  CHECK(std::abs(dir.dot(w.normalized())) == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("Riemannian descent keeps the constraint and never increases the loss") {
  const GradientOracle o = UaOracle(2).as_oracle();
  auto basis = std::make_shared<const PolynomialBasis>(BoxDomain(8), 2);
  const Eigen::MatrixXd R = basis->gram_matrix();
  const PairSample p = latin_hypercube_pairs(BoxDomain(8), BoxDomain(1), 60, 2);
  const Eigen::MatrixXd grads = pair_gradients(o, p);
  const FeatureMap init = active_subspace_init(basis, R, grads, 2);

  DescentOptions none;
  none.max_iter = 0;
  const DescentResult r0 = riemannian_descent(init, R, p.x, grads, none);
  CHECK(r0.feature_map.coefficients() == init.coefficients());
  CHECK(r0.iterations == 0);
  CHECK(r0.final_loss == r0.initial_loss);

  DescentOptions opt;
  opt.max_iter = 30;
  const DescentResult r = riemannian_descent(init, R, p.x, grads, opt);
  CHECK(r.initial_loss == doctest::Approx(loss_J(init, p.x, grads)));
  CHECK(r.final_loss <= r.initial_loss);
  CHECK(r.final_loss == doctest::Approx(loss_J(r.feature_map, p.x, grads)).epsilon(1e-12));
  CHECK(r.iterations > 0);
  CHECK(r.feature_map.orthonormality_defect(R) <= 1e-8);
}

TEST_CASE("nearest-rank quantiles") {
  std::vector<double> v = {7, 3, 9, 1, 5, 2, 10, 4, 8, 6};
  CHECK(nearest_rank_quantile(v, 0.5) == 5.0);
  CHECK(nearest_rank_quantile(v, 0.9) == 9.0);
  CHECK(nearest_rank_quantile(v, 1.0) == 10.0);
  CHECK(nearest_rank_quantile({3.0}, 0.5) == 3.0);
  CHECK(nearest_rank_quantile({4, 1, 3, 2}, 0.5) == 2.0);
  CHECK(nearest_rank_quantile({4, 1, 3, 2}, 0.9) == 4.0);
  CHECK_THROWS_AS(nearest_rank_quantile({}, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(nearest_rank_quantile({1.0}, 0.0), std::invalid_argument);
}

TEST_CASE("experiment rows are ordered and independent of the thread count") {
  ExperimentConfig cfg = small_config();
  const ExperimentResult a = run_experiment(cfg);
  cfg.threads = 3;
  int callbacks = 0;
  const ExperimentResult b = run_experiment(cfg, [&](const ResultRow&) { ++callbacks; });
  CHECK(callbacks == 4);
  REQUIRE(a.rows.size() == 4);
  REQUIRE(b.rows.size() == 4);
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    CHECK(a.rows[i].method == b.rows[i].method);
    CHECK(a.rows[i].realization == b.rows[i].realization);
    CHECK(a.rows[i].n_train == 50);
    CHECK(same(a.rows[i].J_test, b.rows[i].J_test));
    CHECK(same(a.rows[i].e_test, b.rows[i].e_test));
    CHECK(same(a.rows[i].eps_m, b.rows[i].eps_m));
  }
  CHECK(a.rows[0].method == Method::Sur);
  CHECK(a.rows[1].method == Method::Baseline);
  CHECK(a.rows[2].realization == 1);
  CHECK(std::isnan(a.rows[1].eps_m));
  CHECK(!std::isnan(a.rows[0].eps_m));
  CHECK(a.quantiles.size() == 2 * 4);
}

TEST_CASE("realization seeds differ across sizes and realizations") {
  CHECK(realization_seed(0, 10, 0) != realization_seed(0, 30, 0));
  CHECK(realization_seed(0, 10, 0) != realization_seed(0, 10, 1));
  CHECK(realization_seed(5, 10, 0) == realization_seed(5, 10, 0));
}

TEST_CASE("quantile aggregation per method and size") {
  std::vector<ResultRow> rows;
  for (int r = 0; r < 10; ++r) rows.push_back({Method::Sur, 3, 3, 50, r, double(r), 1.0, 2.0, 3.0, 0.0, 0.0});
  const auto q = aggregate_quantiles(rows);
  REQUIRE(q.size() == 4);
  CHECK(q[0].metric == "J_hat_train");
  CHECK(q[0].q50 == 4.0);
  CHECK(q[0].q90 == 8.0);
  CHECK(q[0].q100 == 9.0);
  CHECK(q[3].metric == "e_test");
  CHECK(q[3].q50 == 3.0);
}

TEST_CASE("feature-rank demo") {
  const FeatureRankDemo demo = feature_rank_demo();
  REQUIRE(demo.entries.size() == 3);
  CHECK(demo.entries[0].expect_zero);
  CHECK(demo.entries[0].epsilon <= 1e-8);
  CHECK(demo.entries[1].epsilon > 0.01);
  CHECK(demo.entries[2].epsilon > 0.01);
  CHECK(demo.all_pass);
}
