#include "featlearn/bench.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>

#include <Eigen/Eigenvalues>

namespace featlearn {

namespace {

constexpr double kPi = 3.14159265358979323846;

long binomial(int n, int k) {
  long r = 1;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

struct Evaluation {
  KrrModel model;
  double e_hat_train = 0.0;
  double J_test = 0.0;
  double e_test = 0.0;
};

Eigen::MatrixXd regression_inputs(const FeatureMap& g, const PairSample& pairs) {
  Eigen::MatrixXd Z(pairs.size(), g.features() + pairs.y.cols());
  Z.leftCols(g.features()) = g.eval_rows(pairs.x);
  Z.rightCols(pairs.y.cols()) = pairs.y;
  return Z;
}

Evaluation fit_and_evaluate(const ExperimentConfig& cfg, const GradientOracle& oracle, const FeatureMap& g,
                            const PairSample& train, std::uint64_t seed) {
  Evaluation ev;
  const Eigen::MatrixXd Z = regression_inputs(g, train);
  const Eigen::VectorXd u = pair_values(oracle, train);
  const CvResult cv = cross_validate(Z, u, cfg.cv_folds, cfg.gamma_grid, cfg.alpha_grid, derive_seed(seed, 3));
  ev.model = krr_fit(Z, u, cv.gamma, cv.alpha);
  ev.e_hat_train = rms_error(u, krr_predict(ev.model, Z));

  const PairSample test =
      latin_hypercube_pairs(BoxDomain(cfg.d), BoxDomain(1), cfg.n_test, derive_seed(seed, 4));
  ev.J_test = loss_J(oracle, g, test);
  ev.e_test = rms_error(pair_values(oracle, test), krr_predict(ev.model, regression_inputs(g, test)));
  return ev;
}

double elapsed_ms(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

Eigen::MatrixXd ua_matrix(int k, int d) {
  if (k < 1 || d < 1) throw std::invalid_argument("ua_matrix: need k >= 1 and d >= 1");
  Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) Q(i, j) = 0.5 * ((i - j == k - 1 ? 1.0 : 0.0) + (j - i == k - 1 ? 1.0 : 0.0));
  return Q;
}

UaOracle::UaOracle(int a_, int d_) : a(a_), d(d_) {
  if (a < 1) throw std::invalid_argument("UaOracle: a must be >= 1");
  for (int k = 1; k <= a; ++k) Q.push_back(ua_matrix(k, d));
}

double UaOracle::value(const Eigen::VectorXd& x, double y) const {
  double u = 0.0;
  for (int k = 1; k <= a; ++k) {
    const double q = x.dot(Q[k - 1] * x);
    u += q * q * std::sin(kPi * k * y / (2.0 * a));
  }
  return u;
}

Eigen::VectorXd UaOracle::gradient(const Eigen::VectorXd& x, double y) const {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(d);
  for (int k = 1; k <= a; ++k) {
    const Eigen::VectorXd Qx = Q[k - 1] * x;
    g += 4.0 * x.dot(Qx) * std::sin(kPi * k * y / (2.0 * a)) * Qx;
  }
  return g;
}

double UaOracle::sup_grad_bound() const { return 4.0 * a * std::pow(static_cast<double>(d), 1.5); }

GradientOracle UaOracle::as_oracle() const {
  GradientOracle o;
  o.d = d;
  o.d_y = 1;
  auto self = std::make_shared<const UaOracle>(*this);
  o.value = [self](const Eigen::VectorXd& x, const Eigen::VectorXd& y) { return self->value(x, y[0]); };
  o.gradient_x = [self](const Eigen::VectorXd& x, const Eigen::VectorXd& y) { return self->gradient(x, y[0]); };
  o.sup_grad_bound = sup_grad_bound();
  return o;
}

std::string method_name(Method m) { return m == Method::Sur ? "SUR" : "BASELINE"; }

Method parse_method(const std::string& name) {
  if (name == "SUR") return Method::Sur;
  if (name == "BASELINE") return Method::Baseline;
  throw std::invalid_argument("unknown method '" + name + "' (expected SUR or BASELINE)");
}

void ExperimentConfig::validate() const {
  auto need = [](bool ok, const std::string& msg) {
    if (!ok) throw std::invalid_argument(msg);
  };
  need(a >= 1, "a must be >= 1");
  need(d >= 1, "d must be >= 1");
  need(degree >= 1, "degree must be >= 1");
  need(m >= 1, "m must be >= 1");
  need(m <= d, "m must not exceed d = " + std::to_string(d));
  const long K = binomial(d + degree, d) - 1;
  need(m <= K, "m = " + std::to_string(m) + " exceeds the basis size K = " + std::to_string(K));
  need(n_y >= 1, "n_Y must be >= 1");
  need(!n_x.empty(), "n_X list must not be empty");
  need(n_test >= 1, "N_test must be >= 1");
  need(realizations >= 1, "realizations must be >= 1");
  need(!methods.empty(), "methods must not be empty");
  need(cv_folds >= 2, "cv_folds must be >= 2");
  for (int n : n_x) {
    need(n >= 1, "every n_X must be >= 1");
    need(static_cast<long>(n) * n_y >= cv_folds,
         "n_X * n_Y = " + std::to_string(static_cast<long>(n) * n_y) + " is fewer than cv_folds");
  }
  need(!gamma_grid.empty() && !alpha_grid.empty(), "CV grids must not be empty");
  for (double v : gamma_grid) need(v > 0.0, "gamma_grid values must be > 0");
  for (double v : alpha_grid) need(v > 0.0, "alpha_grid values must be > 0");
  need(baseline_max_iter >= 0, "baseline_max_iter must be >= 0");
  need(threads >= 0, "threads must be >= 0");
}

MethodRun run_sur(const ExperimentConfig& cfg, int n_x, std::uint64_t seed) {
  const auto start = std::chrono::steady_clock::now();
  const GradientOracle oracle = UaOracle(cfg.a, cfg.d).as_oracle();
  auto basis = std::make_shared<const PolynomialBasis>(BoxDomain(cfg.d), cfg.degree);
  const TensorizedSample sample = build_tensorized(BoxDomain(cfg.d), BoxDomain(1), n_x, cfg.n_y, derive_seed(seed, 1));
  const ConditionalSpectrum spectrum = estimate_conditional_spectrum(oracle, sample, cfg.m);
  const SurrogateSolution sol = minimize_surrogate(assemble_pencil(spectrum, sample, basis));

  MethodRun run{sol.feature_map, {}, evaluate_losses(oracle, sol.feature_map, sample, spectrum)};
  Evaluation ev = fit_and_evaluate(cfg, oracle, run.feature_map, sample.expand(), seed);
  run.model = std::move(ev.model);
  run.train.e_hat = ev.e_hat_train;
  run.J_test = ev.J_test;
  run.e_test = ev.e_test;
  run.wall_ms = cfg.record_timing ? elapsed_ms(start) : 0.0;
  return run;
}

FeatureMap active_subspace_init(std::shared_ptr<const PolynomialBasis> basis, const Eigen::MatrixXd& R,
                                const Eigen::MatrixXd& grads, int m) {
  if (grads.cols() != basis->dim()) throw std::invalid_argument("active_subspace_init: dimension mismatch");
  if (m < 1 || m > basis->dim()) throw std::invalid_argument("active_subspace_init: need 1 <= m <= d");
  const Eigen::MatrixXd C = grads.transpose() * grads / static_cast<double>(std::max<Eigen::Index>(grads.rows(), 1));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (C + C.transpose()));
  Eigen::MatrixXd W = eig.eigenvectors().rowwise().reverse().leftCols(m);
  for (int c = 0; c < m; ++c) {
    Eigen::Index at;
    W.col(c).cwiseAbs().maxCoeff(&at);
    if (W(at, c) < 0.0) W.col(c) *= -1.0;
  }
  return orthonormalize(basis, R, linear_feature_coefficients(*basis, W));
}

DescentResult riemannian_descent(const FeatureMap& init, const Eigen::MatrixXd& R, const Eigen::MatrixXd& x,
                                 const Eigen::MatrixXd& grads, const DescentOptions& opt) {
  const auto basis = init.basis_ptr();
  const Eigen::LLT<Eigen::MatrixXd> llt(R);
  if (llt.info() != Eigen::Success) throw std::runtime_error("riemannian_descent: R is not SPD");

  DescentResult res{init};
  double f = loss_J(init, x, grads);
  res.initial_loss = f;
  double step = 1.0;
  for (int it = 0; it < opt.max_iter; ++it) {
    const Eigen::MatrixXd E = loss_J_gradient(res.feature_map, x, grads);
    // Loss invariance under G -> G T gives G^T E = 0, so R^{-1} E is tangent.
    const Eigen::MatrixXd xi = llt.solve(E);
    const double gn2 = std::max((E.transpose() * xi).trace(), 0.0);
    res.final_grad_norm = std::sqrt(gn2);
    if (res.final_grad_norm < opt.grad_tol) break;

    double accepted = 0.0;
    double t = step;
    for (int b = 0; b < opt.max_backtracks; ++b, t *= opt.shrink) {
      try {
        FeatureMap trial = orthonormalize(basis, R, res.feature_map.coefficients() - t * xi);
        const double ft = loss_J(trial, x, grads);
        if (ft <= f - opt.armijo_c * t * gn2) {
          res.feature_map = std::move(trial);
          f = ft;
          accepted = t;
          break;
        }
      } catch (const RankDeficientError&) {
      }
    }
    if (accepted == 0.0) break;
    res.iterations = it + 1;
    step = std::min(2.0 * accepted, 1e6);
  }
  res.final_loss = f;
  return res;
}

MethodRun run_baseline(const ExperimentConfig& cfg, int n_x, std::uint64_t seed) {
  const auto start = std::chrono::steady_clock::now();
  const GradientOracle oracle = UaOracle(cfg.a, cfg.d).as_oracle();
  auto basis = std::make_shared<const PolynomialBasis>(BoxDomain(cfg.d), cfg.degree);
  const Eigen::MatrixXd R = basis->gram_matrix();
  const PairSample train =
      latin_hypercube_pairs(BoxDomain(cfg.d), BoxDomain(1), n_x * cfg.n_y, derive_seed(seed, 2));
  const Eigen::MatrixXd grads = pair_gradients(oracle, train);

  DescentOptions opt;
  opt.max_iter = cfg.baseline_max_iter;
  const DescentResult dr = riemannian_descent(active_subspace_init(basis, R, grads, cfg.m), R, train.x, grads, opt);

  const double nan = std::numeric_limits<double>::quiet_NaN();
  MethodRun run{dr.feature_map, {}, {}};
  run.train.J_hat = dr.final_loss;
  run.train.J_trunc_hat = nan;
  run.train.L_hat = nan;
  run.train.epsilon_hat = nan;
  run.train.grad_energy = gradient_energy(grads);
  Evaluation ev = fit_and_evaluate(cfg, oracle, run.feature_map, train, seed);
  run.model = std::move(ev.model);
  run.train.e_hat = ev.e_hat_train;
  run.J_test = ev.J_test;
  run.e_test = ev.e_test;
  run.wall_ms = cfg.record_timing ? elapsed_ms(start) : 0.0;
  return run;
}

double nearest_rank_quantile(std::vector<double> values, double p) {
  if (values.empty()) throw std::invalid_argument("nearest_rank_quantile: empty input");
  if (!(p > 0.0 && p <= 1.0)) throw std::invalid_argument("nearest_rank_quantile: p must be in (0, 1]");
  std::sort(values.begin(), values.end());
  const auto n = static_cast<double>(values.size());
  const auto rank = static_cast<std::size_t>(std::max(1.0, std::ceil(p * n - 1e-9)));
  return values[std::min(rank, values.size()) - 1];
}

std::uint64_t realization_seed(std::uint64_t seed, int n_x, int realization) {
  return derive_seed(derive_seed(seed, static_cast<std::uint64_t>(realization)), static_cast<std::uint64_t>(n_x));
}

std::vector<QuantileRow> aggregate_quantiles(const std::vector<ResultRow>& rows) {
  std::vector<std::pair<Method, int>> cells;
  for (const auto& r : rows) {
    const std::pair<Method, int> key{r.method, r.n_train};
    if (std::find(cells.begin(), cells.end(), key) == cells.end()) cells.push_back(key);
  }
  const std::pair<const char*, double ResultRow::*> metrics[] = {{"J_hat_train", &ResultRow::J_hat_train},
                                                                 {"J_test", &ResultRow::J_test},
                                                                 {"e_hat_train", &ResultRow::e_hat_train},
                                                                 {"e_test", &ResultRow::e_test}};
  std::vector<QuantileRow> out;
  for (const auto& [method, n_train] : cells)
    for (const auto& [name, field] : metrics) {
      std::vector<double> v;
      for (const auto& r : rows)
        if (r.method == method && r.n_train == n_train) v.push_back(r.*field);
      out.push_back({method, n_train, name, nearest_rank_quantile(v, 0.5), nearest_rank_quantile(v, 0.9),
                     nearest_rank_quantile(v, 1.0)});
    }
  return out;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, const std::function<void(const ResultRow&)>& on_row) {
  cfg.validate();
  struct Task {
    int n_x;
    int realization;
    Method method;
  };
  std::vector<Task> tasks;
  for (int n : cfg.n_x)
    for (int r = 0; r < cfg.realizations; ++r)
      for (Method m : cfg.methods) tasks.push_back({n, r, m});

  std::vector<std::optional<ResultRow>> slots(tasks.size());
  std::atomic<std::size_t> next{0};
  std::mutex mu;
  std::exception_ptr failure;

  auto worker = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= tasks.size()) return;
      {
        std::lock_guard<std::mutex> lock(mu);
        if (failure) return;
      }
      try {
        const Task& t = tasks[i];
        const std::uint64_t rs = realization_seed(cfg.seed, t.n_x, t.realization);
        const MethodRun run = t.method == Method::Sur ? run_sur(cfg, t.n_x, rs) : run_baseline(cfg, t.n_x, rs);
        ResultRow row{t.method,          cfg.a,       cfg.m,           t.n_x * cfg.n_y, t.realization,
                      run.train.J_hat,   run.J_test,  run.train.e_hat, run.e_test,      run.train.epsilon_hat,
                      run.wall_ms};
        std::lock_guard<std::mutex> lock(mu);
        slots[i] = row;
        if (on_row) on_row(row);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };

  unsigned n_threads = cfg.threads == 0 ? std::max(1u, std::thread::hardware_concurrency())
                                        : static_cast<unsigned>(cfg.threads);
  n_threads = std::min<unsigned>(n_threads, static_cast<unsigned>(tasks.size()));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned k = 0; k < n_threads; ++k) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);

  ExperimentResult result;
  for (auto& s : slots) result.rows.push_back(*s);
  result.quantiles = aggregate_quantiles(result.rows);
  return result;
}

FeatureRankDemo feature_rank_demo(int n_x, int n_y, std::uint64_t seed) {
  struct Case {
    const char* label;
    std::function<double(double, double, double)> value;
    std::function<Eigen::Vector2d(double, double, double)> grad;
    double threshold;
    bool expect_zero;
  };
  const std::vector<Case> cases = {
      {"v = (x1 + x2) + (x1 + x2)^2 x3",
       [](double x1, double x2, double y) { return (x1 + x2) + (x1 + x2) * (x1 + x2) * y; },
       [](double x1, double x2, double y) {
         const double s = 1.0 + 2.0 * (x1 + x2) * y;
         return Eigen::Vector2d(s, s);
       },
       1e-8, true},
      {"P_V v = x1 + x2^2 x3", [](double x1, double x2, double y) { return x1 + x2 * x2 * y; },
       [](double, double x2, double y) { return Eigen::Vector2d(1.0, 2.0 * x2 * y); }, 0.01, false},
      {"P_W v = x1 + (x1^2 + x2^2) x3", [](double x1, double x2, double y) { return x1 + (x1 * x1 + x2 * x2) * y; },
       [](double x1, double x2, double y) { return Eigen::Vector2d(1.0 + 2.0 * x1 * y, 2.0 * x2 * y); }, 0.01,
       false},
  };

  const TensorizedSample sample = build_tensorized(BoxDomain(2), BoxDomain(1), n_x, n_y, seed);
  FeatureRankDemo demo;
  demo.n_x = n_x;
  demo.n_y = n_y;
  for (const auto& c : cases) {
    GradientOracle o;
    o.d = 2;
    o.d_y = 1;
    o.value = [f = c.value](const Eigen::VectorXd& x, const Eigen::VectorXd& y) { return f(x[0], x[1], y[0]); };
    o.gradient_x = [g = c.grad](const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
      return Eigen::VectorXd(g(x[0], x[1], y[0]));
    };
    FeatureRankEntry e;
    e.label = c.label;
    e.epsilon = epsilon_m(estimate_conditional_spectrum(o, sample, 1));
    e.threshold = c.threshold;
    e.expect_zero = c.expect_zero;
    e.pass = c.expect_zero ? e.epsilon <= c.threshold : e.epsilon > c.threshold;
    demo.all_pass = demo.all_pass && e.pass;
    demo.entries.push_back(std::move(e));
  }
  return demo;
}

}  // namespace featlearn
