#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "featlearn/bench.hpp"
#include "featlearn/grouped.hpp"
#include "featlearn/io.hpp"
#include "featlearn/losses.hpp"
#include "featlearn/polybasis.hpp"
#include "featlearn/regression.hpp"
#include "featlearn/sampling.hpp"
#include "featlearn/surrogate.hpp"

namespace py = pybind11;
using namespace featlearn;

namespace {

PairSample make_pairs(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
  if (x.rows() != y.rows()) throw std::invalid_argument("x and y must have the same number of rows");
  return PairSample{x, y};
}

py::dict loss_report_dict(const LossReport& r) {
  py::dict d;
  d["J_hat"] = r.J_hat;
  d["J_trunc_hat"] = r.J_trunc_hat;
  d["L_hat"] = r.L_hat;
  d["epsilon_hat"] = r.epsilon_hat;
  d["grad_energy"] = r.grad_energy;
  d["e_hat"] = r.e_hat;
  return d;
}

ExperimentConfig config_from_dict(const py::dict& d) {
  ExperimentConfig c;
  for (auto item : d) {
    const auto key = py::cast<std::string>(item.first);
    const py::handle v = item.second;
    if (key == "a") c.a = py::cast<int>(v);
    else if (key == "m") c.m = py::cast<int>(v);
    else if (key == "d") c.d = py::cast<int>(v);
    else if (key == "n_Y") c.n_y = py::cast<int>(v);
    else if (key == "n_X") c.n_x = py::cast<std::vector<int>>(v);
    else if (key == "N_test") c.n_test = py::cast<int>(v);
    else if (key == "realizations") c.realizations = py::cast<int>(v);
    else if (key == "degree") c.degree = py::cast<int>(v);
    else if (key == "seed") c.seed = py::cast<std::uint64_t>(v);
    else if (key == "cv_folds") c.cv_folds = py::cast<int>(v);
    else if (key == "gamma_grid") c.gamma_grid = py::cast<std::vector<double>>(v);
    else if (key == "alpha_grid") c.alpha_grid = py::cast<std::vector<double>>(v);
    else if (key == "baseline_max_iter") c.baseline_max_iter = py::cast<int>(v);
    else if (key == "record_timing") c.record_timing = py::cast<bool>(v);
    else if (key == "threads") c.threads = py::cast<int>(v);
    else if (key == "methods") {
      c.methods.clear();
      for (const auto& name : py::cast<std::vector<std::string>>(v)) c.methods.push_back(parse_method(name));
    } else {
      throw py::key_error("unknown config key '" + key + "'");
    }
  }
  c.validate();
  return c;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Polynomial feature learning from gradients (C++ core).";

  py::register_exception<RankDeficientError>(m, "RankDeficientError", PyExc_ValueError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);

  // sampling
  py::class_<BoxDomain>(m, "BoxDomain")
      .def(py::init<int, double, double>(), py::arg("d"), py::arg("lo") = -1.0, py::arg("hi") = 1.0)
      .def(py::init<Eigen::VectorXd, Eigen::VectorXd>(), py::arg("lo"), py::arg("hi"))
      .def_property_readonly("d", &BoxDomain::dim)
      .def_property_readonly("lo", py::overload_cast<>(&BoxDomain::lo, py::const_))
      .def_property_readonly("hi", py::overload_cast<>(&BoxDomain::hi, py::const_))
      .def_property_readonly("s_concavity", &BoxDomain::s_concavity)
      .def("contains", &BoxDomain::contains);

  m.def("sample_uniform", &sample_uniform, py::arg("domain"), py::arg("n"), py::arg("seed"));
  m.def("latin_hypercube", &latin_hypercube, py::arg("domain"), py::arg("n"), py::arg("seed"));

  py::class_<TensorizedSample>(m, "TensorizedSample")
      .def_readonly("x_points", &TensorizedSample::x_points)
      .def_readonly("y_points", &TensorizedSample::y_points)
      .def_readonly("seed", &TensorizedSample::seed)
      .def_property_readonly("n_x", &TensorizedSample::n_x)
      .def_property_readonly("n_y", &TensorizedSample::n_y)
      .def_property_readonly("total_size", &TensorizedSample::total_size)
      .def("expand", [](const TensorizedSample& s) {
        const PairSample p = s.expand();
        return py::make_tuple(p.x, p.y);
      });
  m.def("build_tensorized", &build_tensorized, py::arg("x_domain"), py::arg("y_domain"), py::arg("n_x"),
        py::arg("n_y"), py::arg("seed"));

  // polybasis
  py::class_<PolynomialBasis, std::shared_ptr<PolynomialBasis>>(m, "PolynomialBasis")
      .def(py::init<BoxDomain, int, bool>(), py::arg("domain"), py::arg("degree_bound"),
           py::arg("include_constant") = false)
      .def_property_readonly("d", &PolynomialBasis::dim)
      .def_property_readonly("degree_bound", &PolynomialBasis::degree_bound)
      .def_property_readonly("size", &PolynomialBasis::size)
      .def_property_readonly("multi_indices", &PolynomialBasis::multi_indices)
      .def("eval", &PolynomialBasis::eval, py::arg("x"))
      .def("gradient", &PolynomialBasis::gradient, py::arg("x"))
      .def("gram_matrix", &PolynomialBasis::gram_matrix);

  py::class_<FeatureMap>(m, "FeatureMap")
      .def(py::init([](std::shared_ptr<PolynomialBasis> b, const Eigen::MatrixXd& G, bool validate) {
             return FeatureMap(std::move(b), G, validate);
           }),
           py::arg("basis"), py::arg("G"), py::arg("validate") = false)
      .def_property_readonly("G", &FeatureMap::coefficients)
      .def_property_readonly("m", &FeatureMap::features)
      .def("eval", &FeatureMap::eval, py::arg("x"))
      .def("eval_rows", &FeatureMap::eval_rows, py::arg("x"))
      .def("jacobian", &FeatureMap::jacobian, py::arg("x"))
      .def("orthonormality_defect", &FeatureMap::orthonormality_defect, py::arg("R"))
      .def("to_json", [](const FeatureMap& g) { return feature_map_to_json(g).dump(); })
      .def_static("from_json", [](const std::string& s) { return feature_map_from_json(json::parse(s)); });

  m.def(
      "orthonormalize",
      [](std::shared_ptr<PolynomialBasis> b, const Eigen::MatrixXd& G_raw) { return orthonormalize(std::move(b), G_raw); },
      py::arg("basis"), py::arg("G_raw"));

  // surrogate
  py::class_<GradientOracle>(m, "GradientOracle")
      .def(py::init([](int d, int d_y, std::function<double(const Eigen::VectorXd&, const Eigen::VectorXd&)> value,
                       std::function<Eigen::VectorXd(const Eigen::VectorXd&, const Eigen::VectorXd&)> grad,
                       std::optional<double> bound) {
             GradientOracle o;
             o.d = d;
             o.d_y = d_y;
             o.value = std::move(value);
             o.gradient_x = std::move(grad);
             o.sup_grad_bound = bound;
             return o;
           }),
           py::arg("d"), py::arg("d_y"), py::arg("value"), py::arg("gradient_x"),
           py::arg("sup_grad_bound") = std::nullopt)
      .def_readonly("d", &GradientOracle::d)
      .def_readonly("d_y", &GradientOracle::d_y)
      .def_readonly("sup_grad_bound", &GradientOracle::sup_grad_bound)
      .def("value", [](const GradientOracle& o, const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
        return o.value(x, y);
      })
      .def("gradient_x", [](const GradientOracle& o, const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
        return o.gradient_x(x, y);
      });
  m.def("scale_oracle", &scale_oracle, py::arg("oracle"), py::arg("factor"));

  py::enum_<SurrogateWeight>(m, "SurrogateWeight")
      .value("LAMBDA_MAX", SurrogateWeight::LambdaMax)
      .value("LAMBDA_M", SurrogateWeight::LambdaM);

  py::class_<ConditionalSpectrum>(m, "ConditionalSpectrum")
      .def_readonly("m", &ConditionalSpectrum::m)
      .def_property_readonly("n_x", &ConditionalSpectrum::n_x)
      .def("eigenvalues", [](const ConditionalSpectrum& s, int i) { return s.entries.at(i).lambda; })
      .def("directions", [](const ConditionalSpectrum& s, int i) { return s.entries.at(i).V; })
      .def("covariance", [](const ConditionalSpectrum& s, int i) { return s.entries.at(i).M; });
  m.def("estimate_conditional_spectrum", &estimate_conditional_spectrum, py::arg("oracle"), py::arg("sample"),
        py::arg("m"));
  m.def("epsilon_m", &epsilon_m, py::arg("spectrum"), py::arg("m") = std::nullopt);

  py::class_<SurrogatePencil>(m, "SurrogatePencil")
      .def_readonly("H", &SurrogatePencil::H)
      .def_readonly("H1", &SurrogatePencil::H1)
      .def_readonly("H2", &SurrogatePencil::H2)
      .def_readonly("R", &SurrogatePencil::R)
      .def_readonly("m", &SurrogatePencil::m)
      .def("quadratic_form", &SurrogatePencil::quadratic_form, py::arg("G"))
      .def("to_json", [](const SurrogatePencil& p) { return pencil_to_json(p).dump(); });
  m.def(
      "assemble_pencil",
      [](const ConditionalSpectrum& s, const TensorizedSample& sample, std::shared_ptr<PolynomialBasis> b,
         SurrogateWeight w) { return assemble_pencil(s, sample, std::move(b), w); },
      py::arg("spectrum"), py::arg("sample"), py::arg("basis"), py::arg("weight") = SurrogateWeight::LambdaMax);
  m.def(
      "minimize_surrogate",
      [](const SurrogatePencil& p) {
        SurrogateSolution s = minimize_surrogate(p);
        return py::make_tuple(s.feature_map, s.eigenvalues, s.objective);
      },
      py::arg("pencil"));
  m.def(
      "minimize_trace",
      [](const Eigen::MatrixXd& H, const Eigen::MatrixXd& R, int k) {
        TraceMinimizer t = minimize_trace(H, R, k);
        return py::make_tuple(t.G, t.eigenvalues);
      },
      py::arg("H"), py::arg("R"), py::arg("m"));
  m.def("generalized_eigenvalues", &generalized_eigenvalues, py::arg("H"), py::arg("R"));

  // losses
  m.def("projector", &projector, py::arg("B"));
  m.def(
      "loss_J",
      [](const GradientOracle& o, const FeatureMap& g, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
        return loss_J(o, g, make_pairs(x, y));
      },
      py::arg("oracle"), py::arg("g"), py::arg("x"), py::arg("y"));
  m.def("loss_J_truncated",
        py::overload_cast<const GradientOracle&, const FeatureMap&, const TensorizedSample&,
                          const ConditionalSpectrum&>(&loss_J_truncated),
        py::arg("oracle"), py::arg("g"), py::arg("sample"), py::arg("spectrum"));
  m.def("loss_L", &loss_L, py::arg("g"), py::arg("sample"), py::arg("spectrum"),
        py::arg("weight") = SurrogateWeight::LambdaMax);
  m.def(
      "evaluate_losses",
      [](const GradientOracle& o, const FeatureMap& g, const TensorizedSample& s, const ConditionalSpectrum& sp) {
        return loss_report_dict(evaluate_losses(o, g, s, sp));
      },
      py::arg("oracle"), py::arg("g"), py::arg("sample"), py::arg("spectrum"));
  m.def(
      "projection_norm_lemma_check",
      [](const Eigen::MatrixXd& V, const Eigen::MatrixXd& W) {
        const LemmaSides s = projection_norm_lemma_check(V, W);
        return py::make_tuple(s.lhs, s.rhs);
      },
      py::arg("V"), py::arg("W"));
  m.def(
      "deviation_bound_check",
      [](const GradientOracle& o, const FeatureMap& g, const TensorizedSample& s, const ConditionalSpectrum& sp,
         int ell, int n_median, std::uint64_t seed) {
        const DeviationBound b = deviation_bound_check(o, g, s, sp, ell, n_median, seed);
        py::dict d;
        d["J_trunc"] = b.J_trunc;
        d["L_hat"] = b.L_hat;
        d["q_median"] = b.q_median;
        d["kappa"] = b.kappa;
        d["bound_rhs"] = b.bound_rhs;
        return d;
      },
      py::arg("oracle"), py::arg("g"), py::arg("sample"), py::arg("spectrum"), py::arg("ell"), py::arg("n_median"),
      py::arg("seed"));
  m.def("rms_error", &rms_error, py::arg("targets"), py::arg("predictions"));

  // grouped
  m.def(
      "two_group_svd",
      [](const Eigen::MatrixXd& A, int k) {
        const SvdReduction r = two_group_svd(A, k);
        return py::make_tuple(r.left_vectors, r.singular_values, r.right_vectors, r.tail_energy);
      },
      py::arg("A"), py::arg("m"));
  m.def("bilinear_error", &bilinear_error, py::arg("A"), py::arg("m"), py::arg("residual"));
  m.def(
      "hosvd",
      [](const std::vector<int>& dims, const Eigen::VectorXd& data, const std::vector<int>& ranks) {
        CoefficientTensor T(dims);
        if (data.size() != T.numel()) throw std::invalid_argument("data size does not match dims");
        T.data = data;
        const HosvdResult h = hosvd(T, ranks);
        return py::make_tuple(h.factors, h.core.data, h.error_sq);
      },
      py::arg("dims"), py::arg("data"), py::arg("ranks"));

  // regression
  py::class_<KrrModel>(m, "KrrModel")
      .def_readonly("coeffs", &KrrModel::coeffs)
      .def_readonly("gamma", &KrrModel::gamma)
      .def_readonly("alpha", &KrrModel::alpha)
      .def("predict", [](const KrrModel& k, const Eigen::MatrixXd& Z) { return krr_predict(k, Z); });
  m.def("krr_fit", &krr_fit, py::arg("Z"), py::arg("u"), py::arg("gamma"), py::arg("alpha"));
  m.def("krr_predict", &krr_predict, py::arg("model"), py::arg("Z"));
  m.def("default_gamma_grid", &default_gamma_grid);
  m.def("default_alpha_grid", &default_alpha_grid);
  m.def(
      "cross_validate",
      [](const Eigen::MatrixXd& Z, const Eigen::VectorXd& u, int folds, const std::vector<double>& gammas,
         const std::vector<double>& alphas, std::uint64_t seed) {
        const CvResult r = cross_validate(Z, u, folds, gammas, alphas, seed);
        return py::make_tuple(r.gamma, r.alpha, r.scores);
      },
      py::arg("Z"), py::arg("u"), py::arg("folds") = 10, py::arg("gamma_grid") = default_gamma_grid(),
      py::arg("alpha_grid") = default_alpha_grid(), py::arg("seed") = 0);

  // bench
  py::class_<UaOracle>(m, "UaOracle")
      .def(py::init<int, int>(), py::arg("a"), py::arg("d") = 8)
      .def_readonly("a", &UaOracle::a)
      .def_readonly("d", &UaOracle::d)
      .def("value", &UaOracle::value, py::arg("x"), py::arg("y"))
      .def("gradient", &UaOracle::gradient, py::arg("x"), py::arg("y"))
      .def("sup_grad_bound", &UaOracle::sup_grad_bound)
      .def("as_oracle", &UaOracle::as_oracle);
  m.def(
      "run_experiment",
      [](const py::dict& cfg) {
        const ExperimentConfig c = config_from_dict(cfg);
        ExperimentResult res;
        {
          py::gil_scoped_release release;
          res = run_experiment(c);
        }
        py::list rows;
        for (const auto& r : res.rows) {
          py::dict d;
          d["method"] = method_name(r.method);
          d["a"] = r.a;
          d["m"] = r.m;
          d["n_train"] = r.n_train;
          d["realization"] = r.realization;
          d["J_hat_train"] = r.J_hat_train;
          d["J_test"] = r.J_test;
          d["e_hat_train"] = r.e_hat_train;
          d["e_test"] = r.e_test;
          d["eps_m"] = r.eps_m;
          d["wall_ms"] = r.wall_ms;
          rows.append(d);
        }
        py::list quantiles;
        for (const auto& q : res.quantiles)
          quantiles.append(py::dict(py::arg("method") = method_name(q.method), py::arg("n_train") = q.n_train,
                                    py::arg("metric") = q.metric, py::arg("q50") = q.q50, py::arg("q90") = q.q90,
                                    py::arg("q100") = q.q100));
        return py::make_tuple(rows, quantiles);
      },
      py::arg("config"));
  m.def(
      "feature_rank_demo",
      [](int n_x, int n_y, std::uint64_t seed) {
        const FeatureRankDemo demo = feature_rank_demo(n_x, n_y, seed);
        py::list out;
        for (const auto& e : demo.entries)
          out.append(py::dict(py::arg("label") = e.label, py::arg("epsilon_1") = e.epsilon,
                              py::arg("threshold") = e.threshold, py::arg("expect_zero") = e.expect_zero,
                              py::arg("pass") = e.pass));
        return out;
      },
      py::arg("n_x") = 200, py::arg("n_y") = 10, py::arg("seed") = 7);
}
