#include "featlearn/cli.hpp"

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <Eigen/Core>

namespace featlearn::cli {

namespace fs = std::filesystem;

namespace {

// Typed, strict access to a JSON object; every key must be consumed.
class StrictObject {
public:
  StrictObject(const json& doc, std::string where) : doc_(doc), where_(std::move(where)) {
    if (!doc_.is_object()) throw ConfigError(where_ + ": expected a JSON object");
  }

  bool has(const std::string& key) {
    if (!doc_.contains(key)) return false;
    seen_.insert(key);
    return true;
  }

  void read(const std::string& key, int& target) {
    if (!has(key)) return;
    const json& v = doc_.at(key);
    if (!v.is_number_integer()) fail(key, "an integer");
    const auto x = v.get<long long>();
    if (x < -2147483647LL || x > 2147483647LL) fail(key, "a 32-bit integer");
    target = static_cast<int>(x);
  }

  void read(const std::string& key, std::uint64_t& target) {
    if (!has(key)) return;
    const json& v = doc_.at(key);
    if (!v.is_number_unsigned()) fail(key, "a non-negative integer");
    target = v.get<std::uint64_t>();
  }

  void read(const std::string& key, bool& target) {
    if (!has(key)) return;
    if (!doc_.at(key).is_boolean()) fail(key, "a boolean");
    target = doc_.at(key).get<bool>();
  }

  void read(const std::string& key, std::string& target) {
    if (!has(key)) return;
    if (!doc_.at(key).is_string()) fail(key, "a string");
    target = doc_.at(key).get<std::string>();
  }

  void read(const std::string& key, std::vector<int>& target) {
    if (!has(key)) return;
    const json& v = doc_.at(key);
    if (!v.is_array()) fail(key, "an array of integers");
    target.clear();
    for (const auto& e : v) {
      if (!e.is_number_integer()) fail(key, "an array of integers");
      target.push_back(e.get<int>());
    }
  }

  void read(const std::string& key, std::vector<double>& target) {
    if (!has(key)) return;
    const json& v = doc_.at(key);
    if (!v.is_array()) fail(key, "an array of numbers");
    target.clear();
    for (const auto& e : v) {
      if (!e.is_number()) fail(key, "an array of numbers");
      target.push_back(e.get<double>());
    }
  }

  void read(const std::string& key, std::vector<std::string>& target) {
    if (!has(key)) return;
    const json& v = doc_.at(key);
    if (!v.is_array()) fail(key, "an array of strings");
    target.clear();
    for (const auto& e : v) {
      if (!e.is_string()) fail(key, "an array of strings");
      target.push_back(e.get<std::string>());
    }
  }

  void finish() const {
    for (auto it = doc_.begin(); it != doc_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError(where_ + ": unknown key '" + it.key() + "'");
  }

private:
  [[noreturn]] void fail(const std::string& key, const char* expected) const {
    throw ConfigError(where_ + ": '" + key + "' must be " + expected);
  }

  const json& doc_;
  std::string where_;
  std::set<std::string> seen_;
};

json load_config(const std::string& path) {
  if (path.empty()) throw ConfigError("--config is required");
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": invalid JSON: " + e.what());
  }
}

std::string to_string(SurrogateWeight w) { return w == SurrogateWeight::LambdaMax ? "lambda-max" : "lambda-m"; }

long basis_size(int d, int degree) {
  long r = 1;
  for (int i = 1; i <= d; ++i) r = r * (degree + i) / i;
  return r - 1;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

// Runs `body`, translating exceptions into exit codes.
template <typename Body>
int guarded(std::ostream& err, Body&& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const FormatError& e) {
    err << "input error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "runtime error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

json seed_json(std::uint64_t v) { return json(v); }

}  // namespace

BenchConfig parse_bench_config(const json& doc) {
  StrictObject obj(doc, "bench config");
  BenchConfig cfg;
  ExperimentConfig& e = cfg.experiment;
  obj.read("a", e.a);
  obj.read("m", e.m);
  obj.read("d", e.d);
  obj.read("n_Y", e.n_y);
  obj.read("n_X", e.n_x);
  obj.read("N_test", e.n_test);
  obj.read("realizations", e.realizations);
  obj.read("degree", e.degree);
  std::vector<std::string> methods;
  obj.read("methods", methods);
  if (!methods.empty()) {
    e.methods.clear();
    for (const auto& name : methods) {
      try {
        e.methods.push_back(parse_method(name));
      } catch (const std::invalid_argument& ex) {
        throw ConfigError(std::string("bench config: ") + ex.what());
      }
    }
  } else if (doc.contains("methods")) {
    throw ConfigError("bench config: 'methods' must not be empty");
  }
  obj.read("seed", e.seed);
  obj.read("cv_folds", e.cv_folds);
  obj.read("gamma_grid", e.gamma_grid);
  obj.read("alpha_grid", e.alpha_grid);
  obj.read("baseline_max_iter", e.baseline_max_iter);
  obj.read("record_timing", e.record_timing);
  obj.read("threads", e.threads);
  obj.read("out_dir", cfg.out_dir);
  obj.finish();
  try {
    e.validate();
  } catch (const std::invalid_argument& ex) {
    throw ConfigError(std::string("bench config: ") + ex.what());
  }
  return cfg;
}

json bench_config_to_json(const BenchConfig& cfg) {
  const ExperimentConfig& e = cfg.experiment;
  std::vector<std::string> methods;
  for (Method m : e.methods) methods.push_back(method_name(m));
  return {{"a", e.a},
          {"m", e.m},
          {"d", e.d},
          {"n_Y", e.n_y},
          {"n_X", e.n_x},
          {"N_test", e.n_test},
          {"realizations", e.realizations},
          {"degree", e.degree},
          {"methods", methods},
          {"seed", e.seed},
          {"cv_folds", e.cv_folds},
          {"gamma_grid", e.gamma_grid},
          {"alpha_grid", e.alpha_grid},
          {"baseline_max_iter", e.baseline_max_iter},
          {"record_timing", e.record_timing},
          {"threads", e.threads},
          {"out_dir", cfg.out_dir}};
}

FeaturesConfig parse_features_config(const json& doc) {
  StrictObject obj(doc, "features config");
  FeaturesConfig c;
  obj.read("a", c.a);
  obj.read("m", c.m);
  obj.read("d", c.d);
  obj.read("degree", c.degree);
  obj.read("n_X", c.n_x);
  obj.read("n_Y", c.n_y);
  obj.read("seed", c.seed);
  std::string weight = to_string(c.weight);
  obj.read("weight", weight);
  obj.read("out", c.out);
  obj.read("pencil_out", c.pencil_out);
  obj.finish();
  if (weight == "lambda-max")
    c.weight = SurrogateWeight::LambdaMax;
  else if (weight == "lambda-m")
    c.weight = SurrogateWeight::LambdaM;
  else
    throw ConfigError("features config: 'weight' must be \"lambda-max\" or \"lambda-m\"");
  if (c.a < 1) throw ConfigError("features config: a must be >= 1");
  if (c.d < 1) throw ConfigError("features config: d must be >= 1");
  if (c.degree < 1) throw ConfigError("features config: degree must be >= 1");
  if (c.n_x < 1 || c.n_y < 1) throw ConfigError("features config: n_X and n_Y must be >= 1");
  const long K = basis_size(c.d, c.degree);
  if (c.m < 1 || c.m > K)
    throw ConfigError("features config: m = " + std::to_string(c.m) + " must be in [1, K = " + std::to_string(K) + "]");
  if (c.m > c.d) throw ConfigError("features config: m = " + std::to_string(c.m) + " exceeds d = " + std::to_string(c.d));
  return c;
}

json manifest(const std::string& command, const json& config_echo, const json& seeds,
              const std::vector<std::string>& outputs) {
  std::ostringstream compiler;
#if defined(__clang__)
  compiler << "clang " << __clang_major__ << '.' << __clang_minor__ << '.' << __clang_patchlevel__;
#elif defined(__GNUC__)
  compiler << "gcc " << __GNUC__ << '.' << __GNUC_MINOR__ << '.' << __GNUC_PATCHLEVEL__;
#else
  compiler << "unknown";
#endif
  return {{"schema_version", "1"},
          {"command", command},
          {"config", config_echo},
          {"seeds", seeds},
          {"outputs", outputs},
          {"versions",
           {{"featlearn", "0.1.0"},
            {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                          std::to_string(EIGEN_MINOR_VERSION)},
            {"compiler", compiler.str()},
            {"cxx_standard", static_cast<long>(__cplusplus)}}}};
}

int cmd_bench(const CommonOptions& opt, std::ostream& out, std::ostream& err) {
  BenchConfig cfg;
  const int parsed = guarded(err, [&] {
    cfg = parse_bench_config(load_config(opt.config_path));
    if (opt.seed_override) cfg.experiment.seed = *opt.seed_override;
    if (opt.threads) {
      if (*opt.threads < 0) throw ConfigError("--threads must be >= 0");
      cfg.experiment.threads = *opt.threads;
    }
    if (!opt.out.empty()) cfg.out_dir = opt.out;
    if (cfg.out_dir.empty()) throw ConfigError("no output directory (set out_dir or pass --out)");
    return kExitOk;
  });
  if (parsed != kExitOk) return parsed;

  return guarded(err, [&] {
    const fs::path dir(cfg.out_dir);
    fs::create_directories(dir);
    const fs::path partial = dir / "results.partial.csv";
    std::ofstream flush(partial, std::ios::binary);
    if (!flush) throw std::runtime_error("cannot write " + partial.string());
    flush << kResultsHeader << '\n';
    const ExperimentResult res = run_experiment(cfg.experiment, [&](const ResultRow& r) {
      flush << results_csv_line(r) << '\n';
      flush.flush();
      out << method_name(r.method) << " n_train=" << r.n_train << " realization=" << r.realization
          << " J_hat=" << format_double(r.J_hat_train) << " e_test=" << format_double(r.e_test) << '\n';
    });
    flush.close();

    std::ostringstream results, quantiles;
    write_results_csv(results, res.rows);
    write_quantiles_csv(quantiles, res.quantiles);
    write_text(dir / "results.csv", results.str());
    write_text(dir / "quantiles.csv", quantiles.str());
    fs::remove(partial);

    json seeds = {{"base", seed_json(cfg.experiment.seed)}, {"realizations", json::array()}};
    for (int n : cfg.experiment.n_x)
      for (int r = 0; r < cfg.experiment.realizations; ++r)
        seeds["realizations"].push_back(
            {{"n_X", n}, {"realization", r}, {"seed", seed_json(realization_seed(cfg.experiment.seed, n, r))}});
    write_json_file((dir / "manifest.json").string(),
                    manifest("bench", bench_config_to_json(cfg), seeds, {"results.csv", "quantiles.csv"}));
    out << "wrote " << (dir / "results.csv").string() << ", " << (dir / "quantiles.csv").string() << ", "
        << (dir / "manifest.json").string() << '\n';
    return kExitOk;
  });
}

int cmd_features(const CommonOptions& opt, std::ostream& out, std::ostream& err) {
  FeaturesConfig cfg;
  const int parsed = guarded(err, [&] {
    cfg = parse_features_config(load_config(opt.config_path));
    if (opt.seed_override) cfg.seed = *opt.seed_override;
    if (!opt.out.empty()) cfg.out = opt.out;
    if (cfg.out.empty()) throw ConfigError("no output file (set out or pass --out)");
    return kExitOk;
  });
  if (parsed != kExitOk) return parsed;

  return guarded(err, [&] {
    const GradientOracle oracle = UaOracle(cfg.a, cfg.d).as_oracle();
    auto basis = std::make_shared<const PolynomialBasis>(BoxDomain(cfg.d), cfg.degree);
    const TensorizedSample sample =
        build_tensorized(BoxDomain(cfg.d), BoxDomain(1), cfg.n_x, cfg.n_y, derive_seed(cfg.seed, 1));
    const ConditionalSpectrum spectrum = estimate_conditional_spectrum(oracle, sample, cfg.m);
    const SurrogatePencil pencil = assemble_pencil(spectrum, sample, basis, cfg.weight);
    const SurrogateSolution sol = minimize_surrogate(pencil);
    const LossReport rep = evaluate_losses(oracle, sol.feature_map, sample, spectrum);

    save_feature_map(cfg.out, sol.feature_map);
    const FeatureMap reloaded = load_feature_map(cfg.out);  // verifies G^T R G = I
    if (!cfg.pencil_out.empty()) write_json_file(cfg.pencil_out, pencil_to_json(pencil));

    out << "features: a=" << cfg.a << " m=" << cfg.m << " K=" << basis->size() << " n_X=" << cfg.n_x
        << " n_Y=" << cfg.n_y << '\n'
        << "  objective    " << format_double(sol.objective) << '\n'
        << "  J_hat        " << format_double(rep.J_hat) << '\n'
        << "  J_trunc_hat  " << format_double(rep.J_trunc_hat) << '\n'
        << "  L_hat        " << format_double(rep.L_hat) << '\n'
        << "  epsilon_hat  " << format_double(rep.epsilon_hat) << '\n'
        << "  G^T R G defect after reload "
        << format_double(reloaded.orthonormality_defect(basis->gram_matrix())) << '\n'
        << "wrote " << cfg.out << '\n';
    return kExitOk;
  });
}

int cmd_demo_feature_rank(const std::string& out_path, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const FeatureRankDemo demo = feature_rank_demo();
    out << "feature-rank demo on (-1,1)^3, group {x1, x2}, y = x3, n_X=" << demo.n_x << " n_Y=" << demo.n_y << '\n';
    json doc = {{"n_X", demo.n_x}, {"n_Y", demo.n_y}, {"entries", json::array()}, {"all_pass", demo.all_pass}};
    for (const auto& e : demo.entries) {
      out << "  " << (e.pass ? "PASS" : "FAIL") << "  eps_1 = " << format_double(e.epsilon)
          << (e.expect_zero ? "  (expect <= " : "  (expect > ") << format_double(e.threshold) << ")  " << e.label
          << '\n';
      doc["entries"].push_back({{"label", e.label},
                                {"epsilon_1", e.epsilon},
                                {"threshold", e.threshold},
                                {"expect_zero", e.expect_zero},
                                {"pass", e.pass}});
    }
    if (!out_path.empty()) write_json_file(out_path, doc);
    if (!demo.all_pass) {
      err << "feature-rank demo: at least one check failed\n";
      return kExitRuntime;
    }
    return kExitOk;
  });
}

int cmd_svd2(const std::string& tensor_path, int m, const std::vector<int>& row_modes, const std::string& out_path,
             std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (tensor_path.empty()) throw ConfigError("--tensor is required");
    const CoefficientTensor T = load_tensor(tensor_path);
    const std::vector<int> rows = row_modes.empty() ? std::vector<int>{0} : row_modes;
    for (int k : rows)
      if (k < 0 || k >= T.order()) throw ConfigError("row mode " + std::to_string(k) + " out of range");
    if (static_cast<int>(rows.size()) >= T.order()) throw ConfigError("row modes must leave at least one column mode");
    const Eigen::MatrixXd A = matricize(T, rows);
    const Eigen::Index kmax = std::min(A.rows(), A.cols());
    if (m < 1 || m > kmax)
      throw ConfigError("m = " + std::to_string(m) + " must be in [1, " + std::to_string(kmax) + "]");
    const SvdReduction r = two_group_svd(A, m);

    std::vector<double> all(r.all_singular_values.data(), r.all_singular_values.data() + r.all_singular_values.size());
    std::vector<double> kept(all.begin(), all.begin() + m);
    out << "two-group SVD of a " << A.rows() << " x " << A.cols() << " unfolding, m = " << m << '\n';
    out << "  singular values:";
    for (double s : all) out << ' ' << format_double(s);
    out << "\n  tail energy: " << format_double(r.tail_energy) << '\n';
    if (!out_path.empty())
      write_json_file(out_path, {{"rows", A.rows()},
                                 {"cols", A.cols()},
                                 {"m", m},
                                 {"row_modes", rows},
                                 {"singular_values", kept},
                                 {"all_singular_values", all},
                                 {"tail_energy", r.tail_energy}});
    return kExitOk;
  });
}

int cmd_hosvd(const std::string& tensor_path, const std::vector<int>& ranks, const std::string& out_path,
              std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (tensor_path.empty()) throw ConfigError("--tensor is required");
    const CoefficientTensor T = load_tensor(tensor_path);
    if (static_cast<int>(ranks.size()) != T.order())
      throw ConfigError("need " + std::to_string(T.order()) + " ranks, got " + std::to_string(ranks.size()));
    for (int k = 0; k < T.order(); ++k)
      if (ranks[k] < 1 || ranks[k] > T.dims[k])
        throw ConfigError("rank " + std::to_string(ranks[k]) + " for mode " + std::to_string(k) +
                          " exceeds its dimension " + std::to_string(T.dims[k]));
    const HosvdResult h = hosvd(T, ranks);
    out << "HOSVD with ranks";
    for (int r : ranks) out << ' ' << r;
    out << "\n  error^2 = " << format_double(h.error_sq) << " (||T||^2 = " << format_double(T.norm_squared())
        << ")\n  per-mode tail energy:";
    for (double t : h.mode_tail_energy) out << ' ' << format_double(t);
    out << '\n';
    if (!out_path.empty()) {
      json factors = json::array();
      for (const auto& U : h.factors) {
        std::vector<double> flat;
        for (Eigen::Index i = 0; i < U.rows(); ++i)
          for (Eigen::Index j = 0; j < U.cols(); ++j) flat.push_back(U(i, j));
        factors.push_back({{"rows", U.rows()}, {"cols", U.cols()}, {"data", flat}});
      }
      write_json_file(out_path, {{"ranks", ranks},
                                 {"error_sq", h.error_sq},
                                 {"mode_tail_energy", h.mode_tail_energy},
                                 {"factors", factors},
                                 {"core", tensor_to_json(h.core)}});
    }
    return kExitOk;
  });
}

}  // namespace featlearn::cli
