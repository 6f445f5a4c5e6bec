#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "featlearn/bench.hpp"
#include "featlearn/io.hpp"

namespace featlearn::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitRuntime = 2;

/// Bad config, bad arguments or unreadable inputs (exit code 1).
class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct CommonOptions {
  std::string config_path;
  std::string out;  // directory for bench, file for the other commands
  std::optional<std::uint64_t> seed_override;
  std::optional<int> threads;  // 0 = all hardware threads
};

/// Strict parse of a bench config: unknown keys and wrong types are errors.
/// Recognized keys: a, m, d, n_Y, n_X, N_test, realizations, degree, methods,
/// seed, cv_folds, gamma_grid, alpha_grid, baseline_max_iter, record_timing,
/// threads, out_dir.
struct BenchConfig {
  ExperimentConfig experiment;
  std::string out_dir;
};
BenchConfig parse_bench_config(const json& doc);
json bench_config_to_json(const BenchConfig& cfg);

/// Keys: a, m, d, degree, n_X, n_Y, seed, weight ("lambda-max" | "lambda-m"),
/// out, pencil_out.
struct FeaturesConfig {
  int a = 3;
  int m = 3;
  int d = 8;
  int degree = 2;
  int n_x = 50;
  int n_y = 5;
  std::uint64_t seed = 0;
  SurrogateWeight weight = SurrogateWeight::LambdaMax;
  std::string out;
  std::string pencil_out;
};
FeaturesConfig parse_features_config(const json& doc);

json manifest(const std::string& command, const json& config_echo, const json& seeds,
              const std::vector<std::string>& outputs);

int cmd_bench(const CommonOptions& opt, std::ostream& out, std::ostream& err);
int cmd_features(const CommonOptions& opt, std::ostream& out, std::ostream& err);
int cmd_demo_feature_rank(const std::string& out_path, std::ostream& out, std::ostream& err);
int cmd_svd2(const std::string& tensor_path, int m, const std::vector<int>& row_modes, const std::string& out_path,
             std::ostream& out, std::ostream& err);
int cmd_hosvd(const std::string& tensor_path, const std::vector<int>& ranks, const std::string& out_path,
              std::ostream& out, std::ostream& err);

}  // namespace featlearn::cli
