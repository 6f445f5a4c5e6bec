#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "featlearn/cli.hpp"

namespace fc = featlearn::cli;

int main(int argc, char** argv) {
  CLI::App app{"featlearn: polynomial feature learning from gradients"};
  app.require_subcommand(1);

  fc::CommonOptions common;
  std::uint64_t seed_override = 0;
  int threads = 0;
  auto add_common = [&](CLI::App* sub, const char* out_help) {
    sub->add_option("--config", common.config_path, "JSON config file")->check(CLI::ExistingFile);
    sub->add_option("--out", common.out, out_help);
    sub->add_option("--seed-override", seed_override, "replace the config seed");
    sub->add_option("--threads", threads, "worker threads, 0 = all cores");
  };

  auto* bench = app.add_subcommand("bench", "run the u_a benchmark and write CSV results");
  add_common(bench, "output directory");
  auto* features = app.add_subcommand("features", "solve the surrogate once and save the feature map");
  add_common(features, "output feature-map JSON");

  std::string out_path;
  auto* demo = app.add_subcommand("demo-feature-rank", "epsilon_1 of the feature-rank example");
  demo->add_option("--out", out_path, "optional JSON report");

  std::string tensor_path;
  int m = 1;
  std::vector<int> row_modes;
  auto* svd2 = app.add_subcommand("svd2", "two-group SVD of a coefficient tensor");
  svd2->add_option("--tensor", tensor_path, "coefficient tensor JSON")->required();
  svd2->add_option("--m", m, "number of kept terms")->required();
  svd2->add_option("--row-modes", row_modes, "modes forming the first group (default 0)");
  svd2->add_option("--out", out_path, "optional JSON report");

  std::vector<int> ranks;
  auto* hosvd = app.add_subcommand("hosvd", "truncated HOSVD of a coefficient tensor");
  hosvd->add_option("--tensor", tensor_path, "coefficient tensor JSON")->required();
  hosvd->add_option("--ranks", ranks, "one rank per mode")->required();
  hosvd->add_option("--out", out_path, "optional JSON report");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return fc::kExitConfig;
  }

  for (auto* sub : {bench, features})
    if (sub->parsed()) {
      if (sub->count("--seed-override")) common.seed_override = seed_override;
      if (sub->count("--threads")) common.threads = threads;
    }

  if (bench->parsed()) return fc::cmd_bench(common, std::cout, std::cerr);
  if (features->parsed()) return fc::cmd_features(common, std::cout, std::cerr);
  if (demo->parsed()) return fc::cmd_demo_feature_rank(out_path, std::cout, std::cerr);
  if (svd2->parsed()) return fc::cmd_svd2(tensor_path, m, row_modes, out_path, std::cout, std::cerr);
  if (hosvd->parsed()) return fc::cmd_hosvd(tensor_path, ranks, out_path, std::cout, std::cerr);
  return fc::kExitConfig;
}
