#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

#include "featlearn/bench.hpp"
#include "featlearn/grouped.hpp"
#include "featlearn/losses.hpp"
#include "featlearn/polybasis.hpp"
#include "featlearn/regression.hpp"
#include "featlearn/surrogate.hpp"

namespace featlearn {

using json = nlohmann::json;

/// Raised for malformed or inconsistent files.
class FormatError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// %.17g, with "nan" / "inf" / "-inf" for non-finite values.
std::string format_double(double v);

json read_json_file(const std::string& path);
/// Pretty-prints `doc`, creating missing parent directories.
void write_json_file(const std::string& path, const json& doc);

/// {d, degree_bound, domain {lo, hi}, multi_indices, K, m, G (row-major)}.
json feature_map_to_json(const FeatureMap& g);
/// Rebuilds the basis, checks the multi-indices and G^T R G = I to `tol`.
FeatureMap feature_map_from_json(const json& doc, double tol = 1e-8);
void save_feature_map(const std::string& path, const FeatureMap& g);
FeatureMap load_feature_map(const std::string& path);

/// {basis {d, degree_bound, domain, multi_indices}, m, K, weight, H, H1, H2, R}.
json pencil_to_json(const SurrogatePencil& pencil);
SurrogatePencil pencil_from_json(const json& doc);

/// {dims, labels, basis, degrees, data (row-major)}.
json tensor_to_json(const CoefficientTensor& T);
CoefficientTensor tensor_from_json(const json& doc);
void save_tensor(const std::string& path, const CoefficientTensor& T);
CoefficientTensor load_tensor(const std::string& path);

struct LossRecord {
  std::string tag;
  int n_x = 0;
  int n_y = 0;
  LossReport report;
};
void write_loss_csv(std::ostream& os, const std::vector<LossRecord>& rows);
void write_cv_table_csv(std::ostream& os, const std::vector<CvRow>& rows);
void write_results_csv(std::ostream& os, const std::vector<ResultRow>& rows);
void write_quantiles_csv(std::ostream& os, const std::vector<QuantileRow>& rows);

extern const char* const kResultsHeader;
extern const char* const kQuantilesHeader;
std::string results_csv_line(const ResultRow& r);

}  // namespace featlearn
