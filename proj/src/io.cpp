#include "featlearn/io.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>

namespace featlearn {

const char* const kResultsHeader =
    "method,a,m,n_train,realization,J_hat_train,J_test,e_hat_train,e_test,eps_m,wall_ms";
const char* const kQuantilesHeader = "method,n_train,metric,q50,q90,q100";

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw FormatError(path + ": " + e.what());
  }
}

void write_json_file(const std::string& path, const json& doc) {
  const std::filesystem::path parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << doc.dump(2) << '\n';
  if (!out) throw std::runtime_error("write failed for " + path);
}

namespace {

json matrix_rows(const Eigen::MatrixXd& M) {
  json a = json::array();
  for (Eigen::Index i = 0; i < M.rows(); ++i)
    for (Eigen::Index j = 0; j < M.cols(); ++j) a.push_back(M(i, j));
  return a;
}

Eigen::MatrixXd matrix_from(const json& a, Eigen::Index rows, Eigen::Index cols, const char* what) {
  if (!a.is_array() || static_cast<Eigen::Index>(a.size()) != rows * cols)
    throw FormatError(std::string(what) + ": expected " + std::to_string(rows * cols) + " entries");
  Eigen::MatrixXd M(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) M(i, j) = a.at(i * cols + j).get<double>();
  return M;
}

json basis_to_json(const PolynomialBasis& b) {
  const BoxDomain& dom = b.domain();
  std::vector<double> lo(dom.lo().data(), dom.lo().data() + dom.dim());
  std::vector<double> hi(dom.hi().data(), dom.hi().data() + dom.dim());
  return {{"family", "legendre"},
          {"d", b.dim()},
          {"degree_bound", b.degree_bound()},
          {"domain", {{"lo", lo}, {"hi", hi}}},
          {"multi_indices", b.multi_indices()}};
}

std::shared_ptr<const PolynomialBasis> basis_from_json(const json& doc) {
  try {
    const int d = doc.at("d").get<int>();
    const int deg = doc.at("degree_bound").get<int>();
    BoxDomain dom(d);
    if (doc.contains("domain")) {
      const auto lo = doc.at("domain").at("lo").get<std::vector<double>>();
      const auto hi = doc.at("domain").at("hi").get<std::vector<double>>();
      if (static_cast<int>(lo.size()) != d || static_cast<int>(hi.size()) != d)
        throw FormatError("domain bounds do not have d entries");
      dom = BoxDomain(Eigen::Map<const Eigen::VectorXd>(lo.data(), d), Eigen::Map<const Eigen::VectorXd>(hi.data(), d));
    }
    auto basis = std::make_shared<const PolynomialBasis>(dom, deg);
    if (doc.contains("multi_indices") &&
        doc.at("multi_indices").get<std::vector<MultiIndex>>() != basis->multi_indices())
      throw FormatError("multi_indices do not match the graded-lex total-degree basis");
    return basis;
  } catch (const json::exception& e) {
    throw FormatError(std::string("basis descriptor: ") + e.what());
  }
}

}  // namespace

json feature_map_to_json(const FeatureMap& g) {
  json doc = basis_to_json(g.basis());
  doc.erase("family");
  doc["K"] = g.basis().size();
  doc["m"] = g.features();
  doc["G"] = matrix_rows(g.coefficients());
  return doc;
}

FeatureMap feature_map_from_json(const json& doc, double tol) {
  auto basis = basis_from_json(doc);
  int m = 0;
  Eigen::MatrixXd G;
  try {
    m = doc.at("m").get<int>();
    if (m < 1 || m > basis->size()) throw FormatError("feature map: m out of range");
    G = matrix_from(doc.at("G"), basis->size(), m, "feature map G");
  } catch (const json::exception& e) {
    throw FormatError(std::string("feature map: ") + e.what());
  }
  FeatureMap g(basis, std::move(G));
  const double defect = g.orthonormality_defect(basis->gram_matrix());
  if (defect > tol)
    throw FormatError("feature map: G^T R G deviates from I by " + format_double(defect));
  return g;
}

void save_feature_map(const std::string& path, const FeatureMap& g) { write_json_file(path, feature_map_to_json(g)); }
FeatureMap load_feature_map(const std::string& path) { return feature_map_from_json(read_json_file(path)); }

json pencil_to_json(const SurrogatePencil& p) {
  const int K = static_cast<int>(p.H.rows());
  json doc;
  if (p.basis) doc["basis"] = basis_to_json(*p.basis);
  doc["m"] = p.m;
  doc["K"] = K;
  doc["weight"] = p.weight == SurrogateWeight::LambdaMax ? "lambda-max" : "lambda-m";
  doc["H"] = matrix_rows(p.H);
  doc["H1"] = matrix_rows(p.H1);
  doc["H2"] = matrix_rows(p.H2);
  doc["R"] = matrix_rows(p.R);
  return doc;
}

SurrogatePencil pencil_from_json(const json& doc) {
  SurrogatePencil p;
  try {
    const int K = doc.at("K").get<int>();
    p.m = doc.at("m").get<int>();
    if (doc.contains("basis")) {
      p.basis = basis_from_json(doc.at("basis"));
      if (p.basis->size() != K) throw FormatError("pencil: K does not match the basis");
    }
    const std::string w = doc.value("weight", "lambda-max");
    if (w != "lambda-max" && w != "lambda-m") throw FormatError("pencil: unknown weight '" + w + "'");
    p.weight = w == "lambda-max" ? SurrogateWeight::LambdaMax : SurrogateWeight::LambdaM;
    p.H = matrix_from(doc.at("H"), K, K, "pencil H");
    p.H1 = matrix_from(doc.at("H1"), K, K, "pencil H1");
    p.H2 = matrix_from(doc.at("H2"), K, K, "pencil H2");
    p.R = matrix_from(doc.at("R"), K, K, "pencil R");
  } catch (const json::exception& e) {
    throw FormatError(std::string("pencil: ") + e.what());
  }
  return p;
}

json tensor_to_json(const CoefficientTensor& T) {
  return {{"dims", T.dims},
          {"labels", T.labels},
          {"basis", T.basis},
          {"degrees", T.degrees},
          {"data", std::vector<double>(T.data.data(), T.data.data() + T.data.size())}};
}

CoefficientTensor tensor_from_json(const json& doc) {
  try {
    CoefficientTensor T(doc.at("dims").get<std::vector<int>>());
    if (T.order() < 1) throw FormatError("tensor: dims must not be empty");
    const auto data = doc.at("data").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(data.size()) != T.numel())
      throw FormatError("tensor: data has " + std::to_string(data.size()) + " entries, dims imply " +
                        std::to_string(T.numel()));
    T.data = Eigen::Map<const Eigen::VectorXd>(data.data(), T.numel());
    T.labels = doc.value("labels", std::vector<std::string>{});
    T.basis = doc.value("basis", std::string("legendre"));
    T.degrees = doc.value("degrees", std::vector<int>{});
    if (!T.labels.empty() && static_cast<int>(T.labels.size()) != T.order())
      throw FormatError("tensor: need one label per mode");
    return T;
  } catch (const json::exception& e) {
    throw FormatError(std::string("tensor: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("tensor: ") + e.what());
  }
}

void save_tensor(const std::string& path, const CoefficientTensor& T) { write_json_file(path, tensor_to_json(T)); }
CoefficientTensor load_tensor(const std::string& path) { return tensor_from_json(read_json_file(path)); }

void write_loss_csv(std::ostream& os, const std::vector<LossRecord>& rows) {
  os << "tag,n_X,n_Y,J_hat,J_trunc_hat,L_hat,epsilon_hat,e_hat\n";
  for (const auto& r : rows)
    os << r.tag << ',' << r.n_x << ',' << r.n_y << ',' << format_double(r.report.J_hat) << ','
       << format_double(r.report.J_trunc_hat) << ',' << format_double(r.report.L_hat) << ','
       << format_double(r.report.epsilon_hat) << ',' << format_double(r.report.e_hat) << '\n';
}

void write_cv_table_csv(std::ostream& os, const std::vector<CvRow>& rows) {
  os << "gamma,alpha,fold,mse\n";
  for (const auto& r : rows)
    os << format_double(r.gamma) << ',' << format_double(r.alpha) << ',' << r.fold << ',' << format_double(r.mse)
       << '\n';
}

std::string results_csv_line(const ResultRow& r) {
  return method_name(r.method) + ',' + std::to_string(r.a) + ',' + std::to_string(r.m) + ',' +
         std::to_string(r.n_train) + ',' + std::to_string(r.realization) + ',' + format_double(r.J_hat_train) + ',' +
         format_double(r.J_test) + ',' + format_double(r.e_hat_train) + ',' + format_double(r.e_test) + ',' +
         format_double(r.eps_m) + ',' + format_double(r.wall_ms);
}

void write_results_csv(std::ostream& os, const std::vector<ResultRow>& rows) {
  os << kResultsHeader << '\n';
  for (const auto& r : rows) os << results_csv_line(r) << '\n';
}

void write_quantiles_csv(std::ostream& os, const std::vector<QuantileRow>& rows) {
  os << kQuantilesHeader << '\n';
  for (const auto& q : rows)
    os << method_name(q.method) << ',' << q.n_train << ',' << q.metric << ',' << format_double(q.q50) << ','
       << format_double(q.q90) << ',' << format_double(q.q100) << '\n';
}

}  // namespace featlearn
