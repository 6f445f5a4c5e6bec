#include "featlearn/sampling.hpp"

#include <cstring>
#include <stdexcept>
#include <string>

namespace featlearn {

namespace {

constexpr std::uint64_t kXStream = 0x1;
constexpr std::uint64_t kYStream = 0x2;

void require_count(int n, const char* what) {
  if (n < 1) throw std::invalid_argument(std::string(what) + " must be >= 1");
}

std::uint64_t fnv1a(std::uint64_t h, const void* data, std::size_t bytes) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < bytes; ++i) {
    h ^= p[i];
    h *= 0x100000001B3ULL;
  }
  return h;
}

}  // namespace

std::uint64_t SplitMix64::below(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("SplitMix64::below: empty range");
  const std::uint64_t limit = max() - max() % n;
  std::uint64_t r;
  do {
    r = (*this)();
  } while (r >= limit);
  return r % n;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  SplitMix64 mix(seed ^ (stream * 0xD1B54A32D192ED03ULL));
  mix();
  return mix();
}

void shuffle_indices(std::vector<int>& idx, SplitMix64& rng) {
  for (std::size_t i = idx.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.below(i));
    std::swap(idx[i - 1], idx[j]);
  }
}

BoxDomain::BoxDomain(int d, double lo, double hi)
    : BoxDomain(Eigen::VectorXd::Constant(d, lo), Eigen::VectorXd::Constant(d, hi)) {}

BoxDomain::BoxDomain(Eigen::VectorXd lo, Eigen::VectorXd hi) : lo_(std::move(lo)), hi_(std::move(hi)) {
  if (lo_.size() < 1) throw std::invalid_argument("BoxDomain: dimension must be >= 1");
  if (lo_.size() != hi_.size()) throw std::invalid_argument("BoxDomain: bound size mismatch");
  for (Eigen::Index i = 0; i < lo_.size(); ++i) {
    if (!(lo_[i] <= hi_[i]))
      throw std::invalid_argument("BoxDomain: lo > hi on coordinate " + std::to_string(i));
  }
}

bool BoxDomain::contains(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  if (x.size() != lo_.size()) return false;
  return ((x.array() >= lo_.array()) && (x.array() <= hi_.array())).all();
}

bool BoxDomain::degenerate() const { return ((hi_ - lo_).array() <= 0.0).any(); }

BoxDomain BoxDomain::restrict_to(const std::vector<int>& coords) const {
  Eigen::VectorXd lo(coords.size()), hi(coords.size());
  for (std::size_t k = 0; k < coords.size(); ++k) {
    lo[k] = lo_[coords[k]];
    hi[k] = hi_[coords[k]];
  }
  return BoxDomain(lo, hi);
}

Eigen::MatrixXd sample_uniform(const BoxDomain& domain, int n, std::uint64_t seed) {
  require_count(n, "sample_uniform: n");
  SplitMix64 rng(seed);
  const int d = domain.dim();
  Eigen::MatrixXd out(n, d);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < d; ++k)
      out(i, k) = domain.lo(k) + rng.uniform() * (domain.hi(k) - domain.lo(k));
  return out;
}

Eigen::MatrixXd latin_hypercube(const BoxDomain& domain, int n, std::uint64_t seed) {
  require_count(n, "latin_hypercube: n");
  SplitMix64 rng(seed);
  const int d = domain.dim();
  Eigen::MatrixXd out(n, d);
  std::vector<int> perm(n);
  for (int k = 0; k < d; ++k) {
    for (int i = 0; i < n; ++i) perm[i] = i;
    shuffle_indices(perm, rng);
    const double width = domain.hi(k) - domain.lo(k);
    for (int i = 0; i < n; ++i) {
      const double t = (perm[i] + rng.uniform()) / n;
      out(i, k) = domain.lo(k) + t * width;
    }
  }
  return out;
}

PairSample TensorizedSample::expand() const {
  PairSample pairs;
  const int nx = n_x(), ny = n_y();
  pairs.x.resize(nx * ny, x_points.cols());
  pairs.y.resize(nx * ny, y_points.cols());
  for (int i = 0; i < nx; ++i) {
    for (int j = 0; j < ny; ++j) {
      pairs.x.row(i * ny + j) = x_points.row(i);
      pairs.y.row(i * ny + j) = y_points.row(j);
    }
  }
  return pairs;
}

std::uint64_t TensorizedSample::fingerprint() const {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  const std::int64_t shape[4] = {x_points.rows(), x_points.cols(), y_points.rows(), y_points.cols()};
  h = fnv1a(h, shape, sizeof(shape));
  h = fnv1a(h, x_points.data(), sizeof(double) * x_points.size());
  h = fnv1a(h, y_points.data(), sizeof(double) * y_points.size());
  return h;
}

TensorizedSample build_tensorized(const BoxDomain& x_domain, const BoxDomain& y_domain, int n_x,
                                  int n_y, std::uint64_t seed) {
  require_count(n_x, "build_tensorized: n_X");
  require_count(n_y, "build_tensorized: n_Y");
  TensorizedSample s;
  s.seed = seed;
  s.x_points = latin_hypercube(x_domain, n_x, derive_seed(seed, kXStream));
  s.y_points = latin_hypercube(y_domain, n_y, derive_seed(seed, kYStream));
  return s;
}

PairSample latin_hypercube_pairs(const BoxDomain& x_domain, const BoxDomain& y_domain, int n,
                                 std::uint64_t seed) {
  const int dx = x_domain.dim(), dy = y_domain.dim();
  Eigen::VectorXd lo(dx + dy), hi(dx + dy);
  lo << x_domain.lo(), y_domain.lo();
  hi << x_domain.hi(), y_domain.hi();
  const Eigen::MatrixXd joint = latin_hypercube(BoxDomain(lo, hi), n, seed);
  return PairSample{joint.leftCols(dx), joint.rightCols(dy)};
}

}  // namespace featlearn
