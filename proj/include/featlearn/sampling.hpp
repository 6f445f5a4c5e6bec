#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace featlearn {

/// SplitMix64: a Weyl counter passed through a 64-bit finalizer.
/// Bit-identical across platforms, unlike the std distributions.
class SplitMix64 {
public:
  using result_type = std::uint64_t;

  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }

  result_type operator()() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, n), unbiased (rejection on the top remainder).
  std::uint64_t below(std::uint64_t n);

private:
  std::uint64_t state_;
};

/// Derives an independent stream seed from a parent seed and a stream tag.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

/// In-place Fisher-Yates shuffle driven by SplitMix64.
void shuffle_indices(std::vector<int>& idx, SplitMix64& rng);

/// Axis-aligned box carrying the uniform probability measure.
/// Degenerate coordinates (lo == hi) are allowed for sampling; the polynomial
/// machinery rejects them.
class BoxDomain {
public:
  explicit BoxDomain(int d, double lo = -1.0, double hi = 1.0);
  BoxDomain(Eigen::VectorXd lo, Eigen::VectorXd hi);

  int dim() const { return static_cast<int>(lo_.size()); }
  const Eigen::VectorXd& lo() const { return lo_; }
  const Eigen::VectorXd& hi() const { return hi_; }
  double lo(int i) const { return lo_[i]; }
  double hi(int i) const { return hi_[i]; }

  bool contains(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  bool degenerate() const;

  /// Concavity parameter of the uniform measure on a convex body: s = 1/d.
  double s_concavity() const { return 1.0 / dim(); }

  /// Sub-box on the given coordinates.
  BoxDomain restrict_to(const std::vector<int>& coords) const;

private:
  Eigen::VectorXd lo_, hi_;
};

/// n i.i.d. uniform draws, one per row.
Eigen::MatrixXd sample_uniform(const BoxDomain& domain, int n, std::uint64_t seed);

/// Latin hypercube design: per coordinate, a random permutation of the n
/// strata with uniform jitter inside each stratum.
Eigen::MatrixXd latin_hypercube(const BoxDomain& domain, int n, std::uint64_t seed);

/// A plain list of (x, y) pairs; row k of `x` goes with row k of `y`.
struct PairSample {
  Eigen::MatrixXd x;
  Eigen::MatrixXd y;

  int size() const { return static_cast<int>(x.rows()); }
};

/// Cartesian product of an x-sample and a y-sample.
struct TensorizedSample {
  Eigen::MatrixXd x_points;  // n_X x d
  Eigen::MatrixXd y_points;  // n_Y x d_Y
  std::uint64_t seed = 0;

  int n_x() const { return static_cast<int>(x_points.rows()); }
  int n_y() const { return static_cast<int>(y_points.rows()); }
  int total_size() const { return n_x() * n_y(); }

  /// Pair (i, j) lands at row i * n_Y + j.
  PairSample expand() const;

  /// Content hash used to match derived objects back to their sample.
  std::uint64_t fingerprint() const;
};

/// x and y designs drawn independently by Latin hypercube with sub-seeds.
TensorizedSample build_tensorized(const BoxDomain& x_domain, const BoxDomain& y_domain,
                                  int n_x, int n_y, std::uint64_t seed);

/// Plain (non-tensorized) Latin hypercube over the joint (x, y) box.
PairSample latin_hypercube_pairs(const BoxDomain& x_domain, const BoxDomain& y_domain, int n,
                                 std::uint64_t seed);

}  // namespace featlearn
