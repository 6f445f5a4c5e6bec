#include "doctest.h"

#include <algorithm>
#include <set>

#include "featlearn/sampling.hpp"

using namespace featlearn;

namespace {

// Stratum index of every coordinate value, checked to be a permutation of 0..n-1.
bool stratified(const Eigen::MatrixXd& pts, const BoxDomain& dom) {
  const int n = static_cast<int>(pts.rows());
  for (int k = 0; k < pts.cols(); ++k) {
    std::vector<int> hits(n, 0);
    for (int i = 0; i < n; ++i) {
      const double t = (pts(i, k) - dom.lo(k)) / (dom.hi(k) - dom.lo(k));
      const int s = std::min(n - 1, static_cast<int>(t * n));
      if (s < 0) return false;
      ++hits[s];
    }
    if (std::any_of(hits.begin(), hits.end(), [](int h) { return h != 1; })) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("sample_uniform on a degenerate box returns the single point") {
  const Eigen::MatrixXd x = sample_uniform(BoxDomain(1, 0.0, 0.0), 3, 42);
  REQUIRE(x.rows() == 3);
  CHECK(x.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("sample_uniform mean is near the center for n = 1000") {
  const Eigen::MatrixXd x = sample_uniform(BoxDomain(2), 1000, 9);
  const Eigen::RowVectorXd mean = x.colwise().mean();
  // Var of U(-1,1) is 1/3; the standard error of the mean at n = 1000 is about 0.018.
  CHECK(mean.cwiseAbs().maxCoeff() < 0.1);
  CHECK(x.minCoeff() >= -1.0);
  CHECK(x.maxCoeff() < 1.0);
}

TEST_CASE("sampling is a pure function of the seed") {
  const BoxDomain dom(4);
  CHECK(sample_uniform(dom, 20, 5) == sample_uniform(dom, 20, 5));
  CHECK(latin_hypercube(dom, 20, 5) == latin_hypercube(dom, 20, 5));
  CHECK(sample_uniform(dom, 20, 5) != sample_uniform(dom, 20, 6));
}

TEST_CASE("latin_hypercube puts one point in each quarter of (-1, 1)") {
  const Eigen::MatrixXd x = latin_hypercube(BoxDomain(1), 4, 3);
  std::vector<double> v(x.data(), x.data() + 4);
  std::sort(v.begin(), v.end());
  CHECK(v[0] > -1.0);
  CHECK(v[0] < -0.5);
  CHECK(v[1] >= -0.5);
  CHECK(v[1] < 0.0);
  CHECK(v[2] >= 0.0);
  CHECK(v[2] < 0.5);
  CHECK(v[3] >= 0.5);
  CHECK(v[3] < 1.0);
}

TEST_CASE("latin_hypercube stratifies every coordinate") {
  const BoxDomain dom(3);
  CHECK(stratified(latin_hypercube(dom, 10, 11), dom));
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const int n = 1 + static_cast<int>(seed * 7 % 50);
    const BoxDomain box(Eigen::Vector3d(-2.0, 0.0, 1.0), Eigen::Vector3d(3.0, 0.5, 4.0));
    CHECK(stratified(latin_hypercube(box, n, seed), box));
  }
}

TEST_CASE("latin_hypercube with one point stays inside the box") {
  const BoxDomain dom(2);
  const Eigen::MatrixXd x = latin_hypercube(dom, 1, 0);
  REQUIRE(x.rows() == 1);
  CHECK(dom.contains(x.row(0).transpose()));
}

TEST_CASE("build_tensorized sizes and determinism") {
  const BoxDomain xd(8), yd(1);
  const TensorizedSample s = build_tensorized(xd, yd, 50, 5, 123);
  CHECK(s.n_x() == 50);
  CHECK(s.n_y() == 5);
  CHECK(s.total_size() == 250);
  const PairSample p = s.expand();
  CHECK(p.size() == 250);
  // Pair i * n_Y + j combines x row i with y row j.
  CHECK(p.x.row(7 * 5 + 3) == s.x_points.row(7));
  CHECK(p.y.row(7 * 5 + 3) == s.y_points.row(3));
  for (int i = 0; i < s.n_x(); ++i) CHECK(xd.contains(s.x_points.row(i).transpose()));

  const TensorizedSample t = build_tensorized(xd, yd, 50, 5, 123);
  CHECK(t.x_points == s.x_points);
  CHECK(t.y_points == s.y_points);
  CHECK(t.fingerprint() == s.fingerprint());
  CHECK(build_tensorized(xd, yd, 50, 5, 124).fingerprint() != s.fingerprint());

  const TensorizedSample one = build_tensorized(xd, yd, 1, 1, 0);
  CHECK(one.expand().size() == 1);
}

TEST_CASE("x and y streams use distinct sub-seeds") {
  const TensorizedSample s = build_tensorized(BoxDomain(1), BoxDomain(1), 6, 6, 77);
  CHECK(s.x_points != s.y_points);
  CHECK(stratified(s.x_points, BoxDomain(1)));
  CHECK(stratified(s.y_points, BoxDomain(1)));
}

TEST_CASE("derive_seed and shuffle") {
  std::set<std::uint64_t> seen;
  for (std::uint64_t k = 0; k < 100; ++k) seen.insert(derive_seed(1, k));
  CHECK(seen.size() == 100);

  std::vector<int> idx(30);
  for (int i = 0; i < 30; ++i) idx[i] = i;
  SplitMix64 rng(4);
  shuffle_indices(idx, rng);
  std::vector<int> sorted = idx;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 30; ++i) CHECK(sorted[i] == i);

  SplitMix64 r2(1);
  for (int i = 0; i < 1000; ++i) {
    const double u = r2.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    CHECK(r2.below(7) < 7u);
  }
}

TEST_CASE("BoxDomain rejects inverted bounds and restricts coordinates") {
  CHECK_THROWS_AS(BoxDomain(2, 1.0, -1.0), std::invalid_argument);
  CHECK_THROWS_AS(BoxDomain(0), std::invalid_argument);
  const BoxDomain b(Eigen::Vector3d(0, 1, 2), Eigen::Vector3d(1, 2, 3));
  const BoxDomain r = b.restrict_to({2, 0});
  CHECK(r.dim() == 2);
  CHECK(r.lo(0) == 2.0);
  CHECK(r.hi(1) == 1.0);
  CHECK(b.s_concavity() == doctest::Approx(1.0 / 3.0));
}
