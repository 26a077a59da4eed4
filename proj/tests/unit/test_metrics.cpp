#include <doctest.h>

#include <cmath>

#include "ssagan/error.hpp"
#include "ssagan/log.hpp"
#include "ssagan/metrics.hpp"
#include "ssagan/ops.hpp"
#include "ssagan/rng.hpp"

using namespace ssagan;
using namespace ssagan::metrics;

namespace {

Tensor one_hot_balanced(int n, int k) {
  Tensor t({n, k}, 0.0);
  for (int i = 0; i < n; ++i) t.mutable_data()[static_cast<std::size_t>(i * k + i % k)] = 1.0;
  return t;
}

Tensor random_probs(int n, int k, Rng& rng) {
  std::vector<Real> v(static_cast<std::size_t>(n * k));
  for (int i = 0; i < n; ++i) {
    double z = 0;
    for (int j = 0; j < k; ++j) z += v[i * k + j] = std::exp(2 * rng.normal());
    for (int j = 0; j < k; ++j) v[i * k + j] /= z;
  }
  return Tensor(Shape{n, k}, v);
}

}  // namespace

TEST_CASE("inception score closed forms") {
  Tensor same({12, 4}, 0.0);
  for (int i = 0; i < 12; ++i)
    for (int j = 0; j < 4; ++j) same.mutable_data()[i * 4 + j] = (j + 1) / 10.0;
  CHECK(inception_score(same).mean == doctest::Approx(1.0).epsilon(1e-14));
  for (int k : {2, 5, 18}) CHECK(inception_score(one_hot_balanced(k * 7, k)).mean == doctest::Approx(k).epsilon(1e-14));
  auto split = inception_score(one_hot_balanced(60, 3), 4);
  CHECK(split.mean == doctest::Approx(3.0).epsilon(1e-14));
  CHECK(split.std < 1e-12);
}

TEST_CASE("inception score is at least one and order invariant") {
  Rng rng(1);
  Tensor p = random_probs(40, 6, rng);
  double base = inception_score(p).mean;
  CHECK(base >= 1.0);
  std::vector<Real> v = p.to_vector();
  for (int i = 0; i < 20; ++i) std::swap_ranges(v.begin() + i * 6, v.begin() + i * 6 + 6, v.begin() + (39 - i) * 6);
  CHECK(inception_score(Tensor(Shape{40, 6}, v)).mean == doctest::Approx(base).epsilon(1e-13));
}

TEST_CASE("inception score validates rows and splits") {
  CHECK_THROWS_AS(inception_score(Tensor(Shape{2, 2}, {0.5, 0.6, 0.5, 0.5})), InputError);
  CHECK_THROWS_AS(inception_score(Tensor(Shape{1, 2}, {1.5, -0.5})), InputError);
  CHECK_THROWS_AS(inception_score(one_hot_balanced(4, 2), 0), ConfigError);
  std::vector<std::string> warnings;
  auto previous = set_warning_sink([&](const std::string& m) { warnings.push_back(m); });
  CHECK(inception_score(one_hot_balanced(10, 3), 3).mean == doctest::Approx(3.0).epsilon(1e-14));
  set_warning_sink(previous);
  CHECK(warnings.size() == 1);
}

TEST_CASE("fid of identical sets and symmetry") {
  Rng rng(2);
  Tensor a = Tensor::randn({200, 8}, rng), b = Tensor::randn({150, 8}, rng, 1.5) + 0.3;
  CHECK(std::abs(fid(a, a)) < 1e-6);
  CHECK(fid(a, b) == fid(b, a));
  CHECK(fid(a, b) > 0);
  CHECK_THROWS_AS(fid(a, Tensor::randn({10, 7}, rng)), InputError);
  auto bad = a.to_vector();
  bad[3] = std::nan("");
  CHECK_THROWS_AS(fid(Tensor(Shape{200, 8}, bad), b), InputError);
}

TEST_CASE("fid between sampled Gaussians approaches the shifted-mean distance") {
  Rng rng(3);
  const int n = 50000, f = 4;
  Tensor a = Tensor::randn({n, f}, rng);
  std::vector<Real> mu{1.0, -0.5, 2.0, 0.0};
  Tensor shift(Shape{f}, mu);
  Tensor b = Tensor::randn({n, f}, rng) + shift;
  const double expected = 1.0 + 0.25 + 4.0;
  CHECK(std::abs(fid(a, b) - expected) / expected < 0.02);
}

TEST_CASE("fid is invariant to a common rotation") {
  Rng rng(4);
  Tensor a = Tensor::randn({300, 3}, rng), b = Tensor::randn({300, 3}, rng, 0.7) + 0.5;
  const double c = std::cos(0.7), s = std::sin(0.7), c2 = std::cos(-1.1), s2 = std::sin(-1.1);
  // Product of rotations in the (0,1) and (1,2) planes.
  double r[3][3] = {{c, -s, 0}, {s, c, 0}, {0, 0, 1}};
  double q[3][3] = {{1, 0, 0}, {0, c2, -s2}, {0, s2, c2}};
  double rot[3][3] = {};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) rot[i][j] += r[i][k] * q[k][j];
  auto apply = [&](const Tensor& x) {
    std::vector<Real> v(static_cast<std::size_t>(x.numel()));
    for (std::int64_t n = 0; n < x.dim(0); ++n)
      for (int i = 0; i < 3; ++i) {
        double acc = 0;
        for (int k = 0; k < 3; ++k) acc += x.at({n, k}) * rot[k][i];
        v[static_cast<std::size_t>(n * 3 + i)] = acc;
      }
    return Tensor(x.shape(), v);
  };
  CHECK(std::abs(fid(a, b) - fid(apply(a), apply(b))) < 1e-6);
}
