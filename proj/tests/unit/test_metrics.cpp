#include <cmath>
#include <random>

#include "doctest.h"
#include "ucd/data.hpp"
#include "ucd/errors.hpp"
#include "ucd/metrics.hpp"

using namespace ucd;

namespace {

GaussianSummary summary(std::vector<double> mean, std::vector<double> cov) {
  GaussianSummary s;
  s.mean = std::move(mean);
  s.covariance = std::move(cov);
  s.count = 100;
  return s;
}

std::vector<double> gaussian_cloud(std::size_t n, std::size_t dim, double shift, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  std::vector<double> out(n * dim);
  for (auto& v : out) v = g(rng) + shift;
  return out;
}

}  // namespace

TEST_CASE("frechet distance examples") {
  const auto a = summary({0.0}, {1.0});
  const auto b = summary({1.0}, {1.0});
  CHECK(frechet_distance(a, a) == doctest::Approx(0.0));
  CHECK(std::abs(frechet_distance(a, b) - 1.0) < 1e-12);
  const auto i2 = summary({0, 0}, {1, 0, 0, 1});
  const auto i8 = summary({0, 0}, {4, 0, 0, 4});
  CHECK(std::abs(frechet_distance(i2, i8) - 2.0) < 1e-12);
  CHECK_THROWS_AS(frechet_distance(a, i2), ContractError);
}

TEST_CASE("frechet distance is symmetric and zero only on equal summaries") {
  std::mt19937_64 rng(1);
  for (int t = 0; t < 20; ++t) {
    const auto xa = gaussian_cloud(50, 3, 0.0, rng);
    const auto xb = gaussian_cloud(40, 3, 0.3, rng);
    const auto a = GaussianSummary::from_samples(xa, 3);
    const auto b = GaussianSummary::from_samples(xb, 3);
    CHECK(std::abs(frechet_distance(a, b) - frechet_distance(b, a)) < 1e-9);
    CHECK(std::abs(frechet_distance(a, a)) < 1e-9);
    CHECK(frechet_distance(a, b) > 1e-9);
  }
}

TEST_CASE("gaussian summary uses the unbiased covariance") {
  const std::vector<double> rows{0, 0, 2, 0, 0, 2, 2, 2};
  const auto s = GaussianSummary::from_samples(rows, 2);
  CHECK(s.mean == std::vector<double>{1.0, 1.0});
  CHECK(std::abs(s.covariance[0] - 4.0 / 3.0) < 1e-15);
  CHECK(std::abs(s.covariance[1]) < 1e-15);
  CHECK_THROWS_AS(GaussianSummary::from_samples(std::vector<double>{1, 2}, 2), ContractError);
}

TEST_CASE("precision and recall: identical, far and half-shifted sets") {
  std::mt19937_64 rng(2);
  const auto real = gaussian_cloud(2000, 2, 0.0, rng);
  const auto same = knn_precision_recall(real, real, 2, 3);
  CHECK(same.precision == 1.0);
  CHECK(same.recall == 1.0);
  std::vector<double> far = real;
  for (auto& v : far) v += 100.0;
  const auto apart = knn_precision_recall(real, far, 2, 3);
  CHECK(apart.precision == 0.0);
  CHECK(apart.recall == 0.0);

  // Half of the fakes are fresh on-manifold draws, the rest sit far away.
  const std::size_t n = 2000;
  std::vector<double> half = gaussian_cloud(n, 2, 0.0, rng);
  for (std::size_t i = n / 2 * 2; i < half.size(); ++i) half[i] += 100.0;
  // Brute-force reference for the on-manifold half.
  const auto radii = knn_radii(real, 2, 3);
  std::size_t inside = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double dx = half[2 * i] - real[2 * j];
      const double dy = half[2 * i + 1] - real[2 * j + 1];
      if (dx * dx + dy * dy <= radii[j] * radii[j]) {
        ++inside;
        break;
      }
    }
  }
  const auto pr = knn_precision_recall(real, half, 2, 3);
  CHECK(pr.precision == doctest::Approx(static_cast<double>(inside) / n).epsilon(1e-12));
  const double sd = std::sqrt(0.25 / n);
  CHECK(std::abs(pr.precision - 0.5) < 3 * sd + 0.02);
  CHECK_THROWS_AS(knn_precision_recall(std::vector<double>{0, 0, 1, 1}, real, 2, 3), ContractError);
}

TEST_CASE("swapping real and fake swaps precision and recall") {
  std::mt19937_64 rng(3);
  const auto a = gaussian_cloud(500, 2, 0.0, rng);
  const auto b = gaussian_cloud(400, 2, 0.7, rng);
  const auto ab = knn_precision_recall(a, b, 2, 3);
  const auto ba = knn_precision_recall(b, a, 2, 3);
  CHECK(ab.precision == ba.recall);
  CHECK(ab.recall == ba.precision);
}

TEST_CASE("mode coverage") {
  const Dataset data{DatasetSpec{}};
  const auto& mix = *data.mixture();
  const double radius = 3.0 * mix.max_sigma();
  Rng rng(4);
  const auto b = data.sample_labeled(5000, rng);
  const auto all = mode_coverage(b.x.data(), 2, mix, radius);
  CHECK(all.covered == 8);
  std::vector<double> one;
  for (int i = 0; i < 100; ++i) one.insert(one.end(), mix.mean(3).begin(), mix.mean(3).end());
  const auto single = mode_coverage(one, 2, mix, radius);
  CHECK(single.covered == 1);
  CHECK(single.per_mode[3] == 100);
  CHECK(mode_coverage(std::vector<double>{}, 2, mix, radius).covered == 0);
}
