#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ucd/data.hpp"

namespace ucd {

struct GaussianSummary {
  std::vector<double> mean;
  std::vector<double> covariance;  // row-major dim x dim
  std::size_t count = 0;

  std::size_t dim() const { return mean.size(); }
  // Sample mean and unbiased covariance of row-major [n, dim] data.
  static GaussianSummary from_samples(std::span<const double> rows, std::size_t dim);
  void validate() const;
};

// |mu_a - mu_b|^2 + Tr(S_a + S_b - 2 (S_a S_b)^(1/2)), the trace of the root
// taken from the eigenvalues of S_a^(1/2) S_b S_a^(1/2).
double frechet_distance(const GaussianSummary& a, const GaussianSummary& b);

struct PrSummary {
  double precision = 0.0;
  double recall = 0.0;
  std::size_t k = 3;
};

// k-NN manifold precision and recall. precision: fraction of fake points
// inside some real point's k-NN ball; recall: the same with roles swapped.
PrSummary knn_precision_recall(std::span<const double> real, std::span<const double> fake, std::size_t dim,
                               std::size_t k = 3);

// Radius of each point's k-th nearest neighbour within the same set.
std::vector<double> knn_radii(std::span<const double> points, std::size_t dim, std::size_t k);
// Fraction of queries lying within the radius ball of at least one reference.
double fraction_inside_balls(std::span<const double> references, std::span<const double> radii,
                             std::span<const double> queries, std::size_t dim);

struct ModeCoverage {
  std::size_t covered = 0;
  std::vector<std::size_t> per_mode;
};

inline constexpr double kCoverageFraction = 0.01;

// A mode counts as covered when at least 1% of the fake samples fall within
// radius of its mean.
ModeCoverage mode_coverage(std::span<const double> fake, std::size_t dim, const GaussianMixture& mixture,
                           double radius);

}  // namespace ucd
