#include "ucd/metrics.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>

#include "ucd/errors.hpp"

namespace ucd {

namespace {

using Mat = Eigen::MatrixXd;

Mat to_matrix(const std::vector<double>& flat, std::size_t dim) {
  Mat m(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < dim; ++i) {
    for (std::size_t j = 0; j < dim; ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = flat[i * dim + j];
  }
  return m;
}

Mat psd_sqrt(const Mat& m) {
  Eigen::SelfAdjointEigenSolver<Mat> eig(0.5 * (m + m.transpose()));
  const Eigen::VectorXd roots = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * roots.asDiagonal() * eig.eigenvectors().transpose();
}

}  // namespace

GaussianSummary GaussianSummary::from_samples(std::span<const double> rows, std::size_t dim) {
  if (dim == 0 || rows.size() % dim != 0) throw DimensionError("gaussian summary: data is not a multiple of dim");
  const std::size_t n = rows.size() / dim;
  if (n < 2) throw ContractError("gaussian summary: need at least two samples");
  GaussianSummary s;
  s.count = n;
  s.mean.assign(dim, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t i = 0; i < dim; ++i) s.mean[i] += rows[r * dim + i];
  }
  for (auto& m : s.mean) m /= static_cast<double>(n);
  s.covariance.assign(dim * dim, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t i = 0; i < dim; ++i) {
      const double di = rows[r * dim + i] - s.mean[i];
      for (std::size_t j = i; j < dim; ++j) s.covariance[i * dim + j] += di * (rows[r * dim + j] - s.mean[j]);
    }
  }
  for (std::size_t i = 0; i < dim; ++i) {
    for (std::size_t j = i; j < dim; ++j) {
      s.covariance[i * dim + j] /= static_cast<double>(n - 1);
      s.covariance[j * dim + i] = s.covariance[i * dim + j];
    }
  }
  return s;
}

void GaussianSummary::validate() const {
  const std::size_t d = dim();
  if (d == 0 || covariance.size() != d * d) throw ContractError("gaussian summary: covariance does not match mean");
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      if (std::abs(covariance[i * d + j] - covariance[j * d + i]) > 1e-10) {
        throw ContractError("gaussian summary: covariance is not symmetric");
      }
    }
  }
  Eigen::SelfAdjointEigenSolver<Mat> eig(to_matrix(covariance, d), Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() < -1e-10) throw ContractError("gaussian summary: covariance is not PSD");
}

double frechet_distance(const GaussianSummary& a, const GaussianSummary& b) {
  if (a.dim() != b.dim()) {
    throw ContractError("frechet_distance: dimension " + std::to_string(a.dim()) + " vs " + std::to_string(b.dim()));
  }
  a.validate();
  b.validate();
  const std::size_t d = a.dim();
  double mean_term = 0.0;
  for (std::size_t i = 0; i < d; ++i) mean_term += (a.mean[i] - b.mean[i]) * (a.mean[i] - b.mean[i]);
  const Mat sa = to_matrix(a.covariance, d);
  const Mat sb = to_matrix(b.covariance, d);
  const Mat root_a = psd_sqrt(sa);
  const Mat inner = root_a * sb * root_a;
  Eigen::SelfAdjointEigenSolver<Mat> eig(0.5 * (inner + inner.transpose()), Eigen::EigenvaluesOnly);
  const double trace_root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
  const double value = mean_term + sa.trace() + sb.trace() - 2.0 * trace_root;
  return std::max(value, 0.0);
}

// Points are sorted by their first coordinate; neighbour searches sweep
// outwards from the query position and stop once the coordinate gap alone
// exceeds the current bound.
namespace {

struct SortedPoints {
  std::vector<std::size_t> order;  // indices sorted by first coordinate
  std::vector<double> keys;        // first coordinates in that order
};

SortedPoints sort_points(std::span<const double> points, std::size_t dim) {
  const std::size_t n = points.size() / dim;
  SortedPoints s;
  s.order.resize(n);
  std::iota(s.order.begin(), s.order.end(), std::size_t{0});
  std::stable_sort(s.order.begin(), s.order.end(),
                   [&](std::size_t a, std::size_t b) { return points[a * dim] < points[b * dim]; });
  s.keys.resize(n);
  for (std::size_t i = 0; i < n; ++i) s.keys[i] = points[s.order[i] * dim];
  return s;
}

double squared_distance(const double* a, const double* b, std::size_t dim) {
  double d2 = 0.0;
  for (std::size_t i = 0; i < dim; ++i) d2 += (a[i] - b[i]) * (a[i] - b[i]);
  return d2;
}

}  // namespace

std::vector<double> knn_radii(std::span<const double> points, std::size_t dim, std::size_t k) {
  const std::size_t n = points.size() / dim;
  if (n <= k) throw ContractError("knn: need more than k=" + std::to_string(k) + " points, got " + std::to_string(n));
  const SortedPoints sorted = sort_points(points, dim);
  std::vector<double> radii(n);
  for (std::size_t pos = 0; pos < n; ++pos) {
    const std::size_t self = sorted.order[pos];
    const double* p = points.data() + self * dim;
    std::priority_queue<double> best;  // k smallest squared distances
    auto offer = [&](std::size_t other_pos) {
      const double d2 = squared_distance(p, points.data() + sorted.order[other_pos] * dim, dim);
      if (best.size() < k) {
        best.push(d2);
      } else if (d2 < best.top()) {
        best.pop();
        best.push(d2);
      }
    };
    std::size_t lo = pos;
    std::size_t hi = pos + 1;
    while (lo > 0 || hi < n) {
      const double bound = best.size() < k ? std::numeric_limits<double>::infinity() : best.top();
      const double gap_lo = lo > 0 ? (p[0] - sorted.keys[lo - 1]) : std::numeric_limits<double>::infinity();
      const double gap_hi = hi < n ? (sorted.keys[hi] - p[0]) : std::numeric_limits<double>::infinity();
      if (std::min(gap_lo, gap_hi) * std::min(gap_lo, gap_hi) > bound) break;
      if (gap_lo <= gap_hi) {
        offer(--lo);
      } else {
        offer(hi++);
      }
    }
    radii[self] = std::sqrt(best.top());
  }
  return radii;
}

double fraction_inside_balls(std::span<const double> references, std::span<const double> radii,
                             std::span<const double> queries, std::size_t dim) {
  const std::size_t n_query = queries.size() / dim;
  if (n_query == 0) return 0.0;
  const SortedPoints sorted = sort_points(references, dim);
  const double max_radius = *std::max_element(radii.begin(), radii.end());
  std::size_t inside = 0;
  for (std::size_t q = 0; q < n_query; ++q) {
    const double* p = queries.data() + q * dim;
    const auto first = std::lower_bound(sorted.keys.begin(), sorted.keys.end(), p[0] - max_radius);
    for (auto it = first; it != sorted.keys.end() && *it <= p[0] + max_radius; ++it) {
      const std::size_t ref = sorted.order[static_cast<std::size_t>(it - sorted.keys.begin())];
      const double r = radii[ref];
      if (squared_distance(p, references.data() + ref * dim, dim) <= r * r) {
        ++inside;
        break;
      }
    }
  }
  return static_cast<double>(inside) / static_cast<double>(n_query);
}

PrSummary knn_precision_recall(std::span<const double> real, std::span<const double> fake, std::size_t dim,
                               std::size_t k) {
  if (dim == 0 || real.size() % dim || fake.size() % dim) throw DimensionError("knn_precision_recall: bad dimension");
  const std::size_t n_real = real.size() / dim;
  const std::size_t n_fake = fake.size() / dim;
  if (n_real <= k || n_fake <= k) {
    throw ContractError("knn_precision_recall: both sets need more than k=" + std::to_string(k) + " points");
  }
  const auto real_radii = knn_radii(real, dim, k);
  const auto fake_radii = knn_radii(fake, dim, k);
  return PrSummary{fraction_inside_balls(real, real_radii, fake, dim), fraction_inside_balls(fake, fake_radii, real, dim),
                   k};
}

ModeCoverage mode_coverage(std::span<const double> fake, std::size_t dim, const GaussianMixture& mixture,
                           double radius) {
  if (mixture.dim() != dim) throw DimensionError("mode_coverage: sample dim does not match mixture");
  ModeCoverage result;
  result.per_mode.assign(mixture.n_classes(), 0);
  const std::size_t n = fake.size() / dim;
  if (n == 0) return result;
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < mixture.n_classes(); ++c) {
      if (squared_distance(fake.data() + r * dim, mixture.mean(c).data(), dim) <= radius * radius) {
        ++result.per_mode[c];
      }
    }
  }
  const double needed = kCoverageFraction * static_cast<double>(n);
  for (auto count : result.per_mode) {
    if (static_cast<double>(count) >= needed) ++result.covered;
  }
  return result;
}

}  // namespace ucd
