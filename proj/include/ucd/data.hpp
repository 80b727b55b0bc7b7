#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ucd/nets.hpp"
#include "ucd/tensor.hpp"

namespace ucd {

// Independent generator stream derived from a run seed. Streams with
// different ids never share state.
Rng make_stream(std::uint64_t seed, std::uint64_t stream_id);

namespace streams {
inline constexpr std::uint64_t init = 1;
inline constexpr std::uint64_t train = 2;
inline constexpr std::uint64_t probe = 3;
inline constexpr std::uint64_t metrics = 4;
inline constexpr std::uint64_t augment = 5;
}  // namespace streams

struct LabeledBatch {
  Tensor x;                          // [B, dim]
  std::vector<std::size_t> labels;  // B entries
};

// In-memory labeled set, immutable once loaded.
class LabeledSet {
 public:
  LabeledSet(std::vector<double> values, std::vector<std::size_t> labels, std::size_t dim, std::size_t n_classes);

  std::size_t size() const { return labels_.size(); }
  std::size_t dim() const { return dim_; }
  std::size_t n_classes() const { return n_classes_; }
  std::span<const double> values() const { return values_; }
  std::span<const std::size_t> labels() const { return labels_; }
  std::span<const double> row(std::size_t i) const { return {values_.data() + i * dim_, dim_}; }
  LabeledBatch as_batch() const;

 private:
  std::vector<double> values_;
  std::vector<std::size_t> labels_;
  std::size_t dim_;
  std::size_t n_classes_;
};

enum class DatasetKind { ring_mixture, grid_mixture, file };

const char* to_string(DatasetKind kind);
DatasetKind parse_dataset_kind(const std::string& text);

struct DatasetSpec {
  DatasetKind kind = DatasetKind::ring_mixture;
  std::size_t n_classes = 8;
  double radius = 2.0;        // ring
  double spacing = 1.0;       // grid
  double sigma = 0.05;
  std::size_t sample_dim = 2;
  std::filesystem::path path;  // file
};

// Class-conditional Gaussians with full covariances.
class GaussianMixture {
 public:
  GaussianMixture(std::vector<std::vector<double>> means, std::vector<std::vector<double>> covariances);

  static GaussianMixture ring(std::size_t n_classes, double radius, double sigma, std::size_t dim = 2);
  static GaussianMixture grid(std::size_t n_classes, double spacing, double sigma, std::size_t dim = 2);

  std::size_t n_classes() const { return means_.size(); }
  std::size_t dim() const { return dim_; }
  const std::vector<double>& mean(std::size_t c) const { return means_[c]; }
  const std::vector<double>& covariance(std::size_t c) const { return covariances_[c]; }
  // Largest per-axis standard deviation over all classes.
  double max_sigma() const;
  // Minimal distance between two class means divided by max_sigma().
  double separation() const;

  void sample_into(std::size_t label, Rng& rng, std::span<double> out) const;

 private:
  std::vector<std::vector<double>> means_;
  std::vector<std::vector<double>> covariances_;  // row-major dim x dim
  std::vector<std::vector<double>> cholesky_;
  std::size_t dim_;
};

inline constexpr double kMinSeparation = 6.0;

// Either a mixture or a loaded file, validated at construction.
class Dataset {
 public:
  explicit Dataset(const DatasetSpec& spec);
  explicit Dataset(LabeledSet set);

  // Uniform labels; x | c drawn from the class component (or a uniformly
  // chosen row of class c for file datasets).
  LabeledBatch sample_labeled(std::size_t batch, Rng& rng) const;
  // Samples with the given labels.
  Tensor sample_for_labels(std::span<const std::size_t> labels, Rng& rng) const;

  std::size_t n_classes() const { return n_classes_; }
  std::size_t dim() const { return dim_; }
  const GaussianMixture* mixture() const { return mixture_ ? &*mixture_ : nullptr; }

 private:
  std::optional<GaussianMixture> mixture_;
  std::optional<LabeledSet> table_;
  std::vector<std::vector<std::size_t>> rows_by_class_;
  std::size_t n_classes_ = 0;
  std::size_t dim_ = 0;
};

LabeledBatch sample_labeled(const DatasetSpec& spec, std::size_t batch, Rng& rng);

struct AugmentSpec {
  double jitter_std = 0.02;
  double rotation_max = 0.2;
  double scale_lo = 0.9;
  double scale_hi = 1.1;

  void validate() const;
};

// Per row: rotate by U(-rot, rot) in the first two coordinates, scale by
// U(lo, hi), add N(0, jitter^2) noise. Disabled components draw nothing, so
// an all-zero spec with scale [1, 1] is the identity.
Tensor augment(const Tensor& x, const AugmentSpec& spec, Rng& rng);

// CSV with header "label,x_0,...,x_{d-1}".
// Labels must lie below n_classes when given; otherwise max label + 1 is used.
LabeledSet load_dataset_file(const std::filesystem::path& path, std::optional<std::size_t> n_classes = std::nullopt);
void save_dataset_file(const std::filesystem::path& path, const LabeledSet& set);

}  // namespace ucd
