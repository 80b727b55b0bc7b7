#include "ucd/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include "ucd/errors.hpp"

namespace ucd {

Rng make_stream(std::uint64_t seed, std::uint64_t stream_id) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream_id), static_cast<std::uint32_t>(stream_id >> 32)};
  return Rng(seq);
}

// --- LabeledSet ------------------------------------------------------------------

LabeledSet::LabeledSet(std::vector<double> values, std::vector<std::size_t> labels, std::size_t dim,
                       std::size_t n_classes)
    : values_(std::move(values)), labels_(std::move(labels)), dim_(dim), n_classes_(n_classes) {
  if (dim_ == 0) throw ValidationError("dataset: zero sample dimension");
  if (values_.size() != labels_.size() * dim_) throw ValidationError("dataset: value count does not match labels");
  for (auto l : labels_) {
    if (l >= n_classes_) throw ValidationError("dataset: label " + std::to_string(l) + " out of range");
  }
}

LabeledBatch LabeledSet::as_batch() const {
  if (labels_.empty()) throw ContractError("dataset: empty set has no batch form");
  return LabeledBatch{Tensor({labels_.size(), dim_}, values_), labels_};
}

const char* to_string(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::ring_mixture: return "ring";
    case DatasetKind::grid_mixture: return "grid";
    case DatasetKind::file: return "file";
  }
  return "?";
}

DatasetKind parse_dataset_kind(const std::string& text) {
  if (text == "ring") return DatasetKind::ring_mixture;
  if (text == "grid") return DatasetKind::grid_mixture;
  if (text == "file") return DatasetKind::file;
  throw ConfigError("unknown dataset kind '" + text + "' (expected ring, grid or file)");
}

// --- GaussianMixture -----------------------------------------------------------------

GaussianMixture::GaussianMixture(std::vector<std::vector<double>> means, std::vector<std::vector<double>> covariances)
    : means_(std::move(means)), covariances_(std::move(covariances)) {
  if (means_.size() < 2) throw ValidationError("mixture: need at least two classes");
  if (covariances_.size() != means_.size()) throw ValidationError("mixture: one covariance per class required");
  dim_ = means_[0].size();
  if (dim_ == 0) throw ValidationError("mixture: zero dimension");
  for (std::size_t c = 0; c < means_.size(); ++c) {
    if (means_[c].size() != dim_) throw ValidationError("mixture: class " + std::to_string(c) + " mean has wrong dimension");
    const auto& cov = covariances_[c];
    if (cov.size() != dim_ * dim_) throw ValidationError("mixture: class " + std::to_string(c) + " covariance has wrong size");
    // Cholesky factorisation doubles as the positive-definiteness check.
    std::vector<double> l(dim_ * dim_, 0.0);
    for (std::size_t i = 0; i < dim_; ++i) {
      for (std::size_t j = 0; j <= i; ++j) {
        if (std::abs(cov[i * dim_ + j] - cov[j * dim_ + i]) > 1e-12) {
          throw ValidationError("mixture: class " + std::to_string(c) + " covariance is not symmetric");
        }
        double s = cov[i * dim_ + j];
        for (std::size_t k = 0; k < j; ++k) s -= l[i * dim_ + k] * l[j * dim_ + k];
        if (i == j) {
          if (!(s > 0.0)) throw ValidationError("mixture: class " + std::to_string(c) + " covariance is not positive definite");
          l[i * dim_ + i] = std::sqrt(s);
        } else {
          l[i * dim_ + j] = s / l[j * dim_ + j];
        }
      }
    }
    cholesky_.push_back(std::move(l));
  }
}

namespace {

std::vector<double> isotropic(std::size_t dim, double sigma) {
  std::vector<double> cov(dim * dim, 0.0);
  for (std::size_t i = 0; i < dim; ++i) cov[i * dim + i] = sigma * sigma;
  return cov;
}

}  // namespace

GaussianMixture GaussianMixture::ring(std::size_t n_classes, double radius, double sigma, std::size_t dim) {
  if (dim < 2) throw ValidationError("ring mixture: needs at least 2 dimensions");
  if (!(sigma > 0.0) || !(radius > 0.0)) throw ValidationError("ring mixture: radius and sigma must be positive");
  std::vector<std::vector<double>> means;
  std::vector<std::vector<double>> covs;
  for (std::size_t k = 0; k < n_classes; ++k) {
    const double angle = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n_classes);
    std::vector<double> mu(dim, 0.0);
    mu[0] = radius * std::cos(angle);
    mu[1] = radius * std::sin(angle);
    means.push_back(std::move(mu));
    covs.push_back(isotropic(dim, sigma));
  }
  return GaussianMixture(std::move(means), std::move(covs));
}

GaussianMixture GaussianMixture::grid(std::size_t n_classes, double spacing, double sigma, std::size_t dim) {
  if (dim < 2) throw ValidationError("grid mixture: needs at least 2 dimensions");
  if (!(sigma > 0.0) || !(spacing > 0.0)) throw ValidationError("grid mixture: spacing and sigma must be positive");
  const auto side = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n_classes))));
  const double offset = 0.5 * static_cast<double>(side - 1);
  std::vector<std::vector<double>> means;
  std::vector<std::vector<double>> covs;
  for (std::size_t k = 0; k < n_classes; ++k) {
    std::vector<double> mu(dim, 0.0);
    mu[0] = spacing * (static_cast<double>(k % side) - offset);
    mu[1] = spacing * (static_cast<double>(k / side) - offset);
    means.push_back(std::move(mu));
    covs.push_back(isotropic(dim, sigma));
  }
  return GaussianMixture(std::move(means), std::move(covs));
}

double GaussianMixture::max_sigma() const {
  double s = 0.0;
  for (const auto& cov : covariances_) {
    for (std::size_t i = 0; i < dim_; ++i) s = std::max(s, std::sqrt(cov[i * dim_ + i]));
  }
  return s;
}

double GaussianMixture::separation() const {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < means_.size(); ++a) {
    for (std::size_t b = a + 1; b < means_.size(); ++b) {
      double d2 = 0.0;
      for (std::size_t i = 0; i < dim_; ++i) d2 += (means_[a][i] - means_[b][i]) * (means_[a][i] - means_[b][i]);
      best = std::min(best, std::sqrt(d2));
    }
  }
  return best / max_sigma();
}

void GaussianMixture::sample_into(std::size_t label, Rng& rng, std::span<double> out) const {
  std::normal_distribution<double> normal(0.0, 1.0);
  double noise[16];
  std::vector<double> heap;
  double* e = noise;
  if (dim_ > 16) {
    heap.resize(dim_);
    e = heap.data();
  }
  for (std::size_t i = 0; i < dim_; ++i) e[i] = normal(rng);
  const auto& l = cholesky_[label];
  for (std::size_t i = 0; i < dim_; ++i) {
    double v = means_[label][i];
    for (std::size_t k = 0; k <= i; ++k) v += l[i * dim_ + k] * e[k];
    out[i] = v;
  }
}

// --- Dataset ---------------------------------------------------------------------------

Dataset::Dataset(const DatasetSpec& spec) {
  switch (spec.kind) {
    case DatasetKind::ring_mixture:
      mixture_ = GaussianMixture::ring(spec.n_classes, spec.radius, spec.sigma, spec.sample_dim);
      break;
    case DatasetKind::grid_mixture:
      mixture_ = GaussianMixture::grid(spec.n_classes, spec.spacing, spec.sigma, spec.sample_dim);
      break;
    case DatasetKind::file: {
      *this = Dataset(load_dataset_file(spec.path, spec.n_classes));
      if (dim_ != spec.sample_dim) {
        throw ValidationError("dataset file " + spec.path.string() + " has dimension " + std::to_string(dim_) +
                              ", config says " + std::to_string(spec.sample_dim));
      }
      return;
    }
  }
  if (mixture_->separation() < kMinSeparation) {
    throw ValidationError("mixture: class means are only " + std::to_string(mixture_->separation()) +
                          " sigma apart (need >= 6)");
  }
  n_classes_ = mixture_->n_classes();
  dim_ = mixture_->dim();
}

Dataset::Dataset(LabeledSet set) : n_classes_(set.n_classes()), dim_(set.dim()) {
  rows_by_class_.resize(n_classes_);
  for (std::size_t i = 0; i < set.size(); ++i) rows_by_class_[set.labels()[i]].push_back(i);
  for (std::size_t c = 0; c < n_classes_; ++c) {
    if (rows_by_class_[c].empty()) throw ValidationError("dataset: class " + std::to_string(c) + " has no rows");
  }
  table_ = std::move(set);
}

Tensor Dataset::sample_for_labels(std::span<const std::size_t> labels, Rng& rng) const {
  if (labels.empty()) throw ContractError("dataset: empty label batch");
  std::vector<double> x(labels.size() * dim_);
  for (std::size_t b = 0; b < labels.size(); ++b) {
    if (labels[b] >= n_classes_) throw DomainError("dataset: label " + std::to_string(labels[b]) + " out of range");
    std::span<double> out(x.data() + b * dim_, dim_);
    if (mixture_) {
      mixture_->sample_into(labels[b], rng, out);
    } else {
      const auto& rows = rows_by_class_[labels[b]];
      std::uniform_int_distribution<std::size_t> pick(0, rows.size() - 1);
      const auto row = table_->row(rows[pick(rng)]);
      std::copy(row.begin(), row.end(), out.begin());
    }
  }
  return Tensor({labels.size(), dim_}, std::move(x));
}

LabeledBatch Dataset::sample_labeled(std::size_t batch, Rng& rng) const {
  if (batch == 0) throw ContractError("dataset: batch size must be positive");
  std::uniform_int_distribution<std::size_t> label_dist(0, n_classes_ - 1);
  std::vector<std::size_t> labels(batch);
  for (auto& l : labels) l = label_dist(rng);
  Tensor x = sample_for_labels(labels, rng);
  return LabeledBatch{std::move(x), std::move(labels)};
}

LabeledBatch sample_labeled(const DatasetSpec& spec, std::size_t batch, Rng& rng) {
  return Dataset(spec).sample_labeled(batch, rng);
}

// --- augmentation -------------------------------------------------------------------------

void AugmentSpec::validate() const {
  if (jitter_std < 0.0 || rotation_max < 0.0) throw ValidationError("augment: jitter and rotation must be non-negative");
  if (!(scale_lo > 0.0) || scale_hi < scale_lo) throw ValidationError("augment: need 0 < scale_lo <= scale_hi");
}

Tensor augment(const Tensor& x, const AugmentSpec& spec, Rng& rng) {
  spec.validate();
  if (x.rank() != 2) throw DimensionError("augment: expected [B, dim], got " + shape_str(x.shape()));
  const std::size_t rows = x.dim(0);
  const std::size_t dim = x.dim(1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, spec.jitter_std > 0.0 ? spec.jitter_std : 1.0);
  std::vector<double> out(x.data().begin(), x.data().end());
  for (std::size_t r = 0; r < rows; ++r) {
    double* v = out.data() + r * dim;
    if (spec.rotation_max > 0.0 && dim >= 2) {
      const double angle = spec.rotation_max * (2.0 * unit(rng) - 1.0);
      const double c = std::cos(angle);
      const double s = std::sin(angle);
      const double a = v[0];
      const double b = v[1];
      v[0] = c * a - s * b;
      v[1] = s * a + c * b;
    }
    const double factor = spec.scale_hi > spec.scale_lo ? spec.scale_lo + (spec.scale_hi - spec.scale_lo) * unit(rng)
                                                        : spec.scale_lo;
    for (std::size_t i = 0; i < dim; ++i) v[i] *= factor;
    if (spec.jitter_std > 0.0) {
      for (std::size_t i = 0; i < dim; ++i) v[i] += normal(rng);
    }
  }
  return Tensor(x.shape(), std::move(out));
}

// --- CSV ----------------------------------------------------------------------------------

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r");
  const auto last = s.find_last_not_of(" \t\r");
  return first == std::string::npos ? std::string{} : s.substr(first, last - first + 1);
}

}  // namespace

LabeledSet load_dataset_file(const std::filesystem::path& path, std::optional<std::size_t> n_classes) {
  std::ifstream in(path);
  if (!in) throw ValidationError("dataset: cannot open " + path.string());
  std::string line;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& why) -> ValidationError {
    return ValidationError(path.string() + ":" + std::to_string(line_no) + ": " + why);
  };
  if (!std::getline(in, line)) {
    line_no = 1;
    throw fail("empty file");
  }
  ++line_no;
  const auto header = split_csv(trim(line));
  if (header.size() < 2 || trim(header[0]) != "label") throw fail("header must be label,x_0,...");
  const std::size_t dim = header.size() - 1;
  for (std::size_t i = 0; i < dim; ++i) {
    if (trim(header[i + 1]) != "x_" + std::to_string(i)) throw fail("header column " + std::to_string(i + 1) + " must be x_" + std::to_string(i));
  }
  std::vector<double> values;
  std::vector<std::size_t> labels;
  std::size_t max_label = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != dim + 1) {
      throw fail("expected " + std::to_string(dim + 1) + " columns, got " + std::to_string(cells.size()));
    }
    const std::string label_text = trim(cells[0]);
    std::size_t label = 0;
    auto [ptr, ec] = std::from_chars(label_text.data(), label_text.data() + label_text.size(), label);
    if (ec != std::errc{} || ptr != label_text.data() + label_text.size()) throw fail("bad label '" + label_text + "'");
    if (n_classes && label >= *n_classes) {
      throw fail("label " + std::to_string(label) + " out of range for " + std::to_string(*n_classes) + " classes");
    }
    for (std::size_t i = 0; i < dim; ++i) {
      const std::string cell = trim(cells[i + 1]);
      double v = 0.0;
      auto [p, e] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (e != std::errc{} || p != cell.data() + cell.size() || !std::isfinite(v)) {
        throw fail("bad value '" + cell + "' in column x_" + std::to_string(i));
      }
      values.push_back(v);
    }
    labels.push_back(label);
    max_label = std::max(max_label, label);
  }
  if (labels.empty()) throw fail("no data rows");
  return LabeledSet(std::move(values), std::move(labels), dim, n_classes.value_or(max_label + 1));
}

void save_dataset_file(const std::filesystem::path& path, const LabeledSet& set) {
  std::ofstream out(path);
  if (!out) throw ValidationError("dataset: cannot write " + path.string());
  out << "label";
  for (std::size_t i = 0; i < set.dim(); ++i) out << ",x_" << i;
  out << '\n';
  char buf[64];
  for (std::size_t r = 0; r < set.size(); ++r) {
    out << set.labels()[r];
    for (double v : set.row(r)) {
      auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
      out << ',' << std::string_view(buf, static_cast<std::size_t>(ptr - buf));
    }
    out << '\n';
  }
}

}  // namespace ucd
