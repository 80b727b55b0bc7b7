#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "ucd/adam.hpp"
#include "ucd/data.hpp"
#include "ucd/nets.hpp"

namespace ucd {

enum class ProbeKind { conditional, ucd, linear };

const char* to_string(ProbeKind kind);

struct ProbeReport {
  std::size_t step = 0;
  std::map<std::size_t, double> top_k_accuracy;
  std::size_t n_samples = 0;
  ProbeKind kind = ProbeKind::ucd;
  // Rows pushed through the discriminator to produce the report.
  std::size_t forward_rows = 0;

  double top(std::size_t k) const;
};

// Classes ordered by descending score; equal scores keep ascending index.
std::vector<std::size_t> tie_break(std::span<const double> scores);

// Top-k accuracies of a [n, card] score matrix against labels.
std::map<std::size_t, double> top_k_accuracy(std::span<const double> scores, std::size_t card,
                                             std::span<const std::size_t> labels, std::span<const std::size_t> ks);

// Scores every sample under every condition, D(x, c') for c' in C, and ranks
// the conditions. card(C) forward rows per sample.
ProbeReport probe_conditional(const DiscriminatorNet& net, const LabeledBatch& samples, std::span<const std::size_t> ks);

// One forward per sample; ranks the components of d(x).
ProbeReport probe_ucd(const DiscriminatorNet& net, const LabeledBatch& samples, std::span<const std::size_t> ks);

// Dispatches on the head kind.
ProbeReport probe_discriminator(const DiscriminatorNet& net, const LabeledBatch& samples,
                                std::span<const std::size_t> ks);

struct LinearProbeOptions {
  std::size_t epochs = 100;
  double lr = 1e-2;
  std::vector<std::size_t> ks{1};
  std::uint64_t seed = 0;
};

// Trains a fresh linear head on fixed features by full-batch cross-entropy with
// Adam and reports top-k accuracy on the validation features.
ProbeReport linear_probe(const Tensor& train_features, std::span<const std::size_t> train_labels,
                         const Tensor& val_features, std::span<const std::size_t> val_labels, std::size_t card,
                         const LinearProbeOptions& options);

// Same, with features taken from the frozen backbone of net.
ProbeReport linear_probe(const DiscriminatorNet& net, const LabeledBatch& train, const LabeledBatch& val,
                         const LinearProbeOptions& options);

}  // namespace ucd
