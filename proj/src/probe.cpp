#include "ucd/probe.hpp"

#include <algorithm>
#include <numeric>

#include "ucd/errors.hpp"
#include "ucd/losses.hpp"

namespace ucd {

namespace {

constexpr std::size_t kChunk = 4096;

void check_ks(std::span<const std::size_t> ks, std::size_t card) {
  if (ks.empty()) throw ContractError("probe: empty k list");
  for (auto k : ks) {
    if (k == 0 || k > card) {
      throw ContractError("probe: k=" + std::to_string(k) + " outside [1, " + std::to_string(card) + "]");
    }
  }
}

void check_samples(const LabeledBatch& samples, std::size_t card) {
  if (samples.x.rank() != 2 || samples.x.dim(0) != samples.labels.size()) {
    throw DimensionError("probe: samples " + shape_str(samples.x.shape()) + " vs " +
                         std::to_string(samples.labels.size()) + " labels");
  }
  for (auto l : samples.labels) {
    if (l >= card) throw DomainError("probe: label " + std::to_string(l) + " out of range");
  }
}

}  // namespace

const char* to_string(ProbeKind kind) {
  switch (kind) {
    case ProbeKind::conditional: return "conditional";
    case ProbeKind::ucd: return "ucd";
    case ProbeKind::linear: return "linear";
  }
  return "?";
}

double ProbeReport::top(std::size_t k) const {
  const auto it = top_k_accuracy.find(k);
  if (it == top_k_accuracy.end()) throw ContractError("probe report: no top-" + std::to_string(k) + " entry");
  return it->second;
}

std::vector<std::size_t> tie_break(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

std::map<std::size_t, double> top_k_accuracy(std::span<const double> scores, std::size_t card,
                                             std::span<const std::size_t> labels, std::span<const std::size_t> ks) {
  check_ks(ks, card);
  const std::size_t n = labels.size();
  if (scores.size() != n * card) throw DimensionError("top_k_accuracy: score matrix does not match labels");
  if (n == 0) throw ContractError("top_k_accuracy: no samples");
  std::map<std::size_t, std::size_t> hits;
  for (auto k : ks) hits[k] = 0;
  for (std::size_t r = 0; r < n; ++r) {
    const auto order = tie_break(scores.subspan(r * card, card));
    const auto rank = static_cast<std::size_t>(std::find(order.begin(), order.end(), labels[r]) - order.begin());
    for (auto& [k, h] : hits) {
      if (rank < k) ++h;
    }
  }
  std::map<std::size_t, double> acc;
  for (const auto& [k, h] : hits) acc[k] = static_cast<double>(h) / static_cast<double>(n);
  return acc;
}

ProbeReport probe_conditional(const DiscriminatorNet& net, const LabeledBatch& samples,
                              std::span<const std::size_t> ks) {
  if (net.head_kind() != HeadKind::conditional_scalar) throw ContractError("probe_conditional: head is not conditional");
  const std::size_t card = net.cond().cardinality;
  check_ks(ks, card);
  check_samples(samples, card);
  NoGradGuard no_grad;
  const std::size_t n = samples.labels.size();
  std::vector<double> scores(n * card);
  ProbeReport report{0, {}, n, ProbeKind::conditional, 0};
  for (std::size_t begin = 0; begin < n; begin += kChunk) {
    const std::size_t end = std::min(n, begin + kChunk);
    const Tensor x = slice(samples.x, begin, end);
    for (std::size_t c = 0; c < card; ++c) {
      const std::vector<std::size_t> condition(end - begin, c);
      const Tensor out = net.conditional(x, condition);
      report.forward_rows += end - begin;
      for (std::size_t r = begin; r < end; ++r) scores[r * card + c] = out[r - begin];
    }
  }
  report.top_k_accuracy = top_k_accuracy(scores, card, samples.labels, ks);
  return report;
}

ProbeReport probe_ucd(const DiscriminatorNet& net, const LabeledBatch& samples, std::span<const std::size_t> ks) {
  if (net.head_kind() != HeadKind::unconditional_logits) throw ContractError("probe_ucd: head is not unconditional");
  const std::size_t card = net.cond().cardinality;
  check_ks(ks, card);
  check_samples(samples, card);
  NoGradGuard no_grad;
  const std::size_t n = samples.labels.size();
  std::vector<double> scores;
  scores.reserve(n * card);
  ProbeReport report{0, {}, n, ProbeKind::ucd, 0};
  for (std::size_t begin = 0; begin < n; begin += kChunk) {
    const std::size_t end = std::min(n, begin + kChunk);
    const Tensor out = net.logits(slice(samples.x, begin, end));
    report.forward_rows += end - begin;
    scores.insert(scores.end(), out.data().begin(), out.data().end());
  }
  report.top_k_accuracy = top_k_accuracy(scores, card, samples.labels, ks);
  return report;
}

ProbeReport probe_discriminator(const DiscriminatorNet& net, const LabeledBatch& samples,
                                std::span<const std::size_t> ks) {
  return net.head_kind() == HeadKind::conditional_scalar ? probe_conditional(net, samples, ks)
                                                         : probe_ucd(net, samples, ks);
}

ProbeReport linear_probe(const Tensor& train_features, std::span<const std::size_t> train_labels,
                         const Tensor& val_features, std::span<const std::size_t> val_labels, std::size_t card,
                         const LinearProbeOptions& options) {
  if (train_labels.empty()) throw ContractError("linear_probe: empty training set");
  if (val_labels.empty()) throw ContractError("linear_probe: empty validation set");
  if (train_features.rank() != 2 || train_features.dim(0) != train_labels.size() || val_features.rank() != 2 ||
      val_features.dim(0) != val_labels.size() || val_features.dim(1) != train_features.dim(1)) {
    throw DimensionError("linear_probe: feature matrices do not match labels");
  }
  check_ks(options.ks, card);
  Rng rng = make_stream(options.seed, streams::probe);
  Linear head = Linear::init(train_features.dim(1), card, rng);
  Adam adam({head.weight, head.bias}, AdamOptions{options.lr, 0.9, 0.999, 1e-8});
  const Tensor features = train_features.detach();
  const ClassLossKind ce{};
  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    const Tensor loss = class_loss(head.forward(features), train_labels, ce);
    backward(loss);
    adam.step();
  }
  NoGradGuard no_grad;
  const Tensor val_logits = head.forward(val_features);
  ProbeReport report{0, {}, val_labels.size(), ProbeKind::linear, 0};
  report.top_k_accuracy = top_k_accuracy(val_logits.data(), card, val_labels, options.ks);
  return report;
}

ProbeReport linear_probe(const DiscriminatorNet& net, const LabeledBatch& train, const LabeledBatch& val,
                         const LinearProbeOptions& options) {
  if (train.labels.empty()) throw ContractError("linear_probe: empty training set");
  Tensor train_features;
  Tensor val_features;
  {
    NoGradGuard no_grad;
    train_features = net.features(train.x);
    val_features = net.features(val.x);
  }
  ProbeReport report =
      linear_probe(train_features, train.labels, val_features, val.labels, net.cond().cardinality, options);
  report.forward_rows = train.labels.size() + val.labels.size();
  return report;
}

}  // namespace ucd
