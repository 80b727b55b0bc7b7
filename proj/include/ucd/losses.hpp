#pragma once

#include <span>
#include <string>

#include "ucd/tensor.hpp"

namespace ucd {

enum class GanLossKind { non_saturating, least_squares };

struct ClassLossKind {
  enum class Variant { cross_entropy, multiclass_hinge };
  Variant variant = Variant::cross_entropy;
  double margin = 1.0;

  void validate() const;
};

struct LossWeights {
  double lambda1 = 0.0;  // classification
  double lambda2 = 0.0;  // self-distillation
};

const char* to_string(GanLossKind kind);
GanLossKind parse_gan_loss(const std::string& text);
const char* to_string(ClassLossKind::Variant variant);
ClassLossKind::Variant parse_class_loss(const std::string& text);

// Generator loss on per-sample logits.
//   non_saturating: mean softplus(-logit) = -log sigmoid(logit)
//   least_squares:  mean (logit - 1)^2 / 2
Tensor vanilla_g_loss(const Tensor& fake_logit, GanLossKind kind);

// Discriminator loss on per-sample real and fake logits.
//   non_saturating: mean softplus(-real) + mean softplus(fake)
//   least_squares:  mean (real - 1)^2 / 2 + mean fake^2 / 2
Tensor vanilla_d_loss(const Tensor& real_logit, const Tensor& fake_logit, GanLossKind kind);

// Per-batch classification loss of [B, card] logits against labels.
//   cross_entropy:    mean logsumexp(d) - d_c
//   multiclass_hinge: mean sum_{i != c} max(0, margin + d_i - d_c)
Tensor class_loss(const Tensor& logits, std::span<const std::size_t> labels, const ClassLossKind& kind);

// Real and fake classification terms, halved: (L(fake) + L(real)) / 2.
Tensor class_loss_pair(const Tensor& real_logits, const Tensor& fake_logits, std::span<const std::size_t> labels,
                       const ClassLossKind& kind);

// Generator loss of the unconditional discriminator: the vanilla loss read off
// the label's component of d(G(z, c)).
Tensor ucd_g_loss(const Tensor& fake_logits, std::span<const std::size_t> labels, GanLossKind kind);

struct UcdLossParts {
  Tensor adversarial;
  Tensor classification;
  Tensor total;
};

// Vanilla D loss on the selected components plus lambda1 * class_loss_pair.
UcdLossParts ucd_d_loss_parts(const Tensor& real_logits, const Tensor& fake_logits,
                              std::span<const std::size_t> labels, const LossWeights& weights, GanLossKind gan,
                              const ClassLossKind& cls);
Tensor ucd_d_loss(const Tensor& real_logits, const Tensor& fake_logits, std::span<const std::size_t> labels,
                  const LossWeights& weights, GanLossKind gan, const ClassLossKind& cls);

// ucd_d_loss + lambda2 * dino_term.
Tensor config_c_d_loss(const Tensor& real_logits, const Tensor& fake_logits, std::span<const std::size_t> labels,
                       const LossWeights& weights, GanLossKind gan, const ClassLossKind& cls,
                       const Tensor& dino_term);

}  // namespace ucd
