#include "ucd/losses.hpp"

#include "ucd/errors.hpp"
#include "ucd/nets.hpp"

namespace ucd {

namespace {

void require_batch(const Tensor& t, const char* what) {
  if (t.rank() != 1) throw DimensionError(std::string(what) + ": expected a [B] logit batch, got " + shape_str(t.shape()));
}

Tensor half_square(const Tensor& t) { return scale(mul(t, t), 0.5); }

}  // namespace

void ClassLossKind::validate() const {
  if (variant == Variant::multiclass_hinge && !(margin > 0.0)) {
    throw ContractError("class loss: hinge margin must be positive");
  }
}

const char* to_string(GanLossKind kind) {
  return kind == GanLossKind::non_saturating ? "non_saturating" : "least_squares";
}

GanLossKind parse_gan_loss(const std::string& text) {
  if (text == "non_saturating") return GanLossKind::non_saturating;
  if (text == "least_squares") return GanLossKind::least_squares;
  throw ConfigError("unknown gan loss '" + text + "' (expected non_saturating or least_squares)");
}

const char* to_string(ClassLossKind::Variant variant) {
  return variant == ClassLossKind::Variant::cross_entropy ? "cross_entropy" : "multiclass_hinge";
}

ClassLossKind::Variant parse_class_loss(const std::string& text) {
  if (text == "cross_entropy") return ClassLossKind::Variant::cross_entropy;
  if (text == "multiclass_hinge") return ClassLossKind::Variant::multiclass_hinge;
  throw ConfigError("unknown class loss '" + text + "' (expected cross_entropy or multiclass_hinge)");
}

Tensor vanilla_g_loss(const Tensor& fake_logit, GanLossKind kind) {
  require_batch(fake_logit, "vanilla_g_loss");
  if (kind == GanLossKind::non_saturating) return mean(softplus(scale(fake_logit, -1.0)));
  return mean(half_square(add_scalar(fake_logit, -1.0)));
}

Tensor vanilla_d_loss(const Tensor& real_logit, const Tensor& fake_logit, GanLossKind kind) {
  require_batch(real_logit, "vanilla_d_loss");
  require_batch(fake_logit, "vanilla_d_loss");
  if (kind == GanLossKind::non_saturating) {
    return add(mean(softplus(scale(real_logit, -1.0))), mean(softplus(fake_logit)));
  }
  return add(mean(half_square(add_scalar(real_logit, -1.0))), mean(half_square(fake_logit)));
}

Tensor class_loss(const Tensor& logits, std::span<const std::size_t> labels, const ClassLossKind& kind) {
  kind.validate();
  if (logits.rank() != 2 || logits.dim(0) != labels.size()) {
    throw DimensionError("class_loss: logits " + shape_str(logits.shape()) + " vs " + std::to_string(labels.size()) +
                         " labels");
  }
  const Tensor selected = select_logit(logits, labels);
  if (kind.variant == ClassLossKind::Variant::cross_entropy) {
    return mean(sub(log_sum_exp(logits), selected));
  }
  const std::size_t card = logits.dim(1);
  const Tensor margins = add_scalar(sub(logits, repeat_last(selected, card)), kind.margin);
  const Tensor others = sub(Tensor::full(logits.shape(), 1.0), one_hot(labels, card));
  return mean(sum_last(mul(leaky_relu(margins, 0.0), others)));
}

Tensor class_loss_pair(const Tensor& real_logits, const Tensor& fake_logits, std::span<const std::size_t> labels,
                       const ClassLossKind& kind) {
  return scale(add(class_loss(fake_logits, labels, kind), class_loss(real_logits, labels, kind)), 0.5);
}

Tensor ucd_g_loss(const Tensor& fake_logits, std::span<const std::size_t> labels, GanLossKind kind) {
  return vanilla_g_loss(select_logit(fake_logits, labels), kind);
}

UcdLossParts ucd_d_loss_parts(const Tensor& real_logits, const Tensor& fake_logits,
                              std::span<const std::size_t> labels, const LossWeights& weights, GanLossKind gan,
                              const ClassLossKind& cls) {
  if (weights.lambda1 < 0.0) throw ContractError("ucd_d_loss: lambda1 must be non-negative");
  UcdLossParts parts;
  parts.adversarial = vanilla_d_loss(select_logit(real_logits, labels), select_logit(fake_logits, labels), gan);
  parts.classification = class_loss_pair(real_logits, fake_logits, labels, cls);
  parts.total = add(parts.adversarial, scale(parts.classification, weights.lambda1));
  return parts;
}

Tensor ucd_d_loss(const Tensor& real_logits, const Tensor& fake_logits, std::span<const std::size_t> labels,
                  const LossWeights& weights, GanLossKind gan, const ClassLossKind& cls) {
  return ucd_d_loss_parts(real_logits, fake_logits, labels, weights, gan, cls).total;
}

Tensor config_c_d_loss(const Tensor& real_logits, const Tensor& fake_logits, std::span<const std::size_t> labels,
                       const LossWeights& weights, GanLossKind gan, const ClassLossKind& cls,
                       const Tensor& dino_term) {
  if (weights.lambda2 < 0.0) throw ContractError("config_c_d_loss: lambda2 must be non-negative");
  if (dino_term.size() != 1) throw DimensionError("config_c_d_loss: dino term must be a scalar");
  return add(ucd_d_loss(real_logits, fake_logits, labels, weights, gan, cls), scale(dino_term, weights.lambda2));
}

}  // namespace ucd
