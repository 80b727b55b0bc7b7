#include "ucd/nets.hpp"

#include <cmath>
#include <map>
#include <optional>

#include "ucd/errors.hpp"

namespace ucd {

void CondSpec::validate() const {
  if (cardinality < 2) throw ContractError("cond: cardinality must be >= 2, got " + std::to_string(cardinality));
  if (embedding_dim == 0) throw ContractError("cond: embedding_dim must be positive");
}

Tensor one_hot(std::span<const std::size_t> labels, std::size_t cardinality) {
  if (labels.empty()) throw ContractError("one_hot: empty label batch");
  std::vector<double> data(labels.size() * cardinality, 0.0);
  for (std::size_t b = 0; b < labels.size(); ++b) {
    if (labels[b] >= cardinality) {
      throw DomainError("label " + std::to_string(labels[b]) + " out of range for cardinality " +
                        std::to_string(cardinality));
    }
    data[b * cardinality + labels[b]] = 1.0;
  }
  return Tensor({labels.size(), cardinality}, std::move(data));
}

Tensor select_logit(const Tensor& logits, std::span<const std::size_t> labels) {
  if (logits.rank() != 2 || logits.dim(0) != labels.size()) {
    throw DimensionError("select_logit: logits " + shape_str(logits.shape()) + " vs " +
                         std::to_string(labels.size()) + " labels");
  }
  return sum_last(mul(logits, one_hot(labels, logits.dim(1))));
}

double select_logit(std::span<const double> logits, std::size_t label) {
  if (label >= logits.size()) {
    throw DomainError("select_logit: index " + std::to_string(label) + " out of range for " +
                      std::to_string(logits.size()) + " logits");
  }
  return logits[label];
}

// --- Linear / Mlp ----------------------------------------------------------------

Linear Linear::init(std::size_t in, std::size_t out, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<double> w(in * out);
  for (auto& v : w) v = dist(rng);
  return Linear{Tensor({in, out}, std::move(w), true), Tensor::zeros({out}, true)};
}

Tensor Linear::forward(const Tensor& x) const { return add(matmul(x, weight), bias); }

Mlp::Mlp(std::span<const std::size_t> widths, bool activate_output, Rng& rng) : activate_output_(activate_output) {
  if (widths.size() < 2) throw ContractError("mlp: need at least input and output widths");
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) layers_.push_back(Linear::init(widths[i], widths[i + 1], rng));
}

Mlp::Mlp(std::vector<Linear> layers, bool activate_output)
    : layers_(std::move(layers)), activate_output_(activate_output) {}

Tensor Mlp::forward(const Tensor& x) const {
  Tensor h = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    h = layers_[i].forward(h);
    if (i + 1 < layers_.size() || activate_output_) h = leaky_relu(h, kLeakySlope);
  }
  return h;
}

void Mlp::append_parameters(std::vector<Tensor>& out) const {
  for (const auto& l : layers_) {
    out.push_back(l.weight);
    out.push_back(l.bias);
  }
}

void Mlp::append_named(const std::string& prefix, std::vector<NamedTensor>& out) const {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    out.emplace_back(prefix + "." + std::to_string(i) + ".weight", layers_[i].weight);
    out.emplace_back(prefix + "." + std::to_string(i) + ".bias", layers_[i].bias);
  }
}

std::size_t parameter_count(std::span<const Tensor> params) {
  std::size_t n = 0;
  for (const auto& p : params) n += p.size();
  return n;
}

void set_trainable(std::span<Tensor> params, bool trainable) {
  for (auto& p : params) p.set_requires_grad(trainable);
}

std::vector<NamedTensor> clone_named(std::span<const NamedTensor> named) {
  std::vector<NamedTensor> out;
  out.reserve(named.size());
  for (const auto& [name, t] : named) out.emplace_back(name, t.clone());
  return out;
}

namespace {

const Tensor* find_named(std::span<const NamedTensor> named, const std::string& name) {
  for (const auto& [n, t] : named) {
    if (n == name) return &t;
  }
  return nullptr;
}

const Tensor& require_named(std::span<const NamedTensor> named, const std::string& name) {
  const Tensor* t = find_named(named, name);
  if (!t) throw FormatError("checkpoint: missing tensor '" + name + "'");
  return *t;
}

void require_rank(const Tensor& t, std::size_t rank, const std::string& name) {
  if (t.rank() != rank) {
    throw FormatError("checkpoint: tensor '" + name + "' has shape " + shape_str(t.shape()) + ", expected rank " +
                      std::to_string(rank));
  }
}

Linear leaf_linear(const Tensor& w, const Tensor& b) {
  Tensor weight = w.clone();
  Tensor bias = b.clone();
  weight.set_requires_grad(true);
  bias.set_requires_grad(true);
  return Linear{weight, bias};
}

// Reads prefix.0.weight, prefix.0.bias, ... and checks that widths chain.
Mlp mlp_from_named(std::span<const NamedTensor> named, const std::string& prefix, bool activate_output) {
  std::vector<Linear> layers;
  for (std::size_t i = 0;; ++i) {
    const std::string base = prefix + "." + std::to_string(i);
    const Tensor* w = find_named(named, base + ".weight");
    if (!w) break;
    const Tensor& b = require_named(named, base + ".bias");
    require_rank(*w, 2, base + ".weight");
    require_rank(b, 1, base + ".bias");
    if (b.dim(0) != w->dim(1)) {
      throw FormatError("checkpoint: tensor '" + base + ".bias' has shape " + shape_str(b.shape()) +
                        ", expected [" + std::to_string(w->dim(1)) + "]");
    }
    if (!layers.empty() && layers.back().out_features() != w->dim(0)) {
      throw FormatError("checkpoint: tensor '" + base + ".weight' has shape " + shape_str(w->shape()) +
                        ", expected " + std::to_string(layers.back().out_features()) + " input rows");
    }
    layers.push_back(leaf_linear(*w, b));
  }
  if (layers.empty()) throw FormatError("checkpoint: missing tensor '" + prefix + ".0.weight'");
  return Mlp(std::move(layers), activate_output);
}

}  // namespace

// --- GeneratorNet ------------------------------------------------------------------

GeneratorNet::GeneratorNet(CondSpec cond, GeneratorShape shape, Rng& rng) : cond_(cond), latent_dim_(shape.latent_dim) {
  cond_.validate();
  if (shape.latent_dim == 0 || shape.output_dim == 0) throw ContractError("generator: dims must be positive");
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> e(cond.cardinality * cond.embedding_dim);
  for (auto& v : e) v = normal(rng);
  embedding_ = Tensor({cond.cardinality, cond.embedding_dim}, std::move(e), true);
  std::vector<std::size_t> widths{shape.latent_dim + cond.embedding_dim};
  for (std::size_t i = 0; i < shape.hidden_layers; ++i) widths.push_back(shape.hidden);
  widths.push_back(shape.output_dim);
  mlp_ = Mlp(widths, false, rng);
}

Tensor GeneratorNet::forward(const Tensor& z, std::span<const std::size_t> labels) const {
  if (z.rank() != 2 || z.dim(1) != latent_dim_ || z.dim(0) != labels.size()) {
    throw DimensionError("generator: latent batch " + shape_str(z.shape()) + " vs latent_dim " +
                         std::to_string(latent_dim_) + " and " + std::to_string(labels.size()) + " labels");
  }
  const Tensor embedded = matmul(one_hot(labels, cond_.cardinality), embedding_);
  return mlp_.forward(concat_last(z, embedded));
}

std::vector<Tensor> GeneratorNet::parameters() const {
  std::vector<Tensor> out{embedding_};
  mlp_.append_parameters(out);
  return out;
}

std::vector<NamedTensor> GeneratorNet::named_parameters() const {
  std::vector<NamedTensor> out{{"gen.embed", embedding_}};
  mlp_.append_named("gen.mlp", out);
  return out;
}

void GeneratorNet::set_trainable(bool trainable) {
  auto params = parameters();
  ucd::set_trainable(params, trainable);
}

GeneratorNet GeneratorNet::clone() const { return from_named(named_parameters()); }

GeneratorNet GeneratorNet::from_named(std::span<const NamedTensor> named) {
  GeneratorNet g;
  const Tensor& e = require_named(named, "gen.embed");
  require_rank(e, 2, "gen.embed");
  g.cond_ = CondSpec{e.dim(0), e.dim(1)};
  g.embedding_ = e.clone();
  g.embedding_.set_requires_grad(true);
  g.mlp_ = mlp_from_named(named, "gen.mlp", false);
  const std::size_t in = g.mlp_.layers().front().in_features();
  if (in <= g.cond_.embedding_dim) {
    throw FormatError("checkpoint: tensor 'gen.mlp.0.weight' has " + std::to_string(in) +
                      " input rows, not more than the embedding width " + std::to_string(g.cond_.embedding_dim));
  }
  g.latent_dim_ = in - g.cond_.embedding_dim;
  return g;
}

// --- DiscriminatorNet ----------------------------------------------------------------

const char* head_kind_name(HeadKind kind) {
  return kind == HeadKind::conditional_scalar ? "conditional_scalar" : "unconditional_logits";
}

DiscriminatorNet::DiscriminatorNet(CondSpec cond, DiscriminatorShape shape, HeadKind head, Rng& rng)
    : cond_(cond), head_kind_(head) {
  cond_.validate();
  std::vector<std::size_t> widths{shape.input_dim};
  for (std::size_t i = 0; i < shape.hidden_layers; ++i) widths.push_back(shape.hidden);
  widths.push_back(shape.feature_dim);
  backbone_ = Mlp(widths, true, rng);
  if (head == HeadKind::unconditional_logits) {
    head_ = Linear::init(shape.feature_dim, cond.cardinality, rng);
  } else {
    head_ = Linear::init(shape.feature_dim, 1, rng);
    const double bound = std::sqrt(6.0 / static_cast<double>(shape.feature_dim));
    std::uniform_real_distribution<double> dist(-bound, bound);
    std::vector<double> e(cond.cardinality * shape.feature_dim);
    for (auto& v : e) v = dist(rng);
    embedding_ = Tensor({cond.cardinality, shape.feature_dim}, std::move(e), true);
  }
}

Tensor DiscriminatorNet::features(const Tensor& x) const {
  if (x.rank() != 2 || x.dim(1) != input_dim()) {
    throw DimensionError("discriminator: sample batch " + shape_str(x.shape()) + " vs input_dim " +
                         std::to_string(input_dim()));
  }
  return backbone_.forward(x);
}

Tensor DiscriminatorNet::logits(const Tensor& x) const {
  if (head_kind_ != HeadKind::unconditional_logits) {
    throw ContractError("discriminator_logits: head is conditional_scalar");
  }
  return head_.forward(features(x));
}

Tensor DiscriminatorNet::conditional(const Tensor& x, std::span<const std::size_t> labels) const {
  if (head_kind_ != HeadKind::conditional_scalar) {
    throw ContractError("discriminator_conditional: head is unconditional_logits");
  }
  if (x.rank() != 2 || x.dim(0) != labels.size()) {
    throw DimensionError("discriminator_conditional: " + shape_str(x.shape()) + " vs " +
                         std::to_string(labels.size()) + " labels");
  }
  const Tensor f = features(x);
  const Tensor projected = sum_last(mul(f, matmul(one_hot(labels, cond_.cardinality), embedding_)));
  return add(sum_last(head_.forward(f)), projected);
}

std::vector<Tensor> DiscriminatorNet::parameters() const {
  std::vector<Tensor> out = backbone_parameters();
  out.push_back(head_.weight);
  out.push_back(head_.bias);
  if (head_kind_ == HeadKind::conditional_scalar) out.push_back(embedding_);
  return out;
}

std::vector<Tensor> DiscriminatorNet::backbone_parameters() const {
  std::vector<Tensor> out;
  backbone_.append_parameters(out);
  return out;
}

std::vector<NamedTensor> DiscriminatorNet::named_parameters() const {
  std::vector<NamedTensor> out;
  backbone_.append_named("disc.backbone", out);
  out.emplace_back("disc.head.weight", head_.weight);
  out.emplace_back("disc.head.bias", head_.bias);
  if (head_kind_ == HeadKind::conditional_scalar) out.emplace_back("disc.embed", embedding_);
  return out;
}

void DiscriminatorNet::set_trainable(bool trainable) {
  auto params = parameters();
  ucd::set_trainable(params, trainable);
}

DiscriminatorNet DiscriminatorNet::clone() const { return from_named(named_parameters()); }

DiscriminatorNet DiscriminatorNet::from_named(std::span<const NamedTensor> named) {
  DiscriminatorNet d;
  d.backbone_ = mlp_from_named(named, "disc.backbone", true);
  const Tensor& w = require_named(named, "disc.head.weight");
  const Tensor& b = require_named(named, "disc.head.bias");
  require_rank(w, 2, "disc.head.weight");
  require_rank(b, 1, "disc.head.bias");
  const std::size_t feature_dim = d.backbone_.layers().back().out_features();
  if (w.dim(0) != feature_dim || b.dim(0) != w.dim(1)) {
    throw FormatError("checkpoint: tensor 'disc.head.weight' has shape " + shape_str(w.shape()) +
                      ", inconsistent with feature width " + std::to_string(feature_dim));
  }
  d.head_ = leaf_linear(w, b);
  if (const Tensor* e = find_named(named, "disc.embed")) {
    require_rank(*e, 2, "disc.embed");
    if (w.dim(1) != 1 || e->dim(1) != feature_dim) {
      throw FormatError("checkpoint: tensor 'disc.embed' has shape " + shape_str(e->shape()) +
                        ", inconsistent with a scalar head over " + std::to_string(feature_dim) + " features");
    }
    d.head_kind_ = HeadKind::conditional_scalar;
    d.cond_ = CondSpec{e->dim(0), feature_dim};
    d.embedding_ = e->clone();
    d.embedding_.set_requires_grad(true);
  } else {
    if (w.dim(1) < 2) {
      throw FormatError("checkpoint: tensor 'disc.head.weight' has " + std::to_string(w.dim(1)) +
                        " outputs; an unconditional head needs at least 2");
    }
    d.head_kind_ = HeadKind::unconditional_logits;
    d.cond_ = CondSpec{w.dim(1), feature_dim};
  }
  return d;
}

std::size_t expected_discriminator_parameters(const DiscriminatorShape& shape, std::size_t cardinality,
                                              HeadKind head) {
  std::size_t n = 0;
  std::size_t in = shape.input_dim;
  for (std::size_t i = 0; i < shape.hidden_layers; ++i) {
    n += (in + 1) * shape.hidden;
    in = shape.hidden;
  }
  n += (in + 1) * shape.feature_dim;
  if (head == HeadKind::unconditional_logits) return n + (shape.feature_dim + 1) * cardinality;
  return n + (shape.feature_dim + 1) + cardinality * shape.feature_dim;
}

}  // namespace ucd
