#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ucd/tensor.hpp"

namespace ucd {

using Rng = std::mt19937_64;
using NamedTensor = std::pair<std::string, Tensor>;

inline constexpr double kLeakySlope = 0.2;

struct CondSpec {
  std::size_t cardinality = 8;
  std::size_t embedding_dim = 16;

  void validate() const;
};

// Dense one-hot rows for the given labels. Throws DomainError when a label is
// not below cardinality.
Tensor one_hot(std::span<const std::size_t> labels, std::size_t cardinality);

// Differentiable logits[b, labels[b]] computed as a one-hot mask sum.
Tensor select_logit(const Tensor& logits, std::span<const std::size_t> labels);
double select_logit(std::span<const double> logits, std::size_t label);

struct Linear {
  Tensor weight;  // [in, out]
  Tensor bias;    // [out]

  static Linear init(std::size_t in, std::size_t out, Rng& rng);
  Tensor forward(const Tensor& x) const;
  std::size_t in_features() const { return weight.dim(0); }
  std::size_t out_features() const { return weight.dim(1); }
};

// Stack of Linear layers with leaky-ReLU between them. The activation is also
// applied after the last layer when activate_output is set.
class Mlp {
 public:
  Mlp() = default;
  Mlp(std::span<const std::size_t> widths, bool activate_output, Rng& rng);
  Mlp(std::vector<Linear> layers, bool activate_output);

  Tensor forward(const Tensor& x) const;
  const std::vector<Linear>& layers() const { return layers_; }
  std::vector<Linear>& layers() { return layers_; }
  bool activate_output() const { return activate_output_; }

  void append_parameters(std::vector<Tensor>& out) const;
  void append_named(const std::string& prefix, std::vector<NamedTensor>& out) const;

 private:
  std::vector<Linear> layers_;
  bool activate_output_ = false;
};

std::size_t parameter_count(std::span<const Tensor> params);
void set_trainable(std::span<Tensor> params, bool trainable);
// Deep copies of every tensor so the copy no longer aliases the source.
std::vector<NamedTensor> clone_named(std::span<const NamedTensor> named);

struct GeneratorShape {
  std::size_t latent_dim = 16;
  std::size_t hidden = 256;
  std::size_t hidden_layers = 2;
  std::size_t output_dim = 2;
};

// [z ++ embed(c)] -> MLP -> sample space. Linear output.
class GeneratorNet {
 public:
  GeneratorNet() = default;
  GeneratorNet(CondSpec cond, GeneratorShape shape, Rng& rng);

  Tensor forward(const Tensor& z, std::span<const std::size_t> labels) const;

  const CondSpec& cond() const { return cond_; }
  std::size_t latent_dim() const { return latent_dim_; }
  std::size_t output_dim() const { return mlp_.layers().back().out_features(); }

  std::vector<Tensor> parameters() const;
  std::vector<NamedTensor> named_parameters() const;
  void set_trainable(bool trainable);
  GeneratorNet clone() const;

  // Rebuilds a generator from "gen.*" tensors; shapes define the architecture.
  static GeneratorNet from_named(std::span<const NamedTensor> named);

  Tensor& embedding() { return embedding_; }
  const Tensor& embedding() const { return embedding_; }
  Mlp& mlp() { return mlp_; }
  const Mlp& mlp() const { return mlp_; }

 private:
  CondSpec cond_;
  std::size_t latent_dim_ = 0;
  Tensor embedding_;  // [card, embedding_dim]
  Mlp mlp_;
};

enum class HeadKind { conditional_scalar, unconditional_logits };

const char* head_kind_name(HeadKind kind);

struct DiscriminatorShape {
  std::size_t input_dim = 2;
  std::size_t hidden = 256;
  std::size_t hidden_layers = 2;
  std::size_t feature_dim = 128;
};

// Backbone MLP producing f(x), followed by either
//   conditional_scalar:   D(x, c) = w . f(x) + b + <embed(c), f(x)>
//   unconditional_logits: d(x) = W f(x) + b in R^card
// The unconditional head never reads a condition.
class DiscriminatorNet {
 public:
  DiscriminatorNet() = default;
  DiscriminatorNet(CondSpec cond, DiscriminatorShape shape, HeadKind head, Rng& rng);

  Tensor features(const Tensor& x) const;
  // [B, card]; requires unconditional_logits.
  Tensor logits(const Tensor& x) const;
  // [B]; requires conditional_scalar.
  Tensor conditional(const Tensor& x, std::span<const std::size_t> labels) const;

  HeadKind head_kind() const { return head_kind_; }
  const CondSpec& cond() const { return cond_; }
  std::size_t input_dim() const { return backbone_.layers().front().in_features(); }
  std::size_t feature_dim() const { return backbone_.layers().back().out_features(); }

  std::vector<Tensor> parameters() const;
  std::vector<Tensor> backbone_parameters() const;
  std::vector<NamedTensor> named_parameters() const;
  void set_trainable(bool trainable);
  DiscriminatorNet clone() const;

  static DiscriminatorNet from_named(std::span<const NamedTensor> named);

  Mlp& backbone() { return backbone_; }
  const Mlp& backbone() const { return backbone_; }
  Linear& head() { return head_; }
  Tensor& projection_embedding() { return embedding_; }

 private:
  CondSpec cond_;
  HeadKind head_kind_ = HeadKind::unconditional_logits;
  Mlp backbone_;
  Linear head_;
  Tensor embedding_;  // [card, feature_dim], conditional head only
};

// Closed-form parameter counts for the two head kinds; used to check the
// networks' actual counts.
std::size_t expected_discriminator_parameters(const DiscriminatorShape& shape, std::size_t cardinality,
                                              HeadKind head);

}  // namespace ucd
