#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ucd/tensor.hpp"

namespace ucd {

struct AdamOptions {
  double lr = 2e-4;
  double beta1 = 0.0;
  double beta2 = 0.99;
  double eps = 1e-8;
};

// Per-parameter moment estimates. m[i] and v[i] mirror params[i].
struct AdamState {
  AdamOptions options;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::size_t t = 0;

  static AdamState for_params(std::span<const Tensor> params, AdamOptions options);
};

// One bias-corrected Adam update. Every parameter must carry a gradient;
// gradients are zeroed afterwards.
void adam_step(std::span<Tensor> params, AdamState& state);

// Owns a parameter list together with its optimizer state.
class Adam {
 public:
  Adam() = default;
  Adam(std::vector<Tensor> params, AdamOptions options);

  void step() { adam_step(params_, state_); }
  void zero_grad();

  const AdamState& state() const { return state_; }
  AdamState& state() { return state_; }
  const std::vector<Tensor>& params() const { return params_; }

 private:
  std::vector<Tensor> params_;
  AdamState state_;
};

}  // namespace ucd
