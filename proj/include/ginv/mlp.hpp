#pragma once

#include <span>
#include <vector>

#include "ginv/autodiff.hpp"
#include "ginv/random.hpp"

namespace ginv {

struct MlpSpec {
  int input = 1;
  std::vector<int> hidden;
  int output = 1;
  /// One entry per hidden layer.
  std::vector<ad::Activation> hidden_activation;
  ad::Activation final_activation = ad::Activation::Identity;

  /// Same activation on every hidden layer.
  static MlpSpec uniform(int input, std::vector<int> hidden, int output, ad::Activation act);

  int layers() const { return static_cast<int>(hidden.size()) + 1; }
  int fan_in(int layer) const { return layer == 0 ? input : hidden[layer - 1]; }
  int fan_out(int layer) const { return layer == layers() - 1 ? output : hidden[layer]; }
  long param_count() const;
  void validate() const;
};

/// Fully connected net computing y = act(x W + b) layer by layer, with
/// samples as rows. Parameters are stored W0, b0, W1, b1, ... with W of
/// shape (fan_in, fan_out) and b of shape (1, fan_out).
struct Mlp {
  MlpSpec spec;
  std::vector<Matrix> params;

  /// Glorot-uniform weights, zero biases.
  static Mlp init(const MlpSpec& spec, Rng& rng);
  static Mlp zeros(const MlpSpec& spec);
};

/// Records the forward pass; `params` are the bound tape leaves in storage order.
ad::Var mlp_forward(const MlpSpec& spec, std::span<const ad::Var> params, ad::Var x);

}  // namespace ginv
