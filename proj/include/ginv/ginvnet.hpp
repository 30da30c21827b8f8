#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "ginv/autodiff.hpp"
#include "ginv/mlp.hpp"
#include "ginv/permgroup.hpp"
#include "ginv/tensor.hpp"

namespace ginv {

/// Fixed head t -> t^exponent. Needs n_in == n_mid == 1; has no parameters.
struct MonomialHead {
  int exponent = 1;
};

using PhiHead = std::variant<Mlp, MonomialHead>;

struct GInvConfig {
  int n_in = 1;
  int n_mid = 32;
  int n_out = 1;
  std::vector<int> phi_hidden{16, 32};
  std::vector<int> fout_hidden{128, 96};
  ad::Activation activation = ad::Activation::Tanh;

  /// Sized for the n = 5 polynomial regression task.
  static GInvConfig polynomial();
  /// Sized for the n = 4 quadrangle area task.
  static GInvConfig quadrangle();
};

/// Invariant network f_out(ΣΠ(f_in(x))) for a permutation group of degree n.
/// f_in applies head j to every input row; head j feeds column j of ΣΠ.
struct GInvNet {
  PermGroup group;
  std::string group_spec;
  int n_in = 1;
  int n_mid = 1;
  int n_out = 1;
  std::vector<PhiHead> heads;
  Mlp fout;

  int degree() const { return group.degree(); }

  static GInvNet init(PermGroup group, std::string group_spec, const GInvConfig& config, Rng& rng);
};

struct GAvgConfig {
  int n_in = 1;
  int n_out = 1;
  std::vector<int> hidden{144, 112, 64};
  ad::Activation activation = ad::Activation::Tanh;

  static GAvgConfig polynomial();
  static GAvgConfig quadrangle();
};

/// Group-averaging baseline: (1/m) Σ_g base(flatten(g(x))).
struct GAvgNet {
  PermGroup group;
  std::string group_spec;
  int n_in = 1;
  Mlp base;

  int degree() const { return group.degree(); }

  static GAvgNet init(PermGroup group, std::string group_spec, const GAvgConfig& config, Rng& rng);
};

/// Unconstrained MLP on the flattened input. `group` is only carried along
/// so the net can be audited against it; the forward pass ignores it.
struct PlainNet {
  PermGroup group;
  std::string group_spec;
  int n_in = 1;
  Mlp base;

  int degree() const { return group.degree(); }

  static PlainNet init(PermGroup group, std::string group_spec, const GAvgConfig& config, Rng& rng);
};

using Model = std::variant<GInvNet, GAvgNet, PlainNet>;

std::string_view kind_name(const Model& model);
const PermGroup& group_of(const Model& model);
const std::string& group_spec_of(const Model& model);
int input_width(const Model& model);
int output_width(const Model& model);

/// Trainable tensors in storage order: MLP heads in head order, then f_out
/// (or the base MLP for the baselines).
std::vector<Matrix*> parameters(Model& model);
std::vector<const Matrix*> parameters(const Model& model);

long param_count(const GInvNet& net);
long param_count(const GAvgNet& net);
long param_count(const PlainNet& net);
long param_count(const Model& model);

/// Forward pass recorded on `tape` for a batch stored as (B*n, n_in): row
/// b*n + i is element i of example b. Output has shape (B, n_out).
struct BoundForward {
  ad::Var output;
  std::vector<ad::Var> params;
};
BoundForward forward_batch(ad::Tape& tape, const Model& model, const Matrix& inputs);
/// Same pass with caller-bound parameter nodes, one per entry of parameters(model).
ad::Var forward_batch(ad::Tape& tape, const Model& model, const Matrix& inputs, std::span<const ad::Var> params);

/// Predictions for a (B*n, n_in) batch without keeping the tape.
Matrix predict(const Model& model, const Matrix& inputs);

// ---------------------------------------------------------------------------
// Single-example operations

/// output(i, j, :) = head_j(x_i), shape (n, n, n_mid).
Tensor forward_fin(const GInvNet& net, const Matrix& x);

/// output[k] = Σ_g Π_j t(σ_g(j), j, k), summed in group element order.
Eigen::VectorXd sigma_pi(const PermGroup& group, const Tensor& t);

/// ΣΠ over a batch of head outputs recorded on a tape. `stacked` holds the
/// heads one after another: row j*(B*n) + b*n + i is head j applied to
/// element i of example b. Returns (B, n_mid).
ad::Var sigma_pi(const PermGroup& group, ad::Var stacked, Eigen::Index batch);

Eigen::VectorXd forward(const GInvNet& net, const Matrix& x);
Eigen::VectorXd forward_gavg(const GAvgNet& net, const Matrix& x);
Eigen::VectorXd forward(const Model& model, const Matrix& x);

/// max_k |a_k - b_k| / (1 + |b_k|).
double relative_deviation(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

/// Largest relative_deviation(Γ(g(x)), Γ(x)) over the inputs and every
/// element g of the model's group. Inputs are (n, n_in) matrices.
double max_invariance_deviation(const Model& model, std::span<const Matrix> inputs);

// ---------------------------------------------------------------------------
// Cost model for a single-layer invariant representation

/// Multiplications for f_in (n*n*n_in*n_mid) plus ΣΠ (m*(n-1)*n_mid).
long long count_mults_ginv(long long n, long long n_in, long long n_mid, long long m);
/// Multiplications when the whole single layer runs once per group element.
long long count_mults_gavg(long long n, long long n_in, long long n_mid, long long m);
/// Size of the f_in output tensor.
long long memory_cells(long long n, long long n_mid);

}  // namespace ginv
