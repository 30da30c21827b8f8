#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "ginv/tensor.hpp"

namespace ginv::ad {

enum class Activation { Identity, Tanh, Relu };

Activation parse_activation(std::string_view name);
std::string_view to_string(Activation a);

class Tape;

/// Handle to a node recorded on a Tape.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
};

/// Reverse-mode gradients, one matrix per tape node.
class Gradients {
 public:
  explicit Gradients(std::vector<Matrix> grads) : grads_(std::move(grads)) {}
  const Matrix& operator[](Var v) const { return grads_.at(v.id); }
  const Matrix& operator[](std::size_t id) const { return grads_.at(id); }
  std::size_t size() const { return grads_.size(); }

 private:
  std::vector<Matrix> grads_;
};

/// Records a topologically ordered operation graph. Not thread-safe; use one
/// tape per thread.
class Tape {
 public:
  using Backward = std::function<void(const Tape&, const Matrix& grad_out, std::vector<Matrix>& grads)>;

  /// In checked mode every recorded value must be finite with |v| <= 1e100.
  explicit Tape(bool checked = false) : checked_(checked) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Matrix value);
  Var record(Matrix value, Backward backward);

  const Matrix& value(std::size_t id) const { return nodes_[id].value; }
  std::size_t size() const { return nodes_.size(); }

  /// Gradient of the scalar `loss` with respect to every node. Nodes the loss
  /// does not depend on get zero gradients. The tape is left unchanged.
  Gradients backward(Var loss) const;

 private:
  struct Node {
    Matrix value;
    Backward backward;
  };

  bool checked_;
  std::vector<Node> nodes_;
};

inline const Matrix& Var::value() const { return tape->value(id); }

// Every op records one node. Shapes must match exactly; the only broadcast
// is add_bias's row vector.

Var matmul(Var a, Var b);
Var add_bias(Var a, Var bias);
Var activation(Var a, Activation kind);
Var scale(Var a, double factor);
/// Elementwise a^exponent for a non-negative integer exponent.
Var pow_int(Var a, int exponent);
/// axis 0 sums over rows giving (1, c); axis 1 sums over columns giving (r, 1).
Var sum_axis(Var a, int axis);
/// Sums consecutive blocks of `block` rows: (S*block, d) -> (S, d).
Var sum_segments(Var a, Eigen::Index block);
Var gather_rows(Var a, std::span<const Eigen::Index> index);
Var concat_rows(std::span<const Var> parts);
/// Mean absolute deviation. The subgradient at zero residual is zero.
Var mae_loss(Var pred, const Matrix& target);
/// Products over consecutive blocks of `block` rows: (S*block, d) -> (S, d).
/// With the default block = a.rows() this is the column-wise product of a.
/// The gradient uses prefix and suffix partial products, so zeros are safe.
Var product_over_sequence(Var a, Eigen::Index block = 0);

/// Central-difference check of the gradient of a scalar function built on a
/// tape. Returns the largest coordinate-wise relative error, using
/// max(|analytic|, |numeric|, 1e-8) as denominator.
double grad_check(const std::function<Var(Tape&, Var)>& fn, const Matrix& x, double step = 1e-5);

/// Same check over several inputs at once; `fn` receives one leaf per input.
double grad_check(const std::function<Var(Tape&, std::span<const Var>)>& fn, std::span<const Matrix> xs,
                  double step = 1e-5);

}  // namespace ginv::ad
