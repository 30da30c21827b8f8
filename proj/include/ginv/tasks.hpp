#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "ginv/permgroup.hpp"
#include "ginv/random.hpp"
#include "ginv/tensor.hpp"

namespace ginv {

/// Orbit sum of the monomial Π_i x_i^{b_i} under a permutation group.
struct PolyTarget {
  PermGroup group;
  std::string group_spec;
  std::vector<int> exponents;

  /// cyclic:5 with exponents (1, 2, 0, 1, 3).
  static PolyTarget standard();
};

/// Σ_g Π_i x_{σ_g(i)}^{b_i}, by enumeration of the group elements.
double target_polynomial(const PolyTarget& target, std::span<const double> x);

// ---------------------------------------------------------------------------

using Point2 = Eigen::Vector2d;
using Quad = std::array<Point2, 4>;

/// ½ |Σ_i (x_i y_{i+1} - x_{i+1} y_i)| with indices taken mod 4.
double shoelace_area(const Quad& q);

/// True when the four consecutive cross products share a sign and all exceed
/// 1e-9 in magnitude.
bool is_strictly_convex(const Quad& q);

/// Orders four points counter-clockwise around their centroid. Returns
/// nullopt unless the result is strictly convex.
std::optional<Quad> convex_ccw_order(const Quad& points);

// ---------------------------------------------------------------------------

enum class Split { Train = 0, Val = 1, Test = 2 };

struct SplitSizes {
  Eigen::Index train = 0;
  Eigen::Index val = 0;
  Eigen::Index test = 0;
  Eigen::Index total() const { return train + val + test; }
};

/// Inputs (N, n, n_in) stored as (N*n, n_in) rows, targets (N, n_out).
/// Examples are ordered train, then val, then test.
struct Dataset {
  std::string task;
  std::string group_spec;
  std::vector<int> exponents;
  std::uint64_t seed = 0;
  int n = 1;
  int n_in = 1;
  SplitSizes sizes;
  Matrix inputs;
  Matrix targets;

  Eigen::Index offset(Split s) const;
  Eigen::Index count(Split s) const;
  /// (count*n, n_in) block of the given split.
  Matrix split_inputs(Split s) const;
  Matrix split_targets(Split s) const;
  /// Example k as an (n, n_in) matrix.
  Matrix example(Eigen::Index k) const;
};

/// Inputs uniform in [0, 1]^n. Each split draws from its own stream, so
/// splits can be generated independently.
Dataset gen_poly_dataset(const PolyTarget& target, SplitSizes sizes, std::uint64_t seed);

/// Random convex quadrangles in [0, 1]^2, counter-clockwise with a random
/// cyclic starting vertex; targets are areas.
Dataset gen_quad_dataset(SplitSizes sizes, std::uint64_t seed);

/// One rejection-sampled quadrangle, before the cyclic offset.
Quad sample_convex_quad(Rng& rng);

inline constexpr SplitSizes kPolySizes{16, 480, 4800};
inline constexpr SplitSizes kQuadSizes{256, 256, 1024};

}  // namespace ginv
