#include "ginv/tasks.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ginv {

PolyTarget PolyTarget::standard() {
  return PolyTarget{named_group("cyclic:5"), "cyclic:5", {1, 2, 0, 1, 3}};
}

double target_polynomial(const PolyTarget& target, std::span<const double> x) {
  const int n = target.group.degree();
  if (static_cast<int>(x.size()) != n || static_cast<int>(target.exponents.size()) != n) {
    throw Error(Errc::DegreeMismatch, "target_polynomial: degree " + std::to_string(n) + ", got " +
                                          std::to_string(x.size()) + " values and " +
                                          std::to_string(target.exponents.size()) + " exponents");
  }
  double total = 0.0;
  for (const Permutation& g : target.group.elements()) {
    double term = 1.0;
    for (int i = 0; i < n; ++i) {
      for (int e = 0; e < target.exponents[static_cast<std::size_t>(i)]; ++e) term *= x[static_cast<std::size_t>(g(i))];
    }
    total += term;
  }
  return total;
}

// ---------------------------------------------------------------------------

namespace {

double cross(const Point2& o, const Point2& a, const Point2& b) {
  return (a - o).x() * (b - o).y() - (a - o).y() * (b - o).x();
}

}  // namespace

double shoelace_area(const Quad& q) {
  double twice = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    const Point2& a = q[i];
    const Point2& b = q[(i + 1) % 4];
    twice += a.x() * b.y() - b.x() * a.y();
  }
  return 0.5 * std::abs(twice);
}

bool is_strictly_convex(const Quad& q) {
  int sign = 0;
  for (std::size_t i = 0; i < 4; ++i) {
    const double c = cross(q[i], q[(i + 1) % 4], q[(i + 2) % 4]);
    if (std::abs(c) <= 1e-9) return false;
    const int s = c > 0 ? 1 : -1;
    if (sign != 0 && s != sign) return false;
    sign = s;
  }
  return true;
}

std::optional<Quad> convex_ccw_order(const Quad& points) {
  Point2 centre = Point2::Zero();
  for (const auto& p : points) centre += p / 4.0;
  std::array<std::size_t, 4> order{0, 1, 2, 3};
  std::array<double, 4> angle{};
  for (std::size_t i = 0; i < 4; ++i) {
    angle[i] = std::atan2(points[i].y() - centre.y(), points[i].x() - centre.x());
  }
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return angle[a] < angle[b]; });
  Quad q;
  for (std::size_t i = 0; i < 4; ++i) q[i] = points[order[i]];
  if (!is_strictly_convex(q)) return std::nullopt;
  return q;
}

Quad sample_convex_quad(Rng& rng) {
  while (true) {
    Quad pts;
    for (auto& p : pts) {
      const double x = rng.uniform();
      const double y = rng.uniform();
      p = Point2(x, y);
    }
    if (auto q = convex_ccw_order(pts)) return *q;
  }
}

// ---------------------------------------------------------------------------

Eigen::Index Dataset::offset(Split s) const {
  switch (s) {
    case Split::Train: return 0;
    case Split::Val: return sizes.train;
    case Split::Test: return sizes.train + sizes.val;
  }
  return 0;
}

Eigen::Index Dataset::count(Split s) const {
  switch (s) {
    case Split::Train: return sizes.train;
    case Split::Val: return sizes.val;
    case Split::Test: return sizes.test;
  }
  return 0;
}

Matrix Dataset::split_inputs(Split s) const { return inputs.middleRows(offset(s) * n, count(s) * n); }
Matrix Dataset::split_targets(Split s) const { return targets.middleRows(offset(s), count(s)); }
Matrix Dataset::example(Eigen::Index k) const { return inputs.middleRows(k * n, n); }

namespace {

void check_sizes(const SplitSizes& sizes) {
  if (sizes.train < 1 || sizes.val < 1 || sizes.test < 1) {
    throw Error(Errc::InvalidSpec, "split sizes must be positive");
  }
}

}  // namespace

Dataset gen_poly_dataset(const PolyTarget& target, SplitSizes sizes, std::uint64_t seed) {
  check_sizes(sizes);
  const int n = target.group.degree();
  if (static_cast<int>(target.exponents.size()) != n) {
    throw Error(Errc::DegreeMismatch, "exponent count differs from group degree");
  }
  Dataset d;
  d.task = "poly";
  d.group_spec = target.group_spec;
  d.exponents = target.exponents;
  d.seed = seed;
  d.n = n;
  d.n_in = 1;
  d.sizes = sizes;
  d.inputs.resize(sizes.total() * n, 1);
  d.targets.resize(sizes.total(), 1);
  for (Split s : {Split::Train, Split::Val, Split::Test}) {
    Rng rng(seed, {0x706f6c79u, static_cast<std::uint32_t>(s)});
    for (Eigen::Index k = d.offset(s); k < d.offset(s) + d.count(s); ++k) {
      std::vector<double> x(static_cast<std::size_t>(n));
      for (auto& v : x) v = rng.uniform();
      for (int i = 0; i < n; ++i) d.inputs(k * n + i, 0) = x[static_cast<std::size_t>(i)];
      d.targets(k, 0) = target_polynomial(target, x);
    }
  }
  return d;
}

Dataset gen_quad_dataset(SplitSizes sizes, std::uint64_t seed) {
  check_sizes(sizes);
  Dataset d;
  d.task = "quad";
  d.group_spec = "cyclic:4";
  d.seed = seed;
  d.n = 4;
  d.n_in = 2;
  d.sizes = sizes;
  d.inputs.resize(sizes.total() * 4, 2);
  d.targets.resize(sizes.total(), 1);
  for (Split s : {Split::Train, Split::Val, Split::Test}) {
    Rng rng(seed, {0x71756164u, static_cast<std::uint32_t>(s)});
    for (Eigen::Index k = d.offset(s); k < d.offset(s) + d.count(s); ++k) {
      const Quad q = sample_convex_quad(rng);
      const auto shift = static_cast<std::size_t>(rng.below(4));
      for (std::size_t i = 0; i < 4; ++i) {
        d.inputs.row(k * 4 + static_cast<Eigen::Index>(i)) = q[(i + shift) % 4].transpose();
      }
      d.targets(k, 0) = shoelace_area(q);
    }
  }
  return d;
}

}  // namespace ginv
