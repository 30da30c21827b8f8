#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "ginv/error.hpp"

namespace ginv {

/// Bijection on {0..n-1}; mapping()[i] is the image of i.
class Permutation {
 public:
  Permutation() = default;

  /// Throws InvalidSpec unless `mapping` is a bijection on {0..n-1}.
  explicit Permutation(std::vector<int> mapping);

  static Permutation identity(int degree);

  int degree() const { return static_cast<int>(mapping_.size()); }
  int operator()(int i) const { return mapping_[static_cast<std::size_t>(i)]; }
  const std::vector<int>& mapping() const { return mapping_; }
  bool is_identity() const;

  friend bool operator==(const Permutation&, const Permutation&) = default;
  friend auto operator<=>(const Permutation& a, const Permutation& b) {
    return a.mapping_ <=> b.mapping_;
  }

 private:
  std::vector<int> mapping_;
};

/// (p ∘ q)(i) = p(q(i)): q is applied first.
Permutation compose(const Permutation& p, const Permutation& q);
Permutation inverse(const Permutation& p);

/// Parses 1-based cycle notation such as "(1 2 3)(4,5)" or "()".
Permutation parse_cycles(std::string_view text, int degree);

/// 1-based cycle notation, fixed points omitted; identity prints as "()".
std::string to_cycle_string(const Permutation& p);

/// Finite permutation group given by its full element list.
/// The identity is element 0 and the order of the remaining elements is
/// the breadth-first discovery order of the closure that produced it.
class PermGroup {
 public:
  PermGroup() = default;

  int degree() const { return degree_; }
  std::size_t order() const { return elements_.size(); }
  const std::vector<Permutation>& elements() const { return elements_; }
  const Permutation& operator[](std::size_t k) const { return elements_[k]; }
  bool contains(const Permutation& p) const;

  /// Exhaustively checks closure, identity, inverses and distinctness.
  /// Returns an empty string when every check passes, otherwise a reason.
  std::string verify() const;

 private:
  friend PermGroup closure(const std::vector<Permutation>&, std::size_t);
  PermGroup(int degree, std::vector<Permutation> elements);

  int degree_ = 0;
  std::vector<Permutation> elements_;
  std::vector<Permutation> sorted_;
};

inline constexpr std::size_t kDefaultOrderCap = 40320;  // 8!

/// Breadth-first closure starting from the identity.
PermGroup closure(const std::vector<Permutation>& generators,
                  std::size_t cap = kDefaultOrderCap);

// ---------------------------------------------------------------------------
// Group specifications

enum class Family { Cyclic, Dihedral, Symmetric, Alternating };

struct GroupSpec;

struct NamedFamily {
  Family family;
  int k;
};

/// Direct product acting on blocks [0, k1) and [k1, k1 + k2).
struct ProductSpec {
  std::shared_ptr<const GroupSpec> left;
  std::shared_ptr<const GroupSpec> right;
};

struct GeneratorSpec {
  int degree;
  std::vector<std::string> cycles;
};

/// Text forms: cyclic:K, dihedral:K, symmetric:K, alternating:K,
/// product:<spec>,<spec>, gen:<degree>:<perm>[;<perm>...].
/// dihedral:K acts on K points and has order 2K.
struct GroupSpec {
  std::variant<NamedFamily, ProductSpec, GeneratorSpec> form;
};

GroupSpec parse_group_spec(std::string_view text);
std::string to_string(const GroupSpec& spec);

PermGroup named_group(const GroupSpec& spec, std::size_t cap = kDefaultOrderCap);
PermGroup named_group(std::string_view spec_text, std::size_t cap = kDefaultOrderCap);

// ---------------------------------------------------------------------------
// Action on row-indexed data

/// Row i of the result is row p(i) of x. Pure gather, values are untouched.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>
act(const Permutation& p, const Eigen::MatrixBase<Derived>& x) {
  if (p.degree() != x.rows()) {
    throw Error(Errc::DegreeMismatch, "act: permutation degree " + std::to_string(p.degree()) +
                                          " vs " + std::to_string(x.rows()) + " rows");
  }
  return x(p.mapping(), Eigen::all);
}

}  // namespace ginv
