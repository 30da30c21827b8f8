#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "ginv/ginvnet.hpp"
#include "ginv/permgroup.hpp"
#include "ginv/random.hpp"
#include "ginv/tensor.hpp"

namespace testing {

// Hand-rolled generators for property tests.

inline ginv::Permutation random_permutation(ginv::Rng& rng, int n) {
  std::vector<int> m(static_cast<std::size_t>(n));
  std::iota(m.begin(), m.end(), 0);
  for (int i = n - 1; i > 0; --i) {
    const auto j = static_cast<int>(rng.below(static_cast<std::uint64_t>(i) + 1));
    std::swap(m[static_cast<std::size_t>(i)], m[static_cast<std::size_t>(j)]);
  }
  return ginv::Permutation(std::move(m));
}

inline ginv::Matrix random_matrix(ginv::Rng& rng, Eigen::Index rows, Eigen::Index cols, double lo = -1.0,
                                  double hi = 1.0) {
  ginv::Matrix x(rows, cols);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform(lo, hi);
  return x;
}

inline double rel_diff(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

inline const char* const kAuditGroups[] = {"cyclic:5", "dihedral:5", "symmetric:4", "alternating:4",
                                           "product:symmetric:2,symmetric:3"};

/// Heads t -> t^{b_j}, n_mid = 1 and f_out the identity map, so that the
/// network output is the orbit sum of the monomial with exponents b.
inline ginv::GInvNet monomial_net(const ginv::PermGroup& group, const std::vector<int>& exponents) {
  ginv::GInvNet net;
  net.group = group;
  net.n_in = 1;
  net.n_mid = 1;
  net.n_out = 1;
  for (int b : exponents) net.heads.emplace_back(ginv::MonomialHead{b});
  net.fout = ginv::Mlp::zeros(ginv::MlpSpec::uniform(1, {}, 1, ginv::ad::Activation::Identity));
  net.fout.params[0](0, 0) = 1.0;
  return net;
}

}  // namespace testing
