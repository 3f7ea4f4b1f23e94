#pragma once

#include <bit>
#include <cstdint>
#include <string>
#include <vector>

#include "covlab/errors.hpp"

namespace covlab {

//! Set of variable indices as a bitmask. In the covering setting variable 0 is
//! the common source, variables 1..k are the codebook variables, and variable
//! k+1 is the side variable; the type itself is agnostic to roles.
class VarSet {
public:
  constexpr VarSet() = default;
  constexpr explicit VarSet(std::uint32_t mask) : mask_(mask) {}

  static constexpr VarSet of(std::initializer_list<int> vars) {
    std::uint32_t m = 0;
    for (int v : vars) m |= (1u << v);
    return VarSet(m);
  }

  // {0, 1, ..., m-1}
  static constexpr VarSet full(int m) {
    return VarSet(m >= 32 ? ~0u : ((1u << m) - 1u));
  }

  // {lo, ..., hi} inclusive; empty when lo > hi.
  static constexpr VarSet range(int lo, int hi) {
    if (lo > hi) return VarSet();
    return VarSet(full(hi + 1).mask_ & ~full(lo).mask_);
  }

  constexpr bool contains(int v) const { return (mask_ >> v) & 1u; }
  constexpr bool empty() const { return mask_ == 0; }
  constexpr int count() const { return std::popcount(mask_); }
  constexpr std::uint32_t mask() const { return mask_; }

  constexpr VarSet with(int v) const { return VarSet(mask_ | (1u << v)); }
  constexpr VarSet without(int v) const { return VarSet(mask_ & ~(1u << v)); }
  constexpr VarSet unite(VarSet o) const { return VarSet(mask_ | o.mask_); }
  constexpr VarSet intersect(VarSet o) const { return VarSet(mask_ & o.mask_); }
  constexpr VarSet minus(VarSet o) const { return VarSet(mask_ & ~o.mask_); }
  constexpr bool disjoint(VarSet o) const { return (mask_ & o.mask_) == 0; }
  constexpr bool subset_of(VarSet o) const { return (mask_ & ~o.mask_) == 0; }

  constexpr bool operator==(const VarSet&) const = default;

  // Member indices in ascending order.
  std::vector<int> vars() const {
    std::vector<int> out;
    out.reserve(count());
    for (std::uint32_t m = mask_; m != 0; m &= m - 1) {
      out.push_back(std::countr_zero(m));
    }
    return out;
  }

  int lowest() const {
    if (mask_ == 0) throw ValidationError("VarSet::lowest on empty set");
    return std::countr_zero(mask_);
  }

  // Compact label: members joined by '+', e.g. "0+2"; empty set -> "".
  std::string label() const {
    std::string s;
    for (int v : vars()) {
      if (!s.empty()) s += '+';
      s += std::to_string(v);
    }
    return s;
  }

private:
  std::uint32_t mask_ = 0;
};

// All subsets of u in increasing mask order.
inline std::vector<VarSet> subsets_of(VarSet u, bool include_empty = false) {
  std::vector<VarSet> out;
  const std::uint32_t m = u.mask();
  std::uint32_t s = 0;
  while (true) {
    if (s != 0 || include_empty) out.push_back(VarSet(s));
    if (s == m) break;
    s = (s - m) & m;
  }
  return out;
}

inline std::vector<VarSet> nonempty_subsets(VarSet u) { return subsets_of(u, false); }

}  // namespace covlab
