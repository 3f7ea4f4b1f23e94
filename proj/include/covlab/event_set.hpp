#pragma once

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "covlab/typicality.hpp"

namespace covlab {

// Default ceiling on enumerated state counts.
inline constexpr std::size_t kDefaultEnumerationGuard = 10'000'000;

// Product of sizes, throwing GuardExceeded past `guard`.
inline std::size_t space_size_checked(std::span<const int> sizes, std::size_t guard) {
  std::size_t total = 1;
  for (int s : sizes) {
    if (s < 1) throw ValidationError("event space: alphabet size must be >= 1");
    if (total > guard / static_cast<std::size_t>(s)) {
      throw GuardExceeded("event space larger than the enumeration guard");
    }
    total *= static_cast<std::size_t>(s);
  }
  return total;
}

//! Dense subset of a finite product space, stored as a membership indicator
//! over flat indices (row-major, last variable fastest).
struct EventSet {
  std::vector<int> sizes;
  std::vector<std::uint8_t> member;
  std::size_t count = 0;

  std::size_t space_size() const { return member.size(); }
  bool contains(std::size_t flat) const { return member[flat] != 0; }

  static EventSet none(std::vector<int> sizes,
                       std::size_t guard = kDefaultEnumerationGuard) {
    EventSet e;
    const std::size_t total = space_size_checked(sizes, guard);
    e.sizes = std::move(sizes);
    e.member.assign(total, 0);
    return e;
  }

  static EventSet full_space(std::vector<int> sizes,
                             std::size_t guard = kDefaultEnumerationGuard) {
    EventSet e = none(std::move(sizes), guard);
    std::fill(e.member.begin(), e.member.end(), std::uint8_t{1});
    e.count = e.member.size();
    return e;
  }

  static EventSet from_predicate(std::vector<int> sizes,
                                 const std::function<bool(std::span<const int>)>& pred,
                                 std::size_t guard = kDefaultEnumerationGuard) {
    EventSet e = none(std::move(sizes), guard);
    for_each_tuple(e.sizes, [&](std::span<const int> u, std::size_t flat) {
      if (pred(u)) {
        e.member[flat] = 1;
        ++e.count;
      }
    });
    return e;
  }

  void add_flat(std::size_t flat) {
    if (!member[flat]) {
      member[flat] = 1;
      ++count;
    }
  }
};

// a^n with overflow/guard checking.
inline std::size_t checked_pow(int base, int n, std::size_t guard) {
  std::size_t v = 1;
  for (int i = 0; i < n; ++i) {
    if (v > guard / static_cast<std::size_t>(base)) {
      throw GuardExceeded("sequence alphabet larger than the enumeration guard");
    }
    v *= static_cast<std::size_t>(base);
  }
  return v;
}

// Splits a super-symbol code into n base-alphabet digits, position 0 most
// significant.
inline void decode_super(std::size_t code, int base, int n, std::span<int> out) {
  for (int i = n - 1; i >= 0; --i) {
    out[i] = static_cast<int>(code % static_cast<std::size_t>(base));
    code /= static_cast<std::size_t>(base);
  }
}

inline std::size_t encode_super(std::span<const int> digits, int base) {
  std::size_t code = 0;
  for (int d : digits) code = code * static_cast<std::size_t>(base) + static_cast<std::size_t>(d);
  return code;
}

// Joint law of n i.i.d. copies of p, over super-symbol alphabets of size
// size_v^n. One super symbol encodes a length-n sequence.
inline JointPmf product_extend(const JointPmf& p, int n,
                               std::size_t guard = kDefaultEnumerationGuard) {
  if (n < 1) throw ValidationError("product_extend: n must be >= 1");
  if (n == 1) return p;
  const int m = p.num_vars();
  std::vector<int> ext_sizes(static_cast<std::size_t>(m));
  for (int v = 0; v < m; ++v) {
    const std::size_t sv = checked_pow(p.size(v), n, guard);
    if (sv > static_cast<std::size_t>(std::numeric_limits<int>::max())) {
      throw GuardExceeded("sequence alphabet exceeds the index range");
    }
    ext_sizes[static_cast<std::size_t>(v)] = static_cast<int>(sv);
  }
  const std::size_t total = space_size_checked(ext_sizes, guard);
  std::vector<double> probs(total, 0.0);
  std::vector<std::vector<int>> digits(static_cast<std::size_t>(m),
                                       std::vector<int>(static_cast<std::size_t>(n)));
  std::vector<int> sym(static_cast<std::size_t>(m));
  for_each_tuple(ext_sizes, [&](std::span<const int> u, std::size_t flat) {
    for (int v = 0; v < m; ++v) {
      decode_super(static_cast<std::size_t>(u[v]), p.size(v), n, digits[static_cast<std::size_t>(v)]);
    }
    double prob = 1.0;
    for (int i = 0; i < n && prob > 0.0; ++i) {
      for (int v = 0; v < m; ++v) sym[static_cast<std::size_t>(v)] = digits[static_cast<std::size_t>(v)][static_cast<std::size_t>(i)];
      prob *= p.at(sym);
    }
    probs[flat] = prob;
  });
  return unchecked_pmf(std::move(ext_sizes), std::move(probs), p.tolerance());
}

// Fills a SequenceTuple over all variables of `p` from one super-symbol tuple.
inline void super_to_sequences(const JointPmf& p, int n, std::span<const int> super,
                               SequenceTuple& out) {
  for (int v = 0; v < p.num_vars(); ++v) {
    decode_super(static_cast<std::size_t>(super[v]), p.size(v), n, out.seq(v));
  }
}

// The weakly typical set of p at slack delta over length-n sequences, as an
// event in the product-extended space.
inline EventSet typical_event(const JointPmf& p, int n, double delta,
                              std::size_t guard = kDefaultEnumerationGuard) {
  if (n < 1) throw ValidationError("typical_event: n must be >= 1");
  if (!(delta >= 0.0)) throw ValidationError("typical_event: negative delta");
  const int m = p.num_vars();
  std::vector<int> ext_sizes(static_cast<std::size_t>(m));
  for (int v = 0; v < m; ++v) {
    ext_sizes[static_cast<std::size_t>(v)] =
        static_cast<int>(checked_pow(p.size(v), n, guard));
  }
  space_size_checked(ext_sizes, guard);
  const SubsetTable table(p);
  SequenceTuple t = SequenceTuple::zeros(p.all_vars(), n);
  return EventSet::from_predicate(
      std::move(ext_sizes),
      [&](std::span<const int> u) {
        super_to_sequences(p, n, u, t);
        return is_typical_over(t, table, p.all_vars(), delta);
      },
      guard);
}

// Event {all listed variables carry the same symbol}; requires equal alphabet
// sizes across those variables.
inline EventSet equal_event(std::vector<int> sizes, VarSet vars,
                            std::size_t guard = kDefaultEnumerationGuard) {
  const auto vs = vars.vars();
  if (vs.size() < 2) throw ValidationError("equal event: need at least two variables");
  for (int v : vs) {
    if (v < 0 || static_cast<std::size_t>(v) >= sizes.size()) {
      throw ValidationError("equal event: variable out of range");
    }
    if (sizes[static_cast<std::size_t>(v)] != sizes[static_cast<std::size_t>(vs[0])]) {
      throw ValidationError("equal event: mismatched alphabet sizes");
    }
  }
  return EventSet::from_predicate(
      std::move(sizes),
      [&](std::span<const int> u) {
        for (std::size_t i = 1; i < vs.size(); ++i) {
          if (u[static_cast<std::size_t>(vs[i])] != u[static_cast<std::size_t>(vs[0])]) return false;
        }
        return true;
      },
      guard);
}

}  // namespace covlab
