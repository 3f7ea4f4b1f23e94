#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "covlab/errors.hpp"
#include "covlab/numeric.hpp"
#include "covlab/varset.hpp"

namespace covlab {

// Visits every tuple of the product space prod_v {0..sizes[v]-1} in flat-index
// order (last variable fastest). f(u, flat) receives the current tuple.
template <class F>
void for_each_tuple(std::span<const int> sizes, F&& f) {
  const int m = static_cast<int>(sizes.size());
  std::vector<int> u(m, 0);
  std::size_t total = 1;
  for (int s : sizes) total *= static_cast<std::size_t>(s);
  for (std::size_t flat = 0; flat < total; ++flat) {
    f(std::span<const int>(u), flat);
    for (int v = m - 1; v >= 0; --v) {
      if (++u[v] < sizes[v]) break;
      u[v] = 0;
    }
  }
}

//! Dense joint distribution over variables 0..m-1 with alphabets {0..size_v-1}.
//! The table is row-major with the last variable fastest. Construction via
//! validated() checks shape, nonnegativity, and total mass.
class JointPmf {
public:
  JointPmf() = default;

  static JointPmf validated(std::vector<int> alphabet_sizes, std::vector<double> probs,
                            double tolerance = kDefaultMassTolerance) {
    if (alphabet_sizes.empty()) throw ValidationError("pmf: no variables");
    if (!(tolerance >= 0.0)) throw ValidationError("pmf: negative tolerance");
    std::size_t total = 1;
    for (std::size_t v = 0; v < alphabet_sizes.size(); ++v) {
      const int s = alphabet_sizes[v];
      if (s < 1) {
        throw ValidationError("pmf: alphabet size of variable " + std::to_string(v) +
                              " must be >= 1");
      }
      if (total > (static_cast<std::size_t>(-1) / static_cast<std::size_t>(s))) {
        throw ValidationError("pmf: table size overflows");
      }
      total *= static_cast<std::size_t>(s);
    }
    if (probs.size() != total) {
      throw ValidationError("pmf: expected " + std::to_string(total) + " entries, got " +
                            std::to_string(probs.size()));
    }
    double mass = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
      if (!std::isfinite(probs[i]) || probs[i] < 0.0) {
        throw ValidationError("pmf: entry " + std::to_string(i) + " is not a probability");
      }
      mass += probs[i];
    }
    if (std::abs(mass - 1.0) > tolerance) {
      throw ValidationError("pmf: total mass " + std::to_string(mass) +
                            " deviates from 1 beyond tolerance");
    }
    return JointPmf(std::move(alphabet_sizes), std::move(probs), tolerance);
  }

  int num_vars() const { return static_cast<int>(sizes_.size()); }

  // Number of codebook variables when roles apply: variables 1..k plus the
  // common variable 0 and the side variable m-1.
  int k() const {
    if (num_vars() < 3) throw ValidationError("pmf: fewer than 3 variables has no codebook role");
    return num_vars() - 2;
  }

  int size(int v) const { return sizes_[static_cast<std::size_t>(v)]; }
  const std::vector<int>& alphabet_sizes() const { return sizes_; }
  std::size_t table_size() const { return p_.size(); }
  const std::vector<double>& table() const { return p_; }
  double tolerance() const { return tol_; }
  VarSet all_vars() const { return VarSet::full(num_vars()); }

  double at_flat(std::size_t idx) const { return p_[idx]; }

  std::size_t flat_index(std::span<const int> u) const {
    std::size_t idx = 0;
    for (int v = 0; v < num_vars(); ++v) {
      idx = idx * static_cast<std::size_t>(sizes_[v]) + static_cast<std::size_t>(u[v]);
    }
    return idx;
  }

  double at(std::span<const int> u) const { return p_[flat_index(u)]; }

  void decode(std::size_t idx, std::span<int> out) const {
    for (int v = num_vars() - 1; v >= 0; --v) {
      const auto s = static_cast<std::size_t>(sizes_[v]);
      out[v] = static_cast<int>(idx % s);
      idx /= s;
    }
  }

  // Marginal over the variables in S, which become variables 0..|S|-1 of the
  // result in ascending original order. Summation runs in flat-index order.
  JointPmf marginal(VarSet S) const {
    require_subset(S, "marginal");
    if (S.empty()) throw ValidationError("marginal: empty variable set");
    if (S == all_vars()) return *this;
    const auto vars = S.vars();
    std::vector<int> out_sizes;
    out_sizes.reserve(vars.size());
    for (int v : vars) out_sizes.push_back(sizes_[static_cast<std::size_t>(v)]);
    std::size_t out_total = 1;
    for (int s : out_sizes) out_total *= static_cast<std::size_t>(s);
    std::vector<double> out(out_total, 0.0);
    for_each_tuple(sizes_, [&](std::span<const int> u, std::size_t flat) {
      std::size_t idx = 0;
      for (int v : vars) {
        idx = idx * static_cast<std::size_t>(sizes_[static_cast<std::size_t>(v)]) +
              static_cast<std::size_t>(u[v]);
      }
      out[idx] += p_[flat];
    });
    return JointPmf(std::move(out_sizes), std::move(out), tol_);
  }

  // H(U_S) in nats.
  double entropy(VarSet S) const {
    require_subset(S, "entropy");
    if (S.empty()) return 0.0;
    const std::vector<double>& t = (S == all_vars()) ? p_ : marginal(S).p_;
    double h = 0.0;
    for (double p : t) h -= xlnx(p);
    return h;
  }

  // H(U_S | U_T) = H(U_{S u T}) - H(U_T), nats. S and T must be disjoint.
  double cond_entropy(VarSet S, VarSet T) const {
    if (S.empty()) throw ValidationError("cond_entropy: empty target");
    if (!S.disjoint(T)) throw ValidationError("cond_entropy: overlapping variable sets");
    return entropy(S.unite(T)) - entropy(T);
  }

private:
  JointPmf(std::vector<int> sizes, std::vector<double> probs, double tol)
      : sizes_(std::move(sizes)), p_(std::move(probs)), tol_(tol) {}

  void require_subset(VarSet S, const char* op) const {
    if (!S.subset_of(all_vars())) {
      throw ValidationError(std::string(op) + ": variable set " + S.label() +
                            " outside this distribution");
    }
  }

  friend class CondPmf;
  friend JointPmf unchecked_pmf(std::vector<int>, std::vector<double>, double);

  std::vector<int> sizes_;
  std::vector<double> p_;
  double tol_ = kDefaultMassTolerance;
};

// Internal constructor for tables that are valid by construction.
inline JointPmf unchecked_pmf(std::vector<int> sizes, std::vector<double> probs,
                              double tol = kDefaultMassTolerance) {
  return JointPmf(std::move(sizes), std::move(probs), tol);
}

//! Conditional table p(target | given) derived from a joint. Rows with
//! zero-mass conditioning tuples are undefined; querying one throws.
class CondPmf {
public:
  VarSet target() const { return target_; }
  VarSet given() const { return given_; }
  const std::vector<int>& target_sizes() const { return tsizes_; }
  const std::vector<int>& given_sizes() const { return gsizes_; }
  std::size_t target_space() const { return t_total_; }
  std::size_t given_space() const { return g_total_; }

  bool row_defined(std::size_t g_flat) const { return gmass_[g_flat] > 0.0; }
  double given_mass(std::size_t g_flat) const { return gmass_[g_flat]; }

  double at_flat(std::size_t g_flat, std::size_t t_flat) const {
    if (!row_defined(g_flat)) {
      throw ValidationError("conditional: zero-mass conditioning tuple (row " +
                            std::to_string(g_flat) + ")");
    }
    return table_[g_flat * t_total_ + t_flat];
  }

  // Symbols ordered by ascending variable index within each set.
  double at(std::span<const int> t_syms, std::span<const int> g_syms) const {
    return at_flat(flat(gsizes_, g_syms), flat(tsizes_, t_syms));
  }

  std::span<const double> row(std::size_t g_flat) const {
    if (!row_defined(g_flat)) {
      throw ValidationError("conditional: zero-mass conditioning tuple (row " +
                            std::to_string(g_flat) + ")");
    }
    return {table_.data() + g_flat * t_total_, t_total_};
  }

private:
  friend CondPmf conditional(const JointPmf&, VarSet, VarSet);

  static std::size_t flat(const std::vector<int>& sizes, std::span<const int> syms) {
    std::size_t idx = 0;
    for (std::size_t i = 0; i < sizes.size(); ++i) {
      idx = idx * static_cast<std::size_t>(sizes[i]) + static_cast<std::size_t>(syms[i]);
    }
    return idx;
  }

  VarSet target_, given_;
  std::vector<int> tsizes_, gsizes_;
  std::size_t t_total_ = 1, g_total_ = 1;
  std::vector<double> table_;  // [g_flat * t_total_ + t_flat]
  std::vector<double> gmass_;  // marginal mass per conditioning tuple
};

// p(target | given). The given set may be empty, in which case the single row
// is the marginal of target.
inline CondPmf conditional(const JointPmf& p, VarSet target, VarSet given) {
  if (target.empty()) throw ValidationError("conditional: empty target");
  if (!target.disjoint(given)) throw ValidationError("conditional: overlapping variable sets");
  if (!target.unite(given).subset_of(p.all_vars())) {
    throw ValidationError("conditional: variable set outside this distribution");
  }
  CondPmf c;
  c.target_ = target;
  c.given_ = given;
  for (int v : target.vars()) c.tsizes_.push_back(p.size(v));
  for (int v : given.vars()) c.gsizes_.push_back(p.size(v));
  for (int s : c.tsizes_) c.t_total_ *= static_cast<std::size_t>(s);
  for (int s : c.gsizes_) c.g_total_ *= static_cast<std::size_t>(s);

  const JointPmf joint = p.marginal(target.unite(given));
  c.table_.assign(c.g_total_ * c.t_total_, 0.0);
  c.gmass_.assign(c.g_total_, 0.0);

  // The joint marginal orders variables ascending; split each tuple into the
  // target part and the given part.
  const auto union_vars = target.unite(given).vars();
  std::vector<int> t_syms(c.tsizes_.size()), g_syms(c.gsizes_.size());
  for_each_tuple(joint.alphabet_sizes(), [&](std::span<const int> u, std::size_t flat) {
    std::size_t ti = 0, gi = 0;
    for (std::size_t i = 0; i < union_vars.size(); ++i) {
      if (target.contains(union_vars[i])) {
        t_syms[ti++] = u[i];
      } else {
        g_syms[gi++] = u[i];
      }
    }
    const std::size_t gf = CondPmf::flat(c.gsizes_, g_syms);
    const std::size_t tf = CondPmf::flat(c.tsizes_, t_syms);
    c.table_[gf * c.t_total_ + tf] += joint.at_flat(flat);
    c.gmass_[gf] += joint.at_flat(flat);
  });
  for (std::size_t g = 0; g < c.g_total_; ++g) {
    if (c.gmass_[g] > 0.0) {
      for (std::size_t t = 0; t < c.t_total_; ++t) c.table_[g * c.t_total_ + t] /= c.gmass_[g];
    }
  }
  return c;
}

}  // namespace covlab
