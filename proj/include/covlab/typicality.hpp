#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "covlab/joint_pmf.hpp"

namespace covlab {

//! Aligned length-n sequences for a set of variables, one sequence per member
//! of vars in ascending variable order.
struct SequenceTuple {
  int n = 0;
  VarSet vars;
  std::vector<std::vector<int>> seqs;

  static SequenceTuple zeros(VarSet vars, int n) {
    SequenceTuple t;
    t.n = n;
    t.vars = vars;
    t.seqs.assign(static_cast<std::size_t>(vars.count()),
                  std::vector<int>(static_cast<std::size_t>(n), 0));
    return t;
  }

  // Index of variable v within seqs.
  int slot(int v) const {
    if (!vars.contains(v)) throw ValidationError("sequence tuple: variable not present");
    return VarSet(vars.mask() & ((1u << v) - 1u)).count();
  }

  std::vector<int>& seq(int v) { return seqs[static_cast<std::size_t>(slot(v))]; }
  const std::vector<int>& seq(int v) const { return seqs[static_cast<std::size_t>(slot(v))]; }
  int symbol(int v, int i) const { return seq(v)[static_cast<std::size_t>(i)]; }
};

//! Per-subset marginals, elementwise log tables, and entropies of one joint,
//! precomputed for repeated typicality tests.
class SubsetTable {
public:
  explicit SubsetTable(JointPmf p) : p_(std::move(p)) {
    const int m = p_.num_vars();
    if (m > 20) throw ValidationError("subset table: too many variables");
    const std::size_t n_masks = std::size_t{1} << m;
    marg_.resize(n_masks);
    logp_.resize(n_masks);
    ent_.assign(n_masks, 0.0);
    for (std::size_t mask = 1; mask < n_masks; ++mask) {
      const VarSet S(static_cast<std::uint32_t>(mask));
      marg_[mask] = p_.marginal(S);
      const auto& t = marg_[mask].table();
      logp_[mask].resize(t.size());
      for (std::size_t i = 0; i < t.size(); ++i) {
        logp_[mask][i] = t[i] > 0.0 ? std::log(t[i]) : -kInf;
      }
      ent_[mask] = p_.entropy(S);
    }
  }

  const JointPmf& joint() const { return p_; }
  int num_vars() const { return p_.num_vars(); }

  const JointPmf& marginal(VarSet S) const { return marg_[S.mask()]; }
  double entropy(VarSet S) const { return ent_[S.mask()]; }

  // Flat index into the marginal of S for position i of the tuple.
  std::size_t flat_at(VarSet S, const SequenceTuple& t, int i) const {
    std::size_t idx = 0;
    for (int v : S.vars()) {
      idx = idx * static_cast<std::size_t>(p_.size(v)) +
            static_cast<std::size_t>(t.symbol(v, i));
    }
    return idx;
  }

  double log_prob(VarSet S, const SequenceTuple& t, int i) const {
    return logp_[S.mask()][flat_at(S, t, i)];
  }

  std::span<const double> log_table(VarSet S) const { return logp_[S.mask()]; }

private:
  JointPmf p_;
  std::vector<JointPmf> marg_;
  std::vector<std::vector<double>> logp_;
  std::vector<double> ent_;
};

// -(1/n) sum_i ln p(u_{S,i}) for the marginal on S; +inf when any position has
// zero probability.
inline double empirical_rate(const SequenceTuple& t, const SubsetTable& table, VarSet S) {
  if (S.empty()) throw ValidationError("empirical_rate: empty variable set");
  if (!S.subset_of(t.vars)) throw ValidationError("empirical_rate: variables missing from tuple");
  if (t.n < 1) throw ValidationError("empirical_rate: empty sequences");
  double acc = 0.0;
  for (int i = 0; i < t.n; ++i) {
    const double lp = table.log_prob(S, t, i);
    if (lp == -kInf) return kInf;
    acc += lp;
  }
  return -acc / static_cast<double>(t.n);
}

inline double empirical_rate(const SequenceTuple& t, const JointPmf& p, VarSet S) {
  return empirical_rate(t, SubsetTable(p), S);
}

struct SubsetRate {
  VarSet subset;
  double rate = 0.0;       // empirical rate, possibly +inf
  double deviation = 0.0;  // |rate - H(U_subset)|
};

struct TypicalityVerdict {
  bool typical = false;
  std::vector<SubsetRate> per_subset;  // every nonempty subset of the universe
  VarSet worst_subset;
  double worst_deviation = 0.0;
};

// Verdict over every nonempty subset of `universe`: typical iff each subset's
// empirical rate deviates from its entropy by at most delta.
inline TypicalityVerdict typicality_verdict(const SequenceTuple& t, const SubsetTable& table,
                                            VarSet universe, double delta) {
  if (universe.empty()) throw ValidationError("typicality: empty universe");
  if (!universe.subset_of(t.vars)) {
    throw ValidationError("typicality: universe not covered by the tuple");
  }
  if (!(delta >= 0.0)) throw ValidationError("typicality: negative delta");
  TypicalityVerdict v;
  v.typical = true;
  v.worst_deviation = -1.0;
  for (VarSet S : nonempty_subsets(universe)) {
    const double rate = empirical_rate(t, table, S);
    const double dev = std::abs(rate - table.entropy(S));
    v.per_subset.push_back({S, rate, dev});
    if (dev > v.worst_deviation) {
      v.worst_deviation = dev;
      v.worst_subset = S;
    }
    if (!(dev <= delta)) v.typical = false;
  }
  return v;
}

// Early-exit membership test, same semantics as typicality_verdict().typical.
inline bool is_typical_over(const SequenceTuple& t, const SubsetTable& table, VarSet universe,
                            double delta) {
  for (VarSet S : nonempty_subsets(universe)) {
    const double rate = empirical_rate(t, table, S);
    if (!(std::abs(rate - table.entropy(S)) <= delta)) return false;
  }
  return true;
}

// Weak typicality of a full tuple: every nonempty subset of all variables.
inline TypicalityVerdict is_weakly_typical(const SequenceTuple& t, const SubsetTable& table,
                                           double delta) {
  return typicality_verdict(t, table, table.joint().all_vars(), delta);
}

inline TypicalityVerdict is_weakly_typical(const SequenceTuple& t, const JointPmf& p,
                                           double delta) {
  return is_weakly_typical(t, SubsetTable(p), delta);
}

// Typicality of the projection onto variable 0, a nonempty set S of codebook
// variables, and the side variable m-1.
inline bool projected_typical(const SequenceTuple& t, const SubsetTable& table, VarSet S,
                              double delta) {
  const int m = table.num_vars();
  if (m < 3) throw ValidationError("projected typicality: need at least 3 variables");
  if (S.empty() || !S.subset_of(VarSet::range(1, m - 2))) {
    throw ValidationError("projected typicality: S must be a nonempty codebook subset");
  }
  const VarSet universe = S.with(0).with(m - 1);
  return is_typical_over(t, table, universe, delta);
}

inline bool projected_typical(const SequenceTuple& t, const JointPmf& p, VarSet S,
                              double delta) {
  return projected_typical(t, SubsetTable(p), S, delta);
}

}  // namespace covlab
