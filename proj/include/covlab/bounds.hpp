#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "covlab/event_set.hpp"
#include "covlab/typicality.hpp"

namespace covlab {

// Largest codebook count that is materialized exactly from a rate.
inline constexpr double kMaxExactCount = 4.5e15;

//! Codebook sizes M_1..M_k. Holds exact integer counts when materializable
//! and always the log sizes, so rate-specified codebooks far beyond integer
//! range stay usable by the bound evaluators.
class CodebookSizes {
public:
  static CodebookSizes from_counts(std::vector<std::uint64_t> counts) {
    if (counts.empty()) throw ValidationError("codebook sizes: need at least one codebook");
    CodebookSizes s;
    s.exact_ = true;
    s.counts_ = std::move(counts);
    s.logs_.reserve(s.counts_.size());
    for (std::uint64_t c : s.counts_) {
      s.logs_.push_back(c == 0 ? -kInf : std::log(static_cast<double>(c)));
    }
    return s;
  }

  // M_j = least integer >= exp(n * R_j); falls back to log-only sizes when a
  // count exceeds the exact-count range.
  static CodebookSizes from_rates(const std::vector<double>& rates_nats, int n) {
    if (rates_nats.empty()) throw ValidationError("codebook sizes: need at least one rate");
    if (n < 1) throw ValidationError("codebook sizes: n must be >= 1");
    CodebookSizes s;
    s.exact_ = true;
    for (double r : rates_nats) {
      if (!std::isfinite(r) || r < 0.0) {
        throw ValidationError("codebook sizes: rates must be finite and nonnegative");
      }
      const double x = std::exp(static_cast<double>(n) * r);
      if (x > kMaxExactCount) s.exact_ = false;
    }
    for (double r : rates_nats) {
      const double lnm = static_cast<double>(n) * r;
      if (s.exact_) {
        // Round-to-integer guard: exp(n*r) landing a hair above an integer
        // must not bump the count.
        const double x = std::exp(lnm);
        const auto c = static_cast<std::uint64_t>(std::ceil(x - 1e-9 * std::max(1.0, x)));
        s.counts_.push_back(c);
        s.logs_.push_back(c == 0 ? -kInf : std::log(static_cast<double>(c)));
      } else {
        s.logs_.push_back(lnm);
      }
    }
    return s;
  }

  int k() const { return static_cast<int>(logs_.size()); }

  // True when integer counts are available.
  bool exact() const { return exact_; }

  // j is 1-based, matching variable ids 1..k.
  std::uint64_t count(int j) const {
    if (!exact_) throw ValidationError("codebook sizes: counts not materialized");
    return counts_[static_cast<std::size_t>(j) - 1];
  }

  const std::vector<std::uint64_t>& counts() const {
    if (!exact_) throw ValidationError("codebook sizes: counts not materialized");
    return counts_;
  }

  double log_count(int j) const { return logs_[static_cast<std::size_t>(j) - 1]; }

  bool any_zero() const {
    for (double l : logs_) {
      if (l == -kInf) return true;
    }
    return false;
  }

  // ln |M_S| = sum_{j in S} ln M_j over codebook variables; |M_empty| = 1.
  double log_size(VarSet S) const {
    if (!S.subset_of(VarSet::range(1, k()))) {
      throw ValidationError("codebook sizes: subset outside codebook variables");
    }
    double acc = 0.0;
    for (int j : S.vars()) acc += log_count(j);
    return acc;
  }

  double log_total() const { return log_size(VarSet::range(1, k())); }

private:
  bool exact_ = false;
  std::vector<std::uint64_t> counts_;
  std::vector<double> logs_;
};

//! Exponential constants indexed by nonempty codebook subsets: alpha_S and
//! beta_S bound the log ratio of the conditional tuple probability to the
//! product of per-codebook conditionals from below over the event, gamma
//! bounds the full-tuple log ratio from above.
struct SubsetConstants {
  int k = 0;
  std::vector<double> alpha;  // [cmask], bit j-1 <-> variable j; entry 0 unused
  std::vector<double> beta;
  double gamma = 0.0;

  static std::uint32_t cmask(VarSet S) { return S.mask() >> 1; }
  static VarSet from_cmask(std::uint32_t c) { return VarSet(c << 1); }

  double alpha_at(VarSet S) const { return alpha[cmask(S)]; }
  double beta_at(VarSet S) const { return beta[cmask(S)]; }

  VarSet codebook_vars() const { return VarSet::range(1, k); }
};

// Sum of exponents where +inf dominates -inf; keeps upper-bound terms
// conservative instead of NaN in degenerate corners.
inline double add_exponents(std::initializer_list<double> xs) {
  bool pos = false, neg = false;
  double acc = 0.0;
  for (double x : xs) {
    if (x == kInf) {
      pos = true;
    } else if (x == -kInf) {
      neg = true;
    } else {
      acc += x;
    }
  }
  if (pos) return kInf;
  if (neg) return -kInf;
  return acc;
}

// P{F} under p, summed in flat-index order.
inline double event_probability(const JointPmf& p, const EventSet& F) {
  if (F.sizes != p.alphabet_sizes()) {
    throw ValidationError("event probability: event lives on a different space");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < F.member.size(); ++i) {
    if (F.member[i]) acc += p.at_flat(i);
  }
  return acc;
}

inline double complement_probability(const JointPmf& p, const EventSet& F) {
  if (F.sizes != p.alphabet_sizes()) {
    throw ValidationError("event probability: event lives on a different space");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < F.member.size(); ++i) {
    if (!F.member[i]) acc += p.at_flat(i);
  }
  return acc;
}

// The tightest admissible constants for event F under joint p: alpha_S and
// beta_S as minima and gamma as a maximum of the respective log ratios over
// the members of F. Errors when F is empty or a member tuple makes a
// conditioning probability zero.
inline SubsetConstants tightest_constants(const JointPmf& p, const EventSet& F) {
  const int m = p.num_vars();
  const int k = p.k();
  if (F.sizes != p.alphabet_sizes()) {
    throw ValidationError("constants: event lives on a different space");
  }
  if (F.count == 0) throw ValidationError("constants: empty event");

  const SubsetTable table(p);
  const int side = m - 1;
  const std::uint32_t side_bit = 1u << side;
  const std::size_t n_cmasks = std::size_t{1} << k;

  SubsetConstants c;
  c.k = k;
  c.alpha.assign(n_cmasks, kInf);
  c.beta.assign(n_cmasks, kInf);
  c.gamma = -kInf;

  std::vector<int> u(static_cast<std::size_t>(m));
  SequenceTuple t = SequenceTuple::zeros(p.all_vars(), 1);
  std::vector<double> cond_sum(n_cmasks, 0.0);  // sum_{j in S} ln p(u_j | u_0)

  for (std::size_t flat = 0; flat < F.member.size(); ++flat) {
    if (!F.member[flat]) continue;
    p.decode(flat, u);
    for (int v = 0; v < m; ++v) t.seqs[static_cast<std::size_t>(v)][0] = u[static_cast<std::size_t>(v)];

    const double l0 = table.log_prob(VarSet::of({0}), t, 0);
    const double l0side = table.log_prob(VarSet::of({0, side}), t, 0);
    if (l0 == -kInf || l0side == -kInf) {
      throw ValidationError("constants: member tuple with zero-mass conditioning pair");
    }
    for (int j = 1; j <= k; ++j) {
      const double l0j = table.log_prob(VarSet::of({0, j}), t, 0);
      if (l0j == -kInf) {
        throw ValidationError("constants: member tuple with zero single-codebook conditional");
      }
      cond_sum[std::uint32_t{1} << (j - 1)] = l0j - l0;
    }
    for (std::uint32_t cm = 1; cm < n_cmasks; ++cm) {
      if (std::popcount(cm) >= 2) {
        const std::uint32_t low = cm & (~cm + 1);
        cond_sum[cm] = cond_sum[cm ^ low] + cond_sum[low];
      }
    }

    const double l_full = table.log_prob(p.all_vars(), t, 0);
    for (std::uint32_t cm = 1; cm < n_cmasks; ++cm) {
      const VarSet S = SubsetConstants::from_cmask(cm);
      const std::uint32_t comp = static_cast<std::uint32_t>(n_cmasks - 1) ^ cm;

      const double l_num = table.log_prob(VarSet(S.mask() | 1u | side_bit), t, 0);
      const double a_cand = l_num - l0side - cond_sum[cm];
      if (a_cand < c.alpha[cm]) c.alpha[cm] = a_cand;

      const double l_rest = table.log_prob(VarSet((comp << 1) | 1u | side_bit), t, 0);
      if (l_rest == -kInf) {
        throw ValidationError("constants: member tuple with zero-mass conditioning marginal");
      }
      const double b_cand = l_full - l_rest - cond_sum[cm];
      if (b_cand < c.beta[cm]) c.beta[cm] = b_cand;
    }
    const double g_cand = l_full - l0side - cond_sum[n_cmasks - 1];
    if (g_cand > c.gamma) c.gamma = g_cand;
  }
  return c;
}

struct LowerBound {
  double raw = 0.0;      // 1 - min_S |M_S| e^{-alpha_S}; may be negative
  double clamped = 0.0;  // max(raw, 0)
  VarSet binding;        // subset attaining the minimum
  std::vector<std::pair<VarSet, double>> terms;  // |M_S| e^{-alpha_S} per subset
};

// One-shot lower bound on the probability that no codeword tuple lands in the
// event: 1 minus the smallest expected-hit-count term over nonempty subsets.
inline LowerBound lower_bound_detail(const CodebookSizes& M, const SubsetConstants& c) {
  if (M.k() != c.k) throw ValidationError("lower bound: codebook count mismatch");
  LowerBound out;
  double best = kInf;
  for (std::uint32_t cm = 1; cm < (std::uint32_t{1} << c.k); ++cm) {
    const VarSet S = SubsetConstants::from_cmask(cm);
    const double lsz = M.log_size(S);
    // |M_S| = 0 forces the term to zero no matter the constant.
    const double term = lsz == -kInf ? 0.0 : std::exp(add_exponents({lsz, -c.alpha[cm]}));
    out.terms.emplace_back(S, term);
    if (term < best) {
      best = term;
      out.binding = S;
    }
  }
  out.raw = 1.0 - best;
  out.clamped = std::max(out.raw, 0.0);
  return out;
}

inline double lower_bound(const CodebookSizes& M, const SubsetConstants& c) {
  return lower_bound_detail(M, c).clamped;
}

struct UpperBound {
  double raw = 0.0;        // split_term + conditional; may exceed 1
  double clamped = 0.0;    // min(raw, 1)
  double split_term = 0.0; // P{F^c} / eps
  double conditional = 0.0;
  double mean_term = 0.0;  // e^{gamma - ln|M|} / (1 - eps)
  double pair_sum = 0.0;   // sum over proper nonempty subsets
  std::vector<std::pair<VarSet, double>> pair_terms;
};

namespace detail {

// Shared first- and second-moment terms of the two upper bounds:
// x = e^{gamma - ln|M|}/(1-eps),
// y = sum_S e^{2 gamma - alpha_S - 2 beta_{S^c} - ln|M_S|}/(1-eps)^2.
inline UpperBound moment_terms(const CodebookSizes& M, const SubsetConstants& c, double eps) {
  if (M.k() != c.k) throw ValidationError("upper bound: codebook count mismatch");
  if (!(eps > 0.0 && eps < 1.0)) {
    throw ValidationError("upper bound: eps must lie strictly inside (0, 1)");
  }
  UpperBound out;
  const double log1me = std::log1p(-eps);
  out.mean_term = std::exp(add_exponents({c.gamma, -M.log_total(), -log1me}));
  out.pair_sum = 0.0;
  const std::uint32_t full = (std::uint32_t{1} << c.k) - 1u;
  for (std::uint32_t cm = 1; cm < full; ++cm) {
    const VarSet S = SubsetConstants::from_cmask(cm);
    const std::uint32_t comp = full ^ cm;
    const double term = std::exp(add_exponents({2.0 * c.gamma, -c.alpha[cm], -2.0 * c.beta[comp],
                                                -M.log_size(S), -2.0 * log1me}));
    out.pair_terms.emplace_back(S, term);
    out.pair_sum += term;
  }
  return out;
}

}  // namespace detail

// Chebyshev-style upper bound: P{F^c}/eps plus the conditional variance terms.
inline UpperBound upper_bound_chebyshev_detail(const CodebookSizes& M, const SubsetConstants& c,
                                               double eps, double p_f_complement) {
  if (!(p_f_complement >= 0.0)) throw ValidationError("upper bound: negative P{F^c}");
  UpperBound out = detail::moment_terms(M, c, eps);
  out.split_term = p_f_complement / eps;
  out.conditional = out.mean_term + out.pair_sum;
  out.raw = out.split_term + out.conditional;
  out.clamped = std::min(out.raw, 1.0);
  return out;
}

inline double upper_bound_chebyshev(const CodebookSizes& M, const SubsetConstants& c, double eps,
                                    double p_f_complement) {
  return upper_bound_chebyshev_detail(M, c, eps, p_f_complement).clamped;
}

// Cauchy-Schwarz-style upper bound: same moment terms t = x + y enter as
// t/(1+t), which never exceeds the Chebyshev conditional.
inline UpperBound upper_bound_cauchy_schwarz_detail(const CodebookSizes& M,
                                                    const SubsetConstants& c, double eps,
                                                    double p_f_complement) {
  if (!(p_f_complement >= 0.0)) throw ValidationError("upper bound: negative P{F^c}");
  UpperBound out = detail::moment_terms(M, c, eps);
  out.split_term = p_f_complement / eps;
  const double t = out.mean_term + out.pair_sum;
  out.conditional = std::isinf(t) ? 1.0 : t / (1.0 + t);
  out.raw = out.split_term + out.conditional;
  out.clamped = std::min(out.raw, 1.0);
  return out;
}

inline double upper_bound_cauchy_schwarz(const CodebookSizes& M, const SubsetConstants& c,
                                         double eps, double p_f_complement) {
  return upper_bound_cauchy_schwarz_detail(M, c, eps, p_f_complement).clamped;
}

struct GoodSet {
  EventSet pairs;           // over the (variable 0, side variable) space
  double p_not_good = 0.0;  // mass of pairs outside the set
};

// Pairs (u_0, u_side) whose conditional event mass is at least 1 - eps, with
// the comparison multiplied through by the pair mass so zero-mass pairs count
// as good. p_not_good obeys p_not_good <= P{F^c} / eps.
inline GoodSet good_set(const JointPmf& p, const EventSet& F, double eps) {
  if (F.sizes != p.alphabet_sizes()) {
    throw ValidationError("good set: event lives on a different space");
  }
  const int m = p.num_vars();
  if (m < 3) throw ValidationError("good set: need at least 3 variables");
  const int side = m - 1;
  const int s0 = p.size(0);
  const int ss = p.size(side);
  const JointPmf pair_marg = p.marginal(VarSet::of({0, side}));

  std::vector<double> in_mass(static_cast<std::size_t>(s0) * static_cast<std::size_t>(ss), 0.0);
  std::vector<int> u(static_cast<std::size_t>(m));
  for (std::size_t flat = 0; flat < F.member.size(); ++flat) {
    if (!F.member[flat]) continue;
    p.decode(flat, u);
    in_mass[static_cast<std::size_t>(u[0]) * static_cast<std::size_t>(ss) +
            static_cast<std::size_t>(u[static_cast<std::size_t>(side)])] += p.at_flat(flat);
  }

  GoodSet g;
  g.pairs = EventSet::none({s0, ss});
  for (std::size_t pf = 0; pf < in_mass.size(); ++pf) {
    const double w = pair_marg.at_flat(pf);
    if (in_mass[pf] >= (1.0 - eps) * w) {
      g.pairs.add_flat(pf);
    } else {
      g.p_not_good += w;
    }
  }
  return g;
}

struct BoundsRow {
  double epsilon = 0.0;
  UpperBound chebyshev;
  UpperBound cauchy_schwarz;
};

struct BoundsReport {
  SubsetConstants constants;
  double p_f_complement = 0.0;
  LowerBound lower;
  std::vector<BoundsRow> rows;
  int best_chebyshev_row = -1;  // argmin of the clamped bound over the grid
  int best_cauchy_schwarz_row = -1;
};

// Constants, lower bound, and both upper bounds across an epsilon grid.
inline BoundsReport bounds_report(const JointPmf& p, const EventSet& F, const CodebookSizes& M,
                                  std::span<const double> eps_grid) {
  if (eps_grid.empty()) throw ValidationError("bounds report: empty epsilon grid");
  BoundsReport r;
  r.constants = tightest_constants(p, F);
  r.p_f_complement = complement_probability(p, F);
  r.lower = lower_bound_detail(M, r.constants);
  for (double eps : eps_grid) {
    BoundsRow row;
    row.epsilon = eps;
    row.chebyshev = upper_bound_chebyshev_detail(M, r.constants, eps, r.p_f_complement);
    row.cauchy_schwarz = upper_bound_cauchy_schwarz_detail(M, r.constants, eps, r.p_f_complement);
    r.rows.push_back(std::move(row));
  }
  for (std::size_t i = 0; i < r.rows.size(); ++i) {
    if (r.best_chebyshev_row < 0 ||
        r.rows[i].chebyshev.clamped <
            r.rows[static_cast<std::size_t>(r.best_chebyshev_row)].chebyshev.clamped) {
      r.best_chebyshev_row = static_cast<int>(i);
    }
    if (r.best_cauchy_schwarz_row < 0 ||
        r.rows[i].cauchy_schwarz.clamped <
            r.rows[static_cast<std::size_t>(r.best_cauchy_schwarz_row)].cauchy_schwarz.clamped) {
      r.best_cauchy_schwarz_row = static_cast<int>(i);
    }
  }
  return r;
}

}  // namespace covlab
