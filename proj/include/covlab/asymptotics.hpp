#pragma once

#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "covlab/bounds.hpp"
#include "covlab/joint_pmf.hpp"

namespace covlab {

// Bracket cap for the exponent optimizer.
inline constexpr double kChernoffTMax = 1e6;

//! Per-codebook rates R_1..R_k in nats.
struct RateTuple {
  std::vector<double> rates;  // rates[j-1] for variable j

  static RateTuple of(std::vector<double> r) {
    if (r.empty()) throw ValidationError("rate tuple: need at least one rate");
    for (double x : r) {
      if (!std::isfinite(x) || x < 0.0) {
        throw ValidationError("rate tuple: rates must be finite and nonnegative");
      }
    }
    return RateTuple{std::move(r)};
  }

  int k() const { return static_cast<int>(rates.size()); }

  double at(int j) const { return rates[static_cast<std::size_t>(j) - 1]; }

  // sum_{j in S} R_j over codebook variables.
  double sum(VarSet S) const {
    if (!S.subset_of(VarSet::range(1, k()))) {
      throw ValidationError("rate tuple: subset outside codebook variables");
    }
    double acc = 0.0;
    for (int j : S.vars()) acc += at(j);
    return acc;
  }
};

// Entropy-based constants at blocklength n and typicality slack delta:
//   alpha_S = n (sum_{j in S} H(U_j|U_0) - H(U_S|U_0,U_side) - 2(|S|+1) delta)
//   beta_S  = n (sum_{j in S} H(U_j|U_0) - H(U_S|U_0,U_{S^c},U_side) - 2(|S|+1) delta)
//   gamma   = n (sum_j H(U_j|U_0) - H(U_{1..k}|U_0,U_side) + 2(k+1) delta)
// These are admissible for the weakly typical event at the same n and delta.
inline SubsetConstants asymptotic_constants(const JointPmf& p, int n, double delta) {
  if (n < 1) throw ValidationError("asymptotic constants: n must be >= 1");
  if (!(delta >= 0.0)) throw ValidationError("asymptotic constants: negative delta");
  const int k = p.k();
  const int side = p.num_vars() - 1;
  const VarSet common = VarSet::of({0});
  const VarSet pair = VarSet::of({0, side});

  std::vector<double> h_single(static_cast<std::size_t>(k) + 1, 0.0);
  for (int j = 1; j <= k; ++j) {
    h_single[static_cast<std::size_t>(j)] = p.cond_entropy(VarSet::of({j}), common);
  }

  SubsetConstants c;
  c.k = k;
  const std::uint32_t full = (std::uint32_t{1} << k) - 1u;
  c.alpha.assign(std::size_t{1} << k, 0.0);
  c.beta.assign(std::size_t{1} << k, 0.0);
  const double nd = static_cast<double>(n);
  for (std::uint32_t cm = 1; cm <= full; ++cm) {
    const VarSet S = SubsetConstants::from_cmask(cm);
    const VarSet Sc = SubsetConstants::from_cmask(full ^ cm);
    double sum_h = 0.0;
    for (int j : S.vars()) sum_h += h_single[static_cast<std::size_t>(j)];
    const double slack = 2.0 * (S.count() + 1) * delta;
    c.alpha[cm] = nd * (sum_h - p.cond_entropy(S, pair) - slack);
    c.beta[cm] = nd * (sum_h - p.cond_entropy(S, pair.unite(Sc)) - slack);
  }
  {
    const VarSet all_books = VarSet::range(1, k);
    double sum_h = 0.0;
    for (int j = 1; j <= k; ++j) sum_h += h_single[static_cast<std::size_t>(j)];
    c.gamma = nd * (sum_h - p.cond_entropy(all_books, pair) + 2.0 * (k + 1) * delta);
  }
  return c;
}

struct RegionRow {
  VarSet subset;
  double rate_sum = 0.0;
  double threshold = 0.0;
  double slack = 0.0;  // rate_sum - threshold
  bool ok = false;
};

struct RegionVerdict {
  bool satisfied = false;
  std::vector<RegionRow> rows;  // every nonempty codebook subset
  VarSet binding;               // subset with the smallest slack
  double min_slack = 0.0;
};

namespace detail {

inline double mutual_base(const JointPmf& p, VarSet S) {
  const VarSet common = VarSet::of({0});
  const VarSet pair = VarSet::of({0, p.num_vars() - 1});
  double sum_h = 0.0;
  for (int j : S.vars()) sum_h += p.cond_entropy(VarSet::of({j}), common);
  return sum_h - p.cond_entropy(S, pair);
}

template <class Threshold>
RegionVerdict region_check(const JointPmf& p, const RateTuple& R, Threshold&& thr, bool strict) {
  const int k = p.k();
  if (R.k() != k) throw ValidationError("rate region: rate count mismatch");
  RegionVerdict v;
  v.satisfied = true;
  v.min_slack = kInf;
  for (VarSet S : nonempty_subsets(VarSet::range(1, k))) {
    RegionRow row;
    row.subset = S;
    row.rate_sum = R.sum(S);
    row.threshold = thr(S);
    row.slack = row.rate_sum - row.threshold;
    row.ok = strict ? row.slack > 0.0 : row.slack >= 0.0;
    if (!row.ok) v.satisfied = false;
    if (row.slack < v.min_slack) {
      v.min_slack = row.slack;
      v.binding = S;
    }
    v.rows.push_back(row);
  }
  return v;
}

}  // namespace detail

// Sufficient covering condition: for every nonempty proper subset S the rate
// sum must strictly exceed the mutual-information base plus (8k - 2|S| + 10)
// delta, and for S = {1..k} plus the weaker 2(k+1) delta.
inline RegionVerdict direct_check(const JointPmf& p, const RateTuple& R, double delta) {
  if (!(delta >= 0.0)) throw ValidationError("rate region: negative delta");
  const int k = p.k();
  return detail::region_check(
      p, R,
      [&](VarSet S) {
        const double extra = S.count() == k ? 2.0 * (k + 1) * delta
                                            : (8.0 * k - 2.0 * S.count() + 10.0) * delta;
        return detail::mutual_base(p, S) + extra;
      },
      /*strict=*/true);
}

// Necessary covering condition: rate sums at least the mutual-information base
// minus 2(|S|+1) delta on every nonempty subset.
inline RegionVerdict converse_check(const JointPmf& p, const RateTuple& R, double delta) {
  if (!(delta >= 0.0)) throw ValidationError("rate region: negative delta");
  return detail::region_check(
      p, R,
      [&](VarSet S) { return detail::mutual_base(p, S) - 2.0 * (S.count() + 1) * delta; },
      /*strict=*/false);
}

struct BoundaryRow {
  std::vector<double> rates;
  bool direct = false;
  bool converse = false;
};

// Both checks across the cartesian product of per-codebook rate axes, first
// axis outermost (lexicographic order).
inline std::vector<BoundaryRow> boundary_scan(const JointPmf& p, double delta,
                                              const std::vector<std::vector<double>>& axes) {
  const int k = p.k();
  if (static_cast<int>(axes.size()) != k) {
    throw ValidationError("boundary scan: need one rate axis per codebook");
  }
  for (const auto& a : axes) {
    if (a.empty()) throw ValidationError("boundary scan: empty rate axis");
  }
  std::vector<BoundaryRow> out;
  std::vector<std::size_t> idx(axes.size(), 0);
  std::vector<double> rates(axes.size(), 0.0);
  while (true) {
    for (std::size_t j = 0; j < axes.size(); ++j) rates[j] = axes[j][idx[j]];
    const RateTuple R = RateTuple::of(rates);
    BoundaryRow row;
    row.rates = rates;
    row.direct = direct_check(p, R, delta).satisfied;
    row.converse = converse_check(p, R, delta).satisfied;
    out.push_back(std::move(row));
    std::size_t j = axes.size();
    while (j > 0) {
      --j;
      if (++idx[j] < axes[j].size()) break;
      idx[j] = 0;
      if (j == 0) return out;
    }
  }
}

// ln E[p(U_T)^{-t}] = ln sum_i p_i^{1-t} over the positive-mass entries of the
// marginal on T.
inline double log_mgf(const JointPmf& p, VarSet T, double t) {
  if (T.empty()) throw ValidationError("log_mgf: empty variable set");
  const JointPmf marg = p.marginal(T);
  std::vector<double> terms;
  terms.reserve(marg.table_size());
  for (double w : marg.table()) {
    if (w > 0.0) terms.push_back((1.0 - t) * std::log(w));
  }
  return log_sum_exp(terms);
}

enum class Tail { upper, lower };

struct Exponent {
  double value = 0.0;      // best objective value found
  bool unbounded = false;  // the tail event is impossible; treated as +inf
  double t_arg = 0.0;

  double effective() const { return unbounded ? kInf : value; }
};

// Large-deviation exponent of the empirical-rate tail for the marginal on T:
//   upper: sup_{t>0} t(H+eps) - ln sum p^{1-t}   for P{rate >= H + eps}
//   lower: sup_{t>0} t(eps-H) - ln sum p^{1+t}   for P{rate <= H - eps}
// When the tail lies strictly outside the support range the event is
// impossible and the exponent is flagged unbounded.
inline Exponent chernoff_exponent(const JointPmf& p, VarSet T, double eps, Tail tail) {
  if (!(eps > 0.0)) throw ValidationError("exponent: eps must be positive");
  if (T.empty()) throw ValidationError("exponent: empty variable set");
  const JointPmf marg = p.marginal(T);

  std::vector<double> w, x;  // positive masses and their log-loss values
  for (double pi : marg.table()) {
    if (pi > 0.0) {
      w.push_back(pi);
      x.push_back(-std::log(pi));
    }
  }
  double h = 0.0, x_min = kInf, x_max = -kInf;
  for (std::size_t i = 0; i < w.size(); ++i) {
    h += w[i] * x[i];
    x_min = std::min(x_min, x[i]);
    x_max = std::max(x_max, x[i]);
  }

  const double target = tail == Tail::upper ? h + eps : h - eps;
  const bool impossible = tail == Tail::upper ? target > x_max : target < x_min;

  const auto objective = [&](double t) {
    const double lin = tail == Tail::upper ? t * (h + eps) : t * (eps - h);
    const double mt = tail == Tail::upper ? t : -t;
    std::vector<double> terms(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) terms[i] = (1.0 - mt) * std::log(w[i]);
    return lin - log_sum_exp(terms);
  };

  if (impossible) {
    Exponent e;
    e.unbounded = true;
    e.t_arg = kChernoffTMax;
    e.value = objective(kChernoffTMax);
    return e;
  }

  // Concavity: once the objective stops growing under doubling, the peak sits
  // inside the bracket.
  double hi = 1.0;
  double prev = objective(hi * 0.5);
  while (hi < kChernoffTMax) {
    const double cur = objective(hi);
    if (cur <= prev) break;
    prev = cur;
    hi *= 2.0;
  }
  hi = std::min(hi, kChernoffTMax);
  const GoldenResult g =
      golden_section_max(objective, 0.0, hi, std::max(1e-12, hi * 1e-11));
  Exponent e;
  e.value = std::max(g.value, 0.0);
  e.t_arg = g.arg;
  return e;
}

struct ExponentEntry {
  VarSet subset;
  Exponent upper;
  Exponent lower;
};

struct ExponentReport {
  VarSet scope;
  double eps = 0.0;
  double prefactor = 0.0;  // 2 (2^{|scope|} - 1)
  std::vector<ExponentEntry> entries;
  Exponent overall;  // smallest exponent across subsets and tails
  VarSet binding;
  Tail binding_tail = Tail::upper;
};

// Exponents for every nonempty subset of `scope` and both tails, plus the
// union-bound prefactor.
inline ExponentReport exponent_report(const JointPmf& p, double eps, VarSet scope) {
  if (scope.empty()) throw ValidationError("exponent report: empty scope");
  if (!scope.subset_of(p.all_vars())) {
    throw ValidationError("exponent report: scope outside this distribution");
  }
  ExponentReport r;
  r.scope = scope;
  r.eps = eps;
  r.prefactor = 2.0 * (std::pow(2.0, scope.count()) - 1.0);
  bool assigned = false;
  double best = kInf;
  for (VarSet T : nonempty_subsets(scope)) {
    ExponentEntry e{T, chernoff_exponent(p, T, eps, Tail::upper),
                    chernoff_exponent(p, T, eps, Tail::lower)};
    if (!assigned || e.upper.effective() < best) {
      assigned = true;
      best = e.upper.effective();
      r.overall = e.upper;
      r.binding = T;
      r.binding_tail = Tail::upper;
    }
    if (e.lower.effective() < best) {
      best = e.lower.effective();
      r.overall = e.lower;
      r.binding = T;
      r.binding_tail = Tail::lower;
    }
    r.entries.push_back(std::move(e));
  }
  return r;
}

inline ExponentReport exponent_report(const JointPmf& p, double eps) {
  return exponent_report(p, eps, p.all_vars());
}

// Union bound on the probability that a length-n i.i.d. tuple is atypical at
// slack eps: prefactor * e^{-n I}, where I is the smallest subset exponent.
inline double atypicality_bound(const ExponentReport& r, int n) {
  if (n < 0) throw ValidationError("atypicality bound: negative n");
  if (n == 0) return r.prefactor;
  if (r.overall.unbounded) return 0.0;
  return r.prefactor * std::exp(-static_cast<double>(n) * r.overall.value);
}

inline double atypicality_bound(const JointPmf& p, double eps, int n, VarSet scope) {
  return atypicality_bound(exponent_report(p, eps, scope), n);
}

inline double atypicality_bound(const JointPmf& p, double eps, int n) {
  return atypicality_bound(exponent_report(p, eps), n);
}

struct EpsilonSchedule {
  double value = 0.0;
  bool clamped = false;  // true when the exact schedule underflowed
  double exponent = 0.0; // the I(delta) used
};

// eps_n = min(1/2, e^{-n I(delta) / 2}): decays to zero while staying
// asymptotically negligible against the atypicality decay e^{-n I}.
inline EpsilonSchedule epsilon_schedule(const JointPmf& p, double delta, int n, VarSet scope) {
  if (n < 0) throw ValidationError("epsilon schedule: negative n");
  const ExponentReport r = exponent_report(p, delta, scope);
  const double i_eff = r.overall.effective();
  if (!(i_eff > 0.0)) {
    throw ValidationError("epsilon schedule: zero exponent, schedule undefined");
  }
  EpsilonSchedule s;
  s.exponent = i_eff;
  if (std::isinf(i_eff)) {
    if (n == 0) {
      s.value = 0.5;
    } else {
      s.value = std::numeric_limits<double>::min();
      s.clamped = true;
    }
    return s;
  }
  const double v = std::exp(-0.5 * static_cast<double>(n) * i_eff);
  if (v <= 0.0 || v < std::numeric_limits<double>::min()) {
    s.value = std::numeric_limits<double>::min();
    s.clamped = true;
  } else {
    s.value = std::min(0.5, v);
  }
  return s;
}

inline EpsilonSchedule epsilon_schedule(const JointPmf& p, double delta, int n) {
  return epsilon_schedule(p, delta, n, p.all_vars());
}

}  // namespace covlab
