#pragma once

#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "covlab/bounds.hpp"
#include "covlab/event_set.hpp"
#include "covlab/generation.hpp"
#include "covlab/rng.hpp"
#include "covlab/typicality.hpp"

namespace covlab {

struct SeedTrace {
  std::uint64_t master = 0;
  std::uint64_t instance = 0;
  std::int64_t trial = -1;  // -1 outside trial loops

  bool operator==(const SeedTrace&) const = default;
};

//! One realized experiment: common sequence, side sequence, and k codebooks of
//! independently drawn codewords.
struct Instance {
  int n = 0;
  std::vector<int> u0;
  std::vector<int> u_side;
  std::vector<std::vector<std::vector<int>>> codebooks;  // [j-1][slot][position]
  SeedTrace seed_trace;

  int k() const { return static_cast<int>(codebooks.size()); }

  bool operator==(const Instance&) const = default;
};

namespace detail {

inline void draw_source_pair(const GenerationLaw& law, int n, std::uint64_t seed,
                             std::vector<int>& u0, std::vector<int>& side) {
  const int m = law.num_vars();
  u0.resize(static_cast<std::size_t>(n));
  side.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double r = rng::uniform01(
        rng::derive(seed, {rng::word(rng::Role::source), static_cast<std::uint64_t>(i)}));
    u0[static_cast<std::size_t>(i)] = rng::sample_discrete(law.p0(), r);
  }
  for (int i = 0; i < n; ++i) {
    const double r = rng::uniform01(
        rng::derive(seed, {rng::word(rng::Role::side), static_cast<std::uint64_t>(i)}));
    side[static_cast<std::size_t>(i)] =
        rng::sample_discrete(law.cond_row(m - 1, u0[static_cast<std::size_t>(i)]), r);
  }
}

}  // namespace detail

// Draws an instance under the generation law: every symbol comes from a keyed
// derivation of (seed, role, indices), so the draw is schedule-independent.
inline Instance generate_instance(const GenerationLaw& law, int n, const CodebookSizes& M,
                                  std::uint64_t seed) {
  if (n < 1) throw ValidationError("instance: n must be >= 1");
  if (M.k() != law.k()) throw ValidationError("instance: codebook count mismatch");
  if (!M.exact()) throw ValidationError("instance: codebook sizes not materializable");
  double cells = 0.0;
  for (int j = 1; j <= M.k(); ++j) {
    cells += static_cast<double>(M.count(j)) * static_cast<double>(n);
  }
  if (cells > 1e9) throw GuardExceeded("instance: codebooks too large to materialize");

  Instance inst;
  inst.n = n;
  inst.seed_trace = {seed, seed, -1};
  detail::draw_source_pair(law, n, seed, inst.u0, inst.u_side);
  const int k = law.k();
  inst.codebooks.resize(static_cast<std::size_t>(k));
  for (int j = 1; j <= k; ++j) {
    auto& book = inst.codebooks[static_cast<std::size_t>(j) - 1];
    book.resize(M.count(j), std::vector<int>(static_cast<std::size_t>(n), 0));
    for (std::uint64_t slot = 0; slot < M.count(j); ++slot) {
      for (int i = 0; i < n; ++i) {
        const double r = rng::uniform01(rng::derive(
            seed, {rng::word(rng::Role::codeword), static_cast<std::uint64_t>(j), slot,
                   static_cast<std::uint64_t>(i)}));
        book[slot][static_cast<std::size_t>(i)] =
            rng::sample_discrete(law.cond_row(j, inst.u0[static_cast<std::size_t>(i)]), r);
      }
    }
  }
  return inst;
}

// Negative control for the codebook-independence audit: draws like
// generate_instance, then overwrites each book's second codeword with its
// first, so distinct slots are no longer independent.
inline Instance generate_instance_aliased(const GenerationLaw& law, int n,
                                          const CodebookSizes& M, std::uint64_t seed) {
  Instance inst = generate_instance(law, n, M, seed);
  for (auto& book : inst.codebooks) {
    if (book.size() >= 2) book[1] = book[0];
  }
  return inst;
}

struct SearchResult {
  bool found = false;
  std::vector<int> witness;  // 1-based codeword indices, lexicographically first
};

// Finds the lexicographically first codeword selection whose full tuple is
// weakly typical at slack delta. Subsets without codebook variables are
// checked once, single-codebook subsets per codeword, and cross-codebook
// subsets per surviving selection with early exit.
inline SearchResult search_typical_tuple(const Instance& inst, const SubsetTable& table,
                                         double delta) {
  const int m = table.num_vars();
  const int k = m - 2;
  if (m < 3) throw ValidationError("search: need at least 3 variables");
  if (inst.k() != k) throw ValidationError("search: codebook count mismatch");
  if (inst.n < 1) throw ValidationError("search: empty instance");
  if (!(delta >= 0.0)) throw ValidationError("search: negative delta");
  const int n = inst.n;
  const JointPmf& p = table.joint();

  const auto symbol = [&](int v, int i, const std::vector<std::uint64_t>& sel) -> int {
    if (v == 0) return inst.u0[static_cast<std::size_t>(i)];
    if (v == m - 1) return inst.u_side[static_cast<std::size_t>(i)];
    return inst.codebooks[static_cast<std::size_t>(v) - 1][sel[static_cast<std::size_t>(v) - 1]]
                         [static_cast<std::size_t>(i)];
  };

  const auto rate_ok = [&](VarSet mask, const std::vector<std::uint64_t>& sel) -> bool {
    const auto vars = mask.vars();
    const auto logs = table.log_table(mask);
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
      std::size_t idx = 0;
      for (int v : vars) {
        idx = idx * static_cast<std::size_t>(p.size(v)) +
              static_cast<std::size_t>(symbol(v, i, sel));
      }
      const double lp = logs[idx];
      if (lp == -kInf) return false;
      acc += lp;
    }
    const double rate = -acc / static_cast<double>(n);
    return std::abs(rate - table.entropy(mask)) <= delta;
  };

  std::vector<VarSet> fixed_masks, cross_masks;
  std::vector<std::vector<VarSet>> single_masks(static_cast<std::size_t>(k) + 1);
  const VarSet books = VarSet::range(1, k);
  for (VarSet mask : nonempty_subsets(VarSet::full(m))) {
    const VarSet cw = mask.intersect(books);
    if (cw.empty()) {
      fixed_masks.push_back(mask);
    } else if (cw.count() == 1) {
      single_masks[static_cast<std::size_t>(cw.lowest())].push_back(mask);
    } else {
      cross_masks.push_back(mask);
    }
  }

  std::vector<std::uint64_t> sel(static_cast<std::size_t>(k), 0);
  for (VarSet mask : fixed_masks) {
    if (!rate_ok(mask, sel)) return {};
  }

  // Codewords that individually pass every subset involving only their book.
  std::vector<std::vector<std::uint64_t>> good(static_cast<std::size_t>(k));
  for (int j = 1; j <= k; ++j) {
    const auto& book = inst.codebooks[static_cast<std::size_t>(j) - 1];
    for (std::uint64_t slot = 0; slot < book.size(); ++slot) {
      sel[static_cast<std::size_t>(j) - 1] = slot;
      bool ok = true;
      for (VarSet mask : single_masks[static_cast<std::size_t>(j)]) {
        if (!rate_ok(mask, sel)) {
          ok = false;
          break;
        }
      }
      if (ok) good[static_cast<std::size_t>(j) - 1].push_back(slot);
    }
    if (good[static_cast<std::size_t>(j) - 1].empty()) return {};
    sel[static_cast<std::size_t>(j) - 1] = 0;
  }

  // Selections run lexicographically over the surviving codewords.
  std::vector<std::size_t> pos(static_cast<std::size_t>(k), 0);
  while (true) {
    for (int j = 0; j < k; ++j) {
      sel[static_cast<std::size_t>(j)] =
          good[static_cast<std::size_t>(j)][pos[static_cast<std::size_t>(j)]];
    }
    bool ok = true;
    for (VarSet mask : cross_masks) {
      if (!rate_ok(mask, sel)) {
        ok = false;
        break;
      }
    }
    if (ok) {
      SearchResult r;
      r.found = true;
      for (int j = 0; j < k; ++j) {
        r.witness.push_back(static_cast<int>(sel[static_cast<std::size_t>(j)]) + 1);
      }
      return r;
    }
    int j = k;
    bool done = false;
    while (j > 0) {
      --j;
      if (++pos[static_cast<std::size_t>(j)] < good[static_cast<std::size_t>(j)].size()) break;
      pos[static_cast<std::size_t>(j)] = 0;
      if (j == 0) done = true;
    }
    if (done) return {};
  }
}

enum class TrialMethod { search, analytic };

struct TrialRecord {
  std::uint64_t trial = 0;
  std::uint64_t trial_seed = 0;
  bool success = false;
  TrialMethod method = TrialMethod::search;
  std::vector<int> witness;     // search route only
  double success_prob = -1.0;   // analytic route only

  bool operator==(const TrialRecord&) const = default;
};

struct SimGuards {
  double search_cost = 5e7;    // per-trial symbol-work ceiling for the search route
  double type_classes = 1e7;   // per-trial composition-class ceiling, analytic route
};

struct CoverEstimate {
  std::uint64_t trials = 0;
  std::uint64_t successes = 0;
  double p_hat = 0.0;
  double ci_low = 0.0;   // 95% Wilson interval
  double ci_high = 0.0;
  std::uint64_t seed = 0;
  TrialMethod method = TrialMethod::search;
  std::vector<TrialRecord> per_trial;
};

namespace detail {

// Success probability 1 - (1-q)^M from ln q and ln M, stable for huge M and
// tiny q.
inline double cover_success_prob(double log_q, double log_m) {
  if (log_q == -kInf || log_m == -kInf) return 0.0;
  const double q = std::exp(std::min(log_q, 0.0));
  // a = M * (-log1p(-q)) in log domain; q == 1 covers itself.
  if (q >= 1.0) return 1.0;
  const double log_a = log_m + std::log(-std::log1p(-q));
  if (log_a > 40.0) return 1.0;
  if (log_a < -40.0) return std::exp(log_a);
  return -std::expm1(-std::exp(log_a));
}

// Exact per-trial success probability for one codebook: enumerates codeword
// composition classes per (u_0, u_side) symbol context and accumulates the
// probability that a fresh codeword completes a weakly typical triple.
struct AnalyticTrial {
  const GenerationLaw& law;
  const SubsetTable& table;
  int n;
  double delta;
  double class_guard;

  // ln P{codeword makes the tuple typical | u0, side}; requires the
  // codeword-free subsets to already hold.
  double log_q(const std::vector<int>& u0, const std::vector<int>& side) const {
    const JointPmf& p = table.joint();
    const int s0 = p.size(0), s1 = p.size(1), s2 = p.size(2);

    std::vector<int> ctx_count(static_cast<std::size_t>(s0) * static_cast<std::size_t>(s2), 0);
    for (int i = 0; i < n; ++i) {
      ++ctx_count[static_cast<std::size_t>(u0[static_cast<std::size_t>(i)]) *
                      static_cast<std::size_t>(s2) +
                  static_cast<std::size_t>(side[static_cast<std::size_t>(i)])];
    }
    struct Ctx {
      int b, c, cnt;
    };
    std::vector<Ctx> ctxs;
    for (int b = 0; b < s0; ++b) {
      for (int c = 0; c < s2; ++c) {
        const int cnt = ctx_count[static_cast<std::size_t>(b) * static_cast<std::size_t>(s2) +
                                  static_cast<std::size_t>(c)];
        if (cnt > 0) ctxs.push_back({b, c, cnt});
      }
    }

    double classes = 1.0;
    for (const Ctx& ctx : ctxs) {
      classes *= std::exp(log_binomial_coeff(static_cast<std::uint64_t>(ctx.cnt + s1 - 1),
                                             static_cast<std::uint64_t>(s1 - 1)));
      if (classes > class_guard) {
        throw GuardExceeded("analytic trial: composition classes exceed the guard");
      }
    }

    // Subsets that involve the codeword variable, with per-(context, symbol)
    // log-probability tables.
    const std::vector<VarSet> cw_masks = {VarSet::of({1}), VarSet::of({0, 1}),
                                          VarSet::of({1, 2}), VarSet::of({0, 1, 2})};
    const std::size_t n_masks = cw_masks.size();
    std::vector<std::vector<double>> ltab(n_masks);
    for (std::size_t mi = 0; mi < n_masks; ++mi) {
      const VarSet mask = cw_masks[mi];
      const auto logs = table.log_table(mask);
      ltab[mi].assign(ctxs.size() * static_cast<std::size_t>(s1), 0.0);
      for (std::size_t ci = 0; ci < ctxs.size(); ++ci) {
        for (int a = 0; a < s1; ++a) {
          std::size_t idx = 0;
          for (int v : mask.vars()) {
            const int sym = v == 0 ? ctxs[ci].b : (v == 1 ? a : ctxs[ci].c);
            idx = idx * static_cast<std::size_t>(p.size(v)) + static_cast<std::size_t>(sym);
          }
          ltab[mi][ci * static_cast<std::size_t>(s1) + a] = logs[idx];
        }
      }
    }

    std::vector<double> passing;
    std::vector<double> sums(n_masks, 0.0);

    // Depth-first over contexts; within a context over symbol counts. State is
    // passed by value so -inf contributions need no undo.
    const std::function<void(std::size_t, double, std::vector<double>&)> rec_ctx =
        [&](std::size_t ci, double logw, std::vector<double>& s) {
          if (ci == ctxs.size()) {
            for (std::size_t mi = 0; mi < n_masks; ++mi) {
              const double rate = -s[mi] / static_cast<double>(n);
              if (!(std::abs(rate - table.entropy(cw_masks[mi])) <= delta)) return;
            }
            passing.push_back(logw);
            return;
          }
          const auto row = law.cond_row(1, ctxs[ci].b);
          const double base = log_factorial(static_cast<std::uint64_t>(ctxs[ci].cnt));
          const std::function<void(int, int, double, std::vector<double>&)> rec_sym =
              [&](int a, int rem, double lw, std::vector<double>& acc) {
                const bool last = a == s1 - 1;
                const int lo = last ? rem : 0;
                const int hi = rem;
                for (int cnt = lo; cnt <= hi; ++cnt) {
                  double lw2 = lw;
                  std::vector<double> acc2 = acc;
                  if (cnt > 0) {
                    if (row[static_cast<std::size_t>(a)] <= 0.0) continue;
                    lw2 += static_cast<double>(cnt) * std::log(row[static_cast<std::size_t>(a)]) -
                           log_factorial(static_cast<std::uint64_t>(cnt));
                    for (std::size_t mi = 0; mi < n_masks; ++mi) {
                      const double lp = ltab[mi][ci * static_cast<std::size_t>(s1) +
                                                 static_cast<std::size_t>(a)];
                      acc2[mi] =
                          lp == -kInf ? -kInf : acc2[mi] + static_cast<double>(cnt) * lp;
                    }
                  }
                  if (last) {
                    rec_ctx(ci + 1, lw2, acc2);
                  } else {
                    rec_sym(a + 1, rem - cnt, lw2, acc2);
                  }
                }
              };
          double lw0 = logw + base;
          rec_sym(0, ctxs[ci].cnt, lw0, s);
        };
    rec_ctx(0, 0.0, sums);
    return std::min(log_sum_exp(passing), 0.0);
  }
};

}  // namespace detail

// Monte Carlo estimate of the covering probability P{some codeword selection
// is weakly typical with the drawn source pair}. Small materializable
// codebooks run the explicit search; otherwise a single codebook is handled
// by an exact per-trial conditional success probability, so arbitrarily large
// rate-specified codebooks stay simulable. Results are bit-reproducible for
// fixed (seed, trials) independent of the thread count.
inline CoverEstimate estimate_cover_probability(const GenerationLaw& law, const JointPmf& p,
                                                int n, const CodebookSizes& M, double delta,
                                                std::uint64_t trials, std::uint64_t seed,
                                                int threads = 1,
                                                const SimGuards& guards = {}) {
  if (trials < 1) throw ValidationError("estimate: need at least one trial");
  if (n < 1) throw ValidationError("estimate: n must be >= 1");
  if (threads < 1) throw ValidationError("estimate: thread count must be >= 1");
  if (!(delta >= 0.0)) throw ValidationError("estimate: negative delta");
  if (p.alphabet_sizes() != law.base().alphabet_sizes()) {
    throw ValidationError("estimate: law and distribution disagree on alphabets");
  }
  const int k = p.k();
  if (M.k() != k) throw ValidationError("estimate: codebook count mismatch");

  const SubsetTable table(p);

  TrialMethod method;
  if (M.exact()) {
    double sum_m = 0.0;
    for (int j = 1; j <= k; ++j) sum_m += static_cast<double>(M.count(j));
    const double prod_m = std::exp(M.log_total());
    const double cost =
        static_cast<double>(n) *
        (sum_m + 2.0 + prod_m * static_cast<double>(std::size_t{1} << p.num_vars()));
    method = cost <= guards.search_cost ? TrialMethod::search : TrialMethod::analytic;
  } else {
    method = TrialMethod::analytic;
  }
  if (method == TrialMethod::analytic && k != 1) {
    throw GuardExceeded(
        "estimate: codebooks too large to search and the analytic route needs exactly one "
        "codebook");
  }

  std::vector<TrialRecord> records(trials);
  const auto run_range = [&](std::uint64_t lo, std::uint64_t hi) {
    std::vector<int> u0, side;
    for (std::uint64_t t = lo; t < hi; ++t) {
      const std::uint64_t inst_seed = rng::derive(seed, {rng::word(rng::Role::trial), t});
      TrialRecord rec;
      rec.trial = t;
      rec.trial_seed = inst_seed;
      rec.method = method;
      if (method == TrialMethod::search) {
        Instance inst = generate_instance(law, n, M, inst_seed);
        inst.seed_trace = {seed, inst_seed, static_cast<std::int64_t>(t)};
        SearchResult r = search_typical_tuple(inst, table, delta);
        rec.success = r.found;
        rec.witness = std::move(r.witness);
      } else {
        detail::draw_source_pair(law, n, inst_seed, u0, side);
        SequenceTuple st = SequenceTuple::zeros(VarSet::of({0, 2}), n);
        st.seq(0) = u0;
        st.seq(2) = side;
        bool fixed_ok = true;
        for (VarSet mask : {VarSet::of({0}), VarSet::of({2}), VarSet::of({0, 2})}) {
          const double rate = empirical_rate(st, table, mask);
          if (!(std::abs(rate - table.entropy(mask)) <= delta)) {
            fixed_ok = false;
            break;
          }
        }
        double s = 0.0;
        if (fixed_ok) {
          const detail::AnalyticTrial at{law, table, n, delta, guards.type_classes};
          s = detail::cover_success_prob(at.log_q(u0, side), M.log_count(1));
        }
        const double u = rng::uniform01(rng::derive(inst_seed, {rng::word(rng::Role::cover)}));
        rec.success = u < s;
        rec.success_prob = s;
      }
      records[t] = std::move(rec);
    }
  };

  const int nthreads = static_cast<int>(
      std::min<std::uint64_t>(static_cast<std::uint64_t>(threads), trials));
  if (nthreads <= 1) {
    run_range(0, trials);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(nthreads));
    const std::uint64_t chunk = trials / static_cast<std::uint64_t>(nthreads);
    const std::uint64_t rem = trials % static_cast<std::uint64_t>(nthreads);
    std::uint64_t lo = 0;
    for (int i = 0; i < nthreads; ++i) {
      const std::uint64_t hi = lo + chunk + (static_cast<std::uint64_t>(i) < rem ? 1 : 0);
      pool.emplace_back([&, i, lo, hi] {
        try {
          run_range(lo, hi);
        } catch (...) {
          errors[static_cast<std::size_t>(i)] = std::current_exception();
        }
      });
      lo = hi;
    }
    for (auto& th : pool) th.join();
    for (const auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  CoverEstimate est;
  est.trials = trials;
  est.seed = seed;
  est.method = method;
  for (const TrialRecord& r : records) {
    if (r.success) ++est.successes;
  }
  est.p_hat = static_cast<double>(est.successes) / static_cast<double>(trials);
  const WilsonInterval ci = wilson_interval(est.successes, trials);
  est.ci_low = ci.low;
  est.ci_high = ci.high;
  est.per_trial = std::move(records);
  return est;
}

// Exact P{no codeword selection lands in F} by enumerating every source pair
// and codebook realization under the generation law. F lives on the
// product-extended space of p at blocklength n.
inline double exact_oracle(const GenerationLaw& law, const JointPmf& p, int n,
                           const CodebookSizes& M, const EventSet& F,
                           std::size_t guard = kDefaultEnumerationGuard) {
  if (n < 1) throw ValidationError("oracle: n must be >= 1");
  if (!M.exact()) throw ValidationError("oracle: codebook sizes not materializable");
  if (p.alphabet_sizes() != law.base().alphabet_sizes()) {
    throw ValidationError("oracle: law and distribution disagree on alphabets");
  }
  const int m = p.num_vars();
  const int k = p.k();
  if (M.k() != k) throw ValidationError("oracle: codebook count mismatch");

  std::vector<std::size_t> ext(static_cast<std::size_t>(m));
  for (int v = 0; v < m; ++v) {
    ext[static_cast<std::size_t>(v)] = checked_pow(p.size(v), n, guard);
  }
  {
    std::vector<int> ext_int(ext.begin(), ext.end());
    if (F.sizes != ext_int) {
      throw ValidationError("oracle: event does not live on the length-" + std::to_string(n) +
                            " product space");
    }
  }
  double log_states = static_cast<double>(n) *
                      (std::log(static_cast<double>(p.size(0))) +
                       std::log(static_cast<double>(p.size(m - 1))));
  for (int j = 1; j <= k; ++j) {
    log_states += static_cast<double>(M.count(j)) * static_cast<double>(n) *
                  std::log(static_cast<double>(p.size(j)));
  }
  if (log_states > std::log(static_cast<double>(guard))) {
    throw GuardExceeded("oracle: state space exceeds the enumeration guard");
  }

  // No codewords at all means the event is never hit.
  if (M.any_zero()) return 1.0;

  // Slot layout: all codewords of book 1, then book 2, ...
  struct Slot {
    int j;
    std::size_t space;
  };
  std::vector<Slot> slots;
  std::vector<std::size_t> book_offset(static_cast<std::size_t>(k) + 1, 0);
  for (int j = 1; j <= k; ++j) {
    book_offset[static_cast<std::size_t>(j)] = slots.size();
    for (std::uint64_t s = 0; s < M.count(j); ++s) {
      slots.push_back({j, ext[static_cast<std::size_t>(j)]});
    }
  }

  std::vector<int> digits(static_cast<std::size_t>(n));
  double acc = 0.0;

  for (std::size_t c0 = 0; c0 < ext[0]; ++c0) {
    std::vector<int> u0(static_cast<std::size_t>(n));
    decode_super(c0, p.size(0), n, u0);
    double pu0 = 1.0;
    for (int i = 0; i < n; ++i) pu0 *= law.p0()[static_cast<std::size_t>(u0[static_cast<std::size_t>(i)])];
    if (pu0 <= 0.0) continue;

    // Sequence probabilities for each non-common variable given this common
    // sequence; index 0 holds the side variable's table.
    std::vector<std::vector<double>> seq_tab(static_cast<std::size_t>(k) + 1);
    for (int v = 1; v < m; ++v) {
      auto& tab = seq_tab[v == m - 1 ? 0 : static_cast<std::size_t>(v)];
      tab.resize(ext[static_cast<std::size_t>(v)]);
      for (std::size_t code = 0; code < ext[static_cast<std::size_t>(v)]; ++code) {
        decode_super(code, p.size(v), n, digits);
        double pr = 1.0;
        for (int i = 0; i < n; ++i) {
          pr *= law.cond(v, u0[static_cast<std::size_t>(i)], digits[static_cast<std::size_t>(i)]);
        }
        tab[code] = pr;
      }
    }

    for (std::size_t cs = 0; cs < ext[static_cast<std::size_t>(m) - 1]; ++cs) {
      const double pside = seq_tab[0][cs];
      if (pside <= 0.0) continue;

      std::vector<std::size_t> cw(slots.size(), 0);
      while (true) {
        double pbooks = 1.0;
        for (std::size_t s = 0; s < slots.size(); ++s) {
          pbooks *= seq_tab[static_cast<std::size_t>(slots[s].j)][cw[s]];
        }
        if (pbooks > 0.0) {
          // Does any codeword selection land in F?
          bool covered = false;
          std::vector<std::uint64_t> pick(static_cast<std::size_t>(k), 0);
          while (!covered) {
            std::size_t flat = c0;
            for (int j = 1; j <= k; ++j) {
              const std::size_t slot_idx =
                  book_offset[static_cast<std::size_t>(j)] + pick[static_cast<std::size_t>(j) - 1];
              flat = flat * ext[static_cast<std::size_t>(j)] + cw[slot_idx];
            }
            flat = flat * ext[static_cast<std::size_t>(m) - 1] + cs;
            if (F.contains(flat)) {
              covered = true;
              break;
            }
            int j = k;
            bool done = false;
            while (j > 0) {
              --j;
              if (++pick[static_cast<std::size_t>(j)] < M.count(j + 1)) break;
              pick[static_cast<std::size_t>(j)] = 0;
              if (j == 0) done = true;
            }
            if (done) break;
          }
          if (!covered) acc += pu0 * pside * pbooks;
        }
        // Advance the codebook realization odometer, last slot fastest.
        std::size_t s = slots.size();
        bool done = false;
        while (s > 0) {
          --s;
          if (++cw[s] < slots[s].space) break;
          cw[s] = 0;
          if (s == 0) done = true;
        }
        if (done) break;
      }
    }
  }
  return acc;
}

struct AuditPattern {
  VarSet overlap;            // codebook variables where both selections agree
  double max_abs_dev = 0.0;  // worst cell deviation, empirical vs expected
  double threshold = 0.0;    // allowance at that cell
  bool pass = false;
};

struct AuditReport {
  bool pass = false;
  std::uint64_t samples = 0;
  std::vector<AuditPattern> patterns;
};

using InstanceGenerator =
    std::function<Instance(const GenerationLaw&, int, const CodebookSizes&, std::uint64_t)>;

// Empirical check of codebook independence: for every overlap pattern S the
// joint frequency of (u_0, u_side, one codeword tuple, a second tuple
// differing off S) must match p(u_0) p(u_side|u_0) prod_j p(u_j|u_0)
// prod_{j not in S} p(u'_j|u_0). Cell deviations are compared against a
// 5-sigma binomial allowance.
inline AuditReport assumption1_audit(const GenerationLaw& law, std::uint64_t samples,
                                     std::uint64_t seed, const InstanceGenerator& gen) {
  if (samples < 100) throw ValidationError("audit: need at least 100 samples");
  const int k = law.k();
  const int m = law.num_vars();
  const int side = m - 1;
  const CodebookSizes M2 =
      CodebookSizes::from_counts(std::vector<std::uint64_t>(static_cast<std::size_t>(k), 2));

  struct Pattern {
    VarSet overlap;
    std::vector<int> cell_sizes;  // u0, side, u_1..u_k, then u'_j for j off the overlap
    std::vector<std::uint64_t> counts;
  };
  std::vector<Pattern> pats;
  for (VarSet S : subsets_of(VarSet::range(1, k), /*include_empty=*/true)) {
    Pattern pat;
    pat.overlap = S;
    pat.cell_sizes.push_back(law.base().size(0));
    pat.cell_sizes.push_back(law.base().size(side));
    for (int j = 1; j <= k; ++j) pat.cell_sizes.push_back(law.base().size(j));
    for (int j = 1; j <= k; ++j) {
      if (!S.contains(j)) pat.cell_sizes.push_back(law.base().size(j));
    }
    std::size_t total = 1;
    for (int s : pat.cell_sizes) total *= static_cast<std::size_t>(s);
    pat.counts.assign(total, 0);
    pats.push_back(std::move(pat));
  }

  for (std::uint64_t t = 0; t < samples; ++t) {
    const std::uint64_t s_t = rng::derive(seed, {rng::word(rng::Role::trial), t});
    const Instance inst = gen(law, 1, M2, s_t);
    for (Pattern& pat : pats) {
      std::size_t idx = 0;
      std::size_t d = 0;
      idx = idx * static_cast<std::size_t>(pat.cell_sizes[d]) +
            static_cast<std::size_t>(inst.u0[0]);
      ++d;
      idx = idx * static_cast<std::size_t>(pat.cell_sizes[d]) +
            static_cast<std::size_t>(inst.u_side[0]);
      ++d;
      for (int j = 1; j <= k; ++j, ++d) {
        idx = idx * static_cast<std::size_t>(pat.cell_sizes[d]) +
              static_cast<std::size_t>(inst.codebooks[static_cast<std::size_t>(j) - 1][0][0]);
      }
      for (int j = 1; j <= k; ++j) {
        if (pat.overlap.contains(j)) continue;
        idx = idx * static_cast<std::size_t>(pat.cell_sizes[d]) +
              static_cast<std::size_t>(inst.codebooks[static_cast<std::size_t>(j) - 1][1][0]);
        ++d;
      }
      ++pat.counts[idx];
    }
  }

  AuditReport report;
  report.pass = true;
  report.samples = samples;
  const double nn = static_cast<double>(samples);
  for (const Pattern& pat : pats) {
    AuditPattern ap;
    ap.overlap = pat.overlap;
    double worst_margin = -kInf;
    std::vector<int> cell(pat.cell_sizes.size(), 0);
    for (std::size_t flat = 0; flat < pat.counts.size(); ++flat) {
      double expected = law.p0()[static_cast<std::size_t>(cell[0])];
      if (expected > 0.0) {
        expected *= law.cond(side, cell[0], cell[1]);
        std::size_t d = 2;
        for (int j = 1; j <= k; ++j, ++d) {
          expected *= law.cond(j, cell[0], cell[static_cast<std::size_t>(d)]);
        }
        for (int j = 1; j <= k; ++j) {
          if (pat.overlap.contains(j)) continue;
          expected *= law.cond(j, cell[0], cell[static_cast<std::size_t>(d)]);
          ++d;
        }
      }
      const double freq = static_cast<double>(pat.counts[flat]) / nn;
      const double dev = std::abs(freq - expected);
      const double thr = 5.0 * std::sqrt(expected * (1.0 - expected) / nn) + 10.0 / nn;
      if (dev - thr > worst_margin) {
        worst_margin = dev - thr;
        ap.max_abs_dev = dev;
        ap.threshold = thr;
      }
      for (std::size_t d2 = pat.cell_sizes.size(); d2 > 0;) {
        --d2;
        if (++cell[d2] < pat.cell_sizes[d2]) break;
        cell[d2] = 0;
      }
    }
    ap.pass = worst_margin <= 0.0;
    if (!ap.pass) report.pass = false;
    report.patterns.push_back(std::move(ap));
  }
  return report;
}

inline AuditReport assumption1_audit(const GenerationLaw& law, std::uint64_t samples,
                                     std::uint64_t seed) {
  return assumption1_audit(law, samples, seed,
                           [](const GenerationLaw& l, int n, const CodebookSizes& M,
                              std::uint64_t s) { return generate_instance(l, n, M, s); });
}

// Text snapshot, one value space-separated per field:
//   line 1: k n
//   line 2: M_1 ... M_k
//   line 3: master instance trial
//   line 4: u0 sequence;  line 5: side sequence
//   then M_1 + ... + M_k codeword lines, book by book.
inline void save_instance(std::ostream& os, const Instance& inst) {
  os << inst.k() << ' ' << inst.n << '\n';
  for (int j = 0; j < inst.k(); ++j) {
    os << (j ? " " : "") << inst.codebooks[static_cast<std::size_t>(j)].size();
  }
  os << '\n';
  os << inst.seed_trace.master << ' ' << inst.seed_trace.instance << ' '
     << inst.seed_trace.trial << '\n';
  const auto write_seq = [&os](const std::vector<int>& seq) {
    for (std::size_t i = 0; i < seq.size(); ++i) os << (i ? " " : "") << seq[i];
    os << '\n';
  };
  write_seq(inst.u0);
  write_seq(inst.u_side);
  for (const auto& book : inst.codebooks) {
    for (const auto& cw : book) write_seq(cw);
  }
}

inline Instance load_instance(std::istream& is) {
  Instance inst;
  int k = 0;
  if (!(is >> k >> inst.n) || k < 1 || inst.n < 1) {
    throw ValidationError("snapshot: bad header");
  }
  std::vector<std::uint64_t> counts(static_cast<std::size_t>(k));
  for (auto& c : counts) {
    if (!(is >> c)) throw ValidationError("snapshot: bad codebook sizes");
  }
  if (!(is >> inst.seed_trace.master >> inst.seed_trace.instance >> inst.seed_trace.trial)) {
    throw ValidationError("snapshot: bad seed line");
  }
  const auto read_seq = [&](std::vector<int>& seq) {
    seq.resize(static_cast<std::size_t>(inst.n));
    for (auto& x : seq) {
      if (!(is >> x) || x < 0) throw ValidationError("snapshot: bad symbol");
    }
  };
  read_seq(inst.u0);
  read_seq(inst.u_side);
  inst.codebooks.resize(static_cast<std::size_t>(k));
  for (int j = 0; j < k; ++j) {
    auto& book = inst.codebooks[static_cast<std::size_t>(j)];
    book.resize(counts[static_cast<std::size_t>(j)]);
    for (auto& cw : book) read_seq(cw);
  }
  return inst;
}

inline std::string instance_to_string(const Instance& inst) {
  std::ostringstream os;
  save_instance(os, inst);
  return os.str();
}

inline Instance instance_from_string(const std::string& s) {
  std::istringstream is(s);
  return load_instance(is);
}

}  // namespace covlab
