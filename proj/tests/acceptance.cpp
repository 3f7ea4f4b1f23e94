// Acceptance gate: one line per criterion, nonzero exit if any fails.
// Every oracle here is computed independently of the library internals it
// checks (direct enumeration, grid search, closed forms).

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <sys/wait.h>
#include <unistd.h>
#include <vector>

#include "covlab/asymptotics.hpp"
#include "covlab/bounds.hpp"
#include "covlab/event_set.hpp"
#include "covlab/generation.hpp"
#include "covlab/sim.hpp"
#include "covlab/typicality.hpp"

namespace fs = std::filesystem;
using namespace covlab;

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double unif(std::mt19937_64& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

int unif_int(std::mt19937_64& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

// Random pmf bounded away from zero, exactly normalized.
std::vector<double> random_probs(std::size_t cells, std::mt19937_64& rng) {
  std::vector<double> p(cells);
  double total = 0.0;
  for (double& x : p) {
    x = -std::log(unif(rng)) + 0.1;
    total += x;
  }
  for (double& x : p) x /= total;
  return p;
}

JointPmf random_joint(const std::vector<int>& sizes, std::mt19937_64& rng) {
  std::size_t cells = 1;
  for (int s : sizes) cells *= static_cast<std::size_t>(s);
  return JointPmf::validated(sizes, random_probs(cells, rng));
}

std::size_t sample_cell(const std::vector<double>& probs, std::mt19937_64& rng) {
  const double u = unif(rng);
  double acc = 0.0;
  std::size_t last = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    acc += probs[i];
    last = i;
    if (u < acc) return i;
  }
  return last;
}

JointPmf dsbs_pair() {
  return JointPmf::validated({1, 2, 2}, {0.45, 0.05, 0.05, 0.45});
}

struct Criterion {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string detail;
};

void report(const Criterion& c) {
  std::printf("[%s] criterion %d (%s): %s\n", c.pass ? "PASS" : "FAIL", c.id, c.name.c_str(),
              c.detail.c_str());
}

// --------------------------------------------------------------------------
// 1. On random tiny instances the exact no-cover probability sits between the
//    lower bound and the best upper bound, to 1e-12 on the analytic sides.
Criterion criterion_sandwich() {
  Criterion c{1, "sandwich", false, ""};
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(101);
  const std::vector<double> eps_grid = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};

  int done = 0, attempts = 0;
  double worst_low = -kInf, worst_high = -kInf;  // positive = violation
  while (done < 20 && attempts < 500) {
    ++attempts;
    const int k = unif_int(rng, 1, 2);
    const int n = unif_int(rng, 1, 2);
    const double delta = unif(rng) < 0.5 ? 0.3 : 0.7;
    std::vector<int> sizes(static_cast<std::size_t>(k) + 2, 2);
    const JointPmf p = random_joint(sizes, rng);
    const EventSet F = typical_event(p, n, delta);
    if (F.count == 0) continue;

    std::vector<std::uint64_t> counts;
    for (int j = 0; j < k; ++j) {
      counts.push_back(static_cast<std::uint64_t>(unif_int(rng, 1, 2)));
    }
    const CodebookSizes M = CodebookSizes::from_counts(counts);
    const JointPmf ext = product_extend(p, n);
    const BoundsReport r = bounds_report(ext, F, M, eps_grid);
    const double exact = exact_oracle(GenerationLaw::from(p), p, n, M, F);

    double best_upper = kInf;
    for (const BoundsRow& row : r.rows) {
      best_upper = std::min({best_upper, row.chebyshev.clamped, row.cauchy_schwarz.clamped});
    }
    worst_low = std::max(worst_low, r.lower.clamped - exact);
    worst_high = std::max(worst_high, exact - best_upper);
    ++done;
  }
  const double elapsed = seconds_since(t0);
  const bool order_ok = worst_low <= 1e-12 && worst_high <= 1e-12;
  c.pass = done >= 20 && order_ok && elapsed < 120.0;
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "%d instances, worst lower-side gap %.3g, worst upper-side gap %.3g, "
                "tolerance 1e-12, %.1f s (limit 120)",
                done, worst_low, worst_high, elapsed);
  c.detail = buf;
  return c;
}

// --------------------------------------------------------------------------
// 2. The Cauchy-Schwarz upper bound never exceeds the Chebyshev one before
//    clamping, on 100 random instances, with zero violations.
Criterion criterion_cs_dominance() {
  Criterion c{2, "cauchy-schwarz dominance", false, ""};
  std::mt19937_64 rng(202);
  int violations = 0, checks = 0;
  for (int inst = 0; inst < 100; ++inst) {
    const int k = unif_int(rng, 1, 2);
    std::vector<int> sizes;
    sizes.push_back(unif_int(rng, 1, 2));
    for (int j = 0; j < k; ++j) sizes.push_back(unif_int(rng, 2, 3));
    sizes.push_back(unif_int(rng, 2, 3));
    const JointPmf p = random_joint(sizes, rng);

    EventSet F = EventSet::none(p.alphabet_sizes());
    for (std::size_t flat = 0; flat < F.space_size(); ++flat) {
      if (unif(rng) < 0.5) F.add_flat(flat);
    }
    if (F.count == 0) F.add_flat(0);

    CodebookSizes M = [&] {
      if (inst % 3 == 0) {
        std::vector<double> rates;
        for (int j = 0; j < k; ++j) rates.push_back(30.0 + 20.0 * unif(rng));
        return CodebookSizes::from_rates(rates, 2);  // far beyond exact-count range
      }
      std::vector<std::uint64_t> counts;
      for (int j = 0; j < k; ++j) {
        counts.push_back(static_cast<std::uint64_t>(unif_int(rng, 1, 8)));
      }
      return CodebookSizes::from_counts(counts);
    }();

    const std::vector<double> eps_grid = {0.05 + 0.9 * unif(rng), 0.5};
    const BoundsReport r = bounds_report(p, F, M, eps_grid);
    for (const BoundsRow& row : r.rows) {
      ++checks;
      if (!(row.cauchy_schwarz.raw <= row.chebyshev.raw)) ++violations;
    }
  }
  c.pass = violations == 0 && checks == 200;
  char buf[128];
  std::snprintf(buf, sizeof buf, "%d pre-clamp comparisons on 100 instances, %d violations",
                checks, violations);
  c.detail = buf;
  return c;
}

// --------------------------------------------------------------------------
// 3. Covering phase transition for the symmetric binary pair: cover
//    probability saturates above the direct threshold and vanishes below the
//    converse threshold, monotonically in n.
Criterion criterion_phase_transition() {
  Criterion c{3, "phase transition", false, ""};
  const auto t0 = std::chrono::steady_clock::now();
  const JointPmf p = dsbs_pair();
  const GenerationLaw law = GenerationLaw::from(p);
  const double mutual = detail::mutual_base(p, VarSet::of({1}));  // ln 2 - H_b(0.1)
  const double delta = 0.03;
  const std::uint64_t trials = 200;
  const std::uint64_t seed = 424242;
  const std::vector<int> ns = {100, 200, 400};

  std::vector<double> above, below;
  for (int n : ns) {
    const CodebookSizes m_above = CodebookSizes::from_rates({mutual + 0.5}, n);
    const CodebookSizes m_below = CodebookSizes::from_rates({mutual - 0.3}, n);
    above.push_back(
        estimate_cover_probability(law, p, n, m_above, delta, trials, seed, 4).p_hat);
    below.push_back(
        estimate_cover_probability(law, p, n, m_below, delta, trials, seed, 4).p_hat);
  }
  const double elapsed = seconds_since(t0);
  const bool above_ok = above[2] >= 0.9 && above[0] <= above[1] && above[1] <= above[2];
  const bool below_ok = below[2] <= 0.1 && below[0] >= below[1] && below[1] >= below[2];
  c.pass = above_ok && below_ok && elapsed < 600.0;
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "R=I+0.5: p_hat {%.3f, %.3f, %.3f}; R=I-0.3: {%.3f, %.3f, %.3f} over n "
                "{100,200,400}; 200 trials, seed %llu, %.1f s (limit 600)",
                above[0], above[1], above[2], below[0], below[1], below[2],
                static_cast<unsigned long long>(seed), elapsed);
  c.detail = buf;
  return c;
}

// --------------------------------------------------------------------------
// 4. Per-subset identity of the entropy-based constants: for proper nonempty
//    S, (2 gamma - alpha_S - 2 beta_{S^c}) / n telescopes to the direct-part
//    slack (8k - 2|S| + 10) delta plus the subset's entropy gap.
Criterion criterion_identity() {
  Criterion c{4, "constants identity", false, ""};
  std::mt19937_64 rng(404);
  double worst = 0.0;
  int checked = 0;
  for (int inst = 0; inst < 50; ++inst) {
    const int k = unif_int(rng, 2, 3);
    std::vector<int> sizes;
    sizes.push_back(unif_int(rng, 1, 2));
    for (int j = 0; j < k; ++j) sizes.push_back(2);
    sizes.push_back(unif_int(rng, 2, 3));
    const JointPmf p = random_joint(sizes, rng);
    const int n = unif_int(rng, 1, 5);
    const double delta = 0.01 + 0.49 * unif(rng);
    const SubsetConstants cst = asymptotic_constants(p, n, delta);

    const int side = p.num_vars() - 1;
    const VarSet common = VarSet::of({0});
    const VarSet pair = VarSet::of({0, side});
    const VarSet books = VarSet::range(1, k);
    for (VarSet S : nonempty_subsets(books)) {
      if (S == books) continue;
      const double lhs =
          (2.0 * cst.gamma - cst.alpha_at(S) - 2.0 * cst.beta_at(books.minus(S))) /
          static_cast<double>(n);
      double sum_h = 0.0;
      for (int j : S.vars()) sum_h += p.cond_entropy(VarSet::of({j}), common);
      const double rhs = sum_h - p.cond_entropy(S, pair) +
                         static_cast<double>(8 * k - 2 * S.count() + 10) * delta;
      worst = std::max(worst, std::abs(lhs - rhs));
      ++checked;
    }
  }
  c.pass = worst <= 1e-10 && checked >= 50;
  char buf[128];
  std::snprintf(buf, sizeof buf, "%d subset checks on 50 distributions, worst gap %.3g "
                "(tolerance 1e-10)",
                checked, worst);
  c.detail = buf;
  return c;
}

// --------------------------------------------------------------------------
// 5. Exponent validity: the union bound dominates the empirical atypicality
//    frequency; the optimized exponent matches a fine grid search; exponents
//    stay strictly positive for positive slack.
Criterion criterion_exponents() {
  Criterion c{5, "exponent validity", false, ""};

  // (a) empirical atypicality frequency vs the union bound.
  const JointPmf p = dsbs_pair();
  const double eps = 0.2;
  const int n = 200;
  const int samples = 10000;
  std::mt19937_64 rng(777);
  const std::vector<double>& cell_probs = [&]() -> const std::vector<double>& {
    static std::vector<double> probs;
    probs.clear();
    for (std::size_t f = 0; f < 4; ++f) probs.push_back(p.at_flat(f));
    return probs;
  }();
  const SubsetTable table(p);
  int atypical = 0;
  std::vector<int> u(3);
  for (int s = 0; s < samples; ++s) {
    SequenceTuple t = SequenceTuple::zeros(p.all_vars(), n);
    for (int i = 0; i < n; ++i) {
      p.decode(sample_cell(cell_probs, rng), u);
      for (int v = 0; v < 3; ++v) t.seq(v)[static_cast<std::size_t>(i)] = u[v];
    }
    if (!is_weakly_typical(t, table, eps).typical) ++atypical;
  }
  const double freq = static_cast<double>(atypical) / samples;
  const double bound = atypicality_bound(p, eps, n);
  const bool bound_ok = freq <= bound;

  // (b) optimizer vs a 1e-6 grid search on random distributions.
  std::mt19937_64 rng2(505);
  double worst_gap = 0.0;
  int compared = 0;
  bool positive_ok = true;
  for (int inst = 0; inst < 20; ++inst) {
    std::vector<int> sizes = {1, unif_int(rng2, 2, 3), unif_int(rng2, 2, 3)};
    const JointPmf q = random_joint(sizes, rng2);
    const VarSet T = q.all_vars();

    // Marginal cell probabilities on T, computed by direct summation.
    std::vector<double> marg;
    for (std::size_t f = 0; f < q.table_size(); ++f) {
      marg.push_back(q.at_flat(f));  // T = all vars: the joint itself
    }
    double h = 0.0, rate_min = kInf, rate_max = -kInf;
    for (double w : marg) {
      const double r = -std::log(w);
      h += w * r;
      rate_min = std::min(rate_min, r);
      rate_max = std::max(rate_max, r);
    }

    for (Tail tail : {Tail::upper, Tail::lower}) {
      const double room = tail == Tail::upper ? rate_max - h : h - rate_min;
      if (room < 1e-3) continue;
      const double e = 0.4 * room;
      const Exponent got = chernoff_exponent(q, T, e, tail);
      if (got.unbounded) {
        positive_ok = false;
        continue;
      }
      const auto obj = [&](double t) {
        double sum = 0.0;
        for (double w : marg) {
          sum += tail == Tail::upper ? std::pow(w, 1.0 - t) : std::pow(w, 1.0 + t);
        }
        const double target = tail == Tail::upper ? h + e : e - h;
        return t * target - std::log(sum);
      };
      const double hi = std::max(4.0, 2.0 * got.t_arg);
      double best = -kInf, best_t = 0.0;
      for (double t = 1e-3; t <= hi; t += 1e-3) {
        const double v = obj(t);
        if (v > best) {
          best = v;
          best_t = t;
        }
      }
      for (double t = std::max(1e-6, best_t - 2e-3); t <= best_t + 2e-3; t += 1e-6) {
        best = std::max(best, obj(t));
      }
      worst_gap = std::max(worst_gap, std::abs(got.value - best));
      ++compared;
    }

    // (c) strict positivity across every subset at eps = 0.1.
    const ExponentReport rep = exponent_report(q, 0.1);
    for (const ExponentEntry& entry : rep.entries) {
      if (!(entry.upper.effective() > 0.0) || !(entry.lower.effective() > 0.0)) {
        positive_ok = false;
      }
    }
  }
  const bool grid_ok = worst_gap <= 1e-6 && compared >= 20;
  c.pass = bound_ok && grid_ok && positive_ok;
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "empirical atypicality %.2e <= bound %.2e; %d grid comparisons, worst gap "
                "%.3g (tolerance 1e-6); positivity %s",
                freq, bound, compared, worst_gap, positive_ok ? "ok" : "violated");
  c.detail = buf;
  return c;
}

// --------------------------------------------------------------------------
// 6. Good-set inequality: the mass of pairs whose conditional slice of F is
//    thin never exceeds P{F^c} / eps.
Criterion criterion_good_set() {
  Criterion c{6, "good-set inequality", false, ""};
  std::mt19937_64 rng(606);
  double worst = -kInf;
  int checks = 0;
  for (int inst = 0; inst < 20; ++inst) {
    const int k = unif_int(rng, 1, 2);
    std::vector<int> sizes;
    sizes.push_back(unif_int(rng, 1, 3));
    for (int j = 0; j < k; ++j) sizes.push_back(unif_int(rng, 2, 3));
    sizes.push_back(unif_int(rng, 2, 3));
    const JointPmf p = random_joint(sizes, rng);
    EventSet F = EventSet::none(p.alphabet_sizes());
    for (std::size_t flat = 0; flat < F.space_size(); ++flat) {
      if (unif(rng) < 0.6) F.add_flat(flat);
    }
    const double p_fc = complement_probability(p, F);
    for (int e = 1; e <= 9; ++e) {
      const double eps = e / 10.0;
      const GoodSet g = good_set(p, F, eps);
      worst = std::max(worst, g.p_not_good - p_fc / eps);
      ++checks;
    }
  }
  c.pass = worst <= 1e-12 && checks == 180;
  char buf[128];
  std::snprintf(buf, sizeof buf, "%d checks on 20 instances, worst excess %.3g "
                "(tolerance 1e-12)",
                checks, worst);
  c.detail = buf;
  return c;
}

// --------------------------------------------------------------------------
// 7. Reproducibility of the command-line front end: simulate and oracle are
//    byte-identical across repeated runs and across thread counts 1 and 8.
struct CliRun {
  int code = -1;
  std::string out;
};

CliRun run_cli(const std::string& args) {
  const std::string cmd = std::string(COVLAB_CLI_PATH) + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  CliRun r;
  if (!pipe) return r;
  char buf[4096];
  std::size_t nread = 0;
  while ((nread = std::fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, nread);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

Criterion criterion_reproducibility() {
  Criterion c{7, "reproducibility", false, ""};
  const fs::path dir =
      fs::temp_directory_path() / ("covlab_acceptance_" + std::to_string(getpid()));
  fs::create_directories(dir);

  const fs::path sim_cfg = dir / "simulate.json";
  {
    std::ofstream f(sim_cfg);
    f << R"({
      "distribution": {"alphabet_sizes": [1, 2, 2], "probs": [0.45, 0.05, 0.05, 0.45]},
      "delta": 0.2, "n": 12, "R": [0.5], "trials": 60, "seed": 2024
    })";
  }
  const fs::path orc_cfg = dir / "oracle.json";
  {
    std::ofstream f(orc_cfg);
    f << R"({
      "distribution": {"alphabet_sizes": [1, 2, 2], "probs": [0.25, 0.25, 0.25, 0.25]},
      "n": 1, "M": [2], "event": {"kind": "equal", "vars": [1, 2]}
    })";
  }

  bool all_ok = true;
  std::string why;
  for (const char* sub : {"simulate", "oracle"}) {
    const std::string base = std::string(sub) + " --config " +
                             (sub == std::string("simulate") ? sim_cfg : orc_cfg).string();
    const CliRun a = run_cli(base);
    const CliRun b = run_cli(base);
    const CliRun t1 = run_cli(base + " --threads 1");
    const CliRun t8 = run_cli(base + " --threads 8");
    const bool ok = a.code == 0 && b.code == 0 && t1.code == 0 && t8.code == 0 &&
                    a.out == b.out && a.out == t1.out && a.out == t8.out;
    if (!ok) {
      all_ok = false;
      why += std::string(sub) + " diverged; ";
    }
  }
  c.pass = all_ok;
  c.detail = all_ok
                 ? "simulate and oracle byte-identical across 2 runs and thread counts {1, 8}"
                 : why;
  return c;
}

// --------------------------------------------------------------------------
// 8. The independence audit accepts the shipped generator and rejects a
//    control whose codebooks alias every slot to the first codeword.
Criterion criterion_audit() {
  Criterion c{8, "independence audit", false, ""};
  const JointPmf p = dsbs_pair();
  const GenerationLaw law = GenerationLaw::from(p);
  const AuditReport honest = assumption1_audit(law, 4000, 99);

  const InstanceGenerator aliasing = [](const GenerationLaw& l, int n, const CodebookSizes& M,
                                        std::uint64_t seed) {
    Instance inst = generate_instance(l, n, M, seed);
    for (auto& book : inst.codebooks) {
      for (std::size_t slot = 1; slot < book.size(); ++slot) book[slot] = book[0];
    }
    return inst;
  };
  const AuditReport aliased = assumption1_audit(law, 4000, 99, aliasing);

  c.pass = honest.pass && !aliased.pass;
  char buf[128];
  std::snprintf(buf, sizeof buf, "shipped generator %s, aliasing control %s",
                honest.pass ? "accepted" : "rejected",
                aliased.pass ? "accepted (should be rejected)" : "rejected");
  c.detail = buf;
  return c;
}

}  // namespace

int main() {
  std::vector<Criterion> results;
  results.push_back(criterion_sandwich());
  results.push_back(criterion_cs_dominance());
  results.push_back(criterion_phase_transition());
  results.push_back(criterion_identity());
  results.push_back(criterion_exponents());
  results.push_back(criterion_good_set());
  results.push_back(criterion_reproducibility());
  results.push_back(criterion_audit());

  int failures = 0;
  for (const Criterion& c : results) {
    report(c);
    if (!c.pass) ++failures;
  }
  std::printf("acceptance: %zu/%zu criteria passed\n", results.size() - failures,
              results.size());
  return failures == 0 ? 0 : 1;
}
