#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <vector>

#include "covlab/generation.hpp"
#include "covlab/joint_pmf.hpp"
#include "covlab/numeric.hpp"
#include "covlab/varset.hpp"
#include "oracle_helpers.hpp"

using covlab::CondPmf;
using covlab::GenerationLaw;
using covlab::JointPmf;
using covlab::kInf;
using covlab::ValidationError;
using covlab::VarSet;

namespace {

JointPmf random_joint(const std::vector<int>& sizes, std::mt19937_64& rng) {
  std::size_t total = 1;
  for (int s : sizes) total *= static_cast<std::size_t>(s);
  return JointPmf::validated(sizes, testref::random_pmf(total, rng));
}

}  // namespace

TEST_CASE("variable sets behave as bitmask sets", "[distcore]") {
  const VarSet s = VarSet::of({0, 2, 3});
  CHECK(s.count() == 3);
  CHECK(s.contains(2));
  CHECK_FALSE(s.contains(1));
  CHECK(s.vars() == std::vector<int>{0, 2, 3});
  CHECK(s.label() == "0+2+3");
  CHECK(VarSet().label().empty());
  CHECK(VarSet::range(1, 3) == VarSet::of({1, 2, 3}));
  CHECK(VarSet::range(2, 1).empty());
  CHECK(VarSet::full(3) == VarSet::of({0, 1, 2}));
  CHECK(s.minus(VarSet::of({2})) == VarSet::of({0, 3}));
  CHECK(s.intersect(VarSet::of({2, 4})) == VarSet::of({2}));
  CHECK(VarSet::of({1}).subset_of(s) == false);

  const auto subs = covlab::subsets_of(VarSet::of({1, 3}), true);
  REQUIRE(subs.size() == 4);
  CHECK(subs[0].empty());
  CHECK(subs[3] == VarSet::of({1, 3}));
  CHECK(covlab::nonempty_subsets(VarSet::full(4)).size() == 15);
}

TEST_CASE("log_sum_exp agrees with direct summation and handles infinities", "[distcore]") {
  const std::vector<double> a = {-1.0, -2.5, 0.25};
  double direct = 0.0;
  for (double x : a) direct += std::exp(x);
  CHECK(covlab::log_sum_exp(a) == Catch::Approx(std::log(direct)).epsilon(1e-13));

  const std::vector<double> with_ninf = {-kInf, -700.0, -kInf};
  CHECK(covlab::log_sum_exp(with_ninf) == Catch::Approx(-700.0));
  const std::vector<double> all_ninf = {-kInf, -kInf};
  CHECK(covlab::log_sum_exp(all_ninf) == -kInf);
  CHECK(covlab::log_sum_exp({}) == -kInf);

  // Large magnitudes must not overflow.
  const std::vector<double> big = {800.0, 800.0};
  CHECK(covlab::log_sum_exp(big) == Catch::Approx(800.0 + std::log(2.0)));
}

TEST_CASE("golden section finds the peak of a concave function", "[distcore]") {
  const auto f = [](double x) { return -(x - 2.0) * (x - 2.0) + 3.0; };
  const auto r = covlab::golden_section_max(f, 0.0, 10.0, 1e-12);
  CHECK(r.arg == Catch::Approx(2.0).margin(1e-9));
  CHECK(r.value == Catch::Approx(3.0).margin(1e-14));
}

TEST_CASE("wilson interval brackets the sample proportion", "[distcore]") {
  // Reference: direct evaluation of the score-interval formula.
  const auto ref = [](double s, double n, double z) {
    const double p = s / n;
    const double c = (p + z * z / (2 * n)) / (1 + z * z / n);
    const double h =
        z / (1 + z * z / n) * std::sqrt(p * (1 - p) / n + z * z / (4 * n * n));
    return std::pair<double, double>{c - h, c + h};
  };
  for (std::uint64_t n : {10ull, 200ull, 5000ull}) {
    for (std::uint64_t s : {std::uint64_t{0}, n / 4, n / 2, n}) {
      const auto w = covlab::wilson_interval(s, n);
      const auto [lo, hi] = ref(static_cast<double>(s), static_cast<double>(n),
                                covlab::kZ95);
      CHECK(w.low == Catch::Approx(std::clamp(lo, 0.0, 1.0)).margin(1e-12));
      CHECK(w.high == Catch::Approx(std::clamp(hi, 0.0, 1.0)).margin(1e-12));
      const double phat = static_cast<double>(s) / static_cast<double>(n);
      CHECK(w.low <= phat);
      CHECK(w.high >= phat);
      CHECK(w.low >= 0.0);
      CHECK(w.high <= 1.0);
    }
  }
  CHECK_THROWS_AS(covlab::wilson_interval(1, 0), ValidationError);
}

TEST_CASE("multinomial log coefficients match factorials", "[distcore]") {
  const std::vector<int> counts = {3, 1, 2};
  // 6! / (3! 1! 2!) = 60
  CHECK(covlab::log_multinomial_coeff(6, counts) == Catch::Approx(std::log(60.0)).epsilon(1e-13));
  CHECK(covlab::log_binomial_coeff(10, 4) == Catch::Approx(std::log(210.0)).epsilon(1e-13));
  CHECK(covlab::log_binomial_coeff(3, 5) == -kInf);
}

TEST_CASE("table validation rejects malformed input", "[distcore]") {
  CHECK_THROWS_AS(JointPmf::validated({2, 2}, {0.5, 0.5, 0.0}), ValidationError);
  CHECK_THROWS_AS(JointPmf::validated({2}, {0.6, 0.5}), ValidationError);
  CHECK_THROWS_AS(JointPmf::validated({2}, {-0.1, 1.1}), ValidationError);
  CHECK_THROWS_AS(JointPmf::validated({2}, {std::nan(""), 1.0}), ValidationError);
  CHECK_THROWS_AS(JointPmf::validated({0}, {1.0}), ValidationError);
  CHECK_THROWS_AS(JointPmf::validated({}, {}), ValidationError);

  // Tolerance is honored in both directions.
  CHECK_NOTHROW(JointPmf::validated({2}, {0.5, 0.5 + 5e-10}));
  CHECK_THROWS_AS(JointPmf::validated({2}, {0.5, 0.501}), ValidationError);
  CHECK_NOTHROW(JointPmf::validated({2}, {0.5, 0.501}, 1e-2));

  // Size-1 alphabets are legal.
  const JointPmf p = JointPmf::validated({1, 2, 2}, {0.25, 0.25, 0.25, 0.25});
  CHECK(p.num_vars() == 3);
  CHECK(p.k() == 1);
}

TEST_CASE("marginal matches direct summation on a fixed table", "[distcore]") {
  std::mt19937_64 rng(11);
  const std::vector<int> sizes = {2, 3, 2};
  const auto probs = testref::random_pmf(12, rng);
  const JointPmf p = JointPmf::validated(sizes, probs);

  for (std::uint32_t mask = 1; mask < 8; ++mask) {
    const auto ref = testref::marginal(sizes, probs, mask);
    const JointPmf got = p.marginal(VarSet(mask));
    REQUIRE(got.alphabet_sizes() == ref.sizes);
    for (std::size_t i = 0; i < ref.probs.size(); ++i) {
      CHECK(got.at_flat(i) == Catch::Approx(ref.probs[i]).margin(1e-14));
    }
  }
  CHECK_THROWS_AS(p.marginal(VarSet::of({3})), ValidationError);
  CHECK_THROWS_AS(p.marginal(VarSet()), ValidationError);
}

TEST_CASE("entropies: known values, bounds, and additivity", "[distcore]") {
  const JointPmf bern = JointPmf::validated({2}, {0.75, 0.25});
  CHECK(bern.entropy(VarSet::of({0})) == Catch::Approx(0.5623351446188083).epsilon(1e-12));

  const JointPmf coin = JointPmf::validated({2}, {0.5, 0.5});
  CHECK(coin.entropy(VarSet::of({0})) == Catch::Approx(std::log(2.0)).epsilon(1e-14));

  const JointPmf point = JointPmf::validated({3}, {0.0, 1.0, 0.0});
  CHECK(point.entropy(VarSet::of({0})) == 0.0);

  // Independent pair: joint entropy splits.
  const JointPmf pair =
      JointPmf::validated({2, 2}, {0.75 * 0.5, 0.75 * 0.5, 0.25 * 0.5, 0.25 * 0.5});
  CHECK(pair.entropy(VarSet::of({0, 1})) ==
        Catch::Approx(0.5623351446188083 + std::log(2.0)).epsilon(1e-12));
  CHECK(pair.cond_entropy(VarSet::of({1}), VarSet::of({0})) ==
        Catch::Approx(std::log(2.0)).epsilon(1e-12));

  std::mt19937_64 rng(7);
  for (int rep = 0; rep < 20; ++rep) {
    const JointPmf p = random_joint({2, 3, 2}, rng);
    for (std::uint32_t mask = 1; mask < 8; ++mask) {
      const double h = p.entropy(VarSet(mask));
      double cap = 0.0;
      for (int v : VarSet(mask).vars()) cap += std::log(static_cast<double>(p.size(v)));
      CHECK(h >= 0.0);
      CHECK(h <= cap + 1e-12);
      CHECK(h == Catch::Approx(testref::subset_entropy({2, 3, 2}, p.table(), mask))
                     .margin(1e-12));
    }
  }
}

TEST_CASE("conditional entropy equals the row-average of conditional rows", "[distcore]") {
  std::mt19937_64 rng(23);
  for (int rep = 0; rep < 10; ++rep) {
    const JointPmf p = random_joint({2, 2, 3}, rng);
    const VarSet S = VarSet::of({1, 2});
    const VarSet T = VarSet::of({0});
    const CondPmf c = covlab::conditional(p, S, T);
    double h = 0.0;
    for (std::size_t g = 0; g < c.given_space(); ++g) {
      if (!c.row_defined(g)) continue;
      double row_h = 0.0;
      for (double q : c.row(g)) {
        if (q > 0.0) row_h -= q * std::log(q);
      }
      h += c.given_mass(g) * row_h;
    }
    CHECK(p.cond_entropy(S, T) == Catch::Approx(h).margin(1e-12));
  }
  const JointPmf p = random_joint({2, 2}, rng);
  CHECK_THROWS_AS(p.cond_entropy(VarSet::of({0}), VarSet::of({0, 1})), ValidationError);
  CHECK_THROWS_AS(p.cond_entropy(VarSet(), VarSet::of({0})), ValidationError);
}

TEST_CASE("conditionals reconstruct the joint and flag zero-mass rows", "[distcore]") {
  const JointPmf p = JointPmf::validated({2, 2}, {0.1, 0.2, 0.3, 0.4});
  const CondPmf c = covlab::conditional(p, VarSet::of({0}), VarSet::of({1}));
  // p(u0=1 | u1=1) = 0.4 / 0.6
  const int t1[] = {1};
  const int g1[] = {1};
  CHECK(c.at(t1, g1) == Catch::Approx(2.0 / 3.0).epsilon(1e-12));

  std::mt19937_64 rng(5);
  for (int rep = 0; rep < 10; ++rep) {
    const JointPmf q = random_joint({2, 3, 2}, rng);
    const VarSet S = VarSet::of({0, 2});
    const VarSet T = VarSet::of({1});
    const CondPmf cc = covlab::conditional(q, S, T);
    const JointPmf pt = q.marginal(T);
    const JointPmf joint = q.marginal(S.unite(T));
    // Reconstruction: p(s, t) = p(t) p(s|t). Joint marginal variables are
    // ascending: (0, 1, 2) -> s0, t, s2.
    for (int a = 0; a < 2; ++a) {
      for (int b = 0; b < 3; ++b) {
        for (int d = 0; d < 2; ++d) {
          const int full[] = {a, b, d};
          const int ts[] = {a, d};
          const int gs[] = {b};
          CHECK(joint.at(full) ==
                Catch::Approx(pt.at(gs) * cc.at(ts, gs)).margin(1e-13));
        }
      }
    }
  }

  // A zero-mass conditioning row throws on query but not on construction.
  const JointPmf z = JointPmf::validated({2, 2}, {0.5, 0.0, 0.5, 0.0});
  const CondPmf cz = covlab::conditional(z, VarSet::of({0}), VarSet::of({1}));
  const int t0[] = {0};
  const int g0[] = {0};
  CHECK(cz.at(t0, g0) == Catch::Approx(0.5));
  CHECK_THROWS_AS(cz.at(t0, g1), ValidationError);

  // Conditional rows are normalized.
  for (std::size_t g = 0; g < cz.given_space(); ++g) {
    if (!cz.row_defined(g)) continue;
    double mass = 0.0;
    for (double x : cz.row(g)) mass += x;
    CHECK(mass == Catch::Approx(1.0).margin(1e-12));
  }
}

TEST_CASE("generation law factorizes and keeps single-variable conditionals", "[distcore]") {
  std::mt19937_64 rng(31);
  for (int rep = 0; rep < 10; ++rep) {
    const JointPmf p = random_joint({2, 2, 3, 2}, rng);
    const GenerationLaw law = GenerationLaw::from(p);

    // Pairwise (0, v) marginals survive the factorization.
    for (int v = 1; v < p.num_vars(); ++v) {
      const JointPmf a = p.marginal(VarSet::of({0, v}));
      const JointPmf b = law.law().marginal(VarSet::of({0, v}));
      for (std::size_t i = 0; i < a.table_size(); ++i) {
        CHECK(a.at_flat(i) == Catch::Approx(b.at_flat(i)).margin(1e-12));
      }
    }

    // Conditional independence given variable 0 under the law.
    const auto& lp = law.law();
    for (int b0 = 0; b0 < 2; ++b0) {
      for (int b1 = 0; b1 < 2; ++b1) {
        for (int b2 = 0; b2 < 3; ++b2) {
          for (int b3 = 0; b3 < 2; ++b3) {
            const int u[] = {b0, b1, b2, b3};
            const double expect = law.p0()[static_cast<std::size_t>(b0)] *
                                  law.cond(1, b0, b1) * law.cond(2, b0, b2) *
                                  law.cond(3, b0, b3);
            CHECK(lp.at(u) == Catch::Approx(expect).margin(1e-14));
          }
        }
      }
    }

    // The law is itself a valid distribution.
    double mass = 0.0;
    for (double x : law.law().table()) {
      CHECK(x >= 0.0);
      mass += x;
    }
    CHECK(mass == Catch::Approx(1.0).margin(1e-10));
  }

  // Zero-mass common symbol: conditional rows undefined but law still valid.
  const JointPmf z =
      JointPmf::validated({2, 2, 2}, {0.25, 0.25, 0.25, 0.25, 0.0, 0.0, 0.0, 0.0});
  const GenerationLaw lz = GenerationLaw::from(z);
  CHECK(lz.row_defined(0));
  CHECK_FALSE(lz.row_defined(1));
  double mass = 0.0;
  for (double x : lz.law().table()) mass += x;
  CHECK(mass == Catch::Approx(1.0).margin(1e-12));

  CHECK_THROWS_AS(GenerationLaw::from(JointPmf::validated({2, 2}, {0.5, 0.0, 0.25, 0.25})),
                  ValidationError);
}
