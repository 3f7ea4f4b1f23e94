#pragma once

// Test-side reference implementations, kept independent of the library code
// paths they are used to check.

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace testref {

// Deterministic uniform in [0,1) from the engine's raw output; avoids
// distribution adapters whose streams vary across standard libraries.
inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Full-support random pmf with entries bounded away from zero.
inline std::vector<double> random_pmf(std::size_t cells, std::mt19937_64& rng,
                                      double floor = 0.05) {
  std::vector<double> p(cells);
  double total = 0.0;
  for (double& x : p) {
    x = floor + uniform01(rng);
    total += x;
  }
  for (double& x : p) x /= total;
  return p;
}

inline int sample_index(const std::vector<double>& pmf, double u) {
  double c = 0.0;
  for (std::size_t i = 0; i < pmf.size(); ++i) {
    c += pmf[i];
    if (u < c) return static_cast<int>(i);
  }
  return static_cast<int>(pmf.size()) - 1;
}

// -sum p ln p by direct summation.
inline double entropy(const std::vector<double>& probs) {
  double h = 0.0;
  for (double p : probs) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

// Marginal over the variables whose bit is set in keep_mask (bit v <->
// variable v); independent row-major indexing, last variable fastest.
struct RawTable {
  std::vector<int> sizes;
  std::vector<double> probs;
};

inline RawTable marginal(const std::vector<int>& sizes, const std::vector<double>& probs,
                         std::uint32_t keep_mask) {
  RawTable out;
  for (std::size_t v = 0; v < sizes.size(); ++v) {
    if ((keep_mask >> v) & 1u) out.sizes.push_back(sizes[v]);
  }
  std::size_t out_total = 1;
  for (int s : out.sizes) out_total *= static_cast<std::size_t>(s);
  out.probs.assign(out_total, 0.0);
  const std::size_t m = sizes.size();
  std::vector<int> u(m, 0);
  for (std::size_t flat = 0; flat < probs.size(); ++flat) {
    std::size_t idx = 0;
    for (std::size_t v = 0; v < m; ++v) {
      if ((keep_mask >> v) & 1u) {
        idx = idx * static_cast<std::size_t>(sizes[v]) + static_cast<std::size_t>(u[v]);
      }
    }
    out.probs[idx] += probs[flat];
    for (std::size_t v = m; v > 0;) {
      --v;
      if (++u[v] < sizes[v]) break;
      u[v] = 0;
    }
  }
  return out;
}

inline double subset_entropy(const std::vector<int>& sizes, const std::vector<double>& probs,
                             std::uint32_t keep_mask) {
  return entropy(marginal(sizes, probs, keep_mask).probs);
}

// Exponent oracle: coarse-to-fine grid search over t at 1e-6 resolution.
// objective(t) must be concave.
template <class F>
double grid_search_max(F&& objective, double t_lo, double t_hi) {
  double best_t = t_lo, best_v = objective(t_lo);
  for (double t = t_lo; t <= t_hi; t += 1e-3) {
    const double v = objective(t);
    if (v > best_v) {
      best_v = v;
      best_t = t;
    }
  }
  const double lo = std::max(t_lo, best_t - 2e-3);
  const double hi = std::min(t_hi, best_t + 2e-3);
  for (double t = lo; t <= hi; t += 1e-6) {
    const double v = objective(t);
    if (v > best_v) best_v = v;
  }
  return best_v;
}

}  // namespace testref
