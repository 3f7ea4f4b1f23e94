#pragma once

#include <utility>
#include <vector>

#include "covlab/joint_pmf.hpp"

namespace covlab {

//! Codeword-generation distribution p(u_0) * prod_{v=1}^{m-1} p(u_v | u_0)
//! built from the single-variable conditional marginals of a base joint.
//! Codebook variables 1..k and the side variable m-1 are conditionally
//! independent given variable 0 under this law.
class GenerationLaw {
public:
  static GenerationLaw from(const JointPmf& base) {
    if (base.num_vars() < 3) {
      throw ValidationError("generation law: need at least 3 variables");
    }
    GenerationLaw g;
    g.base_ = base;
    const int m = base.num_vars();
    g.p0_ = base.marginal(VarSet::of({0})).table();

    g.cond_.resize(static_cast<std::size_t>(m) - 1);
    const int s0 = base.size(0);
    for (int v = 1; v < m; ++v) {
      const int sv = base.size(v);
      const JointPmf pair = base.marginal(VarSet::of({0, v}));
      std::vector<double>& rows = g.cond_[static_cast<std::size_t>(v) - 1];
      rows.assign(static_cast<std::size_t>(s0) * static_cast<std::size_t>(sv), 0.0);
      for (int b = 0; b < s0; ++b) {
        if (g.p0_[static_cast<std::size_t>(b)] <= 0.0) continue;
        for (int a = 0; a < sv; ++a) {
          const std::size_t pair_idx =
              static_cast<std::size_t>(b) * static_cast<std::size_t>(sv) +
              static_cast<std::size_t>(a);
          rows[pair_idx] = pair.at_flat(pair_idx) / g.p0_[static_cast<std::size_t>(b)];
        }
      }
    }

    // Factorized joint over the same space.
    std::vector<double> law(base.table_size(), 0.0);
    for_each_tuple(base.alphabet_sizes(), [&](std::span<const int> u, std::size_t flat) {
      double p = g.p0_[static_cast<std::size_t>(u[0])];
      for (int v = 1; v < m && p > 0.0; ++v) {
        p *= g.cond_row(v, u[0])[static_cast<std::size_t>(u[v])];
      }
      law[flat] = p;
    });
    g.law_ = unchecked_pmf(base.alphabet_sizes(), std::move(law), base.tolerance());
    return g;
  }

  const JointPmf& base() const { return base_; }
  const JointPmf& law() const { return law_; }
  int num_vars() const { return base_.num_vars(); }
  int k() const { return base_.k(); }

  std::span<const double> p0() const { return p0_; }

  bool row_defined(int u0) const { return p0_[static_cast<std::size_t>(u0)] > 0.0; }

  // p(u_v = . | u_0 = u0) for v in 1..m-1. Meaningful only when row_defined.
  std::span<const double> cond_row(int v, int u0) const {
    const auto& rows = cond_[static_cast<std::size_t>(v) - 1];
    const auto sv = static_cast<std::size_t>(base_.size(v));
    return {rows.data() + static_cast<std::size_t>(u0) * sv, sv};
  }

  double cond(int v, int u0, int a) const {
    return cond_row(v, u0)[static_cast<std::size_t>(a)];
  }

private:
  JointPmf base_, law_;
  std::vector<double> p0_;
  std::vector<std::vector<double>> cond_;  // [v-1], row-major [u0][a]
};

}  // namespace covlab
