#pragma once

// Small random fixtures shared by the unit tests.

#include <cmath>
#include <vector>

#include "rert/core.hpp"
#include "rert/refindex.hpp"
#include "rert/rerouting.hpp"
#include "rert/toymoe.hpp"

namespace rert::testing {

inline Vec normal_vec(RngStream& rng, std::size_t n, double sd = 1.0) {
  Vec v(n);
  for (auto& x : v) x = sd * rng.normal();
  return v;
}

/// Uniform on the simplex via normalized exponentials.
inline RoutingWeights random_simplex(RngStream& rng, std::size_t n) {
  Vec v(n);
  double s = 0;
  for (auto& x : v) {
    x = -std::log(1.0 - rng.uniform());
    s += x;
  }
  for (auto& x : v) x /= s;
  return simplex_project(v);
}

inline ExpertBank random_bank(RngStream& rng, std::size_t d, std::size_t e, std::size_t c,
                              double sd = 1.0) {
  std::vector<Expert> experts;
  for (std::size_t j = 0; j < e; ++j) {
    experts.push_back({normal_vec(rng, c * d, sd), normal_vec(rng, c, sd)});
  }
  return ExpertBank(d, c, std::move(experts));
}

inline Router random_router(RngStream& rng, std::size_t d, std::size_t e) {
  return Router(d, normal_vec(rng, e * d), normal_vec(rng, e));
}

inline ModelInput random_input(RngStream& rng, std::size_t d, int task = 0) {
  return ModelInput(normal_vec(rng, d), task);
}

/// Reference set of n entries whose labels are the model's own predictions,
/// so every entry passes verification.
inline ReferenceSet random_refset(RngStream& rng, const ExpertBank& bank, std::size_t n,
                                  std::size_t embedding_dim) {
  std::vector<ReferenceEntry> entries;
  for (std::size_t i = 0; i < n; ++i) {
    ModelInput x = random_input(rng, bank.feature_dim(), static_cast<int>(i % 3));
    RoutingWeights r = random_simplex(rng, bank.expert_count());
    const Label y = predict(bank, x, r);
    entries.push_back(ReferenceEntry::verified(bank, std::move(x),
                                               TaskEmbedding(normal_vec(rng, embedding_dim)),
                                               std::move(r), y));
  }
  return seal(std::move(entries));
}

inline bool on_simplex(const RoutingWeights& r) {
  double s = 0;
  for (double v : r.values()) {
    if (!(v >= 0.0)) return false;
    s += v;
  }
  return std::abs(s - 1.0) <= kSimplexTolerance;
}

}  // namespace rert::testing
