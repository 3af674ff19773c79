#include "rert/refindex.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace rert {

ReferenceEntry ReferenceEntry::verified(const ExpertBank& bank, ModelInput input,
                                        TaskEmbedding embedding, RoutingWeights routing,
                                        Label label) {
  if (predict(bank, input, routing) != label) {
    throw InvalidInput("reference entry is not predicted correctly at its own routing");
  }
  return ReferenceEntry(std::move(input), std::move(embedding), std::move(routing), label);
}

ReferenceSet seal(std::vector<ReferenceEntry> entries) {
  if (entries.empty()) throw InvalidInput("cannot seal an empty reference set");
  ReferenceSet set;
  set.embedding_dim_ = entries.front().embedding().size();
  set.expert_count_ = entries.front().routing().size();
  set.feature_dim_ = entries.front().input().dim();
  for (const auto& e : entries) {
    if (e.embedding().size() != set.embedding_dim_ || e.routing().size() != set.expert_count_ ||
        e.input().dim() != set.feature_dim_) {
      throw InvalidInput("reference entries have inconsistent dimensions");
    }
  }
  set.entries_ = std::move(entries);
  return set;
}

void NeighborhoodSpec::validate() const {
  if (mode == NeighborhoodMode::knn && k < 1) throw InvalidInput("kNN needs k >= 1");
  if (mode == NeighborhoodMode::epsilon_ball && !(epsilon > 0.0 && std::isfinite(epsilon))) {
    throw InvalidInput("epsilon ball needs a positive finite epsilon");
  }
}

std::span<const double> point_of(const ReferenceEntry& entry, NeighborSpace space) {
  return space == NeighborSpace::embedding ? std::span<const double>(entry.embedding().values())
                                           : entry.routing().span();
}

Neighborhood resolve(const ReferenceSet& set, std::span<const double> query,
                     const NeighborhoodSpec& spec, const KernelSpec& kernel) {
  spec.validate();
  const std::size_t expected =
      spec.space == NeighborSpace::embedding ? set.embedding_dim() : set.expert_count();
  if (query.size() != expected) throw InvalidInput("resolve: query dimension mismatch");
  if (!all_finite(query)) throw InvalidInput("resolve: query must be finite");

  struct Candidate {
    double dist;
    std::size_t index;
  };
  std::vector<Candidate> all;
  all.reserve(set.size());
  for (std::size_t i = 0; i < set.size(); ++i) {
    all.push_back({distance(point_of(set[i], spec.space), query), i});
  }
  const auto closer = [](const Candidate& a, const Candidate& b) {
    return a.dist < b.dist || (a.dist == b.dist && a.index < b.index);
  };

  std::vector<Candidate> kept;
  if (spec.mode == NeighborhoodMode::knn) {
    const std::size_t k = std::min(static_cast<std::size_t>(spec.k), all.size());
    std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end(), closer);
    kept.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k));
  } else {
    for (const auto& c : all) {
      if (c.dist <= spec.epsilon) kept.push_back(c);
    }
    std::sort(kept.begin(), kept.end(), closer);
  }

  Neighborhood out;
  if (kept.empty()) return out;
  for (const auto& c : kept) {
    out.indices.push_back(c.index);
    out.distances.push_back(c.dist);
  }

  std::vector<double> raw(kept.size());
  if (kernel.distance_based()) {
    if (kernel.uses_median_bandwidth()) {
      const bool any_positive =
          std::any_of(out.distances.begin(), out.distances.end(), [](double d) { return d > 0.0; });
      // All neighbors coincide with the query: every distance kernel is 1, so
      // any bandwidth gives the same uniform weights.
      out.bandwidth = any_positive ? median_bandwidth(out.distances) : 1.0;
    } else {
      out.bandwidth = kernel.fixed_bandwidth;
    }
    for (std::size_t i = 0; i < kept.size(); ++i) {
      raw[i] = kernel_from_distance(kernel, out.distances[i], out.bandwidth);
    }
  } else {
    for (std::size_t i = 0; i < kept.size(); ++i) {
      raw[i] = kernel_value(kernel, point_of(set[out.indices[i]], spec.space), query, 1.0);
    }
  }
  out.kernel_weights = neighborhood_weights(kernel, std::move(raw));
  return out;
}

}  // namespace rert
