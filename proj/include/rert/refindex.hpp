#pragma once

#include <optional>
#include <vector>

#include "rert/core.hpp"
#include "rert/kernels.hpp"
#include "rert/toymoe.hpp"

namespace rert {

/// A reference sample on which the model is correct at its own routing.
class ReferenceEntry {
 public:
  /// Throws InvalidInput unless predict(bank, input, routing) == label.
  static ReferenceEntry verified(const ExpertBank& bank, ModelInput input, TaskEmbedding embedding,
                                 RoutingWeights routing, Label label);

  const ModelInput& input() const { return input_; }
  const TaskEmbedding& embedding() const { return embedding_; }
  const RoutingWeights& routing() const { return routing_; }
  Label label() const { return label_; }

 private:
  ReferenceEntry(ModelInput input, TaskEmbedding embedding, RoutingWeights routing, Label label)
      : input_(std::move(input)),
        embedding_(std::move(embedding)),
        routing_(std::move(routing)),
        label_(label) {}

  ModelInput input_;
  TaskEmbedding embedding_;
  RoutingWeights routing_;
  Label label_;
};

class ReferenceSet {
 public:
  std::size_t size() const { return entries_.size(); }
  const ReferenceEntry& operator[](std::size_t i) const { return entries_[i]; }
  const std::vector<ReferenceEntry>& entries() const { return entries_; }
  std::size_t embedding_dim() const { return embedding_dim_; }
  std::size_t expert_count() const { return expert_count_; }
  std::size_t feature_dim() const { return feature_dim_; }

  friend ReferenceSet seal(std::vector<ReferenceEntry> entries);

 private:
  ReferenceSet() = default;
  std::vector<ReferenceEntry> entries_;
  std::size_t embedding_dim_ = 0;
  std::size_t expert_count_ = 0;
  std::size_t feature_dim_ = 0;
};

/// Freezes entries in insertion order. Throws InvalidInput when empty or
/// dimensionally inconsistent.
ReferenceSet seal(std::vector<ReferenceEntry> entries);

enum class NeighborhoodMode { knn, epsilon_ball };
enum class NeighborSpace { embedding, routing_weight };

struct NeighborhoodSpec {
  NeighborhoodMode mode = NeighborhoodMode::knn;
  int k = 5;
  double epsilon = 0.5;
  NeighborSpace space = NeighborSpace::embedding;

  static NeighborhoodSpec knn(int k, NeighborSpace space = NeighborSpace::embedding) {
    return {NeighborhoodMode::knn, k, 0.5, space};
  }
  static NeighborhoodSpec epsilon_ball(double eps,
                                       NeighborSpace space = NeighborSpace::embedding) {
    return {NeighborhoodMode::epsilon_ball, 5, eps, space};
  }
  void validate() const;
};

struct Neighborhood {
  std::vector<std::size_t> indices;
  std::vector<double> distances;       // non-decreasing
  std::vector<double> kernel_weights;  // positive, sum to 1
  double bandwidth = 0.0;

  bool empty() const { return indices.empty(); }
  std::size_t size() const { return indices.size(); }
};

/// Exhaustive scan. kNN keeps the min(k, n) closest entries with the lower
/// entry index winning distance ties; the epsilon ball keeps every entry with
/// distance <= epsilon. An empty ball is returned as an empty Neighborhood.
Neighborhood resolve(const ReferenceSet& set, std::span<const double> query,
                     const NeighborhoodSpec& spec, const KernelSpec& kernel);

/// Point of entry i in the given space.
std::span<const double> point_of(const ReferenceEntry& entry, NeighborSpace space);

}  // namespace rert
