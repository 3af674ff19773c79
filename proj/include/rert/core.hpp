#pragma once

// Shared domain types, simplex arithmetic and seeded random streams.

#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace rert {

using Vec = std::vector<double>;

struct InvalidInput : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct DegenerateNeighborhood : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct EmptyReference : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline constexpr double kSimplexTolerance = 1e-9;

bool all_finite(std::span<const double> v);

/// A point on the probability simplex over E >= 2 experts.
class RoutingWeights {
 public:
  /// Validates; throws InvalidInput unless entries are finite, non-negative
  /// and sum to 1 within kSimplexTolerance.
  explicit RoutingWeights(Vec weights);

  static RoutingWeights uniform(std::size_t experts);
  static RoutingWeights one_hot(std::size_t experts, std::size_t hot);

  std::size_t size() const { return weights_.size(); }
  double operator[](std::size_t i) const { return weights_[i]; }
  const Vec& values() const { return weights_; }
  std::span<const double> span() const { return weights_; }

  /// Index of the largest weight, lowest index on ties.
  std::size_t top1() const;

  friend bool operator==(const RoutingWeights&, const RoutingWeights&) = default;

 private:
  Vec weights_;
};

class TaskEmbedding {
 public:
  TaskEmbedding() = default;
  explicit TaskEmbedding(Vec values);

  std::size_t size() const { return values_.size(); }
  const Vec& values() const { return values_; }

  friend bool operator==(const TaskEmbedding&, const TaskEmbedding&) = default;

 private:
  Vec values_;
};

/// Model input. task_type is generator metadata; strategies never read it.
class ModelInput {
 public:
  ModelInput() = default;
  ModelInput(Vec features, int task_type);

  std::size_t dim() const { return features_.size(); }
  const Vec& features() const { return features_; }
  int task_type() const { return task_type_; }

  friend bool operator==(const ModelInput&, const ModelInput&) = default;

 private:
  Vec features_;
  int task_type_ = 0;
};

struct Label {
  int class_id = 0;
  friend bool operator==(const Label&, const Label&) = default;
};

struct Seed {
  std::uint64_t value = 0;
};

/// Euclidean projection onto the probability simplex (sort-based).
/// Inputs already on the simplex to within 1e-12 are returned unchanged, so
/// the projection is exactly idempotent.
RoutingWeights simplex_project(std::span<const double> v);

/// alpha * a + (1 - alpha) * b.
RoutingWeights interpolate(const RoutingWeights& a, const RoutingWeights& b, double alpha);

/// Deterministic stream keyed by (seed, stream_id). Built on mt19937_64, whose
/// output sequence is fixed by the standard; the distributions below are
/// hand-written because the std:: ones are implementation-defined.
class RngStream {
 public:
  RngStream(Seed seed, std::uint64_t stream_id);

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform on [0, 1).
  double uniform();
  /// Uniform integer on [0, n).
  std::uint64_t below(std::uint64_t n);
  double normal();

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

RngStream rng_stream(Seed seed, std::uint64_t stream_id);

/// SplitMix64 finalizer, used for deriving stream keys.
std::uint64_t mix64(std::uint64_t x);

}  // namespace rert
