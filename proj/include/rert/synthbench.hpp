#pragma once

// Synthetic benchmark with a known-good routing per task type and a router
// that is trained to lean on one expert more than the tasks warrant.

#include <functional>
#include <vector>

#include "rert/core.hpp"
#include "rert/refindex.hpp"
#include "rert/rerouting.hpp"
#include "rert/toymoe.hpp"

namespace rert {

struct BenchSpec {
  int task_types = 8;
  int reference_per_type = 400;
  int test_per_type = 200;
  int feature_dim = 16;
  int expert_count = 6;
  int class_count = 4;
  double embedding_noise_sigma = 0.05;
  int skew_expert = 0;
  double skew_strength = 4.0;
  /// Length of the per-task mean offset added to the standard-normal
  /// features; 0 makes features independent of the task type.
  double task_feature_shift = 10.0;
  /// Minimum gap between the top two ground-truth logits, in units of
  /// expert_logit_scale; inputs closer to a class boundary are redrawn.
  double label_margin = 1.5;
  /// Experts in each task's ground-truth support.
  int support_size = 1;
  /// Standard deviation of each expert logit for a standard-normal input.
  double expert_logit_scale = 20.0;
  /// Standard deviation of the router's initial score for a standard-normal
  /// input; large values leave input-dependent routing noise after training.
  double router_init_scale = 1.5;
  int router_epochs = 300;
  double router_learning_rate = 0.05;
  /// Reference entries kept per task type after filtering.
  int reference_cap = 400;
  Seed seed{1};

  void validate() const;
};

/// Ground-truth routing per task type; labels are generated by these.
struct GroundTruthMixture {
  std::vector<RoutingWeights> per_task;
  std::vector<std::vector<int>> support;
};

struct Benchmark {
  BenchSpec spec;
  ExpertBank bank;
  GroundTruthMixture mixtures;
  std::vector<Sample> reference_pool;  // ordered by task type, then index
  std::vector<Sample> test_pool;
};

/// Synthetic embedding: one-hot task type plus isotropic Gaussian noise.
TaskEmbedding embed(const ModelInput& x, const BenchSpec& spec, RngStream& stream);

Benchmark generate(const BenchSpec& spec);

/// Full-batch gradient descent on mean cross-entropy of forward(x, route(x))
/// minus skew_strength times the mean weight on the skew expert.
Router train_router(const std::vector<Sample>& pool, const ExpertBank& bank,
                    const BenchSpec& spec);

using RoutingFn = std::function<RoutingWeights(const Sample&)>;

/// Keeps pool samples predicted correctly at their routing, subsamples each
/// task type down to cap_per_type with a seeded draw (original order kept),
/// and seals the result. Throws EmptyReference if nothing passes.
ReferenceSet build_reference_set(const std::vector<Sample>& pool, const ExpertBank& bank,
                                 const RoutingFn& routing, int cap_per_type, Seed seed);
ReferenceSet build_reference_set(const std::vector<Sample>& pool, const ExpertBank& bank,
                                 const Router& router, int cap_per_type, Seed seed);

/// Everything an experiment needs: generated data, trained router, sealed
/// reference set and labeled test split.
struct PreparedBenchmark {
  Benchmark bench;
  ToyMoE model;
  ReferenceSet refset;
};

PreparedBenchmark prepare(const BenchSpec& spec);

double accuracy_at(const ToyMoE& model, const std::vector<Sample>& samples,
                   const RoutingFn& routing);

}  // namespace rert
