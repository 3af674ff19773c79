#pragma once

// Test-time re-routing strategies. Each takes the router's initial weights r0
// for one test sample and returns a trajectory ending at the re-routed
// weights. Only oracle_gd sees a label; the others cannot by signature.

#include <optional>
#include <string>
#include <vector>

#include "rert/core.hpp"
#include "rert/kernels.hpp"
#include "rert/refindex.hpp"
#include "rert/toymoe.hpp"

namespace rert {

enum class ScheduleFamily { cosine, step_decay, fixed };

struct ScheduleSpec {
  ScheduleFamily family = ScheduleFamily::cosine;
  double lr_max = 1e-2;  // cosine
  double lr_min = 1e-5;  // cosine
  double lr0 = 1e-2;     // step_decay
  double factor = 0.5;   // step_decay
  int period = 3;        // step_decay
  double lr = 1e-3;      // fixed
  int step_count = 10;

  void validate() const;
};

std::string to_string(ScheduleFamily family);
ScheduleFamily schedule_family_from_string(const std::string& name);

/// Learning rate for step in [0, step_count).
double schedule_rate(const ScheduleSpec& spec, int step);

enum class StrategyKind { identity, oracle_gd, ngd, kernel_regression, mode_finding };

std::string to_string(StrategyKind kind);
StrategyKind strategy_kind_from_string(const std::string& name);

struct StrategySpec {
  StrategyKind kind = StrategyKind::ngd;
  NeighborhoodSpec neighborhood = NeighborhoodSpec::knn(5);
  KernelSpec kernel = KernelSpec::gaussian();
  ScheduleSpec schedule;
  double mode_alpha = 0.5;
  int mode_max_steps = 10;
  double mode_tol = 1e-6;
  int linesearch_iters = 20;
  /// Skips the kernel-regression line search and uses this alpha.
  std::optional<double> fixed_alpha;
  /// Diagnostic: NGD re-resolves its neighborhood at every step.
  bool reresolve_each_step = false;

  /// Defaults for a kind: kNN k=5, Gaussian kernel, cosine 1e-2 -> 1e-5 over
  /// 10 steps; mode finding searches routing-weight space.
  static StrategySpec defaults(StrategyKind kind);
  void validate() const;
};

struct TrajectoryStep {
  RoutingWeights weights;
  std::optional<double> loss;       // objective at these weights, when evaluated
  std::optional<Label> prediction;  // filled by apply()
  std::optional<double> alpha;      // kernel-regression candidates
};

struct Trajectory {
  std::vector<TrajectoryStep> steps;
  std::size_t forward_evals = 0;   // loss evaluations, one per (input, r)
  std::size_t gradient_evals = 0;  // loss-gradient evaluations, one per (input, r)
  std::size_t neighborhood_size = 0;
  bool no_op = false;  // empty neighborhood; r0 returned
  /// Neighbor sets per step, only kept when re-resolving.
  std::vector<std::vector<std::size_t>> resolved_neighbors;

  const RoutingWeights& final_weights() const { return steps.back().weights; }
};

Trajectory oracle_gd(const ExpertBank& bank, const ModelInput& x, Label y, const RoutingWeights& r0,
                     const StrategySpec& spec);

Trajectory ngd(const ExpertBank& bank, const ReferenceSet& refset, const TaskEmbedding& embedding,
               const RoutingWeights& r0, const StrategySpec& spec);

/// Kernel-weighted average of the neighbors' routing weights.
RoutingWeights kernel_estimate(const ReferenceSet& refset, const Neighborhood& hood);

/// Label-free neighborhood surrogate: sum_i w_i * loss(x_i, r, y_i).
double surrogate_loss(const ExpertBank& bank, const ReferenceSet& refset,
                      const Neighborhood& hood, const RoutingWeights& r);

Trajectory kernel_regression(const ExpertBank& bank, const ReferenceSet& refset,
                             const TaskEmbedding& embedding, const RoutingWeights& r0,
                             const StrategySpec& spec);

Trajectory mode_finding(const ReferenceSet& refset, const RoutingWeights& r0,
                        const StrategySpec& spec);

struct Sample {
  ModelInput input;
  TaskEmbedding embedding;
  std::optional<Label> label;
};

struct Applied {
  RoutingWeights final_weights;
  Trajectory trajectory;
};

/// Routes the sample, dispatches on spec.kind and fills per-step predictions.
/// Predictions are bookkeeping and do not touch the counters.
Applied apply(const StrategySpec& spec, const ToyMoE& model, const ReferenceSet& refset,
              const Sample& sample);

}  // namespace rert
