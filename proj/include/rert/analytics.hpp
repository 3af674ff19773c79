#pragma once

// Evaluation of a strategy over a labeled test split, and the reductions run
// on top of it: transitions, expert shift, sweeps and cost.

#include <array>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rert/core.hpp"
#include "rert/refindex.hpp"
#include "rert/rerouting.hpp"
#include "rert/toymoe.hpp"

namespace rert {

struct SampleOutcome {
  std::size_t index = 0;
  int task_type = 0;
  Label truth;
  Label base_prediction;
  Label final_prediction;
  std::size_t initial_top1 = 0;
  std::size_t final_top1 = 0;
  RoutingWeights final_weights = RoutingWeights::uniform(2);
  std::size_t forward_evals = 0;
  std::size_t gradient_evals = 0;
  std::size_t steps_taken = 0;  // trajectory length minus the start point
  std::optional<Trajectory> trajectory;

  bool base_correct() const { return base_prediction == truth; }
  bool final_correct() const { return final_prediction == truth; }
};

struct EvalResult {
  std::string name;
  StrategySpec strategy;
  std::size_t expert_count = 0;
  std::vector<SampleOutcome> samples;
  double accuracy = 0.0;
  double base_accuracy = 0.0;
  std::vector<double> per_task_accuracy;  // NaN for task types absent from the split
};

struct EvalOptions {
  bool retain_trajectories = true;
  int threads = 1;
};

/// Throws InvalidInput if a test sample's features also occur in the
/// reference set, or if a test sample carries no label.
EvalResult evaluate(const ToyMoE& model, const ReferenceSet& refset,
                    const std::vector<Sample>& test, const StrategySpec& strategy,
                    const EvalOptions& options = {}, std::string name = {});

struct TransitionCounts {
  std::size_t incorrect_to_correct = 0;
  std::size_t correct_to_incorrect = 0;
  std::size_t correct_to_correct = 0;
  std::size_t incorrect_to_incorrect = 0;

  std::size_t total() const {
    return incorrect_to_correct + correct_to_incorrect + correct_to_correct +
           incorrect_to_incorrect;
  }
  /// Cell percentages of the total, in the field order above.
  std::array<double, 4> percentages() const;
  void add(bool before, bool after);
};

struct TransitionTable {
  TransitionCounts overall;
  /// Entry s compares the base prediction with the prediction at trajectory
  /// step s; shorter trajectories hold their last prediction.
  std::vector<TransitionCounts> per_step;
};

/// per_step requires retained trajectories (InvalidInput otherwise).
TransitionTable transitions(const EvalResult& result, bool per_step);

struct ExpertShiftMatrix {
  std::size_t experts = 0;
  // Row-major E x E: row = initial top-1, column = final top-1.
  std::vector<std::size_t> to_correct;
  std::vector<std::size_t> to_incorrect;
  std::vector<std::size_t> initial_top1;
  std::vector<std::size_t> final_top1;
  double initial_entropy = 0.0;  // nats
  double final_entropy = 0.0;

  std::size_t at(const std::vector<std::size_t>& m, std::size_t from, std::size_t to) const {
    return m[from * experts + to];
  }
};

ExpertShiftMatrix expert_shift(const EvalResult& result);

/// Shannon entropy in nats of a count histogram; 0 for an empty histogram.
double entropy(const std::vector<std::size_t>& counts);

enum class SweepAxis { k, epsilon, kernel, steps, schedule };

std::string to_string(SweepAxis axis);
SweepAxis sweep_axis_from_string(const std::string& name);

/// Applies one textual axis value to a copy of base. Values: k and steps are
/// positive integers, epsilon a positive real (switches to an epsilon ball),
/// kernel one of gaussian, matern[:nu], linear, polynomial[:degree], schedule
/// one of cosine, step_decay, fixed. Throws InvalidInput on a bad value.
StrategySpec with_axis_value(const StrategySpec& base, SweepAxis axis, const std::string& value);

struct SweepRow {
  std::string value;
  double accuracy = 0.0;
  double base_accuracy = 0.0;
  double mean_forward_evals = 0.0;
  double mean_gradient_evals = 0.0;
};

/// Rows ranked by accuracy, descending; ties keep the order of values.
std::vector<SweepRow> sweep(const ToyMoE& model, const ReferenceSet& refset,
                            const std::vector<Sample>& test, SweepAxis axis,
                            const std::vector<std::string>& values, const StrategySpec& base,
                            const EvalOptions& options = {});

struct CostRow {
  std::string name;
  StrategyKind kind = StrategyKind::identity;
  double mean_forward_evals = 0.0;
  double mean_gradient_evals = 0.0;
  double mean_steps = 0.0;
};

std::vector<CostRow> cost_summary(const std::vector<EvalResult>& results);

/// Summary document with fields in a fixed order: strategy, accuracy,
/// transitions, expert_shift, cost. per_step as in transitions().
nlohmann::ordered_json summary_json(const EvalResult& result, bool per_step);

/// One JSON object per line per test sample.
void write_sample_records(std::ostream& out, const EvalResult& result);

}  // namespace rert
