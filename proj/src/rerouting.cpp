#include "rert/rerouting.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace rert {

void ScheduleSpec::validate() const {
  if (step_count < 1) throw InvalidInput("schedule step_count must be positive");
  switch (family) {
    case ScheduleFamily::cosine:
      if (!(lr_min > 0.0) || !(lr_max >= lr_min)) {
        throw InvalidInput("cosine schedule needs lr_max >= lr_min > 0");
      }
      break;
    case ScheduleFamily::step_decay:
      if (!(lr0 > 0.0) || !(factor > 0.0 && factor <= 1.0) || period < 1) {
        throw InvalidInput("step decay needs lr0 > 0, factor in (0,1], period >= 1");
      }
      break;
    case ScheduleFamily::fixed:
      if (!(lr > 0.0)) throw InvalidInput("fixed schedule needs lr > 0");
      break;
  }
}

std::string to_string(ScheduleFamily family) {
  switch (family) {
    case ScheduleFamily::cosine: return "cosine";
    case ScheduleFamily::step_decay: return "step_decay";
    case ScheduleFamily::fixed: return "fixed";
  }
  return "unknown";
}

ScheduleFamily schedule_family_from_string(const std::string& name) {
  if (name == "cosine") return ScheduleFamily::cosine;
  if (name == "step_decay") return ScheduleFamily::step_decay;
  if (name == "fixed") return ScheduleFamily::fixed;
  throw InvalidInput("unknown schedule family '" + name + "'");
}

double schedule_rate(const ScheduleSpec& spec, int step) {
  spec.validate();
  if (step < 0 || step >= spec.step_count) throw InvalidInput("schedule step out of range");
  switch (spec.family) {
    case ScheduleFamily::cosine: {
      if (spec.step_count == 1) return spec.lr_max;
      const double phase = std::numbers::pi * step / static_cast<double>(spec.step_count - 1);
      return spec.lr_min + 0.5 * (spec.lr_max - spec.lr_min) * (1.0 + std::cos(phase));
    }
    case ScheduleFamily::step_decay:
      return spec.lr0 * std::pow(spec.factor, step / spec.period);
    case ScheduleFamily::fixed:
      return spec.lr;
  }
  return 0.0;
}

std::string to_string(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::identity: return "identity";
    case StrategyKind::oracle_gd: return "oracle_gd";
    case StrategyKind::ngd: return "ngd";
    case StrategyKind::kernel_regression: return "kernel_regression";
    case StrategyKind::mode_finding: return "mode_finding";
  }
  return "unknown";
}

StrategyKind strategy_kind_from_string(const std::string& name) {
  if (name == "identity") return StrategyKind::identity;
  if (name == "oracle_gd") return StrategyKind::oracle_gd;
  if (name == "ngd") return StrategyKind::ngd;
  if (name == "kernel_regression") return StrategyKind::kernel_regression;
  if (name == "mode_finding") return StrategyKind::mode_finding;
  throw InvalidInput("unknown strategy kind '" + name + "'");
}

StrategySpec StrategySpec::defaults(StrategyKind kind) {
  StrategySpec spec;
  spec.kind = kind;
  if (kind == StrategyKind::mode_finding) {
    spec.neighborhood.space = NeighborSpace::routing_weight;
  }
  return spec;
}

void StrategySpec::validate() const {
  switch (kind) {
    case StrategyKind::identity:
      return;
    case StrategyKind::oracle_gd:
      schedule.validate();
      return;
    case StrategyKind::ngd:
      schedule.validate();
      [[fallthrough]];
    case StrategyKind::kernel_regression:
      neighborhood.validate();
      kernel.validate();
      if (neighborhood.space != NeighborSpace::embedding) {
        throw InvalidInput(to_string(kind) + " searches neighbors in embedding space");
      }
      if (kind == StrategyKind::kernel_regression) {
        if (linesearch_iters < 0) throw InvalidInput("linesearch_iters must be >= 0");
        if (fixed_alpha && !(*fixed_alpha >= 0.0 && *fixed_alpha <= 1.0)) {
          throw InvalidInput("fixed_alpha must lie in [0,1]");
        }
      }
      return;
    case StrategyKind::mode_finding:
      neighborhood.validate();
      kernel.validate();
      if (neighborhood.space != NeighborSpace::routing_weight) {
        throw InvalidInput("mode_finding searches neighbors in routing-weight space");
      }
      if (!(mode_alpha > 0.0 && mode_alpha < 1.0)) throw InvalidInput("mode_alpha must be in (0,1)");
      if (mode_max_steps < 1) throw InvalidInput("mode_max_steps must be positive");
      if (!(mode_tol >= 0.0)) throw InvalidInput("mode_tol must be non-negative");
      return;
  }
}

namespace {

RoutingWeights gradient_step(const RoutingWeights& r, const Vec& grad, double rate) {
  Vec next(r.size());
  for (std::size_t j = 0; j < r.size(); ++j) next[j] = r[j] - rate * grad[j];
  return simplex_project(next);
}

/// Neighbor logits are fixed across steps, so they are computed once.
std::vector<ExpertLogits> neighbor_logits(const ExpertBank& bank, const ReferenceSet& refset,
                                          const Neighborhood& hood) {
  std::vector<ExpertLogits> out;
  out.reserve(hood.size());
  for (std::size_t idx : hood.indices) out.push_back(expert_logits(bank, refset[idx].input()));
  return out;
}

double weighted_loss(const std::vector<ExpertLogits>& logits, const ReferenceSet& refset,
                     const Neighborhood& hood, const RoutingWeights& r) {
  double total = 0.0;
  for (std::size_t i = 0; i < hood.size(); ++i) {
    total += hood.kernel_weights[i] *
             loss_from_logits(logits[i], r.span(), refset[hood.indices[i]].label());
  }
  return total;
}

Trajectory no_op(const RoutingWeights& r0) {
  Trajectory t;
  t.steps.push_back({r0, std::nullopt, std::nullopt, std::nullopt});
  t.no_op = true;
  return t;
}

double max_abs_diff(const RoutingWeights& a, const RoutingWeights& b) {
  double m = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) m = std::max(m, std::abs(a[j] - b[j]));
  return m;
}

}  // namespace

Trajectory oracle_gd(const ExpertBank& bank, const ModelInput& x, Label y, const RoutingWeights& r0,
                     const StrategySpec& spec) {
  spec.schedule.validate();
  const ExpertLogits logits = expert_logits(bank, x);
  Trajectory t;
  RoutingWeights r = r0;
  for (int step = 0; step < spec.schedule.step_count; ++step) {
    const LossAndGrad lg = loss_and_grad(logits, r.span(), y);
    ++t.gradient_evals;
    t.steps.push_back({r, lg.loss, std::nullopt, std::nullopt});
    r = gradient_step(r, lg.grad, schedule_rate(spec.schedule, step));
  }
  t.steps.push_back({r, std::nullopt, std::nullopt, std::nullopt});
  return t;
}

Trajectory ngd(const ExpertBank& bank, const ReferenceSet& refset, const TaskEmbedding& embedding,
               const RoutingWeights& r0, const StrategySpec& spec) {
  spec.schedule.validate();
  Neighborhood hood = resolve(refset, embedding.values(), spec.neighborhood, spec.kernel);
  if (hood.empty()) return no_op(r0);

  std::vector<ExpertLogits> logits = neighbor_logits(bank, refset, hood);
  Trajectory t;
  t.neighborhood_size = hood.size();
  RoutingWeights r = r0;
  for (int step = 0; step < spec.schedule.step_count; ++step) {
    if (spec.reresolve_each_step) {
      if (step > 0) {
        hood = resolve(refset, embedding.values(), spec.neighborhood, spec.kernel);
        logits = neighbor_logits(bank, refset, hood);
      }
      t.resolved_neighbors.push_back(hood.indices);
    }
    Vec grad(r.size(), 0.0);
    double surrogate = 0.0;
    for (std::size_t i = 0; i < hood.size(); ++i) {
      const LossAndGrad lg = loss_and_grad(logits[i], r.span(), refset[hood.indices[i]].label());
      ++t.gradient_evals;
      const double w = hood.kernel_weights[i];
      surrogate += w * lg.loss;
      for (std::size_t j = 0; j < grad.size(); ++j) grad[j] += w * lg.grad[j];
    }
    t.steps.push_back({r, surrogate, std::nullopt, std::nullopt});
    r = gradient_step(r, grad, schedule_rate(spec.schedule, step));
  }
  t.steps.push_back({r, std::nullopt, std::nullopt, std::nullopt});
  return t;
}

RoutingWeights kernel_estimate(const ReferenceSet& refset, const Neighborhood& hood) {
  if (hood.empty()) throw InvalidInput("kernel estimate of an empty neighborhood");
  Vec acc(refset.expert_count(), 0.0);
  for (std::size_t i = 0; i < hood.size(); ++i) {
    const auto& ri = refset[hood.indices[i]].routing();
    for (std::size_t j = 0; j < acc.size(); ++j) acc[j] += hood.kernel_weights[i] * ri[j];
  }
  // Convex combination of simplex points; only rounding can push it off.
  return simplex_project(acc);
}

double surrogate_loss(const ExpertBank& bank, const ReferenceSet& refset,
                      const Neighborhood& hood, const RoutingWeights& r) {
  return weighted_loss(neighbor_logits(bank, refset, hood), refset, hood, r);
}

Trajectory kernel_regression(const ExpertBank& bank, const ReferenceSet& refset,
                             const TaskEmbedding& embedding, const RoutingWeights& r0,
                             const StrategySpec& spec) {
  const Neighborhood hood = resolve(refset, embedding.values(), spec.neighborhood, spec.kernel);
  if (hood.empty()) return no_op(r0);

  const RoutingWeights estimate = kernel_estimate(refset, hood);
  Trajectory t;
  t.neighborhood_size = hood.size();

  if (spec.fixed_alpha) {
    RoutingWeights r = interpolate(r0, estimate, *spec.fixed_alpha);
    t.steps.push_back({r0, std::nullopt, std::nullopt, 1.0});
    t.steps.push_back({r, std::nullopt, std::nullopt, *spec.fixed_alpha});
    return t;
  }

  const std::vector<ExpertLogits> logits = neighbor_logits(bank, refset, hood);
  double best_alpha = 1.0;
  double best_loss = 0.0;
  bool have_best = false;
  // Ties keep the earlier candidate, so r0 (evaluated first) wins exact ties.
  const auto evaluate = [&](double alpha) {
    RoutingWeights r = interpolate(r0, estimate, alpha);
    const double value = weighted_loss(logits, refset, hood, r);
    t.forward_evals += hood.size();
    t.steps.push_back({std::move(r), value, std::nullopt, alpha});
    if (!have_best || value < best_loss) {
      best_loss = value;
      best_alpha = alpha;
      have_best = true;
    }
    return value;
  };

  // Interval halving on [0, 1]: keep a centre point, probe the quarter points
  // and shrink to the half that holds the smallest value.
  evaluate(1.0);
  evaluate(0.0);
  double lo = 0.0;
  double hi = 1.0;
  double mid = 0.5;
  double mid_value = evaluate(mid);
  for (int it = 0; it < spec.linesearch_iters; ++it) {
    const double quarter = 0.25 * (hi - lo);
    const double left = mid - quarter;
    const double right = mid + quarter;
    const double left_value = evaluate(left);
    const double right_value = evaluate(right);
    if (left_value < mid_value) {
      hi = mid;
      mid = left;
      mid_value = left_value;
    } else if (right_value < mid_value) {
      lo = mid;
      mid = right;
      mid_value = right_value;
    } else {
      lo = left;
      hi = right;
    }
  }

  RoutingWeights chosen = interpolate(r0, estimate, best_alpha);
  t.steps.push_back({std::move(chosen), best_loss, std::nullopt, best_alpha});
  return t;
}

Trajectory mode_finding(const ReferenceSet& refset, const RoutingWeights& r0,
                        const StrategySpec& spec) {
  spec.validate();
  Trajectory t;
  RoutingWeights r = r0;
  t.steps.push_back({r, std::nullopt, std::nullopt, std::nullopt});
  for (int step = 0; step < spec.mode_max_steps; ++step) {
    const Neighborhood hood = resolve(refset, r.span(), spec.neighborhood, spec.kernel);
    if (hood.empty()) {
      if (step == 0) return no_op(r0);
      break;
    }
    t.neighborhood_size = hood.size();
    RoutingWeights next = interpolate(r, kernel_estimate(refset, hood), spec.mode_alpha);
    const double moved = max_abs_diff(next, r);
    r = std::move(next);
    t.steps.push_back({r, std::nullopt, std::nullopt, std::nullopt});
    if (moved < spec.mode_tol) break;
  }
  return t;
}

Applied apply(const StrategySpec& spec, const ToyMoE& model, const ReferenceSet& refset,
              const Sample& sample) {
  spec.validate();
  const RoutingWeights r0 = route(model.router, sample.input);
  Trajectory t;
  switch (spec.kind) {
    case StrategyKind::identity:
      t.steps.push_back({r0, std::nullopt, std::nullopt, std::nullopt});
      break;
    case StrategyKind::oracle_gd:
      if (!sample.label) throw InvalidInput("oracle_gd needs the true label");
      t = oracle_gd(model.bank, sample.input, *sample.label, r0, spec);
      break;
    case StrategyKind::ngd:
      t = ngd(model.bank, refset, sample.embedding, r0, spec);
      break;
    case StrategyKind::kernel_regression:
      t = kernel_regression(model.bank, refset, sample.embedding, r0, spec);
      break;
    case StrategyKind::mode_finding:
      t = mode_finding(refset, r0, spec);
      break;
  }
  const ExpertLogits logits = expert_logits(model.bank, sample.input);
  for (auto& step : t.steps) {
    step.prediction = argmax_label(softmax(mix_logits(logits, step.weights.span())));
  }
  RoutingWeights final_weights = t.final_weights();
  return {std::move(final_weights), std::move(t)};
}

}  // namespace rert
