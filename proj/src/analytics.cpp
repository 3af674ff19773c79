#include "rert/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <set>
#include <thread>

namespace rert {

namespace {

void check_disjoint(const ReferenceSet& refset, const std::vector<Sample>& test) {
  std::set<Vec> reference_features;
  for (const auto& e : refset.entries()) reference_features.insert(e.input().features());
  for (std::size_t i = 0; i < test.size(); ++i) {
    if (reference_features.count(test[i].input.features())) {
      throw InvalidInput("test sample " + std::to_string(i) + " also appears in the reference set");
    }
  }
}

SampleOutcome run_one(const ToyMoE& model, const ReferenceSet& refset, const Sample& sample,
                      const StrategySpec& strategy, bool retain) {
  // Only the oracle is handed the label.
  Sample unlabeled = sample;
  if (strategy.kind != StrategyKind::oracle_gd) unlabeled.label.reset();
  Applied applied = apply(strategy, model, refset, unlabeled);
  const Trajectory& t = applied.trajectory;

  SampleOutcome out;
  out.task_type = sample.input.task_type();
  out.truth = *sample.label;
  out.base_prediction = *t.steps.front().prediction;
  out.final_prediction = *t.steps.back().prediction;
  out.initial_top1 = t.steps.front().weights.top1();
  out.final_top1 = applied.final_weights.top1();
  out.final_weights = applied.final_weights;
  out.forward_evals = t.forward_evals;
  out.gradient_evals = t.gradient_evals;
  out.steps_taken = t.steps.size() - 1;
  if (retain) out.trajectory = std::move(applied.trajectory);
  return out;
}

}  // namespace

EvalResult evaluate(const ToyMoE& model, const ReferenceSet& refset,
                    const std::vector<Sample>& test, const StrategySpec& strategy,
                    const EvalOptions& options, std::string name) {
  strategy.validate();
  if (test.empty()) throw InvalidInput("empty test split");
  for (const auto& s : test) {
    if (!s.label) throw InvalidInput("test samples must be labeled for evaluation");
  }
  check_disjoint(refset, test);

  std::vector<std::optional<SampleOutcome>> slots(test.size());
  const std::size_t workers =
      std::clamp<std::size_t>(options.threads < 1 ? 1 : options.threads, 1, test.size());
  if (workers == 1) {
    for (std::size_t i = 0; i < test.size(); ++i) {
      slots[i] = run_one(model, refset, test[i], strategy, options.retain_trajectories);
    }
  } else {
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = w; i < test.size(); i += workers) {
            slots[i] = run_one(model, refset, test[i], strategy, options.retain_trajectories);
          }
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  EvalResult result;
  result.name = name.empty() ? to_string(strategy.kind) : std::move(name);
  result.strategy = strategy;
  result.expert_count = model.router.expert_count();
  result.samples.reserve(test.size());

  int task_count = 0;
  for (const auto& s : test) task_count = std::max(task_count, s.input.task_type() + 1);
  std::vector<std::size_t> task_correct(task_count, 0);
  std::vector<std::size_t> task_total(task_count, 0);
  std::size_t correct = 0;
  std::size_t base_correct = 0;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    SampleOutcome& o = *slots[i];
    o.index = i;
    correct += o.final_correct();
    base_correct += o.base_correct();
    task_correct[o.task_type] += o.final_correct();
    ++task_total[o.task_type];
    result.samples.push_back(std::move(o));
  }
  const double n = static_cast<double>(test.size());
  result.accuracy = static_cast<double>(correct) / n;
  result.base_accuracy = static_cast<double>(base_correct) / n;
  for (int t = 0; t < task_count; ++t) {
    result.per_task_accuracy.push_back(
        task_total[t] ? static_cast<double>(task_correct[t]) / static_cast<double>(task_total[t])
                      : std::numeric_limits<double>::quiet_NaN());
  }
  return result;
}

std::array<double, 4> TransitionCounts::percentages() const {
  const double n = static_cast<double>(total());
  if (n == 0) return {0, 0, 0, 0};
  return {100.0 * incorrect_to_correct / n, 100.0 * correct_to_incorrect / n,
          100.0 * correct_to_correct / n, 100.0 * incorrect_to_incorrect / n};
}

void TransitionCounts::add(bool before, bool after) {
  if (before && after) ++correct_to_correct;
  else if (before) ++correct_to_incorrect;
  else if (after) ++incorrect_to_correct;
  else ++incorrect_to_incorrect;
}

TransitionTable transitions(const EvalResult& result, bool per_step) {
  TransitionTable table;
  for (const auto& o : result.samples) table.overall.add(o.base_correct(), o.final_correct());
  if (!per_step) return table;

  std::size_t longest = 0;
  for (const auto& o : result.samples) {
    if (!o.trajectory) {
      throw InvalidInput("per-step transitions need retained trajectories");
    }
    longest = std::max(longest, o.trajectory->steps.size());
  }
  table.per_step.resize(longest);
  for (const auto& o : result.samples) {
    const auto& steps = o.trajectory->steps;
    for (std::size_t s = 0; s < longest; ++s) {
      const auto& step = steps[std::min(s, steps.size() - 1)];
      table.per_step[s].add(o.base_correct(), *step.prediction == o.truth);
    }
  }
  return table;
}

double entropy(const std::vector<std::size_t>& counts) {
  double total = 0;
  for (auto c : counts) total += static_cast<double>(c);
  if (total == 0) return 0.0;
  double h = 0.0;
  for (auto c : counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / total;
    h -= p * std::log(p);
  }
  return h;
}

ExpertShiftMatrix expert_shift(const EvalResult& result) {
  const std::size_t e = result.expert_count;
  ExpertShiftMatrix m;
  m.experts = e;
  m.to_correct.assign(e * e, 0);
  m.to_incorrect.assign(e * e, 0);
  m.initial_top1.assign(e, 0);
  m.final_top1.assign(e, 0);
  for (const auto& o : result.samples) {
    auto& cells = o.final_correct() ? m.to_correct : m.to_incorrect;
    ++cells[o.initial_top1 * e + o.final_top1];
    ++m.initial_top1[o.initial_top1];
    ++m.final_top1[o.final_top1];
  }
  m.initial_entropy = entropy(m.initial_top1);
  m.final_entropy = entropy(m.final_top1);
  return m;
}

std::string to_string(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::k: return "k";
    case SweepAxis::epsilon: return "epsilon";
    case SweepAxis::kernel: return "kernel";
    case SweepAxis::steps: return "steps";
    case SweepAxis::schedule: return "schedule";
  }
  return "?";
}

SweepAxis sweep_axis_from_string(const std::string& name) {
  for (auto a : {SweepAxis::k, SweepAxis::epsilon, SweepAxis::kernel, SweepAxis::steps,
                 SweepAxis::schedule}) {
    if (to_string(a) == name) return a;
  }
  throw InvalidInput("unknown sweep axis '" + name + "'");
}

namespace {

int parse_positive_int(const std::string& s) {
  std::size_t used = 0;
  int v = 0;
  try {
    v = std::stoi(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || s.empty() || v < 1) {
    throw InvalidInput("expected a positive integer, got '" + s + "'");
  }
  return v;
}

double parse_positive_real(const std::string& s) {
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || s.empty() || !(v > 0) || !std::isfinite(v)) {
    throw InvalidInput("expected a positive real, got '" + s + "'");
  }
  return v;
}

}  // namespace

StrategySpec with_axis_value(const StrategySpec& base, SweepAxis axis, const std::string& value) {
  StrategySpec s = base;
  switch (axis) {
    case SweepAxis::k:
      s.neighborhood.mode = NeighborhoodMode::knn;
      s.neighborhood.k = parse_positive_int(value);
      break;
    case SweepAxis::epsilon:
      s.neighborhood.mode = NeighborhoodMode::epsilon_ball;
      s.neighborhood.epsilon = parse_positive_real(value);
      break;
    case SweepAxis::kernel: {
      const auto colon = value.find(':');
      const std::string family = value.substr(0, colon);
      KernelSpec k;
      k.family = kernel_family_from_string(family);
      k.fixed_bandwidth = base.kernel.fixed_bandwidth;
      if (colon != std::string::npos) {
        const std::string param = value.substr(colon + 1);
        if (k.family == KernelFamily::matern) k.matern_nu = parse_positive_real(param);
        else if (k.family == KernelFamily::polynomial) k.polynomial_degree = parse_positive_int(param);
        else throw InvalidInput("kernel '" + family + "' takes no parameter");
      }
      s.kernel = k;
      break;
    }
    case SweepAxis::steps:
      s.schedule.step_count = parse_positive_int(value);
      s.mode_max_steps = s.schedule.step_count;
      break;
    case SweepAxis::schedule:
      s.schedule.family = schedule_family_from_string(value);
      break;
  }
  s.validate();
  return s;
}

std::vector<SweepRow> sweep(const ToyMoE& model, const ReferenceSet& refset,
                            const std::vector<Sample>& test, SweepAxis axis,
                            const std::vector<std::string>& values, const StrategySpec& base,
                            const EvalOptions& options) {
  if (values.empty()) throw InvalidInput("sweep needs at least one value");
  std::vector<StrategySpec> specs;
  for (const auto& v : values) specs.push_back(with_axis_value(base, axis, v));

  EvalOptions light = options;
  light.retain_trajectories = false;
  std::vector<SweepRow> rows;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const EvalResult r = evaluate(model, refset, test, specs[i], light);
    const auto cost = cost_summary({r}).front();
    rows.push_back({values[i], r.accuracy, r.base_accuracy, cost.mean_forward_evals,
                    cost.mean_gradient_evals});
  }
  std::stable_sort(rows.begin(), rows.end(),
                   [](const SweepRow& a, const SweepRow& b) { return a.accuracy > b.accuracy; });
  return rows;
}

std::vector<CostRow> cost_summary(const std::vector<EvalResult>& results) {
  std::vector<CostRow> rows;
  for (const auto& r : results) {
    CostRow row;
    row.name = r.name;
    row.kind = r.strategy.kind;
    double fwd = 0, grad = 0, steps = 0;
    for (const auto& o : r.samples) {
      fwd += static_cast<double>(o.forward_evals);
      grad += static_cast<double>(o.gradient_evals);
      steps += static_cast<double>(o.steps_taken);
    }
    const double n = r.samples.empty() ? 1.0 : static_cast<double>(r.samples.size());
    row.mean_forward_evals = fwd / n;
    row.mean_gradient_evals = grad / n;
    row.mean_steps = steps / n;
    rows.push_back(row);
  }
  return rows;
}

namespace {

nlohmann::ordered_json counts_json(const TransitionCounts& c) {
  const auto pct = c.percentages();
  nlohmann::ordered_json j;
  j["incorrect_to_correct"] = c.incorrect_to_correct;
  j["correct_to_incorrect"] = c.correct_to_incorrect;
  j["correct_to_correct"] = c.correct_to_correct;
  j["incorrect_to_incorrect"] = c.incorrect_to_incorrect;
  j["percent"] = {pct[0], pct[1], pct[2], pct[3]};
  return j;
}

nlohmann::ordered_json matrix_json(const std::vector<std::size_t>& m, std::size_t e) {
  auto rows = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < e; ++i) {
    rows.push_back(std::vector<std::size_t>(m.begin() + i * e, m.begin() + (i + 1) * e));
  }
  return rows;
}

}  // namespace

nlohmann::ordered_json summary_json(const EvalResult& result, bool per_step) {
  nlohmann::ordered_json j;
  j["strategy"] = result.name;
  j["kind"] = to_string(result.strategy.kind);

  nlohmann::ordered_json acc;
  acc["final"] = result.accuracy;
  acc["base"] = result.base_accuracy;
  acc["per_task"] = nlohmann::ordered_json::array();
  for (double a : result.per_task_accuracy) {
    if (std::isnan(a)) acc["per_task"].push_back(nullptr);
    else acc["per_task"].push_back(a);
  }
  acc["samples"] = result.samples.size();
  j["accuracy"] = acc;

  const TransitionTable table = transitions(result, per_step);
  nlohmann::ordered_json tr;
  tr["overall"] = counts_json(table.overall);
  tr["per_step"] = nlohmann::ordered_json::array();
  for (const auto& c : table.per_step) tr["per_step"].push_back(counts_json(c));
  j["transitions"] = tr;

  const ExpertShiftMatrix m = expert_shift(result);
  nlohmann::ordered_json es;
  es["experts"] = m.experts;
  es["to_correct"] = matrix_json(m.to_correct, m.experts);
  es["to_incorrect"] = matrix_json(m.to_incorrect, m.experts);
  es["initial_top1"] = m.initial_top1;
  es["final_top1"] = m.final_top1;
  es["initial_entropy"] = m.initial_entropy;
  es["final_entropy"] = m.final_entropy;
  j["expert_shift"] = es;

  const CostRow cost = cost_summary({result}).front();
  nlohmann::ordered_json c;
  c["mean_forward_evals"] = cost.mean_forward_evals;
  c["mean_gradient_evals"] = cost.mean_gradient_evals;
  c["mean_steps"] = cost.mean_steps;
  j["cost"] = c;
  return j;
}

void write_sample_records(std::ostream& out, const EvalResult& result) {
  for (const auto& o : result.samples) {
    nlohmann::ordered_json j;
    j["index"] = o.index;
    j["task_type"] = o.task_type;
    j["label"] = o.truth.class_id;
    j["base_prediction"] = o.base_prediction.class_id;
    j["final_prediction"] = o.final_prediction.class_id;
    j["initial_top1"] = o.initial_top1;
    j["final_top1"] = o.final_top1;
    j["final_weights"] = o.final_weights.values();
    j["forward_evals"] = o.forward_evals;
    j["gradient_evals"] = o.gradient_evals;
    if (o.trajectory) {
      auto steps = nlohmann::ordered_json::array();
      for (const auto& s : o.trajectory->steps) steps.push_back(s.weights.values());
      j["trajectory"] = steps;
    }
    out << j.dump() << '\n';
  }
}

}  // namespace rert
