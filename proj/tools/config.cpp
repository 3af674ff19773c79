#include "config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

namespace rert::cli {

namespace {

class Reader {
 public:
  explicit Reader(std::string origin) : origin_(std::move(origin)) {}

  [[noreturn]] void fail(const YAML::Node& at, const std::string& msg) const {
    const auto mark = at.Mark();
    std::string where = origin_;
    if (mark.line >= 0) where += ":" + std::to_string(mark.line + 1);
    throw ConfigError(where + ": " + msg);
  }

  void expect_map(const YAML::Node& node, const std::string& what) const {
    if (!node.IsMap()) fail(node, what + " must be a mapping");
  }

  void allow_only(const YAML::Node& map, const std::set<std::string>& keys) const {
    for (const auto& kv : map) {
      const auto key = kv.first.as<std::string>();
      if (!keys.count(key)) fail(kv.first, "unknown key '" + key + "'");
    }
  }

  template <typename T>
  T scalar(const YAML::Node& node, const std::string& key) const {
    if (!node.IsScalar()) fail(node, "'" + key + "' must be a scalar");
    try {
      return node.as<T>();
    } catch (const YAML::BadConversion&) {
      fail(node, "'" + key + "' has an invalid value '" + node.Scalar() + "'");
    }
  }

  template <typename T>
  void read(const YAML::Node& map, const std::string& key, T& out) const {
    if (const auto node = map[key]) out = scalar<T>(node, key);
  }

  /// Wraps a domain validation error with the node's position.
  template <typename F>
  void checked(const YAML::Node& at, F&& f) const {
    try {
      f();
    } catch (const ConfigError&) {
      throw;
    } catch (const InvalidInput& e) {
      fail(at, e.what());
    }
  }

 private:
  std::string origin_;
};

void read_bench(const Reader& r, const YAML::Node& node, BenchSpec& b) {
  r.expect_map(node, "benchmark");
  r.allow_only(node, {"task_types", "reference_per_type", "test_per_type", "feature_dim",
                      "expert_count", "class_count", "embedding_noise_sigma", "skew_expert",
                      "skew_strength", "task_feature_shift", "label_margin", "support_size",
                      "expert_logit_scale", "router_init_scale", "router_epochs",
                      "router_learning_rate", "reference_cap"});
  r.read(node, "task_types", b.task_types);
  r.read(node, "reference_per_type", b.reference_per_type);
  r.read(node, "test_per_type", b.test_per_type);
  r.read(node, "feature_dim", b.feature_dim);
  r.read(node, "expert_count", b.expert_count);
  r.read(node, "class_count", b.class_count);
  r.read(node, "embedding_noise_sigma", b.embedding_noise_sigma);
  r.read(node, "skew_expert", b.skew_expert);
  r.read(node, "skew_strength", b.skew_strength);
  r.read(node, "task_feature_shift", b.task_feature_shift);
  r.read(node, "label_margin", b.label_margin);
  r.read(node, "support_size", b.support_size);
  r.read(node, "expert_logit_scale", b.expert_logit_scale);
  r.read(node, "router_init_scale", b.router_init_scale);
  r.read(node, "router_epochs", b.router_epochs);
  r.read(node, "router_learning_rate", b.router_learning_rate);
  r.read(node, "reference_cap", b.reference_cap);
  r.checked(node, [&] { b.validate(); });
}

void read_neighborhood(const Reader& r, const YAML::Node& node, NeighborhoodSpec& n) {
  r.expect_map(node, "neighborhood");
  r.allow_only(node, {"mode", "k", "epsilon", "space"});
  if (const auto m = node["mode"]) {
    const auto v = r.scalar<std::string>(m, "mode");
    if (v == "knn") n.mode = NeighborhoodMode::knn;
    else if (v == "epsilon_ball") n.mode = NeighborhoodMode::epsilon_ball;
    else r.fail(m, "mode must be knn or epsilon_ball");
  }
  r.read(node, "k", n.k);
  r.read(node, "epsilon", n.epsilon);
  if (const auto s = node["space"]) {
    const auto v = r.scalar<std::string>(s, "space");
    if (v == "embedding") n.space = NeighborSpace::embedding;
    else if (v == "routing_weight") n.space = NeighborSpace::routing_weight;
    else r.fail(s, "space must be embedding or routing_weight");
  }
}

void read_kernel(const Reader& r, const YAML::Node& node, KernelSpec& k) {
  r.expect_map(node, "kernel");
  r.allow_only(node, {"family", "bandwidth", "degree", "nu"});
  if (const auto f = node["family"]) {
    r.checked(f, [&] { k.family = kernel_family_from_string(r.scalar<std::string>(f, "family")); });
  }
  if (const auto b = node["bandwidth"]) {
    if (b.IsScalar() && b.Scalar() == "median") k.fixed_bandwidth = 0.0;
    else k.fixed_bandwidth = r.scalar<double>(b, "bandwidth");
    if (!(k.fixed_bandwidth >= 0.0) || (b.Scalar() != "median" && k.fixed_bandwidth == 0.0)) {
      r.fail(b, "bandwidth must be 'median' or a positive number");
    }
  }
  r.read(node, "degree", k.polynomial_degree);
  r.read(node, "nu", k.matern_nu);
}

void read_schedule(const Reader& r, const YAML::Node& node, ScheduleSpec& s) {
  r.expect_map(node, "schedule");
  r.allow_only(node, {"family", "lr_max", "lr_min", "lr0", "factor", "period", "lr", "steps"});
  if (const auto f = node["family"]) {
    r.checked(f, [&] {
      s.family = schedule_family_from_string(r.scalar<std::string>(f, "family"));
    });
  }
  r.read(node, "lr_max", s.lr_max);
  r.read(node, "lr_min", s.lr_min);
  r.read(node, "lr0", s.lr0);
  r.read(node, "factor", s.factor);
  r.read(node, "period", s.period);
  r.read(node, "lr", s.lr);
  r.read(node, "steps", s.step_count);
}

StrategyEntry read_strategy(const Reader& r, const YAML::Node& node) {
  r.expect_map(node, "strategy");
  r.allow_only(node, {"name", "kind", "neighborhood", "kernel", "schedule", "mode_alpha",
                      "mode_max_steps", "mode_tol", "linesearch_iters", "fixed_alpha"});
  const auto kind_node = node["kind"];
  if (!kind_node) r.fail(node, "strategy needs a 'kind'");
  StrategyKind kind{};
  r.checked(kind_node, [&] {
    kind = strategy_kind_from_string(r.scalar<std::string>(kind_node, "kind"));
  });
  StrategyEntry e{to_string(kind), StrategySpec::defaults(kind)};
  r.read(node, "name", e.name);
  if (const auto n = node["neighborhood"]) read_neighborhood(r, n, e.spec.neighborhood);
  if (const auto k = node["kernel"]) read_kernel(r, k, e.spec.kernel);
  if (const auto s = node["schedule"]) read_schedule(r, s, e.spec.schedule);
  r.read(node, "mode_alpha", e.spec.mode_alpha);
  r.read(node, "mode_max_steps", e.spec.mode_max_steps);
  r.read(node, "mode_tol", e.spec.mode_tol);
  r.read(node, "linesearch_iters", e.spec.linesearch_iters);
  if (const auto a = node["fixed_alpha"]) e.spec.fixed_alpha = r.scalar<double>(a, "fixed_alpha");
  r.checked(node, [&] { e.spec.validate(); });
  return e;
}

SweepEntry read_sweep(const Reader& r, const YAML::Node& node) {
  r.expect_map(node, "sweep");
  r.allow_only(node, {"strategy", "axis", "values"});
  SweepEntry s;
  if (!node["strategy"] || !node["axis"] || !node["values"]) {
    r.fail(node, "sweep needs 'strategy', 'axis' and 'values'");
  }
  s.strategy = r.scalar<std::string>(node["strategy"], "strategy");
  r.checked(node["axis"], [&] {
    s.axis = sweep_axis_from_string(r.scalar<std::string>(node["axis"], "axis"));
  });
  const auto values = node["values"];
  if (!values.IsSequence() || values.size() == 0) r.fail(values, "values must be a non-empty list");
  for (const auto& v : values) s.values.push_back(r.scalar<std::string>(v, "values"));
  return s;
}

}  // namespace

void ExperimentConfig::validate() const {
  try {
    bench.validate();
    for (const auto& s : strategies) s.spec.validate();
  } catch (const InvalidInput& e) {
    throw ConfigError(e.what());
  }
  if (strategies.empty()) throw ConfigError("at least one strategy is required");
  std::set<std::string> names;
  for (const auto& s : strategies) {
    if (s.name.empty()) throw ConfigError("strategy names must be non-empty");
    if (s.name.find_first_of("/\\ \t") != std::string::npos || s.name[0] == '.') {
      throw ConfigError("strategy name '" + s.name + "' is not usable as a file name");
    }
    if (!names.insert(s.name).second) throw ConfigError("duplicate strategy name '" + s.name + "'");
  }
  for (const auto& sw : sweeps) {
    const auto it = std::find_if(strategies.begin(), strategies.end(),
                                 [&](const StrategyEntry& e) { return e.name == sw.strategy; });
    if (it == strategies.end()) {
      throw ConfigError("sweep refers to unknown strategy '" + sw.strategy + "'");
    }
    try {
      for (const auto& v : sw.values) with_axis_value(it->spec, sw.axis, v);
    } catch (const InvalidInput& e) {
      throw ConfigError("sweep over " + to_string(sw.axis) + " of '" + sw.strategy + "': " + e.what());
    }
  }
  if (output_dir.empty()) throw ConfigError("output must be non-empty");
  if (threads < 1) throw ConfigError("threads must be at least 1");
  if (per_step_transitions && !retain_trajectories) {
    throw ConfigError(
        "per_step_transitions needs retain_trajectories: per-step predictions are read from the "
        "stored trajectories");
  }
}

ExperimentConfig default_config() {
  ExperimentConfig c;
  c.strategies = {
      {"base", StrategySpec::defaults(StrategyKind::identity)},
      {"mode_finding", StrategySpec::defaults(StrategyKind::mode_finding)},
      {"kernel_regression", StrategySpec::defaults(StrategyKind::kernel_regression)},
      {"ngd", StrategySpec::defaults(StrategyKind::ngd)},
      {"oracle_gd", StrategySpec::defaults(StrategyKind::oracle_gd)},
  };
  return c;
}

ExperimentConfig parse_config(const std::string& text, const std::string& origin) {
  const Reader r(origin);
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError(origin + ":" + std::to_string(e.mark.line + 1) + ": " + e.msg);
  }
  ExperimentConfig c = default_config();
  if (root.IsNull()) return c;
  r.expect_map(root, "config");
  r.allow_only(root, {"seed", "output", "threads", "retain_trajectories", "per_step_transitions",
                      "benchmark", "strategies", "sweeps"});
  if (const auto s = root["seed"]) c.bench.seed.value = r.scalar<std::uint64_t>(s, "seed");
  r.read(root, "output", c.output_dir);
  r.read(root, "threads", c.threads);
  r.read(root, "retain_trajectories", c.retain_trajectories);
  r.read(root, "per_step_transitions", c.per_step_transitions);
  if (const auto b = root["benchmark"]) read_bench(r, b, c.bench);
  if (const auto list = root["strategies"]) {
    if (!list.IsSequence()) r.fail(list, "strategies must be a list");
    c.strategies.clear();
    for (const auto& n : list) c.strategies.push_back(read_strategy(r, n));
  }
  if (const auto list = root["sweeps"]) {
    if (!list.IsSequence()) r.fail(list, "sweeps must be a list");
    for (const auto& n : list) c.sweeps.push_back(read_sweep(r, n));
  }
  try {
    c.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(origin + ": " + e.what());
  }
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot read config file");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path);
}

namespace {

const char* mode_name(NeighborhoodMode m) {
  return m == NeighborhoodMode::knn ? "knn" : "epsilon_ball";
}

const char* space_name(NeighborSpace s) {
  return s == NeighborSpace::embedding ? "embedding" : "routing_weight";
}

}  // namespace

std::string emit_config(const ExperimentConfig& c) {
  YAML::Emitter out;
  out.SetDoublePrecision(17);
  out << YAML::BeginMap;
  out << YAML::Key << "seed" << YAML::Value << c.bench.seed.value;
  out << YAML::Key << "output" << YAML::Value << c.output_dir;
  out << YAML::Key << "threads" << YAML::Value << c.threads;
  out << YAML::Key << "retain_trajectories" << YAML::Value << c.retain_trajectories;
  out << YAML::Key << "per_step_transitions" << YAML::Value << c.per_step_transitions;

  const BenchSpec& b = c.bench;
  out << YAML::Key << "benchmark" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "task_types" << YAML::Value << b.task_types;
  out << YAML::Key << "reference_per_type" << YAML::Value << b.reference_per_type;
  out << YAML::Key << "test_per_type" << YAML::Value << b.test_per_type;
  out << YAML::Key << "feature_dim" << YAML::Value << b.feature_dim;
  out << YAML::Key << "expert_count" << YAML::Value << b.expert_count;
  out << YAML::Key << "class_count" << YAML::Value << b.class_count;
  out << YAML::Key << "embedding_noise_sigma" << YAML::Value << b.embedding_noise_sigma;
  out << YAML::Key << "skew_expert" << YAML::Value << b.skew_expert;
  out << YAML::Key << "skew_strength" << YAML::Value << b.skew_strength;
  out << YAML::Key << "task_feature_shift" << YAML::Value << b.task_feature_shift;
  out << YAML::Key << "label_margin" << YAML::Value << b.label_margin;
  out << YAML::Key << "support_size" << YAML::Value << b.support_size;
  out << YAML::Key << "expert_logit_scale" << YAML::Value << b.expert_logit_scale;
  out << YAML::Key << "router_init_scale" << YAML::Value << b.router_init_scale;
  out << YAML::Key << "router_epochs" << YAML::Value << b.router_epochs;
  out << YAML::Key << "router_learning_rate" << YAML::Value << b.router_learning_rate;
  out << YAML::Key << "reference_cap" << YAML::Value << b.reference_cap;
  out << YAML::EndMap;

  out << YAML::Key << "strategies" << YAML::Value << YAML::BeginSeq;
  for (const auto& e : c.strategies) {
    const StrategySpec& s = e.spec;
    out << YAML::BeginMap;
    out << YAML::Key << "name" << YAML::Value << e.name;
    out << YAML::Key << "kind" << YAML::Value << to_string(s.kind);
    out << YAML::Key << "neighborhood" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "mode" << YAML::Value << mode_name(s.neighborhood.mode);
    out << YAML::Key << "k" << YAML::Value << s.neighborhood.k;
    out << YAML::Key << "epsilon" << YAML::Value << s.neighborhood.epsilon;
    out << YAML::Key << "space" << YAML::Value << space_name(s.neighborhood.space);
    out << YAML::EndMap;
    out << YAML::Key << "kernel" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "family" << YAML::Value << to_string(s.kernel.family);
    if (s.kernel.uses_median_bandwidth()) out << YAML::Key << "bandwidth" << YAML::Value << "median";
    else out << YAML::Key << "bandwidth" << YAML::Value << s.kernel.fixed_bandwidth;
    out << YAML::Key << "degree" << YAML::Value << s.kernel.polynomial_degree;
    out << YAML::Key << "nu" << YAML::Value << s.kernel.matern_nu;
    out << YAML::EndMap;
    out << YAML::Key << "schedule" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "family" << YAML::Value << to_string(s.schedule.family);
    out << YAML::Key << "lr_max" << YAML::Value << s.schedule.lr_max;
    out << YAML::Key << "lr_min" << YAML::Value << s.schedule.lr_min;
    out << YAML::Key << "lr0" << YAML::Value << s.schedule.lr0;
    out << YAML::Key << "factor" << YAML::Value << s.schedule.factor;
    out << YAML::Key << "period" << YAML::Value << s.schedule.period;
    out << YAML::Key << "lr" << YAML::Value << s.schedule.lr;
    out << YAML::Key << "steps" << YAML::Value << s.schedule.step_count;
    out << YAML::EndMap;
    out << YAML::Key << "mode_alpha" << YAML::Value << s.mode_alpha;
    out << YAML::Key << "mode_max_steps" << YAML::Value << s.mode_max_steps;
    out << YAML::Key << "mode_tol" << YAML::Value << s.mode_tol;
    out << YAML::Key << "linesearch_iters" << YAML::Value << s.linesearch_iters;
    if (s.fixed_alpha) out << YAML::Key << "fixed_alpha" << YAML::Value << *s.fixed_alpha;
    out << YAML::EndMap;
  }
  out << YAML::EndSeq;

  out << YAML::Key << "sweeps" << YAML::Value << YAML::BeginSeq;
  for (const auto& sw : c.sweeps) {
    out << YAML::BeginMap;
    out << YAML::Key << "strategy" << YAML::Value << sw.strategy;
    out << YAML::Key << "axis" << YAML::Value << to_string(sw.axis);
    out << YAML::Key << "values" << YAML::Value << YAML::Flow << sw.values;
    out << YAML::EndMap;
  }
  out << YAML::EndSeq;
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

}  // namespace rert::cli
