#include "rert/synthbench.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace rert {

namespace {

// Stream ids; per-sample streams are keyed off these with the sample's slot.
constexpr std::uint64_t kExpertStream = 1;
constexpr std::uint64_t kMixtureStream = 2;
constexpr std::uint64_t kRouterInitStream = 3;
constexpr std::uint64_t kSubsampleStream = 4;
constexpr std::uint64_t kTaskShiftStream = 5;
constexpr std::uint64_t kReferenceFeatures = 0x100;
constexpr std::uint64_t kTestFeatures = 0x200;
constexpr std::uint64_t kReferenceEmbedding = 0x300;
constexpr std::uint64_t kTestEmbedding = 0x400;
constexpr int kMaxMarginDraws = 10000;

std::uint64_t sample_stream(std::uint64_t base, int task, int index) {
  return mix64((base << 40) ^ (static_cast<std::uint64_t>(task) << 24) ^
               static_cast<std::uint64_t>(index));
}

GroundTruthMixture draw_mixtures(const BenchSpec& spec) {
  RngStream rng(spec.seed, kMixtureStream);
  const auto E = static_cast<std::size_t>(spec.expert_count);
  GroundTruthMixture gt;
  for (int attempt = 0;; ++attempt) {
    gt = {};
    std::set<std::vector<int>> distinct;
    for (int t = 0; t < spec.task_types; ++t) {
      std::vector<int> experts(E);
      std::iota(experts.begin(), experts.end(), 0);
      for (std::size_t i = 0; i < static_cast<std::size_t>(spec.support_size); ++i) {
        const auto pick = i + static_cast<std::size_t>(rng.below(E - i));
        std::swap(experts[i], experts[pick]);
      }
      std::vector<int> support(experts.begin(), experts.begin() + spec.support_size);
      std::sort(support.begin(), support.end());
      Vec w(E, 0.0);
      double total = 0.0;
      for (int j : support) {
        w[static_cast<std::size_t>(j)] = 0.3 + 0.7 * rng.uniform();
        total += w[static_cast<std::size_t>(j)];
      }
      for (double& v : w) v /= total;
      gt.per_task.push_back(simplex_project(w));
      distinct.insert(support);
      gt.support.push_back(std::move(support));
    }
    const bool supports_differ = spec.task_types < 2 || distinct.size() >= 2 ||
                                 spec.support_size == spec.expert_count;
    if (supports_differ || attempt > 1000) return gt;
  }
}

ExpertBank draw_experts(const BenchSpec& spec) {
  RngStream rng(spec.seed, kExpertStream);
  const auto D = static_cast<std::size_t>(spec.feature_dim);
  const auto C = static_cast<std::size_t>(spec.class_count);
  const double weight_sd = spec.expert_logit_scale / std::sqrt(static_cast<double>(D));
  const double bias_sd = 0.1 * spec.expert_logit_scale;
  std::vector<Expert> experts;
  for (int j = 0; j < spec.expert_count; ++j) {
    Expert e{Vec(C * D), Vec(C)};
    for (double& v : e.weight) v = weight_sd * rng.normal();
    for (double& v : e.bias) v = bias_sd * rng.normal();
    experts.push_back(std::move(e));
  }
  return ExpertBank(D, C, std::move(experts));
}

/// Per-task feature means: random directions of length task_feature_shift.
std::vector<Vec> draw_task_means(const BenchSpec& spec) {
  RngStream rng(spec.seed, kTaskShiftStream);
  std::vector<Vec> means;
  for (int t = 0; t < spec.task_types; ++t) {
    Vec m(static_cast<std::size_t>(spec.feature_dim));
    double norm = 0.0;
    for (double& v : m) {
      v = rng.normal();
      norm += v * v;
    }
    norm = std::sqrt(norm);
    for (double& v : m) v = norm > 0.0 ? spec.task_feature_shift * v / norm : 0.0;
    means.push_back(std::move(m));
  }
  return means;
}

std::vector<Sample> draw_pool(const BenchSpec& spec, const ExpertBank& bank,
                              const GroundTruthMixture& gt, int per_type,
                              std::uint64_t feature_base, std::uint64_t embedding_base) {
  std::vector<Sample> pool;
  pool.reserve(static_cast<std::size_t>(per_type * spec.task_types));
  const std::vector<Vec> means = draw_task_means(spec);
  for (int t = 0; t < spec.task_types; ++t) {
    for (int i = 0; i < per_type; ++i) {
      RngStream features_rng(spec.seed, sample_stream(feature_base, t, i));
      const Vec& mean = means[static_cast<std::size_t>(t)];
      const RoutingWeights& truth = gt.per_task[static_cast<std::size_t>(t)];
      Vec f(static_cast<std::size_t>(spec.feature_dim));
      for (int attempt = 0;; ++attempt) {
        for (std::size_t d = 0; d < f.size(); ++d) f[d] = mean[d] + features_rng.normal();
        if (spec.label_margin <= 0.0 || attempt >= kMaxMarginDraws) break;
        Vec z = mix_logits(expert_logits(bank, ModelInput(f, t)), truth.span());
        std::partial_sort(z.begin(), z.begin() + 2, z.end(), std::greater<>());
        if (z[0] - z[1] >= spec.label_margin * spec.expert_logit_scale) break;
      }
      ModelInput x(std::move(f), t);
      RngStream embed_rng(spec.seed, sample_stream(embedding_base, t, i));
      TaskEmbedding emb = embed(x, spec, embed_rng);
      const Label y = predict(bank, x, gt.per_task[static_cast<std::size_t>(t)]);
      pool.push_back({std::move(x), std::move(emb), y});
    }
  }
  return pool;
}

}  // namespace

void BenchSpec::validate() const {
  if (task_types < 1 || reference_per_type < 1 || test_per_type < 1 || feature_dim < 1 ||
      class_count < 2 || expert_count < 2 || reference_cap < 1 || router_epochs < 0) {
    throw InvalidInput("bench counts must be positive (C, E >= 2)");
  }
  if (!(embedding_noise_sigma >= 0.0)) throw InvalidInput("embedding noise must be >= 0");
  if (skew_expert < 0 || skew_expert >= expert_count) {
    throw InvalidInput("skew expert must be in [0, E)");
  }
  if (support_size < 1 || support_size > expert_count) {
    throw InvalidInput("support size must be in [1, E]");
  }
  if (!(label_margin >= 0.0)) throw InvalidInput("label margin must be >= 0");
  if (!(task_feature_shift >= 0.0)) throw InvalidInput("task feature shift must be >= 0");
  if (!(expert_logit_scale > 0.0) || !(router_learning_rate > 0.0) || !(skew_strength >= 0.0)) {
    throw InvalidInput("logit scale and router learning rate must be positive, skew >= 0");
  }
}

TaskEmbedding embed(const ModelInput& x, const BenchSpec& spec, RngStream& stream) {
  if (x.task_type() >= spec.task_types) throw InvalidInput("embed: task type out of range");
  Vec e(static_cast<std::size_t>(spec.task_types), 0.0);
  e[static_cast<std::size_t>(x.task_type())] = 1.0;
  if (spec.embedding_noise_sigma > 0.0) {
    for (double& v : e) v += spec.embedding_noise_sigma * stream.normal();
  }
  return TaskEmbedding(std::move(e));
}

Benchmark generate(const BenchSpec& spec) {
  spec.validate();
  ExpertBank bank = draw_experts(spec);
  GroundTruthMixture gt = draw_mixtures(spec);
  auto reference =
      draw_pool(spec, bank, gt, spec.reference_per_type, kReferenceFeatures, kReferenceEmbedding);
  auto test = draw_pool(spec, bank, gt, spec.test_per_type, kTestFeatures, kTestEmbedding);
  return {spec, std::move(bank), std::move(gt), std::move(reference), std::move(test)};
}

Router train_router(const std::vector<Sample>& pool, const ExpertBank& bank,
                    const BenchSpec& spec) {
  if (pool.empty()) throw InvalidInput("train_router: empty pool");
  std::set<int> classes;
  for (const auto& s : pool) {
    if (!s.label) throw InvalidInput("train_router: pool samples need labels");
    classes.insert(s.label->class_id);
  }
  if (classes.size() < 2) throw InvalidInput("train_router: pool has a single class");

  const auto D = bank.feature_dim();
  const auto E = bank.expert_count();
  const auto N = static_cast<double>(pool.size());
  const auto target = static_cast<std::size_t>(spec.skew_expert);

  std::vector<ExpertLogits> logits;
  logits.reserve(pool.size());
  for (const auto& s : pool) logits.push_back(expert_logits(bank, s.input));

  RngStream rng(spec.seed, kRouterInitStream);
  Vec weight(E * D);
  const double init_sd = spec.router_init_scale / std::sqrt(static_cast<double>(D));
  for (double& v : weight) v = init_sd * rng.normal();
  Vec bias(E, 0.0);

  // The cross-entropy gradient grows with the logit scale; dividing it out
  // keeps one learning rate usable across scales.
  const double rate = spec.router_learning_rate / spec.expert_logit_scale;
  for (int epoch = 0; epoch < spec.router_epochs; ++epoch) {
    Vec grad_w(E * D, 0.0);
    Vec grad_b(E, 0.0);
    for (std::size_t n = 0; n < pool.size(); ++n) {
      const auto& f = pool[n].input.features();
      Vec scores(bias);
      for (std::size_t j = 0; j < E; ++j) {
        for (std::size_t d = 0; d < D; ++d) scores[j] += weight[j * D + d] * f[d];
      }
      const Vec r = softmax(scores);
      Vec g = loss_and_grad(logits[n], r, *pool[n].label).grad;
      g[target] -= spec.skew_strength * spec.expert_logit_scale;
      const double mean_g = std::inner_product(r.begin(), r.end(), g.begin(), 0.0);
      for (std::size_t j = 0; j < E; ++j) {
        const double gs = r[j] * (g[j] - mean_g);
        grad_b[j] += gs;
        for (std::size_t d = 0; d < D; ++d) grad_w[j * D + d] += gs * f[d];
      }
    }
    for (std::size_t i = 0; i < weight.size(); ++i) weight[i] -= rate * grad_w[i] / N;
    for (std::size_t j = 0; j < E; ++j) bias[j] -= rate * grad_b[j] / N;
  }
  return Router(D, std::move(weight), std::move(bias));
}

ReferenceSet build_reference_set(const std::vector<Sample>& pool, const ExpertBank& bank,
                                 const RoutingFn& routing, int cap_per_type, Seed seed) {
  if (pool.empty()) throw InvalidInput("build_reference_set: empty pool");
  if (cap_per_type < 1) throw InvalidInput("build_reference_set: cap must be positive");

  std::vector<std::vector<std::size_t>> correct_by_type;
  std::vector<RoutingWeights> routed;
  routed.reserve(pool.size());
  for (std::size_t n = 0; n < pool.size(); ++n) {
    const Sample& s = pool[n];
    routed.push_back(routing(s));
    if (!s.label || predict(bank, s.input, routed.back()) != *s.label) continue;
    const auto t = static_cast<std::size_t>(s.input.task_type());
    if (correct_by_type.size() <= t) correct_by_type.resize(t + 1);
    correct_by_type[t].push_back(n);
  }

  RngStream rng(seed, kSubsampleStream);
  std::vector<std::size_t> kept;
  for (auto& members : correct_by_type) {
    if (members.size() > static_cast<std::size_t>(cap_per_type)) {
      // Partial Fisher-Yates, then restore pool order.
      for (std::size_t i = 0; i < static_cast<std::size_t>(cap_per_type); ++i) {
        const auto pick = i + static_cast<std::size_t>(rng.below(members.size() - i));
        std::swap(members[i], members[pick]);
      }
      members.resize(static_cast<std::size_t>(cap_per_type));
      std::sort(members.begin(), members.end());
    }
    kept.insert(kept.end(), members.begin(), members.end());
  }
  if (kept.empty()) throw EmptyReference("no pool sample is predicted correctly");
  std::sort(kept.begin(), kept.end());

  std::vector<ReferenceEntry> entries;
  entries.reserve(kept.size());
  for (std::size_t n : kept) {
    entries.push_back(ReferenceEntry::verified(bank, pool[n].input, pool[n].embedding, routed[n],
                                               *pool[n].label));
  }
  return seal(std::move(entries));
}

ReferenceSet build_reference_set(const std::vector<Sample>& pool, const ExpertBank& bank,
                                 const Router& router, int cap_per_type, Seed seed) {
  return build_reference_set(
      pool, bank, [&router](const Sample& s) { return route(router, s.input); }, cap_per_type,
      seed);
}

PreparedBenchmark prepare(const BenchSpec& spec) {
  Benchmark bench = generate(spec);
  Router router = train_router(bench.reference_pool, bench.bank, spec);
  ReferenceSet refset =
      build_reference_set(bench.reference_pool, bench.bank, router, spec.reference_cap, spec.seed);
  ToyMoE model{bench.bank, std::move(router)};
  return {std::move(bench), std::move(model), std::move(refset)};
}

double accuracy_at(const ToyMoE& model, const std::vector<Sample>& samples,
                   const RoutingFn& routing) {
  if (samples.empty()) return 0.0;
  std::size_t correct = 0;
  for (const auto& s : samples) {
    if (s.label && predict(model.bank, s.input, routing(s)) == *s.label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(samples.size());
}

}  // namespace rert
