#include "rert/core.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace rert {

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

RoutingWeights::RoutingWeights(Vec weights) : weights_(std::move(weights)) {
  if (weights_.size() < 2) {
    throw InvalidInput("routing weights need at least 2 experts");
  }
  double sum = 0.0;
  for (double w : weights_) {
    if (!std::isfinite(w) || w < 0.0) {
      throw InvalidInput("routing weights must be finite and non-negative");
    }
    sum += w;
  }
  if (std::abs(sum - 1.0) > kSimplexTolerance) {
    throw InvalidInput("routing weights must sum to 1");
  }
}

RoutingWeights RoutingWeights::uniform(std::size_t experts) {
  return RoutingWeights(Vec(experts, 1.0 / static_cast<double>(experts)));
}

RoutingWeights RoutingWeights::one_hot(std::size_t experts, std::size_t hot) {
  if (hot >= experts) throw InvalidInput("one_hot index out of range");
  Vec w(experts, 0.0);
  w[hot] = 1.0;
  return RoutingWeights(std::move(w));
}

std::size_t RoutingWeights::top1() const {
  return static_cast<std::size_t>(std::max_element(weights_.begin(), weights_.end()) -
                                  weights_.begin());
}

TaskEmbedding::TaskEmbedding(Vec values) : values_(std::move(values)) {
  if (values_.empty() || !all_finite(values_)) {
    throw InvalidInput("task embedding must be non-empty and finite");
  }
}

ModelInput::ModelInput(Vec features, int task_type)
    : features_(std::move(features)), task_type_(task_type) {
  if (!all_finite(features_)) throw InvalidInput("model input features must be finite");
  if (task_type_ < 0) throw InvalidInput("task type must be non-negative");
}

RoutingWeights simplex_project(std::span<const double> v) {
  if (v.size() < 2) throw InvalidInput("simplex projection needs at least 2 entries");
  if (!all_finite(v)) throw InvalidInput("simplex projection of non-finite vector");

  const bool non_negative = std::all_of(v.begin(), v.end(), [](double x) { return x >= 0.0; });
  const double total = std::accumulate(v.begin(), v.end(), 0.0);
  if (non_negative && std::abs(total - 1.0) <= 1e-12) {
    return RoutingWeights(Vec(v.begin(), v.end()));
  }

  Vec sorted(v.begin(), v.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double running = 0.0;
  double theta = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    running += sorted[i];
    const double candidate = (running - 1.0) / static_cast<double>(i + 1);
    if (sorted[i] - candidate > 0.0) theta = candidate;
  }
  Vec out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::max(v[i] - theta, 0.0);
  return RoutingWeights(std::move(out));
}

RoutingWeights interpolate(const RoutingWeights& a, const RoutingWeights& b, double alpha) {
  if (a.size() != b.size()) throw InvalidInput("interpolate: dimension mismatch");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw InvalidInput("interpolate: alpha outside [0,1]");
  if (alpha == 1.0) return a;
  if (alpha == 0.0) return b;
  Vec out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = alpha * a[i] + (1.0 - alpha) * b[i];
  return RoutingWeights(std::move(out));
}

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

RngStream::RngStream(Seed seed, std::uint64_t stream_id)
    : engine_(mix64(mix64(seed.value) ^ mix64(stream_id + 0x632be59bd9b4e019ULL))) {}

double RngStream::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

std::uint64_t RngStream::below(std::uint64_t n) {
  if (n == 0) throw InvalidInput("below(0)");
  // Rejection sampling keeps the draw unbiased.
  const std::uint64_t limit = (~std::uint64_t{0}) - ((~std::uint64_t{0}) % n);
  std::uint64_t x = engine_();
  while (x >= limit) x = engine_();
  return x % n;
}

double RngStream::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

RngStream rng_stream(Seed seed, std::uint64_t stream_id) { return RngStream(seed, stream_id); }

}  // namespace rert
