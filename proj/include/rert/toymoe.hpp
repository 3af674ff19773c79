#pragma once

// A linear mixture-of-experts over class logits: each expert j maps x to
// W_j x + b_j, the routing weights mix those logits and a softmax turns the
// mixture into class probabilities. Logits are linear in r, so the
// cross-entropy is convex in r and its gradient is available in closed form.

#include <cstddef>
#include <vector>

#include "rert/core.hpp"

namespace rert {

struct Expert {
  Vec weight;  // classes x features, row-major
  Vec bias;    // classes
};

class ExpertBank {
 public:
  ExpertBank(std::size_t feature_dim, std::size_t class_count, std::vector<Expert> experts);

  std::size_t feature_dim() const { return feature_dim_; }
  std::size_t class_count() const { return class_count_; }
  std::size_t expert_count() const { return experts_.size(); }
  const std::vector<Expert>& experts() const { return experts_; }

 private:
  std::size_t feature_dim_;
  std::size_t class_count_;
  std::vector<Expert> experts_;
};

class Router {
 public:
  Router(std::size_t feature_dim, Vec weight, Vec bias);

  std::size_t feature_dim() const { return feature_dim_; }
  std::size_t expert_count() const { return bias_.size(); }
  const Vec& weight() const { return weight_; }  // experts x features, row-major
  const Vec& bias() const { return bias_; }

 private:
  std::size_t feature_dim_;
  Vec weight_;
  Vec bias_;
};

/// Per-expert logit vectors, expert-major: entry [j * C + c].
struct ExpertLogits {
  std::size_t experts = 0;
  std::size_t classes = 0;
  Vec values;

  std::span<const double> expert(std::size_t j) const {
    return std::span<const double>(values).subspan(j * classes, classes);
  }
};

Vec softmax(std::span<const double> logits);

ExpertLogits expert_logits(const ExpertBank& bank, const ModelInput& x);

/// Mixed logits sum_j r_j * logits_j.
Vec mix_logits(const ExpertLogits& logits, std::span<const double> r);

Vec forward(const ExpertBank& bank, const ModelInput& x, const RoutingWeights& r);

/// Argmax with the lowest class id winning ties.
Label argmax_label(std::span<const double> probabilities);

Label predict(const ExpertBank& bank, const ModelInput& x, const RoutingWeights& r);

/// Cross-entropy -log p_y, with p_y clamped below at 1e-300.
double loss(const ExpertBank& bank, const ModelInput& x, const RoutingWeights& r, Label y);

/// d loss / d r_j = <p - onehot(y), logits_j>.
Vec loss_grad_r(const ExpertBank& bank, const ModelInput& x, const RoutingWeights& r, Label y);

/// Loss and gradient from one forward pass over precomputed expert logits.
struct LossAndGrad {
  double loss = 0.0;
  Vec grad;
};
LossAndGrad loss_and_grad(const ExpertLogits& logits, std::span<const double> r, Label y);
double loss_from_logits(const ExpertLogits& logits, std::span<const double> r, Label y);

/// Router logits R x + bias, before the softmax.
Vec router_scores(const Router& router, const ModelInput& x);

RoutingWeights route(const Router& router, const ModelInput& x);

/// Frozen expert bank plus the trained router that produces initial weights.
struct ToyMoE {
  ExpertBank bank;
  Router router;
};

}  // namespace rert
