#include "rert/toymoe.hpp"

#include <algorithm>
#include <cmath>

namespace rert {

ExpertBank::ExpertBank(std::size_t feature_dim, std::size_t class_count,
                       std::vector<Expert> experts)
    : feature_dim_(feature_dim), class_count_(class_count), experts_(std::move(experts)) {
  if (feature_dim_ == 0 || class_count_ < 2 || experts_.empty()) {
    throw InvalidInput("expert bank needs D >= 1, C >= 2 and at least one expert");
  }
  for (const auto& e : experts_) {
    if (e.weight.size() != class_count_ * feature_dim_ || e.bias.size() != class_count_) {
      throw InvalidInput("expert parameter shapes are inconsistent");
    }
    if (!all_finite(e.weight) || !all_finite(e.bias)) {
      throw InvalidInput("expert parameters must be finite");
    }
  }
}

Router::Router(std::size_t feature_dim, Vec weight, Vec bias)
    : feature_dim_(feature_dim), weight_(std::move(weight)), bias_(std::move(bias)) {
  if (feature_dim_ == 0 || bias_.size() < 2 || weight_.size() != bias_.size() * feature_dim_) {
    throw InvalidInput("router parameter shapes are inconsistent");
  }
  if (!all_finite(weight_) || !all_finite(bias_)) {
    throw InvalidInput("router parameters must be finite");
  }
}

Vec softmax(std::span<const double> logits) {
  const double top = *std::max_element(logits.begin(), logits.end());
  Vec out(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - top);
    total += out[i];
  }
  for (double& v : out) v /= total;
  return out;
}

ExpertLogits expert_logits(const ExpertBank& bank, const ModelInput& x) {
  const std::size_t D = bank.feature_dim();
  const std::size_t C = bank.class_count();
  if (x.dim() != D) throw InvalidInput("expert_logits: feature dimension mismatch");
  ExpertLogits out{bank.expert_count(), C, Vec(bank.expert_count() * C)};
  const auto& f = x.features();
  for (std::size_t j = 0; j < bank.expert_count(); ++j) {
    const Expert& e = bank.experts()[j];
    for (std::size_t c = 0; c < C; ++c) {
      double acc = e.bias[c];
      const double* row = e.weight.data() + c * D;
      for (std::size_t d = 0; d < D; ++d) acc += row[d] * f[d];
      out.values[j * C + c] = acc;
    }
  }
  return out;
}

Vec mix_logits(const ExpertLogits& logits, std::span<const double> r) {
  if (r.size() != logits.experts) throw InvalidInput("routing weights do not match expert count");
  Vec z(logits.classes, 0.0);
  for (std::size_t j = 0; j < logits.experts; ++j) {
    const auto lj = logits.expert(j);
    for (std::size_t c = 0; c < logits.classes; ++c) z[c] += r[j] * lj[c];
  }
  return z;
}

Vec forward(const ExpertBank& bank, const ModelInput& x, const RoutingWeights& r) {
  return softmax(mix_logits(expert_logits(bank, x), r.span()));
}

Label argmax_label(std::span<const double> probabilities) {
  const auto it = std::max_element(probabilities.begin(), probabilities.end());
  return Label{static_cast<int>(it - probabilities.begin())};
}

Label predict(const ExpertBank& bank, const ModelInput& x, const RoutingWeights& r) {
  return argmax_label(forward(bank, x, r));
}

namespace {

void check_label(Label y, std::size_t classes) {
  if (y.class_id < 0 || static_cast<std::size_t>(y.class_id) >= classes) {
    throw InvalidInput("label outside [0, C)");
  }
}

}  // namespace

double loss_from_logits(const ExpertLogits& logits, std::span<const double> r, Label y) {
  check_label(y, logits.classes);
  const Vec p = softmax(mix_logits(logits, r));
  return -std::log(std::max(p[static_cast<std::size_t>(y.class_id)], 1e-300));
}

LossAndGrad loss_and_grad(const ExpertLogits& logits, std::span<const double> r, Label y) {
  check_label(y, logits.classes);
  Vec p = softmax(mix_logits(logits, r));
  const auto yi = static_cast<std::size_t>(y.class_id);
  LossAndGrad out;
  out.loss = -std::log(std::max(p[yi], 1e-300));
  p[yi] -= 1.0;
  out.grad.assign(logits.experts, 0.0);
  for (std::size_t j = 0; j < logits.experts; ++j) {
    const auto lj = logits.expert(j);
    double acc = 0.0;
    for (std::size_t c = 0; c < logits.classes; ++c) acc += p[c] * lj[c];
    out.grad[j] = acc;
  }
  return out;
}

double loss(const ExpertBank& bank, const ModelInput& x, const RoutingWeights& r, Label y) {
  return loss_from_logits(expert_logits(bank, x), r.span(), y);
}

Vec loss_grad_r(const ExpertBank& bank, const ModelInput& x, const RoutingWeights& r, Label y) {
  return loss_and_grad(expert_logits(bank, x), r.span(), y).grad;
}

Vec router_scores(const Router& router, const ModelInput& x) {
  const std::size_t D = router.feature_dim();
  if (x.dim() != D) throw InvalidInput("route: feature dimension mismatch");
  Vec s(router.bias());
  const auto& f = x.features();
  for (std::size_t j = 0; j < s.size(); ++j) {
    const double* row = router.weight().data() + j * D;
    for (std::size_t d = 0; d < D; ++d) s[j] += row[d] * f[d];
  }
  return s;
}

RoutingWeights route(const Router& router, const ModelInput& x) {
  Vec w = softmax(router_scores(router, x));
  // Softmax output sums to 1 up to rounding; snap it onto the simplex.
  return simplex_project(w);
}

}  // namespace rert
