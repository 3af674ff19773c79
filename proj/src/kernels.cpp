#include "rert/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace rert {

void KernelSpec::validate() const {
  if (family == KernelFamily::polynomial && polynomial_degree < 1) {
    throw InvalidInput("polynomial kernel degree must be >= 1");
  }
  if (family == KernelFamily::matern && matern_nu != 0.5 && matern_nu != 1.5 && matern_nu != 2.5) {
    throw InvalidInput("matern nu must be one of 0.5, 1.5, 2.5");
  }
  if (!std::isfinite(fixed_bandwidth)) throw InvalidInput("kernel bandwidth must be finite");
}

std::string to_string(KernelFamily family) {
  switch (family) {
    case KernelFamily::gaussian: return "gaussian";
    case KernelFamily::matern: return "matern";
    case KernelFamily::linear: return "linear";
    case KernelFamily::polynomial: return "polynomial";
  }
  return "unknown";
}

KernelFamily kernel_family_from_string(const std::string& name) {
  if (name == "gaussian") return KernelFamily::gaussian;
  if (name == "matern") return KernelFamily::matern;
  if (name == "linear") return KernelFamily::linear;
  if (name == "polynomial") return KernelFamily::polynomial;
  throw InvalidInput("unknown kernel family '" + name + "'");
}

double distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw InvalidInput("distance: dimension mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return std::sqrt(acc);
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw InvalidInput("dot: dimension mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double kernel_from_distance(const KernelSpec& spec, double dist, double bandwidth) {
  if (!(bandwidth > 0.0)) throw InvalidInput("kernel bandwidth must be positive");
  const double s = dist / bandwidth;
  switch (spec.family) {
    case KernelFamily::gaussian:
      return std::exp(-0.5 * s * s);
    case KernelFamily::matern:
      if (spec.matern_nu == 0.5) return std::exp(-s);
      if (spec.matern_nu == 1.5) {
        const double t = std::sqrt(3.0) * s;
        return (1.0 + t) * std::exp(-t);
      }
      if (spec.matern_nu == 2.5) {
        const double t = std::sqrt(5.0) * s;
        return (1.0 + t + t * t / 3.0) * std::exp(-t);
      }
      throw InvalidInput("matern nu must be one of 0.5, 1.5, 2.5");
    default:
      throw InvalidInput("kernel_from_distance needs a distance-based kernel");
  }
}

double kernel_value(const KernelSpec& spec, std::span<const double> a, std::span<const double> b,
                    double bandwidth) {
  switch (spec.family) {
    case KernelFamily::gaussian:
    case KernelFamily::matern:
      return kernel_from_distance(spec, distance(a, b), bandwidth);
    case KernelFamily::linear:
      return dot(a, b);
    case KernelFamily::polynomial:
      return std::pow(1.0 + dot(a, b), spec.polynomial_degree);
  }
  return 0.0;
}

double median_bandwidth(std::span<const double> distances) {
  std::vector<double> positive;
  positive.reserve(distances.size());
  for (double d : distances) {
    if (d > 0.0) positive.push_back(d);
  }
  if (positive.empty()) throw DegenerateNeighborhood("all neighbor distances are zero");
  const std::size_t mid = (positive.size() - 1) / 2;
  std::nth_element(positive.begin(), positive.begin() + static_cast<std::ptrdiff_t>(mid),
                   positive.end());
  return positive[mid];
}

std::vector<double> neighborhood_weights(const KernelSpec& spec, std::vector<double> raw) {
  if (raw.empty()) return raw;
  if (!spec.distance_based()) {
    const double lowest = *std::min_element(raw.begin(), raw.end());
    for (double& v : raw) v = v - lowest + 1e-12;
  }
  const double total = std::accumulate(raw.begin(), raw.end(), 0.0);
  if (!(total > 0.0) || !std::isfinite(total)) {
    throw DegenerateNeighborhood("kernel weights do not normalize");
  }
  for (double& v : raw) v /= total;
  return raw;
}

}  // namespace rert
