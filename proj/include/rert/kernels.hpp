#pragma once

#include <span>
#include <string>
#include <vector>

#include "rert/core.hpp"

namespace rert {

enum class KernelFamily { gaussian, matern, linear, polynomial };

struct KernelSpec {
  KernelFamily family = KernelFamily::gaussian;
  /// <= 0 selects the median heuristic; otherwise a fixed bandwidth.
  double fixed_bandwidth = 0.0;
  int polynomial_degree = 2;
  /// One of 0.5, 1.5, 2.5.
  double matern_nu = 1.5;

  bool uses_median_bandwidth() const { return fixed_bandwidth <= 0.0; }
  bool distance_based() const {
    return family == KernelFamily::gaussian || family == KernelFamily::matern;
  }
  void validate() const;

  static KernelSpec gaussian() { return {}; }
};

std::string to_string(KernelFamily family);
KernelFamily kernel_family_from_string(const std::string& name);

double distance(std::span<const double> a, std::span<const double> b);
double dot(std::span<const double> a, std::span<const double> b);

/// Kernel of the given family evaluated on (a, b). Gaussian and Matern are
/// functions of the Euclidean distance scaled by the bandwidth. Linear and
/// polynomial return the raw value, which may be non-positive; the shift that
/// makes them usable as weights lives in neighborhood_weights().
double kernel_value(const KernelSpec& spec, std::span<const double> a, std::span<const double> b,
                    double bandwidth);

/// Distance-based kernel evaluated from a precomputed distance.
double kernel_from_distance(const KernelSpec& spec, double dist, double bandwidth);

/// Lower median of the strictly positive distances.
/// Throws DegenerateNeighborhood if none are positive.
double median_bandwidth(std::span<const double> distances);

/// Turns raw kernel values over one neighborhood into positive weights
/// summing to 1. Linear and polynomial values are shifted by their minimum
/// with a 1e-12 floor.
std::vector<double> neighborhood_weights(const KernelSpec& spec, std::vector<double> raw);

}  // namespace rert
