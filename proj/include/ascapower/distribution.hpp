#pragma once
// Deviate generators for level averages and background noise.

#include <stdexcept>
#include <string>

#include "ascapower/rng.hpp"

namespace ascapower {

enum class DistributionKind {
  kNormal,    // N(0, 1)
  kUniform,   // U(-a, a); default a = sqrt(3) gives unit variance
  kExpCubed,  // cubed unit-exponential deviates, centred by their mean (6)
};

struct Distribution {
  DistributionKind kind = DistributionKind::kNormal;
  double uniform_halfwidth = 1.7320508075688772;  // sqrt(3)

  double sample(RngStream& rng) const {
    switch (kind) {
      case DistributionKind::kNormal:
        return rng.normal();
      case DistributionKind::kUniform:
        return rng.uniform(-uniform_halfwidth, uniform_halfwidth);
      case DistributionKind::kExpCubed: {
        const double e = rng.exponential();
        return e * e * e - 6.0;  // E[Exp(1)^3] = 3! = 6
      }
    }
    throw std::logic_error("unhandled DistributionKind");
  }
};

inline Distribution parse_distribution(const std::string& name) {
  if (name == "normal") return {DistributionKind::kNormal};
  if (name == "uniform") return {DistributionKind::kUniform};
  if (name == "exp3") return {DistributionKind::kExpCubed};
  throw std::invalid_argument("unknown distribution '" + name +
                              "' (expected normal | uniform | exp3)");
}

inline std::string to_string(const Distribution& d) {
  switch (d.kind) {
    case DistributionKind::kNormal:
      return "normal";
    case DistributionKind::kUniform:
      return "uniform";
    case DistributionKind::kExpCubed:
      return "exp3";
  }
  return "?";
}

}  // namespace ascapower
