#pragma once

// Finite-difference verification of every loss gradient at seeded random
// points. Shared by the `gradcheck` subcommand and the test suites.

#include <cstdint>
#include <string>
#include <vector>

namespace ego {

/// Denominator floor of the relative error |a - n| / max(|a|, |n|, floor).
inline constexpr double kGradRelFloor = 1e-6;

struct GradcheckResult {
  std::string name;
  int points = 0;
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  bool passed() const { return max_rel_error <= tolerance; }
};

double relative_error(double analytic, double numeric, double floor = kGradRelFloor);

GradcheckResult gradcheck_focal(std::uint64_t seed, int points = 100);
GradcheckResult gradcheck_detection(std::uint64_t seed, int points = 100);
GradcheckResult gradcheck_occupancy(std::uint64_t seed, int points = 100);
GradcheckResult gradcheck_tv(std::uint64_t seed, int points = 100);

/// All four checks in a fixed order.
std::vector<GradcheckResult> run_gradcheck(std::uint64_t seed = 0, int points = 100);

}  // namespace ego
