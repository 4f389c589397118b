#pragma once

// Built-in verification suites: finite-difference gradient checks for
// every trainable module and cross-checks against the reference oracles.

#include <cstdint>
#include <string>
#include <vector>

namespace fscal {

struct GradcheckEntry {
  std::string module;
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::string worst;
};

inline constexpr double kGradcheckTolerance = 1e-5;

/// Checks at R=4, S=2, T=2, C=8 with random (Xavier) parameters and
/// random inputs treated as parameters.
std::vector<GradcheckEntry> gradcheck_suite(std::uint64_t seed = 0);

struct SelftestEntry {
  std::string name;
  bool passed = false;
  std::string detail;
};

std::vector<SelftestEntry> selftest_suite(std::uint64_t seed = 0);

}  // namespace fscal
