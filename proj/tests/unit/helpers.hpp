#pragma once

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "fscal/diff.hpp"
#include "fscal/rng.hpp"
#include "fscal/temporal.hpp"

namespace fscal::test {

inline diff::Matrix random_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double scale = 1.0) {
  diff::Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.normal();
  return m;
}

inline TemporalSegment random_segment(Rng& rng, double extent = 100.0, double min_len = 1.0) {
  const double a = rng.uniform(0.0, extent - min_len);
  const double b = rng.uniform(a + min_len, extent);
  return {a, b};
}

/// Scores drawn from a small grid so ties actually occur.
inline std::vector<ScoredSegment> random_candidates(Rng& rng, int n, double extent = 100.0) {
  std::vector<ScoredSegment> out;
  for (int i = 0; i < n; ++i) {
    out.push_back({random_segment(rng, extent), static_cast<double>(rng.below(11)) / 10.0});
  }
  return out;
}

inline double max_abs_diff(const diff::Matrix& a, const diff::Matrix& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("fscal_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace fscal::test
