#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace camp {

/// Top-2 principal directions of centered points, found by power iteration
/// with deflation. Deterministic for a fixed seed.
struct Pca2 {
  std::vector<double> center;
  std::array<std::vector<double>, 2> components;
  std::array<double, 2> eigenvalues{0.0, 0.0};
};

Pca2 pca_top2(const std::vector<std::vector<double>>& points, uint64_t seed = 1,
              int32_t iterations = 500);

std::array<double, 2> pca_project(const Pca2& pca, const std::vector<double>& point);

/// Spearman rank correlation with average ranks on ties. Needs >= 2 points.
double spearman_correlation(const std::vector<double>& x, const std::vector<double>& y);

// ---------------------------------------------------------------------------
// SVG scatter output
// ---------------------------------------------------------------------------

struct ScatterPoint {
  double x = 0.0;
  double y = 0.0;
  int32_t group = 0;    // color index (task id)
  double shade = 1.0;   // 0 = dark, 1 = bright (return scale)
  bool emphasized = false;  // drawn as a larger ring (w* markers)
};

void write_scatter_svg(const std::string& path, const std::vector<ScatterPoint>& points,
                       const std::string& title);

}  // namespace camp
