#pragma once

#include <filesystem>
#include <vector>

#include "divrec/div/divergence.hpp"

namespace divrec::exp {

struct ProjectedPoint {
  std::string sample_id;
  int class_id = 0;
  double x = 0.0;
  double y = 0.0;
};

struct Projection {
  std::vector<ProjectedPoint> points;
  double explained[2] = {0.0, 0.0};  // variance along the two components
};

// Centred PCA onto the top two principal components. Component signs are
// fixed so the largest-magnitude loading is positive. ProjectionError for
// fewer than two samples.
Projection project_pca(const div::EmbeddingBatch& batch);

// Mean Euclidean distance between class centroids of the projected points.
double centroid_spread(const Projection& p);

void write_projection_csv(const std::filesystem::path& path, const Projection& p);
void write_projection_svg(const std::filesystem::path& path, const Projection& p, const std::string& title);

}  // namespace divrec::exp
