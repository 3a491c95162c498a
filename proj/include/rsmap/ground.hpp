#pragma once

#include <cstdint>
#include <vector>

#include "rsmap/geometry.hpp"

namespace rsmap {

struct PointCloud {
  std::vector<Point3> points;
  std::uint32_t frame_id = 0;
  double timestamp = 0.0;  // seconds
};

struct RansacConfig {
  int max_iterations = 500;
  double inlier_threshold = 0.05;  // metres, point-to-plane
  double min_inliers_fraction = 0.2;
  std::uint64_t seed = 0;

  void validate() const;
};

struct GroundSplit {
  PointCloud ground;
  PointCloud non_ground;
  Plane plane;
};

/// Single dominant plane by RANSAC followed by one least-squares refit on the
/// consensus set. Ground is every point within inlier_threshold of the
/// refined plane. Deterministic for a given seed.
///
/// Throws Error(kDegenerateInput) for fewer than 3 points and
/// Error(kNoPlaneFound) when the best consensus is below min_inliers_fraction.
GroundSplit extract_ground(const PointCloud& cloud, const RansacConfig& cfg);

}  // namespace rsmap
