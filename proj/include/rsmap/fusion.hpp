#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "rsmap/geometry.hpp"
#include "rsmap/ground.hpp"
#include "rsmap/raster.hpp"

namespace rsmap {

enum class Provenance : std::uint8_t {
  kFromImage = 0,
  kFromIntensity = 1,
  kMerged = 2,
};

struct LabeledPoint {
  Point3 point;
  Provenance provenance = Provenance::kFromImage;
  std::uint32_t frame_id = 0;

  friend bool operator==(const LabeledPoint&, const LabeledPoint&) = default;
};

/// Candidate points grouped by element class. Background never appears.
struct LabeledPoints {
  ClassTable class_table = default_class_table();
  std::map<ElementClass, std::vector<LabeledPoint>> by_class;

  std::size_t size() const;
  std::size_t count(ElementClass cls) const;
  bool empty() const { return size() == 0; }
  std::vector<Point3> points(ElementClass cls) const;
};

/// Points whose coordinates agree within this distance are the same point.
inline constexpr double kPointIdentityTolerance = 1e-9;

/// Projects each ground point into the segmentation mask and keeps the ones
/// that land on a non-background pixel (nearest pixel, halves rounded up).
/// Throws Error(kDimensionMismatch) when the mask and image sizes differ.
LabeledPoints label_by_image(const PointCloud& ground, const LabelMask& mask,
                             const CameraCalibration& calib);

/// Gives every point the label of its grid cell in a BEV segmentation.
/// Throws Error(kDimensionMismatch) when seg is not cols x rows.
LabeledPoints label_by_intensity(const PointCloud& ground,
                                 const GridSpec& spec, const LabelMask& seg);

/// Per-class multiset union. A point present in both inputs (same class,
/// coordinates within kPointIdentityTolerance) appears once; its provenance
/// becomes kMerged when the two sources disagree. Output is sorted, so the
/// result does not depend on argument order.
/// Throws Error(kClassTableMismatch).
LabeledPoints merge_labeled(const LabeledPoints& a, const LabeledPoints& b);

/// Merge of the first k frames. Throws Error(kFrameCountExceeded) when
/// k > frames.size() and Error(kInvalidArgument) when k < 1.
LabeledPoints aggregate_frames(std::span<const LabeledPoints> frames,
                               std::size_t k);

/// Throws Error(kSyncViolation) when |lidar - camera| > tolerance seconds.
void check_sync(double lidar_time, double camera_time, double tolerance);

/// Canonical per-class ordering used by merge and vectorization.
void sort_points(std::vector<LabeledPoint>& pts);

}  // namespace rsmap
