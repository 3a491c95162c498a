#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rsmap/geometry.hpp"
#include "rsmap/ground.hpp"
#include "rsmap/raster.hpp"
#include "rsmap/vectorize.hpp"

namespace rsmap {

/// Axis-aligned ground-plane rectangle.
struct GroundRect {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;

  bool contains(double x, double y) const {
    return x >= x_min && x <= x_max && y >= y_min && y <= y_max;
  }
  friend bool operator==(const GroundRect&, const GroundRect&) = default;
};

/// One painted patch: a crossing stripe, a stop line or a divider dash.
/// `instance` indexes the ground-truth map element the patch belongs to.
struct PaintPatch {
  ElementClass element = ElementClass::kLaneDivider;
  std::size_t instance = 0;
  GroundRect rect;
};

/// Four-arm intersection seen by a pole-mounted camera and LiDAR at the
/// origin. Arms are taken in the order west, east, north, south; traffic
/// drives on the right.
struct SceneSpec {
  std::uint64_t seed = 7;

  // Intersection
  Vec2 center{35.0, 0.0};
  int arm_count = 4;
  int lanes_per_direction = 2;
  double lane_width = 3.5;
  double arm_length = 30.0;  // from the centre
  double crossing_offset = 1.0;  // from the intersection box
  double crossing_depth = 4.0;   // along the road
  double stripe_width = 0.45;
  double stripe_gap = 0.45;
  double stop_line_offset = 1.5;  // from the crossing
  double stop_line_width = 0.4;
  double divider_width = 0.2;
  double dash_length = 3.0;
  double dash_gap = 6.0;
  double divider_clearance = 3.0;  // from the stop line to the first dash

  // Sensor
  double sensor_height = 8.0;
  double camera_pitch_deg = 22.0;
  int image_width = 1920;
  int image_height = 1080;
  double focal_px = 960.0;

  // Frames
  int frame_count = 50;
  double frame_period = 0.1;     // s
  double max_sync_offset = 0.005;  // s, camera vs LiDAR

  // Ground region covered by LiDAR returns; also the BEV grid.
  GridSpec region{5.0, -32.5, 0.05, 0.05, 1300, 1300};

  // LiDAR returns per m^2 per frame: density_ref * (reference_distance /
  // max(r, reference_distance))^falloff_exponent.
  double density_ref = 8.0;
  double reference_distance = 15.0;
  double falloff_exponent = 2.0;
  double non_ground_fraction = 0.1;
  double z_noise = 0.01;

  // Paint contrast fades linearly from 1 at contrast_fade_start to
  // min_contrast over contrast_fade_length.
  double paint_intensity = 200.0;
  double asphalt_intensity = 60.0;
  double intensity_noise = 10.0;
  double contrast_fade_start = 15.0;
  double contrast_fade_length = 40.0;
  double min_contrast = 0.15;

  // Image degradations: label dilation growing with ground distance, random
  // per-frame occluders on the roads and fixed occluded regions.
  double blur_start = 25.0;  // m
  double blur_px_per_10m = 2.0;
  int max_blur_px = 8;
  int occlusions_per_frame = 2;
  double occluder_length = 4.5;
  double occluder_width = 1.8;
  std::vector<GroundRect> static_occlusions{{19.0, -7.0, 25.0, -3.5}};

  // Dilation of element footprints in the class-zone prior.
  double zone_margin = 0.1;

  /// Throws Error(kInvalidSpec) naming the offending field.
  void validate() const;

  /// Same scene without noise, outliers, fading or image degradations.
  SceneSpec without_degradations() const;
};

std::string scene_spec_to_json(const SceneSpec& spec);
/// Missing keys keep their defaults; unknown keys throw Error(kInvalidSpec).
SceneSpec scene_spec_from_json(const std::string& text);

struct Scene {
  SceneSpec spec;
  VectorMap gt;
  std::vector<PaintPatch> paint;
  CameraCalibration calib;
  std::vector<PointCloud> frames;
  std::vector<LabelMask> masks;
  std::vector<double> mask_timestamps;
  // Hidden ground truth: per frame and point, index into `paint` or -1.
  std::vector<std::vector<std::int32_t>> paint_of_point;
  LabelMask zones;  // BEV class prior on spec.region
};

/// Ground-truth map and paint footprints of the intersection.
std::pair<VectorMap, std::vector<PaintPatch>> build_layout(const SceneSpec& spec);

CameraCalibration scene_camera(const SceneSpec& spec);

/// Label mask of painted patches as seen through the camera: each pixel takes
/// the class of the patch its centre ray hits on the ground plane z = 0.
LabelMask render_mask(std::span<const PaintPatch> paint,
                      const CameraCalibration& calib);

/// Grows labels by a per-row radius (square window, higher class id wins).
LabelMask dilate_rows(const LabelMask& mask, std::span<const int> radius_of_row);

/// Deterministic given spec.seed; frames are generated on up to `jobs`
/// threads from per-frame derived seeds.
Scene generate_scene(const SceneSpec& spec, int jobs = 1);

/// Writes gt.geojson, calib.json, grid.json, spec.json, zones.png,
/// frames/NNN.rspc and masks/NNN.png with sidecars.
void write_scene(const Scene& scene, const std::filesystem::path& dir);

}  // namespace rsmap
