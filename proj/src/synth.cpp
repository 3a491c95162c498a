#include "rsmap/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <json.hpp>
#include <numbers>
#include <random>

#include "rsmap/errors.hpp"
#include "rsmap/io.hpp"
#include "rsmap/parallel.hpp"

namespace rsmap {

namespace {

[[noreturn]] void bad_field(const std::string& field, const std::string& why) {
  throw Error(ErrorCode::kInvalidSpec, field + ": " + why);
}

void require_positive(double v, const char* field) {
  if (!(v > 0.0) || !std::isfinite(v)) bad_field(field, "must be positive");
}

void require_non_negative(double v, const char* field) {
  if (!(v >= 0.0) || !std::isfinite(v)) bad_field(field, "must be non-negative");
}

void require_range(double v, double lo, double hi, const char* field) {
  if (!(v >= lo && v <= hi)) {
    bad_field(field, "must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
  }
}

double road_half_width(const SceneSpec& s) { return s.lanes_per_direction * s.lane_width; }

double stop_line_start(const SceneSpec& s) {
  return road_half_width(s) + s.crossing_offset + s.crossing_depth + s.stop_line_offset;
}

constexpr std::array<Vec2, 4> kArmDirections{{{-1, 0}, {1, 0}, {0, 1}, {0, -1}}};

// Road-aligned frame of one arm: t along the arm away from the centre, l
// towards the inbound (right-hand) side.
struct ArmFrame {
  Vec2 center;
  Vec2 along;
  Vec2 side;

  Vec2 at(double t, double l) const { return center + t * along + l * side; }
  GroundRect rect(double t0, double t1, double l0, double l1) const {
    const Vec2 a = at(t0, l0), b = at(t1, l1);
    return {std::min(a.x, b.x), std::min(a.y, b.y), std::max(a.x, b.x), std::max(a.y, b.y)};
  }
};

ArmFrame arm_frame(const SceneSpec& s, int arm) {
  const Vec2 a = kArmDirections[static_cast<std::size_t>(arm)];
  return {s.center, a, {-a.y, a.x}};
}

// Bucketed lookup of paint patches by ground position.
class PaintIndex {
 public:
  explicit PaintIndex(std::span<const PaintPatch> paint) : paint_(paint) {
    if (paint.empty()) return;
    GroundRect box = paint.front().rect;
    for (const auto& p : paint) {
      box.x_min = std::min(box.x_min, p.rect.x_min);
      box.y_min = std::min(box.y_min, p.rect.y_min);
      box.x_max = std::max(box.x_max, p.rect.x_max);
      box.y_max = std::max(box.y_max, p.rect.y_max);
    }
    x0_ = std::floor(box.x_min);
    y0_ = std::floor(box.y_min);
    cols_ = static_cast<int>(std::floor(box.x_max - x0_)) + 1;
    rows_ = static_cast<int>(std::floor(box.y_max - y0_)) + 1;
    buckets_.resize(static_cast<std::size_t>(cols_) * rows_);
    for (std::size_t i = 0; i < paint.size(); ++i) {
      const auto& r = paint[i].rect;
      for (int row = bucket_of(r.y_min, y0_); row <= bucket_of(r.y_max, y0_); ++row) {
        for (int col = bucket_of(r.x_min, x0_); col <= bucket_of(r.x_max, x0_); ++col) {
          buckets_[static_cast<std::size_t>(row) * cols_ + col].push_back(
              static_cast<std::int32_t>(i));
        }
      }
    }
  }

  // Patch containing (x, y); the highest class wins on overlap, then the
  // lowest index. -1 when unpainted.
  std::int32_t find(double x, double y) const {
    if (buckets_.empty()) return -1;
    const int col = static_cast<int>(std::floor(x - x0_));
    const int row = static_cast<int>(std::floor(y - y0_));
    if (col < 0 || row < 0 || col >= cols_ || row >= rows_) return -1;
    std::int32_t best = -1;
    for (auto i : buckets_[static_cast<std::size_t>(row) * cols_ + col]) {
      const auto& p = paint_[static_cast<std::size_t>(i)];
      if (!p.rect.contains(x, y)) continue;
      if (best < 0 || p.element > paint_[static_cast<std::size_t>(best)].element) best = i;
    }
    return best;
  }

 private:
  static int bucket_of(double v, double origin) {
    return static_cast<int>(std::floor(v - origin));
  }

  std::span<const PaintPatch> paint_;
  double x0_ = 0.0, y0_ = 0.0;
  int cols_ = 0, rows_ = 0;
  std::vector<std::vector<std::int32_t>> buckets_;
};

double paint_contrast(const SceneSpec& s, double r) {
  const double c = 1.0 - (r - s.contrast_fade_start) / s.contrast_fade_length;
  return std::clamp(c, s.min_contrast, 1.0);
}

double density_at(const SceneSpec& s, double r) {
  return s.density_ref * std::pow(s.reference_distance / std::max(r, s.reference_distance),
                                  s.falloff_exponent);
}

struct Obstacle {
  GroundRect foot;
  double z_min;
  double z_max;
};

std::vector<Obstacle> place_obstacles(const SceneSpec& s) {
  std::mt19937_64 rng(derive_seed(s.seed, 0xC0FFEE));
  std::vector<Obstacle> out;
  const double half = road_half_width(s);
  // Poles at the four corners of the intersection box.
  for (double sx : {-1.0, 1.0}) {
    for (double sy : {-1.0, 1.0}) {
      const double x = s.center.x + sx * (half + 1.0), y = s.center.y + sy * (half + 1.0);
      out.push_back({{x - 0.15, y - 0.15, x + 0.15, y + 0.15}, 0.5, 6.0});
    }
  }
  // Parked vehicles along the road edges.
  std::uniform_real_distribution<double> along(stop_line_start(s) + 2.0,
                                               std::max(stop_line_start(s) + 2.5, s.arm_length - 5.0));
  for (int arm = 0; arm < s.arm_count; ++arm) {
    const ArmFrame f = arm_frame(s, arm);
    const double t = along(rng);
    const double l = half + 1.2;
    out.push_back({f.rect(t, t + 4.5, l - 0.9, l + 0.9), 0.5, 1.8});
  }
  return out;
}

std::vector<double> ground_distance_of_row(const SceneSpec& s, const CameraCalibration& calib) {
  const Vector3 c = camera_center(calib);
  std::vector<double> out(static_cast<std::size_t>(calib.image_height),
                          std::numeric_limits<double>::infinity());
  for (int v = 0; v < calib.image_height; ++v) {
    const Vector3 d = pixel_ray({calib.u0, static_cast<double>(v)}, calib);
    if (d[2] >= -1e-12) continue;
    const double t = -c[2] / d[2];
    out[static_cast<std::size_t>(v)] = std::hypot(c[0] + t * d[0], c[1] + t * d[1]);
  }
  (void)s;
  return out;
}

}  // namespace

void SceneSpec::validate() const {
  if (arm_count < 1 || arm_count > 4) bad_field("arm_count", "must be 1 to 4");
  if (lanes_per_direction < 1) bad_field("lanes_per_direction", "must be at least 1");
  require_positive(lane_width, "lane_width");
  require_positive(arm_length, "arm_length");
  require_non_negative(crossing_offset, "crossing_offset");
  require_positive(crossing_depth, "crossing_depth");
  require_positive(stripe_width, "stripe_width");
  require_positive(stripe_gap, "stripe_gap");
  require_positive(stop_line_offset, "stop_line_offset");
  require_positive(stop_line_width, "stop_line_width");
  require_positive(divider_width, "divider_width");
  require_positive(dash_length, "dash_length");
  require_positive(dash_gap, "dash_gap");
  require_non_negative(divider_clearance, "divider_clearance");
  if (stripe_width > 2.0 * road_half_width(*this)) bad_field("stripe_width", "wider than the road");
  if (stop_line_start(*this) + stop_line_width > arm_length) {
    bad_field("arm_length", "too short for crossing and stop line");
  }
  require_positive(sensor_height, "sensor_height");
  require_range(camera_pitch_deg, 1.0, 89.0, "camera_pitch_deg");
  if (image_width < 1) bad_field("image_width", "must be positive");
  if (image_height < 1) bad_field("image_height", "must be positive");
  require_positive(focal_px, "focal_px");
  if (frame_count < 1) bad_field("frame_count", "must be at least 1");
  require_positive(frame_period, "frame_period");
  require_non_negative(max_sync_offset, "max_sync_offset");
  try {
    region.validate();
  } catch (const Error& e) {
    bad_field("region", e.what());
  }
  require_positive(density_ref, "density_ref");
  require_positive(reference_distance, "reference_distance");
  require_non_negative(falloff_exponent, "falloff_exponent");
  require_range(non_ground_fraction, 0.0, 0.9, "non_ground_fraction");
  require_non_negative(z_noise, "z_noise");
  require_range(paint_intensity, 0.0, 255.0, "paint_intensity");
  require_range(asphalt_intensity, 0.0, 255.0, "asphalt_intensity");
  require_non_negative(intensity_noise, "intensity_noise");
  require_non_negative(contrast_fade_start, "contrast_fade_start");
  require_positive(contrast_fade_length, "contrast_fade_length");
  require_range(min_contrast, 0.0, 1.0, "min_contrast");
  require_non_negative(blur_start, "blur_start");
  require_non_negative(blur_px_per_10m, "blur_px_per_10m");
  if (max_blur_px < 0) bad_field("max_blur_px", "must be non-negative");
  if (occlusions_per_frame < 0) bad_field("occlusions_per_frame", "must be non-negative");
  require_positive(occluder_length, "occluder_length");
  require_positive(occluder_width, "occluder_width");
  for (const auto& r : static_occlusions) {
    if (!(r.x_max > r.x_min && r.y_max > r.y_min)) {
      bad_field("static_occlusions", "rectangles need x_max > x_min and y_max > y_min");
    }
  }
  require_non_negative(zone_margin, "zone_margin");
}

SceneSpec SceneSpec::without_degradations() const {
  SceneSpec s = *this;
  s.non_ground_fraction = 0.0;
  s.z_noise = 0.0;
  s.intensity_noise = 0.0;
  s.min_contrast = 1.0;
  s.blur_px_per_10m = 0.0;
  s.occlusions_per_frame = 0;
  s.static_occlusions.clear();
  s.max_sync_offset = 0.0;
  return s;
}

// ---------------------------------------------------------------------------

namespace {

using nlohmann::json;

json rect_json(const GroundRect& r) { return json::array({r.x_min, r.y_min, r.x_max, r.y_max}); }

}  // namespace

std::string scene_spec_to_json(const SceneSpec& s) {
  json occl = json::array();
  for (const auto& r : s.static_occlusions) occl.push_back(rect_json(r));
  const json j = {
      {"seed", s.seed},
      {"center", json::array({s.center.x, s.center.y})},
      {"arm_count", s.arm_count},
      {"lanes_per_direction", s.lanes_per_direction},
      {"lane_width", s.lane_width},
      {"arm_length", s.arm_length},
      {"crossing_offset", s.crossing_offset},
      {"crossing_depth", s.crossing_depth},
      {"stripe_width", s.stripe_width},
      {"stripe_gap", s.stripe_gap},
      {"stop_line_offset", s.stop_line_offset},
      {"stop_line_width", s.stop_line_width},
      {"divider_width", s.divider_width},
      {"dash_length", s.dash_length},
      {"dash_gap", s.dash_gap},
      {"divider_clearance", s.divider_clearance},
      {"sensor_height", s.sensor_height},
      {"camera_pitch_deg", s.camera_pitch_deg},
      {"image_width", s.image_width},
      {"image_height", s.image_height},
      {"focal_px", s.focal_px},
      {"frame_count", s.frame_count},
      {"frame_period", s.frame_period},
      {"max_sync_offset", s.max_sync_offset},
      {"region", json::parse(io::grid_to_json(s.region))},
      {"density_ref", s.density_ref},
      {"reference_distance", s.reference_distance},
      {"falloff_exponent", s.falloff_exponent},
      {"non_ground_fraction", s.non_ground_fraction},
      {"z_noise", s.z_noise},
      {"paint_intensity", s.paint_intensity},
      {"asphalt_intensity", s.asphalt_intensity},
      {"intensity_noise", s.intensity_noise},
      {"contrast_fade_start", s.contrast_fade_start},
      {"contrast_fade_length", s.contrast_fade_length},
      {"min_contrast", s.min_contrast},
      {"blur_start", s.blur_start},
      {"blur_px_per_10m", s.blur_px_per_10m},
      {"max_blur_px", s.max_blur_px},
      {"occlusions_per_frame", s.occlusions_per_frame},
      {"occluder_length", s.occluder_length},
      {"occluder_width", s.occluder_width},
      {"static_occlusions", occl},
      {"zone_margin", s.zone_margin},
  };
  return j.dump(2) + "\n";
}

SceneSpec scene_spec_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidSpec, std::string("malformed scene spec: ") + e.what());
  }
  if (!j.is_object()) throw Error(ErrorCode::kInvalidSpec, "scene spec must be an object");
  SceneSpec s;
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "seed") s.seed = value.get<std::uint64_t>();
      else if (key == "center") s.center = {value.at(0).get<double>(), value.at(1).get<double>()};
      else if (key == "arm_count") s.arm_count = value.get<int>();
      else if (key == "lanes_per_direction") s.lanes_per_direction = value.get<int>();
      else if (key == "lane_width") s.lane_width = value.get<double>();
      else if (key == "arm_length") s.arm_length = value.get<double>();
      else if (key == "crossing_offset") s.crossing_offset = value.get<double>();
      else if (key == "crossing_depth") s.crossing_depth = value.get<double>();
      else if (key == "stripe_width") s.stripe_width = value.get<double>();
      else if (key == "stripe_gap") s.stripe_gap = value.get<double>();
      else if (key == "stop_line_offset") s.stop_line_offset = value.get<double>();
      else if (key == "stop_line_width") s.stop_line_width = value.get<double>();
      else if (key == "divider_width") s.divider_width = value.get<double>();
      else if (key == "dash_length") s.dash_length = value.get<double>();
      else if (key == "dash_gap") s.dash_gap = value.get<double>();
      else if (key == "divider_clearance") s.divider_clearance = value.get<double>();
      else if (key == "sensor_height") s.sensor_height = value.get<double>();
      else if (key == "camera_pitch_deg") s.camera_pitch_deg = value.get<double>();
      else if (key == "image_width") s.image_width = value.get<int>();
      else if (key == "image_height") s.image_height = value.get<int>();
      else if (key == "focal_px") s.focal_px = value.get<double>();
      else if (key == "frame_count") s.frame_count = value.get<int>();
      else if (key == "frame_period") s.frame_period = value.get<double>();
      else if (key == "max_sync_offset") s.max_sync_offset = value.get<double>();
      else if (key == "region") s.region = io::grid_from_json(value.dump());
      else if (key == "density_ref") s.density_ref = value.get<double>();
      else if (key == "reference_distance") s.reference_distance = value.get<double>();
      else if (key == "falloff_exponent") s.falloff_exponent = value.get<double>();
      else if (key == "non_ground_fraction") s.non_ground_fraction = value.get<double>();
      else if (key == "z_noise") s.z_noise = value.get<double>();
      else if (key == "paint_intensity") s.paint_intensity = value.get<double>();
      else if (key == "asphalt_intensity") s.asphalt_intensity = value.get<double>();
      else if (key == "intensity_noise") s.intensity_noise = value.get<double>();
      else if (key == "contrast_fade_start") s.contrast_fade_start = value.get<double>();
      else if (key == "contrast_fade_length") s.contrast_fade_length = value.get<double>();
      else if (key == "min_contrast") s.min_contrast = value.get<double>();
      else if (key == "blur_start") s.blur_start = value.get<double>();
      else if (key == "blur_px_per_10m") s.blur_px_per_10m = value.get<double>();
      else if (key == "max_blur_px") s.max_blur_px = value.get<int>();
      else if (key == "occlusions_per_frame") s.occlusions_per_frame = value.get<int>();
      else if (key == "occluder_length") s.occluder_length = value.get<double>();
      else if (key == "occluder_width") s.occluder_width = value.get<double>();
      else if (key == "static_occlusions") {
        s.static_occlusions.clear();
        for (const auto& r : value) {
          s.static_occlusions.push_back({r.at(0).get<double>(), r.at(1).get<double>(),
                                         r.at(2).get<double>(), r.at(3).get<double>()});
        }
      } else if (key == "zone_margin") s.zone_margin = value.get<double>();
      else bad_field(key, "unknown key");
    } catch (const json::exception&) {
      bad_field(key, "wrong type");
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kInvalidSpec) throw;
      bad_field(key, e.what());
    }
  }
  s.validate();
  return s;
}

// ---------------------------------------------------------------------------

std::pair<VectorMap, std::vector<PaintPatch>> build_layout(const SceneSpec& s) {
  s.validate();
  VectorMap gt;
  std::vector<PaintPatch> paint;
  const double half = road_half_width(s);
  const double t_cross0 = half + s.crossing_offset;
  const double t_cross1 = t_cross0 + s.crossing_depth;
  const double t_stop0 = stop_line_start(s);
  const double t_stop1 = t_stop0 + s.stop_line_width;
  const double t_stop_mid = 0.5 * (t_stop0 + t_stop1);

  const double pitch = s.stripe_width + s.stripe_gap;
  const int stripes =
      std::max(1, static_cast<int>(std::floor((2.0 * half + s.stripe_gap) / pitch)));
  const double stripe_span = stripes * s.stripe_width + (stripes - 1) * s.stripe_gap;

  for (int arm = 0; arm < s.arm_count; ++arm) {
    const ArmFrame f = arm_frame(s, arm);

    MapElement crossing;
    crossing.element = ElementClass::kPedestrianCrossing;
    crossing.kind = GeometryKind::kPolygon;
    const double l0 = -0.5 * stripe_span, l1 = 0.5 * stripe_span;
    crossing.vertices = {f.at(t_cross0, l0), f.at(t_cross1, l0), f.at(t_cross1, l1),
                         f.at(t_cross0, l1)};
    if (polygon_area(crossing.vertices) < 0) {
      std::reverse(crossing.vertices.begin(), crossing.vertices.end());
    }
    const std::size_t crossing_id = gt.elements.size();
    gt.elements.push_back(crossing);
    for (int k = 0; k < stripes; ++k) {
      const double a = l0 + k * pitch;
      paint.push_back({ElementClass::kPedestrianCrossing, crossing_id,
                       f.rect(t_cross0, t_cross1, a, a + s.stripe_width)});
    }

    MapElement stop;
    stop.element = ElementClass::kStopLine;
    stop.kind = GeometryKind::kPolyline;
    stop.vertices = {f.at(t_stop_mid, 0.0), f.at(t_stop_mid, half)};
    paint.push_back({ElementClass::kStopLine, gt.elements.size(),
                     f.rect(t_stop0, t_stop1, 0.0, half)});
    gt.elements.push_back(stop);

    for (int lane = -(s.lanes_per_direction - 1); lane <= s.lanes_per_direction - 1; ++lane) {
      const double l = lane * s.lane_width;
      for (double t = t_stop1 + s.divider_clearance; t + s.dash_length <= s.arm_length + 1e-9;
           t += s.dash_length + s.dash_gap) {
        MapElement dash;
        dash.element = ElementClass::kLaneDivider;
        dash.kind = GeometryKind::kPolyline;
        dash.vertices = {f.at(t, l), f.at(t + s.dash_length, l)};
        paint.push_back({ElementClass::kLaneDivider, gt.elements.size(),
                         f.rect(t, t + s.dash_length, l - 0.5 * s.divider_width,
                                l + 0.5 * s.divider_width)});
        gt.elements.push_back(dash);
      }
    }
  }
  return {gt, paint};
}

CameraCalibration scene_camera(const SceneSpec& s) {
  CameraCalibration c;
  c.f = s.focal_px;
  c.dx = 1.0;
  c.dy = 1.0;
  c.u0 = 0.5 * (s.image_width - 1);
  c.v0 = 0.5 * (s.image_height - 1);
  c.image_width = s.image_width;
  c.image_height = s.image_height;
  c.R = look_rotation(0.0, s.camera_pitch_deg * std::numbers::pi / 180.0);
  const Vector3 center{0.0, 0.0, s.sensor_height};
  for (int i = 0; i < 3; ++i) {
    c.T[static_cast<std::size_t>(i)] =
        -(c.R[3 * i] * center[0] + c.R[3 * i + 1] * center[1] + c.R[3 * i + 2] * center[2]);
  }
  c.validate();
  return c;
}

LabelMask render_mask(std::span<const PaintPatch> paint, const CameraCalibration& calib) {
  calib.validate();
  LabelMask mask = make_label_mask(calib.image_width, calib.image_height);
  const PaintIndex index(paint);
  const Vector3 c = camera_center(calib);
  for (int v = 0; v < calib.image_height; ++v) {
    for (int u = 0; u < calib.image_width; ++u) {
      const Vector3 d = pixel_ray({static_cast<double>(u), static_cast<double>(v)}, calib);
      if (d[2] >= -1e-12) continue;
      const double t = -c[2] / d[2];
      const auto hit = index.find(c[0] + t * d[0], c[1] + t * d[1]);
      if (hit < 0) continue;
      mask.at(u, v) = *label_of(mask.class_table, paint[static_cast<std::size_t>(hit)].element);
    }
  }
  return mask;
}

LabelMask dilate_rows(const LabelMask& mask, std::span<const int> radius_of_row) {
  if (radius_of_row.size() != static_cast<std::size_t>(mask.height)) {
    throw Error(ErrorCode::kDimensionMismatch, "one radius per mask row required");
  }
  const int w = mask.width, h = mask.height;
  LabelMask horiz = mask;
  for (int v = 0; v < h; ++v) {
    const int r = radius_of_row[static_cast<std::size_t>(v)];
    if (r <= 0) continue;
    for (int u = 0; u < w; ++u) {
      std::uint8_t m = 0;
      for (int k = std::max(0, u - r); k <= std::min(w - 1, u + r); ++k) {
        m = std::max(m, mask.at(k, v));
      }
      horiz.at(u, v) = m;
    }
  }
  LabelMask out = horiz;
  for (int v = 0; v < h; ++v) {
    const int r = radius_of_row[static_cast<std::size_t>(v)];
    if (r <= 0) continue;
    for (int u = 0; u < w; ++u) {
      std::uint8_t m = 0;
      for (int k = std::max(0, v - r); k <= std::min(h - 1, v + r); ++k) {
        m = std::max(m, horiz.at(u, k));
      }
      out.at(u, v) = m;
    }
  }
  return out;
}

Scene generate_scene(const SceneSpec& spec, int jobs) {
  spec.validate();
  Scene scene;
  scene.spec = spec;
  std::tie(scene.gt, scene.paint) = build_layout(spec);
  scene.calib = scene_camera(spec);
  const PaintIndex index(scene.paint);
  const Vector3 cam = camera_center(scene.calib);

  // Class-zone prior: whole crossings, other patches as painted, grown by
  // the margin.
  scene.zones = make_label_mask(spec.region.cols, spec.region.rows);
  {
    std::vector<std::pair<GroundRect, ElementClass>> zones;
    for (const auto& p : scene.paint) {
      if (p.element == ElementClass::kPedestrianCrossing) continue;
      zones.push_back({p.rect, p.element});
    }
    for (const auto& e : scene.gt.elements) {
      if (e.element != ElementClass::kPedestrianCrossing) continue;
      GroundRect r{e.vertices[0].x, e.vertices[0].y, e.vertices[0].x, e.vertices[0].y};
      for (const auto& v : e.vertices) {
        r = {std::min(r.x_min, v.x), std::min(r.y_min, v.y), std::max(r.x_max, v.x),
             std::max(r.y_max, v.y)};
      }
      zones.push_back({r, e.element});
    }
    const GridSpec& g = spec.region;
    for (const auto& [r, cls] : zones) {
      const GroundRect z{r.x_min - spec.zone_margin, r.y_min - spec.zone_margin,
                         r.x_max + spec.zone_margin, r.y_max + spec.zone_margin};
      const int c0 = std::max(0, static_cast<int>(std::floor((z.x_min - g.x_min) / g.cell_size_x)));
      const int c1 = std::min(g.cols - 1, static_cast<int>(std::floor((z.x_max - g.x_min) / g.cell_size_x)));
      const int r0 = std::max(0, static_cast<int>(std::floor((z.y_min - g.y_min) / g.cell_size_y)));
      const int r1 = std::min(g.rows - 1, static_cast<int>(std::floor((z.y_max - g.y_min) / g.cell_size_y)));
      const std::uint8_t id = *label_of(scene.zones.class_table, cls);
      for (int row = r0; row <= r1; ++row) {
        for (int col = c0; col <= c1; ++col) {
          const Vec2 cc = g.cell_center(col, row);
          if (!z.contains(cc.x, cc.y)) continue;
          auto& cell = scene.zones.at(col, row);
          cell = std::max(cell, id);
        }
      }
    }
  }

  // Camera view shared by all frames; occluders are applied per frame.
  const LabelMask clean = render_mask(scene.paint, scene.calib);
  const auto row_dist = ground_distance_of_row(spec, scene.calib);
  std::vector<int> radius(row_dist.size());
  for (std::size_t v = 0; v < row_dist.size(); ++v) {
    const double excess = std::max(0.0, row_dist[v] - spec.blur_start);
    const double px = std::isfinite(excess) ? excess * spec.blur_px_per_10m / 10.0
                                            : static_cast<double>(spec.max_blur_px);
    radius[v] = std::min(spec.max_blur_px, static_cast<int>(std::lround(px)));
    if (spec.blur_px_per_10m == 0.0) radius[v] = 0;
  }
  const LabelMask base = dilate_rows(clean, radius);
  const std::size_t pixels = static_cast<std::size_t>(spec.image_width) * spec.image_height;
  std::vector<float> hit_x(pixels, std::numeric_limits<float>::quiet_NaN());
  std::vector<float> hit_y(pixels, std::numeric_limits<float>::quiet_NaN());
  for (int v = 0; v < spec.image_height; ++v) {
    for (int u = 0; u < spec.image_width; ++u) {
      const Vector3 d = pixel_ray({static_cast<double>(u), static_cast<double>(v)}, scene.calib);
      if (d[2] >= -1e-12) continue;
      const double t = -cam[2] / d[2];
      const std::size_t i = static_cast<std::size_t>(v) * spec.image_width + u;
      hit_x[i] = static_cast<float>(cam[0] + t * d[0]);
      hit_y[i] = static_cast<float>(cam[1] + t * d[1]);
    }
  }

  const std::vector<Obstacle> obstacles = place_obstacles(spec);
  const GridSpec& g = spec.region;
  const double area = (g.x_max() - g.x_min) * (g.y_max() - g.y_min);
  const double d_max = density_at(spec, 0.0);
  const auto candidates = static_cast<std::size_t>(std::llround(area * d_max));
  const double half = road_half_width(spec);

  const auto n = static_cast<std::size_t>(spec.frame_count);
  scene.frames.resize(n);
  scene.masks.resize(n);
  scene.mask_timestamps.resize(n);
  scene.paint_of_point.resize(n);
  parallel_for(n, jobs, [&](std::size_t i) {
    std::mt19937_64 rng(derive_seed(spec.seed, i));
    std::uniform_real_distribution<double> ux(g.x_min, g.x_max());
    std::uniform_real_distribution<double> uy(g.y_min, g.y_max());
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> znoise(0.0, 1.0);

    PointCloud& cloud = scene.frames[i];
    auto& membership = scene.paint_of_point[i];
    cloud.frame_id = static_cast<std::uint32_t>(i);
    cloud.timestamp = static_cast<double>(i) * spec.frame_period;
    for (std::size_t k = 0; k < candidates; ++k) {
      const double x = ux(rng), y = uy(rng), accept = unit(rng);
      const double r = std::hypot(x - cam[0], y - cam[1]);
      if (accept * d_max >= density_at(spec, r)) continue;
      const double z = spec.z_noise * znoise(rng);
      const double noise = spec.intensity_noise * znoise(rng);
      const std::int32_t patch = index.find(x, y);
      double intensity = spec.asphalt_intensity;
      if (patch >= 0) {
        intensity += (spec.paint_intensity - spec.asphalt_intensity) * paint_contrast(spec, r);
      }
      cloud.points.push_back({x, y, z, std::clamp(intensity + noise, 0.0, 255.0)});
      membership.push_back(patch);
    }
    if (spec.non_ground_fraction > 0.0 && !obstacles.empty()) {
      const auto extra = static_cast<std::size_t>(std::llround(
          static_cast<double>(cloud.points.size()) * spec.non_ground_fraction /
          (1.0 - spec.non_ground_fraction)));
      std::uniform_int_distribution<std::size_t> pick(0, obstacles.size() - 1);
      for (std::size_t k = 0; k < extra; ++k) {
        const Obstacle& o = obstacles[pick(rng)];
        const double x = o.foot.x_min + unit(rng) * (o.foot.x_max - o.foot.x_min);
        const double y = o.foot.y_min + unit(rng) * (o.foot.y_max - o.foot.y_min);
        const double z = o.z_min + unit(rng) * (o.z_max - o.z_min);
        cloud.points.push_back({x, y, z, 255.0 * unit(rng)});
        membership.push_back(-1);
      }
    }

    std::vector<GroundRect> hidden = spec.static_occlusions;
    for (int k = 0; k < spec.occlusions_per_frame; ++k) {
      const ArmFrame f = arm_frame(spec, static_cast<int>(unit(rng) * spec.arm_count) % spec.arm_count);
      const double t = half + unit(rng) * std::max(0.0, spec.arm_length - half - spec.occluder_length);
      const int lane = static_cast<int>(unit(rng) * 2 * spec.lanes_per_direction);
      const double l = (lane - spec.lanes_per_direction + 0.5) * spec.lane_width;
      hidden.push_back(f.rect(t, t + spec.occluder_length, l - 0.5 * spec.occluder_width,
                              l + 0.5 * spec.occluder_width));
    }
    LabelMask mask = base;
    if (!hidden.empty()) {
      for (std::size_t p = 0; p < pixels; ++p) {
        if (mask.labels[p] == 0 || std::isnan(hit_x[p])) continue;
        for (const auto& r : hidden) {
          if (r.contains(hit_x[p], hit_y[p])) {
            mask.labels[p] = 0;
            break;
          }
        }
      }
    }
    scene.masks[i] = std::move(mask);
    scene.mask_timestamps[i] =
        cloud.timestamp + spec.max_sync_offset * (2.0 * unit(rng) - 1.0);
  });
  return scene;
}

void write_scene(const Scene& scene, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "frames");
  fs::create_directories(dir / "masks");
  io::save_map(dir / "gt.geojson", scene.gt);
  io::save_calibration(dir / "calib.json", scene.calib);
  io::save_grid(dir / "grid.json", scene.spec.region);
  io::write_file_atomic(dir / "spec.json", scene_spec_to_json(scene.spec));
  io::MaskMeta zone_meta;
  zone_meta.grid = scene.spec.region;
  io::save_label_mask(dir / "zones.png", scene.zones, zone_meta);
  for (std::size_t i = 0; i < scene.frames.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "%03zu", i);
    io::save_cloud(dir / "frames" / (std::string(name) + ".rspc"), scene.frames[i]);
    io::MaskMeta meta;
    meta.timestamp = scene.mask_timestamps[i];
    meta.frame_id = scene.frames[i].frame_id;
    io::save_label_mask(dir / "masks" / (std::string(name) + ".png"), scene.masks[i], meta);
  }
}

}  // namespace rsmap
