#include "rsmap/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>
#include <unordered_map>

#include "rsmap/errors.hpp"

namespace rsmap {

std::size_t LabeledPoints::size() const {
  std::size_t n = 0;
  for (const auto& [cls, pts] : by_class) n += pts.size();
  return n;
}

std::size_t LabeledPoints::count(ElementClass cls) const {
  const auto it = by_class.find(cls);
  return it == by_class.end() ? 0 : it->second.size();
}

std::vector<Point3> LabeledPoints::points(ElementClass cls) const {
  std::vector<Point3> out;
  const auto it = by_class.find(cls);
  if (it == by_class.end()) return out;
  out.reserve(it->second.size());
  for (const auto& lp : it->second) out.push_back(lp.point);
  return out;
}

LabeledPoints label_by_image(const PointCloud& ground, const LabelMask& mask,
                             const CameraCalibration& calib) {
  calib.validate();
  if (mask.width != calib.image_width || mask.height != calib.image_height) {
    throw Error(ErrorCode::kDimensionMismatch,
                "mask " + std::to_string(mask.width) + "x" +
                    std::to_string(mask.height) + " vs image " +
                    std::to_string(calib.image_width) + "x" +
                    std::to_string(calib.image_height));
  }
  mask.validate();
  LabeledPoints out;
  out.class_table = mask.class_table;
  for (const auto& p : ground.points) {
    const auto proj = project_point(p, calib);
    if (!proj) continue;
    const double col = std::floor(proj->pixel.u + 0.5);
    const double row = std::floor(proj->pixel.v + 0.5);
    if (!(col >= 0.0 && col < mask.width && row >= 0.0 &&
          row < mask.height)) {
      continue;
    }
    const std::uint8_t id =
        mask.at(static_cast<int>(col), static_cast<int>(row));
    const ElementClass cls = element_of(mask.class_table, id);
    if (cls == ElementClass::kBackground) continue;
    out.by_class[cls].push_back({p, Provenance::kFromImage, ground.frame_id});
  }
  return out;
}

LabeledPoints label_by_intensity(const PointCloud& ground,
                                 const GridSpec& spec, const LabelMask& seg) {
  if (seg.width != spec.cols || seg.height != spec.rows) {
    throw Error(ErrorCode::kDimensionMismatch,
                "segmentation does not match grid dimensions");
  }
  seg.validate();
  LabeledPoints out;
  out.class_table = seg.class_table;
  const CellMembership members = cell_members(ground, spec);
  for (std::size_t b = 0; b < members.bucket_count(); ++b) {
    const ElementClass cls =
        element_of(seg.class_table, seg.labels[members.cell(b)]);
    if (cls == ElementClass::kBackground) continue;
    auto& dst = out.by_class[cls];
    for (std::size_t idx : members.members(b)) {
      dst.push_back(
          {ground.points[idx], Provenance::kFromIntensity, ground.frame_id});
    }
  }
  for (auto& [cls, pts] : out.by_class) sort_points(pts);
  return out;
}

void sort_points(std::vector<LabeledPoint>& pts) {
  std::sort(pts.begin(), pts.end(),
            [](const LabeledPoint& a, const LabeledPoint& b) {
              return std::tie(a.point.x, a.point.y, a.point.z,
                              a.point.intensity, a.frame_id, a.provenance) <
                     std::tie(b.point.x, b.point.y, b.point.z,
                              b.point.intensity, b.frame_id, b.provenance);
            });
}

namespace {

struct Key {
  std::int64_t x, y, z;
  friend bool operator==(const Key&, const Key&) = default;
};

struct KeyHash {
  std::size_t operator()(const Key& k) const {
    std::uint64_t h = static_cast<std::uint64_t>(k.x) * 0x9E3779B97F4A7C15ULL;
    h ^= static_cast<std::uint64_t>(k.y) + 0x7F4A7C159E3779B9ULL + (h << 6) +
         (h >> 2);
    h ^= static_cast<std::uint64_t>(k.z) + 0x94D049BB133111EBULL + (h << 6) +
         (h >> 2);
    return static_cast<std::size_t>(h);
  }
};

Key key_of(const Point3& p) {
  constexpr double inv = 1.0 / kPointIdentityTolerance;
  return {static_cast<std::int64_t>(std::floor(p.x * inv)),
          static_cast<std::int64_t>(std::floor(p.y * inv)),
          static_cast<std::int64_t>(std::floor(p.z * inv))};
}

bool same_point(const Point3& a, const Point3& b) {
  return std::abs(a.x - b.x) <= kPointIdentityTolerance &&
         std::abs(a.y - b.y) <= kPointIdentityTolerance &&
         std::abs(a.z - b.z) <= kPointIdentityTolerance;
}

std::vector<LabeledPoint> union_class(const std::vector<LabeledPoint>& a,
                                      const std::vector<LabeledPoint>& b) {
  std::vector<LabeledPoint> out(a);
  std::vector<bool> used(out.size(), false);
  std::unordered_map<Key, std::vector<std::size_t>, KeyHash> index;
  index.reserve(out.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    index[key_of(out[i].point)].push_back(i);
  }
  for (const auto& lp : b) {
    const Key k = key_of(lp.point);
    std::optional<std::size_t> match;
    for (int dx = -1; dx <= 1 && !match; ++dx) {
      for (int dy = -1; dy <= 1 && !match; ++dy) {
        for (int dz = -1; dz <= 1 && !match; ++dz) {
          const auto it = index.find({k.x + dx, k.y + dy, k.z + dz});
          if (it == index.end()) continue;
          for (std::size_t i : it->second) {
            if (!used[i] && same_point(out[i].point, lp.point)) {
              match = i;
              break;
            }
          }
        }
      }
    }
    if (match) {
      used[*match] = true;
      auto& dst = out[*match];
      if (dst.provenance != lp.provenance) dst.provenance = Provenance::kMerged;
      dst.frame_id = std::min(dst.frame_id, lp.frame_id);
    } else {
      out.push_back(lp);
    }
  }
  sort_points(out);
  return out;
}

}  // namespace

LabeledPoints merge_labeled(const LabeledPoints& a, const LabeledPoints& b) {
  if (a.class_table != b.class_table) {
    throw Error(ErrorCode::kClassTableMismatch,
                "cannot merge labels from different class tables");
  }
  LabeledPoints out;
  out.class_table = a.class_table;
  static const std::vector<LabeledPoint> kNone;
  for (auto cls : kMapClasses) {
    const auto ia = a.by_class.find(cls);
    const auto ib = b.by_class.find(cls);
    const auto& pa = ia == a.by_class.end() ? kNone : ia->second;
    const auto& pb = ib == b.by_class.end() ? kNone : ib->second;
    if (pa.empty() && pb.empty()) continue;
    out.by_class[cls] = union_class(pa, pb);
  }
  return out;
}

LabeledPoints aggregate_frames(std::span<const LabeledPoints> frames,
                               std::size_t k) {
  if (k < 1) {
    throw Error(ErrorCode::kInvalidArgument, "frame count must be >= 1");
  }
  if (k > frames.size()) {
    throw Error(ErrorCode::kFrameCountExceeded,
                "requested " + std::to_string(k) + " frames, have " +
                    std::to_string(frames.size()));
  }
  LabeledPoints acc = frames[0];
  for (auto& [cls, pts] : acc.by_class) sort_points(pts);
  for (std::size_t i = 1; i < k; ++i) acc = merge_labeled(acc, frames[i]);
  return acc;
}

void check_sync(double lidar_time, double camera_time, double tolerance) {
  const double dt = std::abs(lidar_time - camera_time);
  if (dt > tolerance) {
    throw Error(ErrorCode::kSyncViolation,
                "camera/LiDAR offset " + std::to_string(dt) +
                    " s exceeds tolerance " + std::to_string(tolerance) +
                    " s");
  }
}

}  // namespace rsmap
