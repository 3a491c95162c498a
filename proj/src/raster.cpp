#include "rsmap/raster.hpp"

#include <algorithm>
#include <array>
#include <numeric>

#include "rsmap/errors.hpp"

namespace rsmap {

std::string_view class_name(ElementClass cls) {
  switch (cls) {
    case ElementClass::kBackground: return "background";
    case ElementClass::kLaneDivider: return "lane_divider";
    case ElementClass::kStopLine: return "stop_line";
    case ElementClass::kPedestrianCrossing: return "pedestrian_crossing";
  }
  return "unknown";
}

ElementClass class_from_name(std::string_view name) {
  for (auto cls : {ElementClass::kBackground, ElementClass::kLaneDivider,
                   ElementClass::kStopLine,
                   ElementClass::kPedestrianCrossing}) {
    if (class_name(cls) == name) return cls;
  }
  throw Error(ErrorCode::kInvalidArgument,
              "unknown element class '" + std::string(name) + "'");
}

bool is_line_class(ElementClass cls) {
  return cls == ElementClass::kLaneDivider || cls == ElementClass::kStopLine;
}

ClassTable default_class_table() {
  return {
      {0, {ElementClass::kBackground, 0}},
      {1, {ElementClass::kLaneDivider, 85}},
      {2, {ElementClass::kStopLine, 170}},
      {3, {ElementClass::kPedestrianCrossing, 255}},
  };
}

void LabelMask::validate() const {
  if (width <= 0 || height <= 0 ||
      labels.size() != static_cast<std::size_t>(width) * height) {
    throw Error(ErrorCode::kInvalidArgument, "label mask size mismatch");
  }
  const auto bg = class_table.find(0);
  if (bg == class_table.end() ||
      bg->second.element != ElementClass::kBackground) {
    throw Error(ErrorCode::kInvalidArgument, "label id 0 must be background");
  }
  std::array<bool, 256> seen{};
  for (auto l : labels) seen[l] = true;
  for (int id = 0; id < 256; ++id) {
    if (seen[id] && !class_table.contains(static_cast<std::uint8_t>(id))) {
      throw Error(ErrorCode::kUnknownLabel,
                  "label " + std::to_string(id) + " not in class table");
    }
  }
}

LabelMask make_label_mask(int width, int height, ClassTable table) {
  LabelMask m;
  m.width = width;
  m.height = height;
  m.labels.assign(static_cast<std::size_t>(width) * height, 0);
  m.class_table = std::move(table);
  return m;
}

ElementClass element_of(const ClassTable& table, std::uint8_t id) {
  const auto it = table.find(id);
  if (it == table.end()) {
    throw Error(ErrorCode::kUnknownLabel,
                "label " + std::to_string(id) + " not in class table");
  }
  return it->second.element;
}

std::optional<std::uint8_t> label_of(const ClassTable& table,
                                     ElementClass cls) {
  for (const auto& [id, entry] : table) {
    if (entry.element == cls) return id;
  }
  return std::nullopt;
}

namespace {

// Order-independent once the input is sorted; error grows as O(log n).
double pairwise_sum(std::span<const double> v) {
  if (v.size() <= 8) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  const std::size_t half = v.size() / 2;
  return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

}  // namespace

IntensityImage rasterize_intensity(const PointCloud& ground,
                                   const GridSpec& spec,
                                   const RasterOptions& options) {
  spec.validate();
  IntensityImage img;
  img.spec = spec;
  img.cells.assign(spec.cell_count(), 0.0);
  img.counts.assign(spec.cell_count(), 0);

  double lo = 0.0, scale = 1.0;
  if (options.normalize_intensity && !ground.points.empty()) {
    auto [mn, mx] = std::minmax_element(
        ground.points.begin(), ground.points.end(),
        [](const Point3& a, const Point3& b) {
          return a.intensity < b.intensity;
        });
    lo = mn->intensity;
    scale = mx->intensity > lo ? 255.0 / (mx->intensity - lo) : 0.0;
  }

  std::vector<std::pair<std::size_t, double>> binned;
  binned.reserve(ground.points.size());
  for (const auto& p : ground.points) {
    const auto idx = grid_index(p, spec);
    if (!idx) {
      ++img.skipped_points;
      continue;
    }
    const std::size_t cell =
        static_cast<std::size_t>(idx->row) * spec.cols + idx->col;
    binned.emplace_back(cell, (p.intensity - lo) * scale);
  }
  std::sort(binned.begin(), binned.end());

  std::vector<double> values;
  for (std::size_t i = 0; i < binned.size();) {
    std::size_t j = i;
    values.clear();
    while (j < binned.size() && binned[j].first == binned[i].first) {
      values.push_back(binned[j].second);
      ++j;
    }
    const double mean = pairwise_sum(values) / static_cast<double>(values.size());
    img.cells[binned[i].first] = std::clamp(mean, 0.0, 255.0);
    img.counts[binned[i].first] = static_cast<std::uint32_t>(values.size());
    i = j;
  }
  return img;
}

std::span<const std::size_t> CellMembership::find(std::size_t cell) const {
  const auto it = std::lower_bound(cells_.begin(), cells_.end(), cell);
  if (it == cells_.end() || *it != cell) return {};
  return members(static_cast<std::size_t>(it - cells_.begin()));
}

CellMembership cell_members(const PointCloud& ground, const GridSpec& spec) {
  spec.validate();
  std::vector<std::pair<std::size_t, std::size_t>> binned;
  binned.reserve(ground.points.size());
  for (std::size_t i = 0; i < ground.points.size(); ++i) {
    if (const auto idx = grid_index(ground.points[i], spec)) {
      binned.emplace_back(
          static_cast<std::size_t>(idx->row) * spec.cols + idx->col, i);
    }
  }
  std::sort(binned.begin(), binned.end());
  std::vector<std::size_t> cells, offsets{0}, indices;
  indices.reserve(binned.size());
  for (std::size_t i = 0; i < binned.size(); ++i) {
    if (i == 0 || binned[i].first != binned[i - 1].first) {
      if (i != 0) offsets.push_back(indices.size());
      cells.push_back(binned[i].first);
    }
    indices.push_back(binned[i].second);
  }
  if (!cells.empty()) offsets.push_back(indices.size());
  return CellMembership(std::move(cells), std::move(offsets),
                        std::move(indices));
}

std::size_t BinaryMask::popcount() const {
  return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), 1));
}

std::vector<BinaryMask> one_hot_masks(const LabelMask& mask) {
  mask.validate();
  std::vector<BinaryMask> planes;
  std::array<int, 256> plane_of;
  plane_of.fill(-1);
  for (const auto& [id, entry] : mask.class_table) {
    if (id == 0) continue;
    BinaryMask plane;
    plane.label = id;
    plane.element = entry.element;
    plane.width = mask.width;
    plane.height = mask.height;
    plane.bits.assign(mask.labels.size(), 0);
    plane_of[id] = static_cast<int>(planes.size());
    planes.push_back(std::move(plane));
  }
  for (std::size_t i = 0; i < mask.labels.size(); ++i) {
    const int p = plane_of[mask.labels[i]];
    if (p >= 0) planes[p].bits[i] = 1;
  }
  return planes;
}

LabelMask decode_one_hot(std::span<const BinaryMask> planes,
                         const ClassTable& table) {
  if (planes.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "no planes to decode");
  }
  LabelMask out = make_label_mask(planes[0].width, planes[0].height, table);
  for (std::size_t i = 0; i < out.labels.size(); ++i) {
    for (const auto& plane : planes) {
      if (plane.bits[i]) {
        out.labels[i] = plane.label;
        break;
      }
    }
  }
  return out;
}

LabelMask segment_intensity(const IntensityImage& image, double threshold,
                            const LabelMask* zones, ElementClass fallback) {
  const auto& spec = image.spec;
  LabelMask seg = make_label_mask(spec.cols, spec.rows,
                                  zones ? zones->class_table
                                        : default_class_table());
  if (zones && (zones->width != spec.cols || zones->height != spec.rows)) {
    throw Error(ErrorCode::kDimensionMismatch,
                "zone mask does not match intensity grid");
  }
  const auto fallback_id = label_of(seg.class_table, fallback);
  for (std::size_t i = 0; i < seg.labels.size(); ++i) {
    if (image.counts[i] == 0 || image.cells[i] < threshold) continue;
    if (zones) {
      seg.labels[i] = zones->labels[i];
    } else if (fallback_id) {
      seg.labels[i] = *fallback_id;
    }
  }
  return seg;
}

}  // namespace rsmap
