#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rsmap/geometry.hpp"
#include "rsmap/ground.hpp"

namespace rsmap {

enum class ElementClass : std::uint8_t {
  kBackground = 0,
  kLaneDivider = 1,
  kStopLine = 2,
  kPedestrianCrossing = 3,
};

inline constexpr ElementClass kMapClasses[] = {
    ElementClass::kLaneDivider, ElementClass::kStopLine,
    ElementClass::kPedestrianCrossing};

std::string_view class_name(ElementClass cls);
/// Throws Error(kInvalidArgument) on an unknown name.
ElementClass class_from_name(std::string_view name);
bool is_line_class(ElementClass cls);

struct ClassEntry {
  ElementClass element = ElementClass::kBackground;
  std::uint8_t gray = 0;  // value written to mask PNGs

  friend bool operator==(const ClassEntry&, const ClassEntry&) = default;
};

/// Label id -> element class. Id 0 is always background.
using ClassTable = std::map<std::uint8_t, ClassEntry>;

ClassTable default_class_table();

/// Per-cell (or per-pixel) class ids, row-major, row 0 first.
struct LabelMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> labels;
  ClassTable class_table = default_class_table();

  std::uint8_t at(int col, int row) const {
    return labels[static_cast<std::size_t>(row) * width + col];
  }
  std::uint8_t& at(int col, int row) {
    return labels[static_cast<std::size_t>(row) * width + col];
  }

  /// Throws Error(kUnknownLabel) when a label has no class_table entry and
  /// Error(kInvalidArgument) on size or background-id violations.
  void validate() const;
};

LabelMask make_label_mask(int width, int height,
                          ClassTable table = default_class_table());

/// Element class of a label id; kBackground for id 0.
ElementClass element_of(const ClassTable& table, std::uint8_t id);
/// Label id used for an element class in this table.
std::optional<std::uint8_t> label_of(const ClassTable& table,
                                     ElementClass cls);

/// Mean-intensity BEV image of a ground cloud. Row 0 is minimum y.
struct IntensityImage {
  GridSpec spec;
  std::vector<double> cells;          // gray in [0, 255]; 0 for empty cells
  std::vector<std::uint32_t> counts;  // points per cell
  std::size_t skipped_points = 0;     // points outside the grid

  double gray(int col, int row) const {
    return cells[static_cast<std::size_t>(row) * spec.cols + col];
  }
  std::uint32_t count(int col, int row) const {
    return counts[static_cast<std::size_t>(row) * spec.cols + col];
  }
};

struct RasterOptions {
  // Rescale cloud intensities to [0, 255] by their min and max before
  // averaging, for sensors that do not report 8-bit reflectivity.
  bool normalize_intensity = false;
};

IntensityImage rasterize_intensity(const PointCloud& ground,
                                   const GridSpec& spec,
                                   const RasterOptions& options = {});

/// Inverse index of grid_index over a cloud, stored compactly: cells in
/// ascending linear order, each with its point indices in ascending order.
class CellMembership {
 public:
  CellMembership() = default;
  CellMembership(std::vector<std::size_t> cells,
                 std::vector<std::size_t> offsets,
                 std::vector<std::size_t> indices)
      : cells_(std::move(cells)),
        offsets_(std::move(offsets)),
        indices_(std::move(indices)) {}

  std::size_t bucket_count() const { return cells_.size(); }
  std::size_t cell(std::size_t bucket) const { return cells_[bucket]; }
  std::span<const std::size_t> members(std::size_t bucket) const {
    return {indices_.data() + offsets_[bucket],
            offsets_[bucket + 1] - offsets_[bucket]};
  }
  /// Members of a linear cell id; empty when the cell holds no point.
  std::span<const std::size_t> find(std::size_t cell) const;
  std::size_t point_count() const { return indices_.size(); }

 private:
  std::vector<std::size_t> cells_;
  std::vector<std::size_t> offsets_{0};
  std::vector<std::size_t> indices_;
};

CellMembership cell_members(const PointCloud& ground, const GridSpec& spec);

struct BinaryMask {
  std::uint8_t label = 0;
  ElementClass element = ElementClass::kBackground;
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> bits;  // 0 or 1

  std::size_t popcount() const;
};

/// One binary mask per non-background class table entry, in id order.
std::vector<BinaryMask> one_hot_masks(const LabelMask& mask);

/// Reassembles a label mask from one-hot planes (first set plane wins).
LabelMask decode_one_hot(std::span<const BinaryMask> planes,
                         const ClassTable& table);

/// Threshold segmentation of an intensity image. Occupied cells whose gray
/// value is at least `threshold` are paint. With `zones` (a label mask on the
/// same grid) paint takes the zone's class and paint outside every zone is
/// dropped; without zones, paint takes `fallback` class.
LabelMask segment_intensity(const IntensityImage& image, double threshold,
                            const LabelMask* zones = nullptr,
                            ElementClass fallback = ElementClass::kLaneDivider);

}  // namespace rsmap
