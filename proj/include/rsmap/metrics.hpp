#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rsmap/geometry.hpp"
#include "rsmap/ground.hpp"
#include "rsmap/vectorize.hpp"

namespace rsmap {

/// Occupancy of one class on an evaluation grid.
struct RasterMask {
  GridSpec spec;
  std::vector<std::uint8_t> bits;

  std::size_t popcount() const;
};

/// Marks cells whose centre is covered by an element: polygons by the
/// even-odd rule, polylines as butt-capped strips of `line_width` with round
/// joins at interior vertices.
void rasterize_element(const MapElement& element, double line_width,
                       RasterMask& mask);

RasterMask rasterize_map(const VectorMap& map, ElementClass cls,
                         const GridSpec& spec, double line_width);

/// |a & b| / |a | b|; 1 when both are empty. Throws Error(kSpecMismatch).
double iou(const RasterMask& a, const RasterMask& b);

struct Curve {
  std::vector<Vec2> vertices;
  bool closed = false;
};

Curve curve_of(const MapElement& element);

/// Samples at every `step` of arc length from the start, plus the end point
/// of an open curve.
std::vector<Vec2> resample_curve(const Curve& curve, double step);

/// Mean distance from each predicted sample to the nearest ground-truth
/// sample. Throws Error(kEmptyGeometry) when either curve has no vertex.
double chamfer_one_way(const Curve& pred, const Curve& gt, double step = 0.1);

/// Same value from already resampled point sets.
double chamfer_one_way_samples(std::span<const Vec2> pred,
                               std::span<const Vec2> gt);

struct MatchConfig {
  double cd_threshold = 1.0;  // metres, strict <
  double iou_threshold = 0.1;  // strict >
  double eval_cell = 0.1;
  double line_width = 0.2;
  double sample_step = 0.1;
};

struct InstanceMatch {
  std::size_t pred_index = 0;  // into the input prediction list
  std::optional<std::size_t> gt_index;
  double confidence = 0.0;
  bool true_positive = false;
};

/// Greedy matching in descending confidence (stable for ties). A prediction
/// is a true positive when an unmatched ground truth of its class has
/// one-way CD < cd_threshold and instance IoU > iou_threshold; the candidate
/// with the smallest CD wins.
std::vector<InstanceMatch> match_instances(std::span<const MapElement> preds,
                                           std::span<const MapElement> gts,
                                           const MatchConfig& cfg);

/// 11-point style AP over recall {0.1, ..., 1.0} with interpolated precision.
/// nullopt when there is no ground truth.
std::optional<double> average_precision(std::span<const MapElement> preds,
                                        std::span<const MapElement> gts,
                                        const MatchConfig& cfg = {});

/// AP from a ranked true/false-positive sequence.
double average_precision_from_ranking(const std::vector<bool>& tp_in_rank_order,
                                      std::size_t gt_count);

struct DistanceBin {
  double r_min = 0.0;
  double r_max = 0.0;
};

std::vector<DistanceBin> default_distance_bins();  // 15-25 ... 55-65 m

struct DensityRow {
  DistanceBin bin;
  std::size_t count = 0;
  double area = 0.0;     // m^2 of the annulus inside the region
  double density = 0.0;  // points per m^2
};

/// Ground-plane point density per annulus around the sensor, over the part
/// of each annulus inside `region` (or the cloud's bounds when absent).
std::vector<DensityRow> density_by_distance(
    const PointCloud& cloud, const Point3& sensor_origin,
    std::span<const DistanceBin> bins,
    const std::optional<GridSpec>& region = std::nullopt);

/// Exact area of a disk intersected with an axis-aligned rectangle.
double disk_rect_area(double cx, double cy, double radius, double x0,
                      double x1, double y0, double y1);

struct InstanceCd {
  ElementClass element = ElementClass::kLaneDivider;
  std::size_t pred_index = 0;
  double cd = 0.0;  // to the closest ground truth of the same class
  bool true_positive = false;
};

struct LocalEval {
  DistanceBin bin;
  std::map<ElementClass, double> iou;
  std::optional<double> miou;
};

struct EvalReport {
  std::map<ElementClass, double> iou;  // classes present in ground truth
  std::optional<double> miou;
  std::map<ElementClass, std::optional<double>> ap;
  std::vector<InstanceCd> instance_cd;
  std::vector<DensityRow> density;
  std::vector<LocalEval> by_distance;
  std::vector<std::pair<std::string, double>> timing;  // seconds
  GridSpec eval_grid;
};

/// Lattice-aligned evaluation grid covering both maps plus a margin.
GridSpec evaluation_grid(const VectorMap& a, const VectorMap& b,
                         double cell, double margin);

/// Throws Error(kFrameMismatch) when the maps declare different frames.
EvalReport evaluate(const VectorMap& pred, const VectorMap& gt,
                    const MatchConfig& cfg = {});

/// Per-annulus IoU, counting only cells whose centre lies in the annulus.
std::vector<LocalEval> evaluate_by_distance(const VectorMap& pred,
                                            const VectorMap& gt,
                                            const Point3& origin,
                                            std::span<const DistanceBin> bins,
                                            const MatchConfig& cfg = {});

std::string report_to_json(const EvalReport& report);
std::string report_to_text(const EvalReport& report);

}  // namespace rsmap
