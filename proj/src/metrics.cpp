#include "rsmap/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>

#include "rsmap/errors.hpp"

namespace rsmap {

std::size_t RasterMask::popcount() const {
  return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), 1));
}

namespace {

using CellVisitor = std::function<void(std::size_t)>;

struct CellRange {
  int c0, c1, r0, r1;  // inclusive
  bool empty() const { return c0 > c1 || r0 > r1; }
};

CellRange cells_in_box(const GridSpec& spec, double x0, double x1, double y0,
                       double y1) {
  const auto index = [](double v, int n) {
    return static_cast<int>(std::clamp(std::floor(v), -1.0, static_cast<double>(n)));
  };
  CellRange r;
  r.c0 = std::max(0, index((x0 - spec.x_min) / spec.cell_size_x, spec.cols));
  r.c1 = std::min(spec.cols - 1, index((x1 - spec.x_min) / spec.cell_size_x, spec.cols));
  r.r0 = std::max(0, index((y0 - spec.y_min) / spec.cell_size_y, spec.rows));
  r.r1 = std::min(spec.rows - 1, index((y1 - spec.y_min) / spec.cell_size_y, spec.rows));
  return r;
}

bool inside_even_odd(std::span<const Vec2> ring, Vec2 p) {
  bool inside = false;
  const std::size_t n = ring.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Vec2 a = ring[i], b = ring[j];
    if ((a.y > p.y) != (b.y > p.y)) {
      const double x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
      if (p.x < x) inside = !inside;
    }
  }
  return inside;
}

void visit_polygon(std::span<const Vec2> ring, const GridSpec& spec,
                   const CellVisitor& visit) {
  double x0 = ring[0].x, x1 = x0, y0 = ring[0].y, y1 = y0;
  for (const auto& v : ring) {
    x0 = std::min(x0, v.x);
    x1 = std::max(x1, v.x);
    y0 = std::min(y0, v.y);
    y1 = std::max(y1, v.y);
  }
  const CellRange r = cells_in_box(spec, x0, x1, y0, y1);
  if (r.empty()) return;
  for (int row = r.r0; row <= r.r1; ++row) {
    for (int col = r.c0; col <= r.c1; ++col) {
      if (inside_even_odd(ring, spec.cell_center(col, row))) {
        visit(static_cast<std::size_t>(row) * spec.cols + col);
      }
    }
  }
}

void visit_polyline(std::span<const Vec2> line, double width,
                    const GridSpec& spec, const CellVisitor& visit) {
  const double half = 0.5 * width;
  std::vector<std::size_t> cells;
  const auto add_box = [&](double x0, double x1, double y0, double y1,
                           const std::function<bool(Vec2)>& covers) {
    const CellRange r = cells_in_box(spec, x0, x1, y0, y1);
    if (r.empty()) return;
    for (int row = r.r0; row <= r.r1; ++row) {
      for (int col = r.c0; col <= r.c1; ++col) {
        if (covers(spec.cell_center(col, row))) {
          cells.push_back(static_cast<std::size_t>(row) * spec.cols + col);
        }
      }
    }
  };
  for (std::size_t i = 1; i < line.size(); ++i) {
    const Vec2 a = line[i - 1], b = line[i];
    const double len = norm(b - a);
    if (!(len > 0.0)) continue;
    const Vec2 u = (1.0 / len) * (b - a);
    add_box(std::min(a.x, b.x) - half, std::max(a.x, b.x) + half,
            std::min(a.y, b.y) - half, std::max(a.y, b.y) + half,
            [&](Vec2 c) {
              const Vec2 d = c - a;
              const double t = dot(d, u);
              return t >= 0.0 && t <= len && std::abs(cross(u, d)) <= half;
            });
  }
  for (std::size_t i = 1; i + 1 < line.size(); ++i) {
    const Vec2 v = line[i];
    add_box(v.x - half, v.x + half, v.y - half, v.y + half,
            [&](Vec2 c) { return norm(c - v) <= half; });
  }
  std::sort(cells.begin(), cells.end());
  cells.erase(std::unique(cells.begin(), cells.end()), cells.end());
  for (auto c : cells) visit(c);
}

void visit_element(const MapElement& element, double line_width,
                   const GridSpec& spec, const CellVisitor& visit) {
  if (element.vertices.empty()) return;
  if (element.kind == GeometryKind::kPolygon) {
    if (element.vertices.size() >= 3) visit_polygon(element.vertices, spec, visit);
  } else {
    visit_polyline(element.vertices, line_width, spec, visit);
  }
}

std::vector<std::size_t> element_cells(const MapElement& element,
                                       double line_width,
                                       const GridSpec& spec) {
  std::vector<std::size_t> cells;
  visit_element(element, line_width, spec,
                [&](std::size_t c) { cells.push_back(c); });
  std::sort(cells.begin(), cells.end());
  cells.erase(std::unique(cells.begin(), cells.end()), cells.end());
  return cells;
}

double sparse_iou(const std::vector<std::size_t>& a,
                  const std::vector<std::size_t>& b) {
  if (a.empty() && b.empty()) return 1.0;
  std::size_t inter = 0;
  for (std::size_t i = 0, j = 0; i < a.size() && j < b.size();) {
    if (a[i] < b[j]) {
      ++i;
    } else if (b[j] < a[i]) {
      ++j;
    } else {
      ++inter;
      ++i;
      ++j;
    }
  }
  return static_cast<double>(inter) /
         static_cast<double>(a.size() + b.size() - inter);
}

}  // namespace

void rasterize_element(const MapElement& element, double line_width,
                       RasterMask& mask) {
  visit_element(element, line_width, mask.spec,
                [&](std::size_t c) { mask.bits[c] = 1; });
}

RasterMask rasterize_map(const VectorMap& map, ElementClass cls,
                         const GridSpec& spec, double line_width) {
  spec.validate();
  RasterMask mask;
  mask.spec = spec;
  mask.bits.assign(spec.cell_count(), 0);
  for (const auto& e : map.elements) {
    if (e.element != cls) continue;
    if (e.kind == GeometryKind::kPolyline && !(line_width > 0.0)) {
      throw Error(ErrorCode::kInvalidArgument, "line width must be positive");
    }
    rasterize_element(e, line_width, mask);
  }
  return mask;
}

double iou(const RasterMask& a, const RasterMask& b) {
  if (!(a.spec == b.spec) || a.bits.size() != b.bits.size()) {
    throw Error(ErrorCode::kSpecMismatch, "IoU masks use different grids");
  }
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.bits.size(); ++i) {
    inter += a.bits[i] & b.bits[i];
    uni += a.bits[i] | b.bits[i];
  }
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

Curve curve_of(const MapElement& element) {
  return {element.vertices, element.kind == GeometryKind::kPolygon};
}

std::vector<Vec2> resample_curve(const Curve& curve, double step) {
  if (!(step > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "sample step must be positive");
  }
  std::vector<Vec2> path = curve.vertices;
  if (path.empty()) return {};
  if (curve.closed && path.size() > 1) path.push_back(path.front());
  std::vector<double> cum(path.size(), 0.0);
  for (std::size_t i = 1; i < path.size(); ++i) {
    cum[i] = cum[i - 1] + norm(path[i] - path[i - 1]);
  }
  const double total = cum.back();
  std::vector<Vec2> out;
  if (!(total > 0.0)) return {path.front()};
  std::size_t seg = 1;
  for (std::size_t k = 0;; ++k) {
    const double s = static_cast<double>(k) * step;
    if (s >= total) break;
    while (seg + 1 < path.size() && cum[seg] <= s) ++seg;
    const double len = cum[seg] - cum[seg - 1];
    const double t = len > 0.0 ? (s - cum[seg - 1]) / len : 0.0;
    out.push_back(path[seg - 1] + t * (path[seg] - path[seg - 1]));
  }
  if (!curve.closed) out.push_back(path.back());
  return out;
}

double chamfer_one_way_samples(std::span<const Vec2> pred,
                               std::span<const Vec2> gt) {
  if (pred.empty() || gt.empty()) {
    throw Error(ErrorCode::kEmptyGeometry, "chamfer input has no samples");
  }
  double sum = 0.0;
  for (const auto& p : pred) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& q : gt) {
      const double dx = p.x - q.x, dy = p.y - q.y;
      best = std::min(best, dx * dx + dy * dy);
    }
    sum += std::sqrt(best);
  }
  return sum / static_cast<double>(pred.size());
}

double chamfer_one_way(const Curve& pred, const Curve& gt, double step) {
  if (pred.vertices.empty() || gt.vertices.empty()) {
    throw Error(ErrorCode::kEmptyGeometry, "chamfer input has no vertices");
  }
  const auto a = resample_curve(pred, step);
  const auto b = resample_curve(gt, step);
  return chamfer_one_way_samples(a, b);
}

GridSpec evaluation_grid(const VectorMap& a, const VectorMap& b, double cell,
                         double margin) {
  if (!(cell > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "evaluation cell must be > 0");
  }
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0;
  double y0 = x0, y1 = -x0;
  for (const auto* map : {&a, &b}) {
    for (const auto& e : map->elements) {
      for (const auto& v : e.vertices) {
        x0 = std::min(x0, v.x);
        x1 = std::max(x1, v.x);
        y0 = std::min(y0, v.y);
        y1 = std::max(y1, v.y);
      }
    }
  }
  GridSpec spec;
  spec.cell_size_x = spec.cell_size_y = cell;
  if (!std::isfinite(x0)) {
    spec.cols = spec.rows = 1;
    return spec;
  }
  spec.x_min = std::floor((x0 - margin) / cell) * cell;
  spec.y_min = std::floor((y0 - margin) / cell) * cell;
  spec.cols = std::max(1, static_cast<int>(std::ceil((x1 + margin - spec.x_min) / cell)));
  spec.rows = std::max(1, static_cast<int>(std::ceil((y1 + margin - spec.y_min) / cell)));
  return spec;
}

namespace {

GridSpec instance_grid(std::span<const MapElement> preds,
                       std::span<const MapElement> gts,
                       const MatchConfig& cfg) {
  VectorMap a, b;
  a.elements.assign(preds.begin(), preds.end());
  b.elements.assign(gts.begin(), gts.end());
  return evaluation_grid(a, b, cfg.eval_cell, cfg.line_width + cfg.eval_cell);
}

}  // namespace

std::vector<InstanceMatch> match_instances(std::span<const MapElement> preds,
                                           std::span<const MapElement> gts,
                                           const MatchConfig& cfg) {
  const GridSpec grid = instance_grid(preds, gts, cfg);
  std::vector<std::vector<Vec2>> pred_samples, gt_samples;
  std::vector<std::vector<std::size_t>> pred_cells, gt_cells;
  for (const auto& e : preds) {
    pred_samples.push_back(resample_curve(curve_of(e), cfg.sample_step));
    pred_cells.push_back(element_cells(e, cfg.line_width, grid));
  }
  for (const auto& e : gts) {
    gt_samples.push_back(resample_curve(curve_of(e), cfg.sample_step));
    gt_cells.push_back(element_cells(e, cfg.line_width, grid));
  }

  std::vector<std::size_t> order(preds.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return preds[a].confidence > preds[b].confidence;
  });

  std::vector<char> taken(gts.size(), 0);
  std::vector<InstanceMatch> out;
  for (std::size_t pi : order) {
    InstanceMatch m;
    m.pred_index = pi;
    m.confidence = preds[pi].confidence;
    double best_cd = std::numeric_limits<double>::infinity();
    for (std::size_t gi = 0; gi < gts.size(); ++gi) {
      if (taken[gi] || gts[gi].element != preds[pi].element) continue;
      if (pred_samples[pi].empty() || gt_samples[gi].empty()) continue;
      const double cd = chamfer_one_way_samples(pred_samples[pi], gt_samples[gi]);
      if (!(cd < cfg.cd_threshold) || !(cd < best_cd)) continue;
      if (!(sparse_iou(pred_cells[pi], gt_cells[gi]) > cfg.iou_threshold)) continue;
      best_cd = cd;
      m.gt_index = gi;
    }
    if (m.gt_index) {
      taken[*m.gt_index] = 1;
      m.true_positive = true;
    }
    out.push_back(m);
  }
  return out;
}

double average_precision_from_ranking(const std::vector<bool>& tp_in_rank_order,
                                      std::size_t gt_count) {
  if (gt_count == 0) return 0.0;
  std::vector<double> precision, recall;
  std::size_t tp = 0;
  for (std::size_t i = 0; i < tp_in_rank_order.size(); ++i) {
    if (tp_in_rank_order[i]) ++tp;
    precision.push_back(static_cast<double>(tp) / static_cast<double>(i + 1));
    recall.push_back(static_cast<double>(tp) / static_cast<double>(gt_count));
  }
  double sum = 0.0;
  for (int k = 1; k <= 10; ++k) {
    const double r = k / 10.0;
    double best = 0.0;
    for (std::size_t i = 0; i < recall.size(); ++i) {
      if (recall[i] >= r - 1e-12) best = std::max(best, precision[i]);
    }
    sum += best;
  }
  return sum / 10.0;
}

std::optional<double> average_precision(std::span<const MapElement> preds,
                                        std::span<const MapElement> gts,
                                        const MatchConfig& cfg) {
  if (gts.empty()) return std::nullopt;
  std::vector<bool> ranked;
  for (const auto& m : match_instances(preds, gts, cfg)) {
    ranked.push_back(m.true_positive);
  }
  return average_precision_from_ranking(ranked, gts.size());
}

std::vector<DistanceBin> default_distance_bins() {
  return {{15, 25}, {25, 35}, {35, 45}, {45, 55}, {55, 65}};
}

namespace {

// Integral over [a, b] of sqrt(R^2 - x^2).
double half_chord_integral(double radius, double a, double b) {
  const auto prim = [radius](double x) {
    const double xr = std::clamp(x / radius, -1.0, 1.0);
    return 0.5 * (x * radius * std::sqrt(std::max(0.0, 1.0 - xr * xr)) +
                  radius * radius * std::asin(xr));
  };
  return prim(b) - prim(a);
}

}  // namespace

double disk_rect_area(double cx, double cy, double radius, double x0,
                      double x1, double y0, double y1) {
  if (!(radius > 0.0)) return 0.0;
  // Shift the disk to the origin.
  const double a = std::max(x0 - cx, -radius);
  const double b = std::min(x1 - cx, radius);
  const double c = y0 - cy, d = y1 - cy;
  if (!(a < b) || !(c < d)) return 0.0;
  std::vector<double> cuts{a, b};
  for (double y : {c, d}) {
    if (std::abs(y) < radius) {
      const double x = std::sqrt(radius * radius - y * y);
      for (double s : {-x, x}) {
        if (s > a && s < b) cuts.push_back(s);
      }
    }
  }
  std::sort(cuts.begin(), cuts.end());
  double area = 0.0;
  for (std::size_t i = 1; i < cuts.size(); ++i) {
    const double lo = cuts[i - 1], hi = cuts[i];
    if (!(hi > lo)) continue;
    const double mid = 0.5 * (lo + hi);
    const double h = std::sqrt(std::max(0.0, radius * radius - mid * mid));
    const bool top_is_chord = h < d;  // upper limit is the circle
    const bool bottom_is_chord = -h > c;
    if (std::min(d, h) <= std::max(c, -h)) continue;  // empty strip
    double upper = top_is_chord ? half_chord_integral(radius, lo, hi) : d * (hi - lo);
    double lower = bottom_is_chord ? -half_chord_integral(radius, lo, hi) : c * (hi - lo);
    area += upper - lower;
  }
  return area;
}

std::vector<DensityRow> density_by_distance(const PointCloud& cloud,
                                            const Point3& sensor_origin,
                                            std::span<const DistanceBin> bins,
                                            const std::optional<GridSpec>& region) {
  double x0, x1, y0, y1;
  if (region) {
    x0 = region->x_min;
    x1 = region->x_max();
    y0 = region->y_min;
    y1 = region->y_max();
  } else if (!cloud.points.empty()) {
    x0 = x1 = cloud.points[0].x;
    y0 = y1 = cloud.points[0].y;
    for (const auto& p : cloud.points) {
      x0 = std::min(x0, p.x);
      x1 = std::max(x1, p.x);
      y0 = std::min(y0, p.y);
      y1 = std::max(y1, p.y);
    }
  } else {
    x0 = x1 = y0 = y1 = 0.0;
  }
  std::vector<DensityRow> rows;
  for (const auto& bin : bins) {
    DensityRow row;
    row.bin = bin;
    row.area = disk_rect_area(sensor_origin.x, sensor_origin.y, bin.r_max, x0, x1, y0, y1) -
               disk_rect_area(sensor_origin.x, sensor_origin.y, bin.r_min, x0, x1, y0, y1);
    rows.push_back(row);
  }
  for (const auto& p : cloud.points) {
    if (p.x < x0 || p.x > x1 || p.y < y0 || p.y > y1) continue;
    const double r = std::hypot(p.x - sensor_origin.x, p.y - sensor_origin.y);
    for (auto& row : rows) {
      if (r >= row.bin.r_min && r < row.bin.r_max) ++row.count;
    }
  }
  for (auto& row : rows) {
    row.density = row.area > 0.0 ? static_cast<double>(row.count) / row.area : 0.0;
  }
  return rows;
}

namespace {

std::vector<MapElement> of_class(const VectorMap& map, ElementClass cls) {
  std::vector<MapElement> out;
  for (const auto& e : map.elements) {
    if (e.element == cls) out.push_back(e);
  }
  return out;
}

bool has_class(const VectorMap& map, ElementClass cls) {
  return std::any_of(map.elements.begin(), map.elements.end(),
                     [cls](const MapElement& e) { return e.element == cls; });
}

}  // namespace

EvalReport evaluate(const VectorMap& pred, const VectorMap& gt,
                    const MatchConfig& cfg) {
  if (pred.crs_note != gt.crs_note) {
    throw Error(ErrorCode::kFrameMismatch, "prediction frame '" +
                                               pred.crs_note + "' vs ground truth '" +
                                               gt.crs_note + "'");
  }
  EvalReport report;
  report.eval_grid =
      evaluation_grid(pred, gt, cfg.eval_cell, cfg.line_width + cfg.eval_cell);
  double sum = 0.0;
  int present = 0;
  for (auto cls : kMapClasses) {
    if (!has_class(gt, cls)) continue;
    const RasterMask p = rasterize_map(pred, cls, report.eval_grid, cfg.line_width);
    const RasterMask g = rasterize_map(gt, cls, report.eval_grid, cfg.line_width);
    const double value = iou(p, g);
    report.iou[cls] = value;
    sum += value;
    ++present;
  }
  if (present > 0) report.miou = sum / present;

  for (auto cls : kMapClasses) {
    const auto preds = of_class(pred, cls);
    const auto gts = of_class(gt, cls);
    if (gts.empty() && preds.empty()) continue;
    report.ap[cls] = average_precision(preds, gts, cfg);
    if (gts.empty()) continue;
    const auto matches = match_instances(preds, gts, cfg);
    std::vector<std::vector<Vec2>> gt_samples;
    for (const auto& g : gts) gt_samples.push_back(resample_curve(curve_of(g), cfg.sample_step));
    for (const auto& m : matches) {
      InstanceCd entry;
      entry.element = cls;
      entry.pred_index = m.pred_index;
      entry.true_positive = m.true_positive;
      const auto ps = resample_curve(curve_of(preds[m.pred_index]), cfg.sample_step);
      double best = std::numeric_limits<double>::infinity();
      for (const auto& gs : gt_samples) {
        best = std::min(best, chamfer_one_way_samples(ps, gs));
      }
      entry.cd = best;
      report.instance_cd.push_back(entry);
    }
  }
  return report;
}

std::vector<LocalEval> evaluate_by_distance(const VectorMap& pred,
                                            const VectorMap& gt,
                                            const Point3& origin,
                                            std::span<const DistanceBin> bins,
                                            const MatchConfig& cfg) {
  if (pred.crs_note != gt.crs_note) {
    throw Error(ErrorCode::kFrameMismatch, "maps declare different frames");
  }
  const GridSpec grid =
      evaluation_grid(pred, gt, cfg.eval_cell, cfg.line_width + cfg.eval_cell);
  std::vector<double> dist(grid.cell_count());
  for (int row = 0; row < grid.rows; ++row) {
    for (int col = 0; col < grid.cols; ++col) {
      const Vec2 c = grid.cell_center(col, row);
      dist[static_cast<std::size_t>(row) * grid.cols + col] =
          std::hypot(c.x - origin.x, c.y - origin.y);
    }
  }
  std::vector<LocalEval> out;
  for (const auto& bin : bins) {
    LocalEval le;
    le.bin = bin;
    out.push_back(le);
  }
  for (auto cls : kMapClasses) {
    if (!has_class(gt, cls)) continue;
    const RasterMask p = rasterize_map(pred, cls, grid, cfg.line_width);
    const RasterMask g = rasterize_map(gt, cls, grid, cfg.line_width);
    for (auto& le : out) {
      std::size_t inter = 0, uni = 0, gt_cells = 0;
      for (std::size_t i = 0; i < dist.size(); ++i) {
        if (dist[i] < le.bin.r_min || dist[i] >= le.bin.r_max) continue;
        inter += p.bits[i] & g.bits[i];
        uni += p.bits[i] | g.bits[i];
        gt_cells += g.bits[i];
      }
      if (gt_cells == 0) continue;
      le.iou[cls] = static_cast<double>(inter) / static_cast<double>(uni);
    }
  }
  for (auto& le : out) {
    if (le.iou.empty()) continue;
    double s = 0.0;
    for (const auto& [cls, v] : le.iou) s += v;
    le.miou = s / static_cast<double>(le.iou.size());
  }
  return out;
}

}  // namespace rsmap
