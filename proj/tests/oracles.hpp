#pragma once

// Brute-force reference implementations shared by the unit tests and the
// acceptance binary. They trade speed for obviousness and share no code with
// the library.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <vector>

#include "rsmap/geometry.hpp"
#include "rsmap/vectorize.hpp"

namespace rsmap::oracle {

/// Connected components by O(n^2) adjacency, sorted by first member.
inline std::vector<std::vector<std::size_t>> union_find_clusters(
    const std::vector<Point3>& pts, double radius, std::size_t min_size) {
  std::vector<std::size_t> parent(pts.size());
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x];
    return x;
  };
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (std::size_t j = i + 1; j < pts.size(); ++j) {
      const double dx = pts[i].x - pts[j].x, dy = pts[i].y - pts[j].y,
                   dz = pts[i].z - pts[j].z;
      if (dx * dx + dy * dy + dz * dz <= radius * radius) {
        const auto a = find(i), b = find(j);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
      }
    }
  }
  std::map<std::size_t, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < pts.size(); ++i) groups[find(i)].push_back(i);
  std::vector<std::vector<std::size_t>> out;
  for (auto& [root, members] : groups) {
    if (members.size() >= min_size) out.push_back(members);
  }
  std::sort(out.begin(), out.end());
  return out;
}

/// Arc-length samples every `step` from the first vertex; open curves also
/// get their last vertex, closed curves wrap around without repeating it.
inline std::vector<Vec2> resample(std::vector<Vec2> path, bool closed, double step) {
  if (closed) path.push_back(path.front());
  std::vector<Vec2> out;
  double walked = 0.0;  // arc length at the start of the current segment
  std::size_t k = 0;
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    const double dx = path[i + 1].x - path[i].x, dy = path[i + 1].y - path[i].y;
    const double len = std::sqrt(dx * dx + dy * dy);
    while (len > 0.0 && k * step < walked + len) {
      const double t = (k * step - walked) / len;
      out.push_back({path[i].x + t * dx, path[i].y + t * dy});
      ++k;
    }
    walked += len;
  }
  if (out.empty()) out.push_back(path.front());
  if (!closed) out.push_back(path.back());
  return out;
}

/// Mean nearest distance from each prediction sample to the GT samples.
inline double chamfer(const std::vector<Vec2>& pred, const std::vector<Vec2>& gt) {
  double sum = 0.0;
  for (const auto& p : pred) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& q : gt) best = std::min(best, std::hypot(p.x - q.x, p.y - q.y));
    sum += best;
  }
  return sum / static_cast<double>(pred.size());
}

/// Cell-centre membership of one map element: crossing-number test for
/// polygons; butt-capped strips plus round interior joins for polylines.
inline bool covers(const MapElement& e, double line_width, double x, double y) {
  const auto& v = e.vertices;
  if (e.kind == GeometryKind::kPolygon) {
    int crossings = 0;
    for (std::size_t i = 0; i < v.size(); ++i) {
      const Vec2 a = v[i], b = v[(i + 1) % v.size()];
      if ((a.y <= y && b.y > y) || (b.y <= y && a.y > y)) {
        const double xi = a.x + (y - a.y) / (b.y - a.y) * (b.x - a.x);
        if (x < xi) ++crossings;
      }
    }
    return crossings % 2 == 1;
  }
  const double half = line_width / 2;
  for (std::size_t i = 0; i + 1 < v.size(); ++i) {
    const double ux = v[i + 1].x - v[i].x, uy = v[i + 1].y - v[i].y;
    const double len = std::hypot(ux, uy);
    const double t = ((x - v[i].x) * ux + (y - v[i].y) * uy) / len;
    const double off = std::abs((x - v[i].x) * uy - (y - v[i].y) * ux) / len;
    if (t >= 0 && t <= len && off <= half) return true;
  }
  for (std::size_t i = 1; i + 1 < v.size(); ++i) {
    if (std::hypot(x - v[i].x, y - v[i].y) <= half) return true;
  }
  return false;
}

/// IoU by scanning every cell of a `cell`-metre raster over [x0,x1]x[y0,y1].
inline double pixel_iou(const MapElement& a, const MapElement& b, double line_width,
                        double x0, double y0, double x1, double y1, double cell) {
  const int cols = static_cast<int>(std::ceil((x1 - x0) / cell));
  const int rows = static_cast<int>(std::ceil((y1 - y0) / cell));
  std::size_t inter = 0, uni = 0;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const double x = x0 + (c + 0.5) * cell, y = y0 + (r + 0.5) * cell;
      const bool in_a = covers(a, line_width, x, y);
      const bool in_b = covers(b, line_width, x, y);
      inter += in_a && in_b;
      uni += in_a || in_b;
    }
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

/// Random simple shape inside [0, 4]^2: a star-shaped polygon or a polyline.
inline MapElement random_shape(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  MapElement e;
  e.element = ElementClass::kPedestrianCrossing;
  const double cx = 1.2 + 1.6 * u(rng), cy = 1.2 + 1.6 * u(rng);
  if (u(rng) < 0.6) {
    e.kind = GeometryKind::kPolygon;
    const int n = 3 + static_cast<int>(u(rng) * 6);
    std::vector<double> ang(n);
    for (auto& a : ang) a = 2 * 3.141592653589793 * u(rng);
    std::sort(ang.begin(), ang.end());
    for (double a : ang) {
      const double r = 0.3 + 0.9 * u(rng);
      e.vertices.push_back({cx + r * std::cos(a), cy + r * std::sin(a)});
    }
  } else {
    e.element = ElementClass::kLaneDivider;
    e.kind = GeometryKind::kPolyline;
    const int n = 2 + static_cast<int>(u(rng) * 3);
    for (int i = 0; i < n; ++i) {
      e.vertices.push_back({cx + 2.4 * (u(rng) - 0.5), cy + 2.4 * (u(rng) - 0.5)});
    }
  }
  return e;
}

inline std::vector<Vec2> random_polyline(std::mt19937_64& rng, int max_vertices = 6) {
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  std::uniform_int_distribution<int> n(2, max_vertices);
  std::vector<Vec2> out(static_cast<std::size_t>(n(rng)));
  for (auto& v : out) v = {u(rng), u(rng)};
  return out;
}

}  // namespace rsmap::oracle
