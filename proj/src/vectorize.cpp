#include "rsmap/vectorize.hpp"

#include <algorithm>
#include <boost/geometry.hpp>
#include <boost/geometry/index/rtree.hpp>
#include <cmath>
#include <numeric>
#include <tuple>
#include <unordered_map>

#include "rsmap/errors.hpp"

namespace rsmap {

namespace bg = boost::geometry;
namespace bgi = boost::geometry::index;

void VectorMap::validate() const {
  for (const auto& e : elements) {
    if (e.element == ElementClass::kBackground) {
      throw Error(ErrorCode::kInvariantViolation, "background map element");
    }
    const std::size_t min_vertices = e.kind == GeometryKind::kPolygon ? 3 : 2;
    if (e.vertices.size() < min_vertices) {
      throw Error(ErrorCode::kInvariantViolation, "element has too few vertices");
    }
    for (const auto& v : e.vertices) {
      if (!std::isfinite(v.x) || !std::isfinite(v.y)) {
        throw Error(ErrorCode::kInvariantViolation, "non-finite vertex");
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Statistical outlier removal

std::vector<Point3> sor_denoise(std::span<const Point3> points, int k,
                                double n_sigma) {
  if (k < 1) throw Error(ErrorCode::kInvalidArgument, "SOR k must be >= 1");
  const std::size_t n = points.size();
  if (n <= static_cast<std::size_t>(k)) {
    return {points.begin(), points.end()};
  }
  using BPoint = bg::model::point<double, 3, bg::cs::cartesian>;
  using Value = std::pair<BPoint, std::size_t>;
  std::vector<Value> values;
  values.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    values.emplace_back(BPoint(points[i].x, points[i].y, points[i].z), i);
  }
  const bgi::rtree<Value, bgi::rstar<16>> tree(values.begin(), values.end());

  std::vector<double> mean_dist(n);
  std::vector<Value> hits;
  std::vector<double> d;
  for (std::size_t i = 0; i < n; ++i) {
    hits.clear();
    tree.query(bgi::nearest(values[i].first, static_cast<unsigned>(k + 1)),
               std::back_inserter(hits));
    d.clear();
    for (const auto& h : hits) {
      d.push_back(bg::distance(h.first, values[i].first));
    }
    std::sort(d.begin(), d.end());
    // The nearest hit is the point itself (or an exact duplicate of it).
    mean_dist[i] =
        std::accumulate(d.begin() + 1, d.end(), 0.0) / static_cast<double>(k);
  }
  const double mean =
      std::accumulate(mean_dist.begin(), mean_dist.end(), 0.0) / n;
  double var = 0.0;
  for (double m : mean_dist) var += (m - mean) * (m - mean);
  const double stddev = std::sqrt(var / n);
  const double limit = mean + n_sigma * stddev;

  std::vector<Point3> kept;
  kept.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(mean_dist[i] > limit)) kept.push_back(points[i]);
  }
  return kept;
}

// ---------------------------------------------------------------------------
// Radius clustering

namespace {

class DisjointSet {
 public:
  explicit DisjointSet(std::size_t n) : parent_(n) {
    std::iota(parent_.begin(), parent_.end(), 0);
  }
  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (a > b) std::swap(a, b);
    parent_[b] = a;
  }

 private:
  std::vector<std::size_t> parent_;
};

struct CellKey {
  std::int64_t x, y, z;
  friend bool operator==(const CellKey&, const CellKey&) = default;
  friend bool operator<(const CellKey& a, const CellKey& b) {
    return std::tie(a.x, a.y, a.z) < std::tie(b.x, b.y, b.z);
  }
};

struct CellKeyHash {
  std::size_t operator()(const CellKey& k) const {
    std::uint64_t h = static_cast<std::uint64_t>(k.x) * 0x9E3779B97F4A7C15ULL;
    h = (h ^ (h >> 29)) + static_cast<std::uint64_t>(k.y) * 0xBF58476D1CE4E5B9ULL;
    h = (h ^ (h >> 31)) + static_cast<std::uint64_t>(k.z) * 0x94D049BB133111EBULL;
    return static_cast<std::size_t>(h ^ (h >> 32));
  }
};

double squared_distance(const Point3& a, const Point3& b) {
  const double dx = a.x - b.x, dy = a.y - b.y, dz = a.z - b.z;
  return dx * dx + dy * dy + dz * dz;
}

}  // namespace

std::vector<std::vector<std::size_t>> cluster_nn(std::span<const Point3> points,
                                                 double radius,
                                                 std::size_t min_cluster_size) {
  if (!(radius > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "cluster radius must be > 0");
  }
  const std::size_t n = points.size();
  // Cube cells with diagonal equal to the radius: points sharing a cell are
  // always linked, and links only reach cells at most two steps away.
  const double cell = radius / std::sqrt(3.0);
  const double r2 = radius * radius;
  std::vector<std::pair<CellKey, std::size_t>> keyed(n);
  for (std::size_t i = 0; i < n; ++i) {
    keyed[i] = {{static_cast<std::int64_t>(std::floor(points[i].x / cell)),
                 static_cast<std::int64_t>(std::floor(points[i].y / cell)),
                 static_cast<std::int64_t>(std::floor(points[i].z / cell))},
                i};
  }
  std::sort(keyed.begin(), keyed.end(),
            [](const auto& a, const auto& b) {
              return std::tie(a.first, a.second) < std::tie(b.first, b.second);
            });
  std::unordered_map<CellKey, std::pair<std::size_t, std::size_t>, CellKeyHash>
      ranges;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && keyed[j].first == keyed[i].first) ++j;
    ranges.emplace(keyed[i].first, std::make_pair(i, j));
    i = j;
  }

  DisjointSet ds(n);
  for (const auto& [key, range] : ranges) {
    for (std::size_t i = range.first + 1; i < range.second; ++i) {
      ds.unite(keyed[range.first].second, keyed[i].second);
    }
  }
  for (const auto& [key, range] : ranges) {
    for (int dx = -2; dx <= 2; ++dx) {
      for (int dy = -2; dy <= 2; ++dy) {
        for (int dz = -2; dz <= 2; ++dz) {
          const CellKey other{key.x + dx, key.y + dy, key.z + dz};
          if (!(key < other)) continue;
          const double gx = std::max(0, std::abs(dx) - 1) * cell;
          const double gy = std::max(0, std::abs(dy) - 1) * cell;
          const double gz = std::max(0, std::abs(dz) - 1) * cell;
          if (gx * gx + gy * gy + gz * gz > r2) continue;
          const auto it = ranges.find(other);
          if (it == ranges.end()) continue;
          const std::size_t a0 = keyed[range.first].second;
          const std::size_t b0 = keyed[it->second.first].second;
          if (ds.find(a0) == ds.find(b0)) continue;
          bool linked = false;
          for (std::size_t i = range.first; i < range.second && !linked; ++i) {
            for (std::size_t j = it->second.first; j < it->second.second; ++j) {
              if (squared_distance(points[keyed[i].second],
                                   points[keyed[j].second]) <= r2) {
                ds.unite(a0, b0);
                linked = true;
                break;
              }
            }
          }
        }
      }
    }
  }

  std::unordered_map<std::size_t, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < n; ++i) groups[ds.find(i)].push_back(i);
  std::vector<std::vector<std::size_t>> clusters;
  for (auto& [root, members] : groups) {
    if (members.size() >= min_cluster_size) {
      clusters.push_back(std::move(members));
    }
  }
  std::sort(clusters.begin(), clusters.end(),
            [](const auto& a, const auto& b) { return a.front() < b.front(); });
  return clusters;
}

// ---------------------------------------------------------------------------
// Line fitting

LineFit fit_line(std::span<const Point3> cluster) {
  if (cluster.size() < 2) {
    throw Error(ErrorCode::kDegenerateCluster, "line fit needs 2 points");
  }
  const double n = static_cast<double>(cluster.size());
  double cx = 0.0, cy = 0.0;
  for (const auto& p : cluster) {
    cx += p.x;
    cy += p.y;
  }
  cx /= n;
  cy /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (const auto& p : cluster) {
    const double dx = p.x - cx, dy = p.y - cy;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (!(sxx + syy > 0.0)) {
    throw Error(ErrorCode::kDegenerateCluster, "line fit input has no spread");
  }
  const double theta = 0.5 * std::atan2(2.0 * sxy, sxx - syy);
  Vec2 dir{std::cos(theta), std::sin(theta)};
  if (dir.x < 0.0 || (dir.x == 0.0 && dir.y < 0.0)) dir = -1.0 * dir;

  double tmin = 0.0, tmax = 0.0;
  bool first = true;
  for (const auto& p : cluster) {
    const double t = (p.x - cx) * dir.x + (p.y - cy) * dir.y;
    if (first || t < tmin) tmin = t;
    if (first || t > tmax) tmax = t;
    first = false;
  }
  LineFit fit;
  fit.centroid = {cx, cy};
  fit.direction = dir;
  fit.segment = {fit.centroid + tmin * dir, fit.centroid + tmax * dir};
  return fit;
}

// ---------------------------------------------------------------------------
// Map assembly

namespace {

std::vector<Point3> canonical_points(const LabeledPoints& labeled,
                                     ElementClass cls) {
  std::vector<Point3> pts = labeled.points(cls);
  std::sort(pts.begin(), pts.end(), [](const Point3& a, const Point3& b) {
    return std::tie(a.x, a.y, a.z, a.intensity) <
           std::tie(b.x, b.y, b.z, b.intensity);
  });
  pts.erase(std::unique(pts.begin(), pts.end(),
                        [](const Point3& a, const Point3& b) {
                          return a.x == b.x && a.y == b.y && a.z == b.z;
                        }),
            pts.end());
  return pts;
}

void add_line_elements(ElementClass cls, const std::vector<Point3>& cluster,
                       const VectorizeConfig& cfg,
                       std::vector<MapElement>& out) {
  LineFit fit;
  try {
    fit = fit_line(cluster);
  } catch (const Error&) {
    return;
  }
  const double extent = norm(fit.segment[1] - fit.segment[0]);
  std::vector<std::vector<Point3>> pieces;
  if (extent > cfg.split_length && cfg.split_interval > 0.0) {
    const auto count = std::max<long long>(
        2, std::llround(extent / cfg.split_interval));
    const double step = extent / static_cast<double>(count);
    pieces.resize(static_cast<std::size_t>(count));
    const Vec2 origin = fit.segment[0];
    for (const auto& p : cluster) {
      const double t = dot(Vec2{p.x, p.y} - origin, fit.direction);
      const auto idx = std::clamp<long long>(
          static_cast<long long>(std::floor(t / step)), 0, count - 1);
      pieces[static_cast<std::size_t>(idx)].push_back(p);
    }
  } else {
    pieces.push_back(cluster);
  }
  for (const auto& piece : pieces) {
    try {
      const auto seg = fit_line_segment(piece);
      MapElement e;
      e.element = cls;
      e.kind = GeometryKind::kPolyline;
      e.vertices = {seg[0], seg[1]};
      e.support_count = piece.size();
      out.push_back(std::move(e));
    } catch (const Error&) {
      // Piece without spread.
    }
  }
}

}  // namespace

VectorMap vectorize_map(const LabeledPoints& labeled,
                        const VectorizeConfig& cfg) {
  VectorMap map;
  for (auto cls : kMapClasses) {
    const std::vector<Point3> pts = canonical_points(labeled, cls);
    if (pts.empty()) continue;
    const std::vector<Point3> clean = sor_denoise(pts, cfg.sor_k, cfg.sor_n_sigma);
    const auto clusters =
        cluster_nn(clean, cfg.cluster_radius, cfg.min_cluster_size);
    std::vector<MapElement> elements;
    for (const auto& members : clusters) {
      std::vector<Point3> cluster;
      cluster.reserve(members.size());
      for (std::size_t i : members) cluster.push_back(clean[i]);
      if (cls == ElementClass::kPedestrianCrossing) {
        try {
          MapElement e;
          e.element = cls;
          e.kind = GeometryKind::kPolygon;
          e.vertices = alpha_shape_polygon(cluster, cfg.alpha);
          e.support_count = cluster.size();
          elements.push_back(std::move(e));
        } catch (const Error& err) {
          if (err.code() != ErrorCode::kDegenerateCluster) throw;
        }
      } else {
        add_line_elements(cls, cluster, cfg, elements);
      }
    }
    std::size_t max_support = 0;
    for (const auto& e : elements) {
      max_support = std::max(max_support, e.support_count);
    }
    for (auto& e : elements) {
      e.confidence = static_cast<double>(e.support_count) /
                     static_cast<double>(max_support);
      map.elements.push_back(std::move(e));
    }
  }
  return map;
}

bool same_geometry(const MapElement& a, const MapElement& b, double tol) {
  if (a.element != b.element || a.kind != b.kind ||
      a.vertices.size() != b.vertices.size()) {
    return false;
  }
  for (std::size_t i = 0; i < a.vertices.size(); ++i) {
    if (std::abs(a.vertices[i].x - b.vertices[i].x) > tol ||
        std::abs(a.vertices[i].y - b.vertices[i].y) > tol) {
      return false;
    }
  }
  return true;
}

VectorMap union_maps(const VectorMap& a, const VectorMap& b) {
  VectorMap out = a;
  std::vector<char> absorbed(a.elements.size(), 0);
  for (const auto& e : b.elements) {
    bool duplicate = false;
    for (std::size_t i = 0; i < a.elements.size(); ++i) {
      if (!absorbed[i] && same_geometry(a.elements[i], e)) {
        absorbed[i] = 1;
        duplicate = true;
        break;
      }
    }
    if (!duplicate) out.elements.push_back(e);
  }
  return out;
}

double polygon_area(std::span<const Vec2> ring) {
  double a = 0.0;
  for (std::size_t i = 0; i < ring.size(); ++i) {
    a += cross(ring[i], ring[(i + 1) % ring.size()]);
  }
  return 0.5 * a;
}

double polygon_perimeter(std::span<const Vec2> ring) {
  double p = 0.0;
  for (std::size_t i = 0; i < ring.size(); ++i) {
    p += norm(ring[(i + 1) % ring.size()] - ring[i]);
  }
  return p;
}

double polyline_length(std::span<const Vec2> line) {
  double len = 0.0;
  for (std::size_t i = 1; i < line.size(); ++i) {
    len += norm(line[i] - line[i - 1]);
  }
  return len;
}

namespace {

int orientation(Vec2 a, Vec2 b, Vec2 c) {
  const double v = cross(b - a, c - a);
  return (v > 0.0) - (v < 0.0);
}

bool on_segment(Vec2 a, Vec2 b, Vec2 p) {
  return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) &&
         std::min(a.y, b.y) <= p.y && p.y <= std::max(a.y, b.y);
}

bool segments_touch(Vec2 a, Vec2 b, Vec2 c, Vec2 d) {
  const int o1 = orientation(a, b, c), o2 = orientation(a, b, d);
  const int o3 = orientation(c, d, a), o4 = orientation(c, d, b);
  if (o1 != o2 && o3 != o4) return true;
  return (o1 == 0 && on_segment(a, b, c)) || (o2 == 0 && on_segment(a, b, d)) ||
         (o3 == 0 && on_segment(c, d, a)) || (o4 == 0 && on_segment(c, d, b));
}

}  // namespace

bool ring_is_simple(std::span<const Vec2> ring) {
  const std::size_t n = ring.size();
  if (n < 3) return false;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (ring[i] == ring[j]) return false;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 a = ring[i], b = ring[(i + 1) % n];
    for (std::size_t j = i + 1; j < n; ++j) {
      if (j == i + 1 || (i == 0 && j == n - 1)) continue;  // adjacent edges
      const Vec2 c = ring[j], d = ring[(j + 1) % n];
      if (segments_touch(a, b, c, d)) return false;
    }
  }
  return true;
}

}  // namespace rsmap
