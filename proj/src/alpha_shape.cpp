#include <algorithm>
#include <boost/polygon/voronoi.hpp>
#include <cmath>
#include <map>
#include <numbers>

#include "rsmap/errors.hpp"
#include "rsmap/vectorize.hpp"

namespace {

struct GridPoint {
  std::int32_t x;
  std::int32_t y;
};

}  // namespace

namespace boost::polygon {

template <>
struct geometry_concept<GridPoint> {
  using type = point_concept;
};

template <>
struct point_traits<GridPoint> {
  using coordinate_type = std::int32_t;
  static coordinate_type get(const GridPoint& p, orientation_2d orient) {
    return orient == HORIZONTAL ? p.x : p.y;
  }
};

}  // namespace boost::polygon

namespace rsmap {

namespace {

// Sites are snapped to a 0.1 mm lattice so the Voronoi construction runs on
// exact integer input.
constexpr double kQuantum = 1e-4;

using Diagram = boost::polygon::voronoi_diagram<double>;

struct DirectedEdge {
  std::size_t from;
  std::size_t to;
};

double clockwise_angle(Vec2 from_dir, Vec2 to_dir) {
  const double ccw = std::atan2(cross(from_dir, to_dir), dot(from_dir, to_dir));
  double cw = -ccw;
  if (cw <= 0.0) cw += 2.0 * std::numbers::pi;
  return cw;
}

}  // namespace

std::vector<Vec2> alpha_shape_polygon(std::span<const Point3> cluster,
                                      double alpha) {
  if (!(alpha > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "alpha must be positive");
  }
  if (cluster.size() < 3) {
    throw Error(ErrorCode::kDegenerateCluster, "alpha shape needs 3 points");
  }
  double cx = 0.0, cy = 0.0;
  for (const auto& p : cluster) {
    cx += p.x;
    cy += p.y;
  }
  cx /= static_cast<double>(cluster.size());
  cy /= static_cast<double>(cluster.size());

  // Snap and deduplicate; remember the first original point of each site.
  std::map<std::pair<std::int64_t, std::int64_t>, std::size_t> seen;
  std::vector<GridPoint> sites;
  std::vector<Vec2> original;
  for (const auto& p : cluster) {
    const auto qx = static_cast<std::int64_t>(std::llround((p.x - cx) / kQuantum));
    const auto qy = static_cast<std::int64_t>(std::llround((p.y - cy) / kQuantum));
    if (std::abs(qx) > (1LL << 30) || std::abs(qy) > (1LL << 30)) {
      throw Error(ErrorCode::kInvalidArgument, "cluster extent too large");
    }
    if (seen.emplace(std::make_pair(qx, qy), sites.size()).second) {
      sites.push_back({static_cast<std::int32_t>(qx),
                       static_cast<std::int32_t>(qy)});
      original.push_back({p.x, p.y});
    }
  }
  if (sites.size() < 3) {
    throw Error(ErrorCode::kDegenerateCluster, "fewer than 3 distinct points");
  }
  bool collinear = true;
  for (std::size_t i = 2; i < sites.size() && collinear; ++i) {
    const std::int64_t ux = sites[1].x - sites[0].x, uy = sites[1].y - sites[0].y;
    const std::int64_t vx = sites[i].x - sites[0].x, vy = sites[i].y - sites[0].y;
    collinear = ux * vy - uy * vx == 0;
  }
  if (collinear) {
    throw Error(ErrorCode::kDegenerateCluster, "points are collinear");
  }

  Diagram vd;
  boost::polygon::construct_voronoi(sites.begin(), sites.end(), &vd);

  // A Voronoi vertex is a Delaunay face; its circumradius is the distance to
  // any of its sites.
  const auto& vertices = vd.vertices();
  std::vector<char> kept(vertices.size(), 0);
  for (std::size_t i = 0; i < vertices.size(); ++i) {
    const auto& v = vertices[i];
    const auto& site = sites[v.incident_edge()->cell()->source_index()];
    const double r =
        std::hypot(v.x() - site.x, v.y() - site.y) * kQuantum;
    kept[i] = r <= alpha;
  }
  const auto is_kept = [&](const Diagram::vertex_type* v) {
    return v != nullptr && kept[static_cast<std::size_t>(v - vertices.data())];
  };

  // Cell edges run counter-clockwise around their site, so for the Delaunay
  // edge A->B the face dual to vertex1 lies on the left.
  std::vector<DirectedEdge> boundary;
  for (const auto& e : vd.edges()) {
    if (!e.is_primary()) continue;
    if (is_kept(e.vertex1()) && !is_kept(e.vertex0())) {
      boundary.push_back({e.cell()->source_index(),
                          e.twin()->cell()->source_index()});
    }
  }
  if (boundary.empty()) {
    throw Error(ErrorCode::kDegenerateCluster,
                "no Delaunay face within alpha");
  }
  std::sort(boundary.begin(), boundary.end(),
            [](const DirectedEdge& a, const DirectedEdge& b) {
              return std::tie(a.from, a.to) < std::tie(b.from, b.to);
            });
  std::multimap<std::size_t, std::size_t> outgoing;  // from -> edge index
  for (std::size_t i = 0; i < boundary.size(); ++i) {
    outgoing.emplace(boundary[i].from, i);
  }

  const auto pos = [&](std::size_t site) {
    return Vec2{static_cast<double>(sites[site].x),
                static_cast<double>(sites[site].y)};
  };

  std::vector<char> used(boundary.size(), 0);
  std::vector<std::size_t> best_ring;
  double best_area = 0.0;
  for (std::size_t start = 0; start < boundary.size(); ++start) {
    if (used[start]) continue;
    std::vector<std::size_t> ring;
    std::size_t current = start;
    used[start] = 1;
    while (true) {
      const auto& edge = boundary[current];
      ring.push_back(edge.from);
      const Vec2 back = pos(edge.from) - pos(edge.to);
      // At a pinch vertex take the outgoing edge with the smallest clockwise
      // turn from the incoming edge, which keeps rings simple.
      std::optional<std::size_t> next;
      double next_angle = 0.0;
      auto [lo, hi] = outgoing.equal_range(edge.to);
      for (auto it = lo; it != hi; ++it) {
        const std::size_t cand = it->second;
        if (used[cand] && cand != start) continue;
        const double a =
            clockwise_angle(back, pos(boundary[cand].to) - pos(edge.to));
        if (!next || a < next_angle) {
          next = cand;
          next_angle = a;
        }
      }
      if (!next || *next == start) break;
      used[*next] = 1;
      current = *next;
    }
    double area2 = 0.0;
    for (std::size_t i = 0; i < ring.size(); ++i) {
      area2 += cross(pos(ring[i]), pos(ring[(i + 1) % ring.size()]));
    }
    if (area2 > best_area) {
      best_area = area2;
      best_ring = std::move(ring);
    }
  }
  if (best_ring.size() < 3) {
    throw Error(ErrorCode::kDegenerateCluster, "alpha shape has no area");
  }
  std::vector<Vec2> out;
  out.reserve(best_ring.size());
  for (std::size_t s : best_ring) out.push_back(original[s]);
  return out;
}

}  // namespace rsmap
