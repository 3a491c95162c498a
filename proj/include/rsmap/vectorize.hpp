#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "rsmap/fusion.hpp"
#include "rsmap/geometry.hpp"
#include "rsmap/raster.hpp"

namespace rsmap {

enum class GeometryKind { kPolyline, kPolygon };

struct MapElement {
  ElementClass element = ElementClass::kLaneDivider;
  GeometryKind kind = GeometryKind::kPolyline;
  // Polygons store their ring counter-clockwise without repeating the first
  // vertex.
  std::vector<Vec2> vertices;
  std::size_t support_count = 0;
  double confidence = 1.0;
};

struct VectorMap {
  std::vector<MapElement> elements;
  std::string crs_note = "local";

  /// Throws Error(kInvariantViolation) on too few vertices, non-finite
  /// coordinates or a background class.
  void validate() const;
};

struct VectorizeConfig {
  int sor_k = 16;
  double sor_n_sigma = 2.0;
  double cluster_radius = 0.5;
  std::size_t min_cluster_size = 10;
  double alpha = 0.5;
  // Line clusters longer than split_length are cut into pieces of roughly
  // split_interval before fitting.
  double split_length = 20.0;
  double split_interval = 10.0;
};

/// Statistical outlier removal: drops points whose mean distance to their k
/// nearest neighbours exceeds mean + n_sigma * stddev over the set. Inputs
/// with at most k points come back unchanged. Keeps input order.
std::vector<Point3> sor_denoise(std::span<const Point3> points, int k,
                                double n_sigma);

/// Connected components of the graph joining points closer than or equal to
/// `radius`. Components smaller than min_cluster_size are dropped. Each
/// cluster lists input indices in ascending order; clusters are ordered by
/// their first index.
std::vector<std::vector<std::size_t>> cluster_nn(
    std::span<const Point3> points, double radius,
    std::size_t min_cluster_size = 10);

/// Outer boundary of the alpha shape of the points projected to the ground
/// plane: the union of Delaunay faces with circumradius <= alpha. Returns the
/// largest ring, counter-clockwise. Throws Error(kDegenerateCluster) for
/// fewer than 3 distinct or collinear points.
std::vector<Vec2> alpha_shape_polygon(std::span<const Point3> cluster,
                                      double alpha);

struct LineFit {
  Vec2 centroid;
  Vec2 direction;  // unit, x >= 0 (y > 0 when x == 0)
  std::array<Vec2, 2> segment;
};

/// Orthogonal least-squares line through the points (principal axis of the
/// 2D covariance). The segment spans the extreme point projections.
/// Throws Error(kDegenerateCluster) for fewer than 2 points or no spread.
LineFit fit_line(std::span<const Point3> cluster);

inline std::array<Vec2, 2> fit_line_segment(std::span<const Point3> cluster) {
  return fit_line(cluster).segment;
}

/// Per class: dedup, SOR, clustering, then a polygon for crossings and a
/// fitted segment for dividers and stop lines.
VectorMap vectorize_map(const LabeledPoints& labeled,
                        const VectorizeConfig& cfg = {});

/// Concatenation of two maps without exact duplicates (same class, kind and
/// vertices within 1e-6 m).
VectorMap union_maps(const VectorMap& a, const VectorMap& b);

bool same_geometry(const MapElement& a, const MapElement& b,
                   double tol = 1e-6);

double polygon_area(std::span<const Vec2> ring);  // signed, CCW positive
double polygon_perimeter(std::span<const Vec2> ring);
double polyline_length(std::span<const Vec2> line);
bool ring_is_simple(std::span<const Vec2> ring);

}  // namespace rsmap
