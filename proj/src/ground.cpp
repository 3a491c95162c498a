#include "rsmap/ground.hpp"

#include <cmath>
#include <random>

#include "rsmap/errors.hpp"

namespace rsmap {

void RansacConfig::validate() const {
  if (max_iterations < 1) {
    throw Error(ErrorCode::kInvalidArgument, "max_iterations must be >= 1");
  }
  if (!(inlier_threshold > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "inlier_threshold must be > 0");
  }
  if (!(min_inliers_fraction > 0.0 && min_inliers_fraction <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument,
                "min_inliers_fraction must be in (0, 1]");
  }
}

namespace {

// Unbiased index in [0, n) from raw 64-bit draws; keeps the seed-to-sample
// mapping independent of the standard library's distribution code.
std::size_t draw_index(std::mt19937_64& rng, std::size_t n) {
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t r;
  do {
    r = rng();
  } while (r >= limit);
  return static_cast<std::size_t>(r % n);
}

std::optional<Plane> plane_through(const Point3& a, const Point3& b,
                                   const Point3& c) {
  const double ux = b.x - a.x, uy = b.y - a.y, uz = b.z - a.z;
  const double vx = c.x - a.x, vy = c.y - a.y, vz = c.z - a.z;
  double nx = uy * vz - uz * vy;
  double ny = uz * vx - ux * vz;
  double nz = ux * vy - uy * vx;
  const double len = std::sqrt(nx * nx + ny * ny + nz * nz);
  const double scale = std::sqrt((ux * ux + uy * uy + uz * uz) *
                                 (vx * vx + vy * vy + vz * vz));
  if (!(len > 1e-12 * scale) || len == 0.0) return std::nullopt;
  nx /= len;
  ny /= len;
  nz /= len;
  Plane p;
  p.normal = {nx, ny, nz};
  p.d = -(nx * a.x + ny * a.y + nz * a.z);
  return p;
}

std::size_t count_inliers(const std::vector<Point3>& pts, const Plane& plane,
                          double threshold) {
  std::size_t count = 0;
  for (const auto& p : pts) {
    if (std::abs(plane.signed_distance(p)) <= threshold) ++count;
  }
  return count;
}

}  // namespace

GroundSplit extract_ground(const PointCloud& cloud, const RansacConfig& cfg) {
  cfg.validate();
  const auto& pts = cloud.points;
  const std::size_t n = pts.size();
  if (n < 3) {
    throw Error(ErrorCode::kDegenerateInput,
                "ground extraction needs at least 3 points");
  }

  std::mt19937_64 rng(cfg.seed);
  std::optional<Plane> best;
  std::size_t best_count = 0;
  for (int it = 0; it < cfg.max_iterations; ++it) {
    const std::size_t i = draw_index(rng, n);
    std::size_t j = draw_index(rng, n);
    std::size_t k = draw_index(rng, n);
    if (i == j || j == k || i == k) continue;
    const auto hypothesis = plane_through(pts[i], pts[j], pts[k]);
    if (!hypothesis) continue;
    const std::size_t count =
        count_inliers(pts, *hypothesis, cfg.inlier_threshold);
    if (count > best_count) {
      best_count = count;
      best = hypothesis;
    }
  }
  const auto min_count = static_cast<double>(n) * cfg.min_inliers_fraction;
  if (!best || static_cast<double>(best_count) < min_count) {
    throw Error(ErrorCode::kNoPlaneFound, "best consensus below minimum");
  }

  std::vector<Point3> consensus;
  consensus.reserve(best_count);
  for (const auto& p : pts) {
    if (std::abs(best->signed_distance(p)) <= cfg.inlier_threshold) {
      consensus.push_back(p);
    }
  }
  Plane plane = canonical_plane(*best);
  try {
    plane = fit_plane_least_squares(consensus);
  } catch (const Error&) {
    // Degenerate consensus set; keep the sampled hypothesis.
  }

  GroundSplit out;
  out.plane = plane;
  out.ground.frame_id = out.non_ground.frame_id = cloud.frame_id;
  out.ground.timestamp = out.non_ground.timestamp = cloud.timestamp;
  for (const auto& p : pts) {
    if (std::abs(plane.signed_distance(p)) <= cfg.inlier_threshold) {
      out.ground.points.push_back(p);
    } else {
      out.non_ground.points.push_back(p);
    }
  }
  if (static_cast<double>(out.ground.points.size()) < min_count) {
    throw Error(ErrorCode::kNoPlaneFound, "refined consensus below minimum");
  }
  return out;
}

}  // namespace rsmap
