#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>

namespace rsmap {

/// A LiDAR return in the world (map) frame. Coordinates in metres, intensity
/// on the sensor's unitless reflectivity scale.
struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  double intensity = 0.0;

  friend bool operator==(const Point3&, const Point3&) = default;
};

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Vec2&, const Vec2&) = default;
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
double norm(Vec2 a);

struct PixelCoord {
  double u = 0.0;
  double v = 0.0;
};

using Matrix3 = std::array<double, 9>;  // row-major
using Vector3 = std::array<double, 3>;

/// Pinhole camera: intrinsics (f, dx, dy, u0, v0) and world->camera
/// extrinsics (R, T).
struct CameraCalibration {
  double f = 1.0;
  double dx = 1.0;
  double dy = 1.0;
  double u0 = 0.0;
  double v0 = 0.0;
  Matrix3 R{1, 0, 0, 0, 1, 0, 0, 0, 1};
  Vector3 T{0, 0, 0};
  int image_width = 1;
  int image_height = 1;

  double fx() const { return f / dx; }
  double fy() const { return f / dy; }

  /// Throws Error(kInvalidArgument) when R is not a proper rotation, or
  /// f, dx, dy, or the image size is non-positive.
  void validate() const;
};

struct Projection {
  PixelCoord pixel;
  double depth = 0.0;  // camera-frame Zc
};

inline constexpr double kMinProjectionDepth = 1e-6;

/// Projects a world point into the image. Returns nullopt when the point
/// lies at or behind the camera plane (Zc <= min_depth).
std::optional<Projection> project_point(
    const Point3& p, const CameraCalibration& calib,
    double min_depth = kMinProjectionDepth);

/// Inverse of project_point for a known camera-frame depth.
Point3 back_project(PixelCoord pixel, double depth,
                    const CameraCalibration& calib);

/// Camera centre in world coordinates (-R^T T).
Vector3 camera_center(const CameraCalibration& calib);

/// World-frame direction of the viewing ray through a pixel (not normalized).
Vector3 pixel_ray(PixelCoord pixel, const CameraCalibration& calib);

/// Builds a rotation from yaw about world z followed by a downward pitch, for
/// a camera whose optical axis points along world +x at zero angles.
Matrix3 look_rotation(double yaw_rad, double pitch_down_rad);

struct GridSpec {
  double x_min = 0.0;
  double y_min = 0.0;
  double cell_size_x = 0.01;
  double cell_size_y = 0.01;
  int cols = 1;
  int rows = 1;

  void validate() const;
  double x_max() const { return x_min + cols * cell_size_x; }
  double y_max() const { return y_min + rows * cell_size_y; }
  std::size_t cell_count() const {
    return static_cast<std::size_t>(cols) * static_cast<std::size_t>(rows);
  }
  Vec2 cell_center(int col, int row) const {
    return {x_min + (col + 0.5) * cell_size_x,
            y_min + (row + 0.5) * cell_size_y};
  }

  friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

/// Column/row of a grid cell. Row 0 is the minimum-y row.
struct CellIndex {
  int col = 0;
  int row = 0;

  friend bool operator==(const CellIndex&, const CellIndex&) = default;
};

/// Half-open floor binning of a point into the grid; nullopt when the point
/// falls outside [0, cols) x [0, rows).
std::optional<CellIndex> grid_index(const Point3& p, const GridSpec& spec);

/// Smallest grid of the given cell size whose lower corner is the cloud's
/// minimum x/y and which contains every point.
GridSpec grid_from_bounds(std::span<const Point3> points, double cell_size);

/// Plane n.p + d = 0 with unit normal.
struct Plane {
  Vector3 normal{0, 0, 1};
  double d = 0.0;

  double signed_distance(const Point3& p) const {
    return normal[0] * p.x + normal[1] * p.y + normal[2] * p.z + d;
  }
};

/// Orthogonal least-squares plane. The normal is oriented to positive z
/// (ties broken by positive y, then positive x). Throws
/// Error(kDegenerateInput) on fewer than three or collinear points.
Plane fit_plane_least_squares(std::span<const Point3> points);

/// Reorients a plane so that its normal satisfies the sign convention above.
Plane canonical_plane(Plane plane);

double angle_between_deg(const Vector3& a, const Vector3& b);

}  // namespace rsmap
