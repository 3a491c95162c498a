#include "rsmap/geometry.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "rsmap/errors.hpp"

namespace rsmap {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kDegenerateInput: return "DegenerateInput";
    case ErrorCode::kDegenerateCluster: return "DegenerateCluster";
    case ErrorCode::kNoPlaneFound: return "NoPlaneFound";
    case ErrorCode::kUnknownLabel: return "UnknownLabel";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kClassTableMismatch: return "ClassTableMismatch";
    case ErrorCode::kFrameCountExceeded: return "FrameCountExceeded";
    case ErrorCode::kEmptyGeometry: return "EmptyGeometry";
    case ErrorCode::kSpecMismatch: return "SpecMismatch";
    case ErrorCode::kFrameMismatch: return "FrameMismatch";
    case ErrorCode::kInvalidSpec: return "InvalidSpec";
    case ErrorCode::kMissingInput: return "MissingInput";
    case ErrorCode::kSyncViolation: return "SyncViolation";
    case ErrorCode::kConfigError: return "ConfigError";
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kInvariantViolation: return "InvariantViolation";
  }
  return "Unknown";
}

double norm(Vec2 a) { return std::hypot(a.x, a.y); }

namespace {

Eigen::Matrix3d to_eigen(const Matrix3& m) {
  Eigen::Matrix3d out;
  out << m[0], m[1], m[2], m[3], m[4], m[5], m[6], m[7], m[8];
  return out;
}

}  // namespace

void CameraCalibration::validate() const {
  if (!(f > 0.0) || !(dx > 0.0) || !(dy > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument,
                "focal length and pixel size must be positive");
  }
  if (image_width <= 0 || image_height <= 0) {
    throw Error(ErrorCode::kInvalidArgument, "image size must be positive");
  }
  const Eigen::Matrix3d r = to_eigen(R);
  const double ortho_err =
      (r * r.transpose() - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
  if (!(ortho_err <= 1e-6) || std::abs(r.determinant() - 1.0) > 1e-6) {
    throw Error(ErrorCode::kInvalidArgument,
                "R must be orthonormal with determinant +1");
  }
  for (double t : T) {
    if (!std::isfinite(t)) {
      throw Error(ErrorCode::kInvalidArgument, "T must be finite");
    }
  }
}

std::optional<Projection> project_point(const Point3& p,
                                        const CameraCalibration& calib,
                                        double min_depth) {
  const auto& R = calib.R;
  const double xc = R[0] * p.x + R[1] * p.y + R[2] * p.z + calib.T[0];
  const double yc = R[3] * p.x + R[4] * p.y + R[5] * p.z + calib.T[1];
  const double zc = R[6] * p.x + R[7] * p.y + R[8] * p.z + calib.T[2];
  if (!(zc > min_depth)) return std::nullopt;
  Projection out;
  out.pixel.u = calib.fx() * xc / zc + calib.u0;
  out.pixel.v = calib.fy() * yc / zc + calib.v0;
  out.depth = zc;
  return out;
}

Point3 back_project(PixelCoord pixel, double depth,
                    const CameraCalibration& calib) {
  const double xc = (pixel.u - calib.u0) * depth / calib.fx();
  const double yc = (pixel.v - calib.v0) * depth / calib.fy();
  const auto& R = calib.R;
  const auto& T = calib.T;
  // X = R^T (Xc - T)
  const double a = xc - T[0], b = yc - T[1], c = depth - T[2];
  Point3 out;
  out.x = R[0] * a + R[3] * b + R[6] * c;
  out.y = R[1] * a + R[4] * b + R[7] * c;
  out.z = R[2] * a + R[5] * b + R[8] * c;
  return out;
}

Vector3 camera_center(const CameraCalibration& calib) {
  const auto& R = calib.R;
  const auto& T = calib.T;
  return {-(R[0] * T[0] + R[3] * T[1] + R[6] * T[2]),
          -(R[1] * T[0] + R[4] * T[1] + R[7] * T[2]),
          -(R[2] * T[0] + R[5] * T[1] + R[8] * T[2])};
}

Vector3 pixel_ray(PixelCoord pixel, const CameraCalibration& calib) {
  const double a = (pixel.u - calib.u0) / calib.fx();
  const double b = (pixel.v - calib.v0) / calib.fy();
  const auto& R = calib.R;
  return {R[0] * a + R[3] * b + R[6], R[1] * a + R[4] * b + R[7],
          R[2] * a + R[5] * b + R[8]};
}

Matrix3 look_rotation(double yaw_rad, double pitch_down_rad) {
  // Camera axes expressed in the world frame: optical axis (z_c), image right
  // (x_c) and image down (y_c).
  const double cy = std::cos(yaw_rad), sy = std::sin(yaw_rad);
  const double cp = std::cos(pitch_down_rad), sp = std::sin(pitch_down_rad);
  const Eigen::Vector3d forward(cp * cy, cp * sy, -sp);
  const Eigen::Vector3d right(sy, -cy, 0.0);
  const Eigen::Vector3d down = forward.cross(right);
  Matrix3 r;
  for (int i = 0; i < 3; ++i) {
    r[0 + i] = right[i];
    r[3 + i] = down[i];
    r[6 + i] = forward[i];
  }
  return r;
}

void GridSpec::validate() const {
  if (!(cell_size_x > 0.0) || !(cell_size_y > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "grid cell sizes must be positive");
  }
  if (cols <= 0 || rows <= 0) {
    throw Error(ErrorCode::kInvalidArgument, "grid extent must be positive");
  }
  if (!std::isfinite(x_min) || !std::isfinite(y_min)) {
    throw Error(ErrorCode::kInvalidArgument, "grid origin must be finite");
  }
}

std::optional<CellIndex> grid_index(const Point3& p, const GridSpec& spec) {
  const double fx = std::floor((p.x - spec.x_min) / spec.cell_size_x);
  const double fy = std::floor((p.y - spec.y_min) / spec.cell_size_y);
  if (!(fx >= 0.0 && fx < spec.cols && fy >= 0.0 && fy < spec.rows)) {
    return std::nullopt;
  }
  return CellIndex{static_cast<int>(fx), static_cast<int>(fy)};
}

GridSpec grid_from_bounds(std::span<const Point3> points, double cell_size) {
  if (points.empty()) {
    throw Error(ErrorCode::kDegenerateInput, "cannot grid an empty cloud");
  }
  if (!(cell_size > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "cell size must be positive");
  }
  double x0 = points[0].x, x1 = x0, y0 = points[0].y, y1 = y0;
  for (const auto& p : points) {
    x0 = std::min(x0, p.x);
    x1 = std::max(x1, p.x);
    y0 = std::min(y0, p.y);
    y1 = std::max(y1, p.y);
  }
  GridSpec spec;
  spec.x_min = x0;
  spec.y_min = y0;
  spec.cell_size_x = spec.cell_size_y = cell_size;
  // floor + 1 so that the maximum point lands inside the last cell.
  spec.cols = static_cast<int>(std::floor((x1 - x0) / cell_size)) + 1;
  spec.rows = static_cast<int>(std::floor((y1 - y0) / cell_size)) + 1;
  return spec;
}

Plane canonical_plane(Plane plane) {
  const auto& n = plane.normal;
  bool flip = false;
  if (n[2] != 0.0) {
    flip = n[2] < 0.0;
  } else if (n[1] != 0.0) {
    flip = n[1] < 0.0;
  } else {
    flip = n[0] < 0.0;
  }
  if (flip) {
    for (auto& c : plane.normal) c = -c;
    plane.d = -plane.d;
  }
  return plane;
}

Plane fit_plane_least_squares(std::span<const Point3> points) {
  if (points.size() < 3) {
    throw Error(ErrorCode::kDegenerateInput,
                "plane fit needs at least 3 points");
  }
  Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
  for (const auto& p : points) centroid += Eigen::Vector3d(p.x, p.y, p.z);
  centroid /= static_cast<double>(points.size());
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const auto& p : points) {
    const Eigen::Vector3d q = Eigen::Vector3d(p.x, p.y, p.z) - centroid;
    cov += q * q.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(cov);
  const Eigen::Vector3d evals = solver.eigenvalues();  // ascending
  const double scale = evals[2];
  if (!(scale > 0.0) || evals[1] <= 1e-12 * scale) {
    throw Error(ErrorCode::kDegenerateInput,
                "plane fit input is collinear or coincident");
  }
  const Eigen::Vector3d n = solver.eigenvectors().col(0).normalized();
  Plane plane;
  plane.normal = {n[0], n[1], n[2]};
  plane.d = -n.dot(centroid);
  return canonical_plane(plane);
}

double angle_between_deg(const Vector3& a, const Vector3& b) {
  const Eigen::Vector3d u(a[0], a[1], a[2]);
  const Eigen::Vector3d v(b[0], b[1], b[2]);
  const double c = u.normalized().dot(v.normalized());
  return std::acos(std::clamp(c, -1.0, 1.0)) * 180.0 / M_PI;
}

}  // namespace rsmap
