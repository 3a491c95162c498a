#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "rsmap/fusion.hpp"
#include "rsmap/geometry.hpp"
#include "rsmap/ground.hpp"
#include "rsmap/metrics.hpp"
#include "rsmap/raster.hpp"
#include "rsmap/vectorize.hpp"

namespace rsmap::io {

namespace fs = std::filesystem;

/// Writes through a temporary sibling file and renames it into place.
void write_file_atomic(const fs::path& path, const std::string& contents);
std::string read_file(const fs::path& path);

// Calibration: JSON object with f, dx, dy, u0, v0, R (9, row-major),
// T (3), image_width, image_height.
std::string calibration_to_json(const CameraCalibration& calib);
CameraCalibration calibration_from_json(const std::string& text);
void save_calibration(const fs::path& path, const CameraCalibration& calib);
CameraCalibration load_calibration(const fs::path& path);

std::string grid_to_json(const GridSpec& spec);
GridSpec grid_from_json(const std::string& text);
void save_grid(const fs::path& path, const GridSpec& spec);
GridSpec load_grid(const fs::path& path);

// ASCII clouds: one "x y z intensity" per line; '#' starts a comment.
// "# frame_id: N" and "# timestamp: S" comments set the cloud metadata.
std::string cloud_to_ascii(const PointCloud& cloud);
PointCloud cloud_from_ascii(const std::string& text);

// Binary clouds: "RSPC", uint32 count, uint64 timestamp in microseconds,
// then count x 4 little-endian float32 (x, y, z, intensity).
std::string cloud_to_binary(const PointCloud& cloud);
PointCloud cloud_from_binary(const std::string& bytes);

/// Picks the format from the extension: ".rspc" binary, anything else ASCII.
void save_cloud(const fs::path& path, const PointCloud& cloud);
PointCloud load_cloud(const fs::path& path);

// Labeled points: "x y z intensity class_id" per line; class ids from the
// class table written in a "# class <id> <name> <gray>" header.
std::string labeled_to_ascii(const LabeledPoints& labeled);
LabeledPoints labeled_from_ascii(const std::string& text);
void save_labeled(const fs::path& path, const LabeledPoints& labeled);
LabeledPoints load_labeled(const fs::path& path);

// 8-bit grayscale PNG.
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // row-major, row 0 first
};
std::string encode_png(const GrayImage& image);
GrayImage decode_png(const std::string& bytes);

/// Sidecar path for an image: same stem with ".json".
fs::path sidecar_path(const fs::path& png);

struct MaskMeta {
  std::optional<GridSpec> grid;  // set for BEV masks
  std::optional<double> timestamp;
  std::optional<std::uint32_t> frame_id;
};

/// PNG of class gray values plus sidecar with the class table.
void save_label_mask(const fs::path& png, const LabelMask& mask,
                     const MaskMeta& meta = {});
LabelMask load_label_mask(const fs::path& png, MaskMeta* meta = nullptr);

/// PNG of rounded mean intensities plus sidecar with the grid.
void save_intensity_image(const fs::path& png, const IntensityImage& image);

// GeoJSON FeatureCollection; each element a Feature with properties class,
// support_count and confidence; polylines as LineString, crossings as
// Polygon (closed ring).
std::string map_to_geojson(const VectorMap& map);
VectorMap map_from_geojson(const std::string& text);
void save_map(const fs::path& path, const VectorMap& map);
VectorMap load_map(const fs::path& path);

/// Top-down rendering: stop lines yellow, lane dividers green, crossings blue.
std::string map_to_svg(const VectorMap& map, double pixels_per_metre = 10.0);

}  // namespace rsmap::io
