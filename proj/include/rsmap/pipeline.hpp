#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rsmap/config.hpp"
#include "rsmap/fusion.hpp"
#include "rsmap/metrics.hpp"
#include "rsmap/raster.hpp"
#include "rsmap/vectorize.hpp"

namespace rsmap {

/// Contents of a scene directory:
///   calib.json            camera calibration (required)
///   frames/NNN.{rspc,txt} LiDAR frames, paired by stem with
///   masks/NNN.png         camera segmentation masks (+ .json sidecars)
///   grid.json             BEV grid (optional)
///   zones.png             BEV class prior for the intensity path (optional)
///   intensity_seg.png     external BEV segmentation replacing the
///                         threshold segmenter (optional)
///   gt.geojson            ground truth (optional)
struct SceneInputs {
  CameraCalibration calib;
  std::vector<PointCloud> frames;
  std::vector<LabelMask> masks;
  std::vector<double> mask_timestamps;
  std::optional<GridSpec> grid;
  std::optional<std::pair<LabelMask, GridSpec>> zones;
  std::optional<std::pair<LabelMask, GridSpec>> intensity_seg;
  std::optional<VectorMap> gt;
};

/// Loads the first `max_frames` frame/mask pairs (all when absent). Throws
/// Error(kMissingInput) naming the absent file and Error(kFrameCountExceeded)
/// when fewer frames exist.
SceneInputs load_scene(const std::filesystem::path& dir,
                       std::optional<std::size_t> max_frames = std::nullopt);

struct PipelineResult {
  VectorMap image_only;
  VectorMap pointcloud_only;
  VectorMap multimodal;
  LabeledPoints image_labeled;
  LabeledPoints intensity_labeled;
  LabeledPoints multimodal_labeled;
  IntensityImage intensity;
  LabelMask segmentation;
  GridSpec grid;
  std::size_t frames_used = 0;
  std::optional<EvalReport> image_report;
  std::optional<EvalReport> pointcloud_report;
  std::optional<EvalReport> multimodal_report;
  std::vector<std::pair<std::string, double>> timing;  // seconds per stage
  double processing_seconds = 0.0;  // all stages but loading and evaluation
};

/// Grid used by the intensity path: explicit cell size over the scene grid's
/// extent (or the cloud bounds), else the scene grid, else the cloud bounds
/// at 0.01 m.
GridSpec pipeline_grid(const SceneInputs& scene, const PipelineConfig& cfg,
                       std::span<const Point3> ground);

/// Nearest-cell resampling of a BEV label mask onto another grid.
LabelMask resample_mask(const LabelMask& mask, const GridSpec& from,
                        const GridSpec& to);

/// Runs both labeling paths, their merge and vectorization, then evaluates
/// all three maps when ground truth is present. Throws Error(kSyncViolation)
/// for a frame whose mask timestamp is beyond cfg.sync_tolerance.
PipelineResult run_pipeline(const SceneInputs& scene, const PipelineConfig& cfg);

PipelineResult run_pipeline(const std::filesystem::path& scene_dir,
                            const PipelineConfig& cfg);

/// Writes image_only/pointcloud_only/multimodal .geojson, multimodal.svg,
/// report.json and report.txt (with ground truth) and timing.json. With
/// `dump`, also the labeled point sets, intensity image and segmentation.
void write_pipeline_outputs(const PipelineResult& result,
                            const std::filesystem::path& out_dir, bool dump);

/// The three reports side by side.
std::string comparison_to_json(const PipelineResult& result);
std::string comparison_to_text(const PipelineResult& result);

struct SweepRow {
  std::size_t frames = 0;
  std::optional<double> miou;  // multimodal
  double seconds = 0.0;        // processing time
  std::size_t labeled_points = 0;
};

/// run_pipeline on the first k frames for each k. Throws
/// Error(kFrameCountExceeded) when the scene has fewer than max(ks) frames.
std::vector<SweepRow> run_framecount_sweep(const std::filesystem::path& scene_dir,
                                           std::span<const std::size_t> ks,
                                           const PipelineConfig& cfg);

std::string sweep_to_text(std::span<const SweepRow> rows);

}  // namespace rsmap
