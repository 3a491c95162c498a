#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "rsmap/ground.hpp"
#include "rsmap/metrics.hpp"
#include "rsmap/vectorize.hpp"

namespace rsmap {

/// Every tunable of the pipeline. Text form is one "key = value" per line;
/// '#' starts a comment. Keys:
///
///   grid.cell                 BEV cell edge in m (default: scene grid.json,
///                             else 0.01)
///   ransac.max_iterations     500
///   ransac.threshold          0.05 m
///   ransac.min_inliers        0.2 (fraction of the frame)
///   sor.k                     16
///   sor.n_sigma               2.0
///   cluster.radius            0.5 m
///   cluster.min_size          10
///   alpha                     0.5 m
///   split.length              20 m
///   split.interval            10 m
///   intensity.threshold       128
///   intensity.normalize       false
///   eval.cell                 0.1 m
///   eval.line_width           0.2 m
///   eval.cd_threshold         1.0 m
///   eval.iou_threshold        0.1
///   eval.sample_step          0.1 m
///   sync.tolerance            0.02 s
///   frames                    all frames of the scene
///   seed                      0
///   jobs                      1
struct PipelineConfig {
  std::optional<double> grid_cell;
  RansacConfig ransac;
  VectorizeConfig vectorize;
  double intensity_threshold = 128.0;
  bool normalize_intensity = false;
  MatchConfig match;
  double sync_tolerance = 0.02;
  std::optional<std::size_t> frame_count;
  std::uint64_t seed = 0;
  int jobs = 1;

  /// Throws Error(kConfigError) naming the key whose value is out of range.
  void validate() const;
};

/// Applies one "key = value" assignment. Throws Error(kConfigError) for
/// unknown keys or unparsable values.
void apply_setting(PipelineConfig& cfg, const std::string& key,
                   const std::string& value);

/// Accepts "key=value" as given on the command line.
void apply_override(PipelineConfig& cfg, const std::string& assignment);

PipelineConfig parse_config(const std::string& text);
PipelineConfig load_config(const std::filesystem::path& path);
std::string config_to_text(const PipelineConfig& cfg);

}  // namespace rsmap
