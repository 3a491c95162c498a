#include "rsmap/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <json.hpp>
#include <sstream>

#include "rsmap/errors.hpp"
#include "rsmap/ground.hpp"
#include "rsmap/io.hpp"
#include "rsmap/parallel.hpp"

namespace rsmap {

namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

class StageTimer {
 public:
  explicit StageTimer(std::vector<std::pair<std::string, double>>& out) : out_(out) {}

  template <typename Fn>
  auto run(const std::string& stage, Fn&& fn) {
    const auto t0 = Clock::now();
    if constexpr (std::is_void_v<decltype(fn())>) {
      fn();
      record(stage, t0);
    } else {
      auto result = fn();
      record(stage, t0);
      return result;
    }
  }

 private:
  void record(const std::string& stage, Clock::time_point t0) {
    out_.emplace_back(stage, std::chrono::duration<double>(Clock::now() - t0).count());
  }

  std::vector<std::pair<std::string, double>>& out_;
};

std::vector<fs::path> list_frames(const fs::path& dir) {
  if (!fs::is_directory(dir)) {
    throw Error(ErrorCode::kMissingInput, "missing frames directory " + dir.string());
  }
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const auto ext = entry.path().extension();
    if (ext == ".rspc" || ext == ".txt" || ext == ".xyz") out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

fs::path require_file(const fs::path& p) {
  if (!fs::exists(p)) throw Error(ErrorCode::kMissingInput, "missing input " + p.string());
  return p;
}

std::pair<LabelMask, GridSpec> load_bev_mask(const fs::path& png) {
  io::MaskMeta meta;
  LabelMask mask = io::load_label_mask(png, &meta);
  if (!meta.grid) {
    throw Error(ErrorCode::kMissingInput, "BEV mask sidecar lacks a grid: " + png.string());
  }
  if (mask.width != meta.grid->cols || mask.height != meta.grid->rows) {
    throw Error(ErrorCode::kDimensionMismatch, "BEV mask size differs from its grid");
  }
  return {std::move(mask), *meta.grid};
}

PointCloud concatenate(std::span<const PointCloud> clouds) {
  PointCloud out;
  std::size_t n = 0;
  for (const auto& c : clouds) n += c.points.size();
  out.points.reserve(n);
  for (const auto& c : clouds) out.points.insert(out.points.end(), c.points.begin(), c.points.end());
  if (!clouds.empty()) {
    out.frame_id = clouds.front().frame_id;
    out.timestamp = clouds.front().timestamp;
  }
  return out;
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

}  // namespace

SceneInputs load_scene(const fs::path& dir, std::optional<std::size_t> max_frames) {
  if (!fs::is_directory(dir)) {
    throw Error(ErrorCode::kMissingInput, "missing scene directory " + dir.string());
  }
  SceneInputs scene;
  scene.calib = io::load_calibration(require_file(dir / "calib.json"));
  auto frame_files = list_frames(dir / "frames");
  if (frame_files.empty()) {
    throw Error(ErrorCode::kMissingInput, "no frames in " + (dir / "frames").string());
  }
  if (max_frames) {
    if (*max_frames < 1) throw Error(ErrorCode::kInvalidArgument, "frame count must be >= 1");
    if (*max_frames > frame_files.size()) {
      throw Error(ErrorCode::kFrameCountExceeded,
                  "requested " + std::to_string(*max_frames) + " frames, scene has " +
                      std::to_string(frame_files.size()));
    }
    frame_files.resize(*max_frames);
  }
  for (const auto& f : frame_files) {
    const fs::path mask_path = dir / "masks" / (f.stem().string() + ".png");
    require_file(mask_path);
    require_file(io::sidecar_path(mask_path));
  }
  scene.frames.resize(frame_files.size());
  scene.masks.resize(frame_files.size());
  scene.mask_timestamps.resize(frame_files.size());
  for (std::size_t i = 0; i < frame_files.size(); ++i) {
    scene.frames[i] = io::load_cloud(frame_files[i]);
    io::MaskMeta meta;
    scene.masks[i] =
        io::load_label_mask(dir / "masks" / (frame_files[i].stem().string() + ".png"), &meta);
    scene.mask_timestamps[i] = meta.timestamp.value_or(scene.frames[i].timestamp);
  }
  if (fs::exists(dir / "grid.json")) scene.grid = io::load_grid(dir / "grid.json");
  if (fs::exists(dir / "zones.png")) scene.zones = load_bev_mask(dir / "zones.png");
  if (fs::exists(dir / "intensity_seg.png")) {
    scene.intensity_seg = load_bev_mask(dir / "intensity_seg.png");
  }
  if (fs::exists(dir / "gt.geojson")) scene.gt = io::load_map(dir / "gt.geojson");
  return scene;
}

GridSpec pipeline_grid(const SceneInputs& scene, const PipelineConfig& cfg,
                       std::span<const Point3> ground) {
  if (cfg.grid_cell) {
    if (scene.grid) {
      GridSpec g = *scene.grid;
      const double w = g.x_max() - g.x_min, h = g.y_max() - g.y_min;
      g.cell_size_x = g.cell_size_y = *cfg.grid_cell;
      g.cols = std::max(1, static_cast<int>(std::ceil(w / *cfg.grid_cell - 1e-9)));
      g.rows = std::max(1, static_cast<int>(std::ceil(h / *cfg.grid_cell - 1e-9)));
      return g;
    }
    return grid_from_bounds(ground, *cfg.grid_cell);
  }
  if (scene.grid) return *scene.grid;
  return grid_from_bounds(ground, 0.01);
}

LabelMask resample_mask(const LabelMask& mask, const GridSpec& from, const GridSpec& to) {
  if (mask.width != from.cols || mask.height != from.rows) {
    throw Error(ErrorCode::kDimensionMismatch, "mask size differs from its grid");
  }
  if (from == to) return mask;
  LabelMask out = make_label_mask(to.cols, to.rows, mask.class_table);
  for (int row = 0; row < to.rows; ++row) {
    for (int col = 0; col < to.cols; ++col) {
      const Vec2 c = to.cell_center(col, row);
      if (const auto idx = grid_index({c.x, c.y, 0.0, 0.0}, from)) {
        out.at(col, row) = mask.at(idx->col, idx->row);
      }
    }
  }
  return out;
}

PipelineResult run_pipeline(const SceneInputs& scene, const PipelineConfig& cfg) {
  cfg.validate();
  const std::size_t n = cfg.frame_count.value_or(scene.frames.size());
  if (n > scene.frames.size()) {
    throw Error(ErrorCode::kFrameCountExceeded,
                "requested " + std::to_string(n) + " frames, scene has " +
                    std::to_string(scene.frames.size()));
  }
  if (scene.masks.size() < n || scene.mask_timestamps.size() < n) {
    throw Error(ErrorCode::kMissingInput, "fewer masks than frames");
  }
  PipelineResult result;
  result.frames_used = n;
  StageTimer timer(result.timing);

  for (std::size_t i = 0; i < n; ++i) {
    check_sync(scene.frames[i].timestamp, scene.mask_timestamps[i], cfg.sync_tolerance);
  }

  std::vector<PointCloud> ground(n);
  timer.run("ground", [&] {
    parallel_for(n, cfg.jobs, [&](std::size_t i) {
      RansacConfig rc = cfg.ransac;
      rc.seed = derive_seed(cfg.seed, scene.frames[i].frame_id);
      ground[i] = extract_ground(scene.frames[i], rc).ground;
    });
  });

  std::vector<LabeledPoints> per_frame(n);
  timer.run("image_labeling", [&] {
    parallel_for(n, cfg.jobs, [&](std::size_t i) {
      per_frame[i] = label_by_image(ground[i], scene.masks[i], scene.calib);
    });
  });
  result.image_labeled = timer.run("aggregation", [&] {
    return aggregate_frames(std::span<const LabeledPoints>(per_frame), n);
  });

  const PointCloud all_ground = concatenate(ground);
  result.grid = pipeline_grid(scene, cfg, all_ground.points);
  result.intensity = timer.run("intensity_image", [&] {
    RasterOptions opts;
    opts.normalize_intensity = cfg.normalize_intensity;
    return rasterize_intensity(all_ground, result.grid, opts);
  });
  result.segmentation = timer.run("intensity_segmentation", [&] {
    if (scene.intensity_seg) {
      return resample_mask(scene.intensity_seg->first, scene.intensity_seg->second, result.grid);
    }
    if (scene.zones) {
      const LabelMask zones = resample_mask(scene.zones->first, scene.zones->second, result.grid);
      return segment_intensity(result.intensity, cfg.intensity_threshold, &zones);
    }
    return segment_intensity(result.intensity, cfg.intensity_threshold);
  });
  result.intensity_labeled = timer.run("intensity_labeling", [&] {
    return label_by_intensity(all_ground, result.grid, result.segmentation);
  });
  result.multimodal_labeled = timer.run("fusion", [&] {
    return merge_labeled(result.image_labeled, result.intensity_labeled);
  });

  result.image_only = timer.run("vectorize_image",
                                [&] { return vectorize_map(result.image_labeled, cfg.vectorize); });
  result.pointcloud_only = timer.run(
      "vectorize_pointcloud", [&] { return vectorize_map(result.intensity_labeled, cfg.vectorize); });
  result.multimodal = timer.run(
      "vectorize_multimodal", [&] { return vectorize_map(result.multimodal_labeled, cfg.vectorize); });

  for (const auto& [stage, secs] : result.timing) result.processing_seconds += secs;

  if (scene.gt) {
    timer.run("evaluate", [&] {
      const Vector3 c = camera_center(scene.calib);
      const Point3 origin{c[0], c[1], c[2], 0.0};
      const auto bins = default_distance_bins();
      const auto density = density_by_distance(all_ground, origin, bins, result.grid);
      const auto eval_one = [&](const VectorMap& map) {
        EvalReport r = evaluate(map, *scene.gt, cfg.match);
        r.density = density;
        r.by_distance = evaluate_by_distance(map, *scene.gt, origin, bins, cfg.match);
        return r;
      };
      result.image_report = eval_one(result.image_only);
      result.pointcloud_report = eval_one(result.pointcloud_only);
      result.multimodal_report = eval_one(result.multimodal);
    });
  }
  return result;
}

PipelineResult run_pipeline(const fs::path& scene_dir, const PipelineConfig& cfg) {
  const auto t0 = Clock::now();
  const SceneInputs scene = load_scene(scene_dir, cfg.frame_count);
  const double load = std::chrono::duration<double>(Clock::now() - t0).count();
  PipelineResult result = run_pipeline(scene, cfg);
  result.timing.insert(result.timing.begin(), {"load", load});
  return result;
}

std::string comparison_to_json(const PipelineResult& r) {
  using nlohmann::json;
  json doc = json::object();
  const auto put = [&](const char* name, const std::optional<EvalReport>& rep) {
    if (rep) doc[name] = json::parse(report_to_json(*rep));
  };
  put("image_only", r.image_report);
  put("pointcloud_only", r.pointcloud_report);
  put("multimodal", r.multimodal_report);
  doc["frames"] = r.frames_used;
  return doc.dump(2) + "\n";
}

std::string comparison_to_text(const PipelineResult& r) {
  if (!r.multimodal_report) return {};
  const EvalReport* reps[3] = {&*r.image_report, &*r.pointcloud_report, &*r.multimodal_report};
  std::ostringstream out;
  const auto cell = [](const std::optional<double>& v) {
    std::string s = v ? fixed(*v, 4) : std::string("-");
    s.resize(12, ' ');
    return s;
  };
  const auto label = [](std::string s) {
    s.resize(22, ' ');
    return s;
  };
  out << "frames " << r.frames_used << "\n\n";
  out << label("IoU") << "image       pointcloud  multimodal\n";
  for (ElementClass cls : kMapClasses) {
    if (!reps[2]->iou.count(cls)) continue;
    out << label(std::string(class_name(cls)));
    for (const auto* rep : reps) {
      const auto it = rep->iou.find(cls);
      out << cell(it == rep->iou.end() ? std::nullopt : std::optional<double>(it->second));
    }
    out << "\n";
  }
  out << label("mIoU");
  for (const auto* rep : reps) out << cell(rep->miou);
  out << "\n\n" << label("AP") << "image       pointcloud  multimodal\n";
  for (ElementClass cls : kMapClasses) {
    if (!reps[2]->iou.count(cls)) continue;
    out << label(std::string(class_name(cls)));
    for (const auto* rep : reps) {
      const auto it = rep->ap.find(cls);
      out << cell(it == rep->ap.end() ? std::nullopt : it->second);
    }
    out << "\n";
  }
  out << "\n" << label("distance") << "density     local mIoU (image, pointcloud, multimodal)\n";
  for (std::size_t b = 0; b < reps[2]->by_distance.size(); ++b) {
    const auto& bin = reps[2]->by_distance[b].bin;
    out << label(fixed(bin.r_min, 0) + "-" + fixed(bin.r_max, 0) + " m");
    out << cell(b < reps[2]->density.size() ? std::optional<double>(reps[2]->density[b].density)
                                            : std::nullopt);
    for (const auto* rep : reps) out << cell(rep->by_distance[b].miou);
    out << "\n";
  }
  return out.str();
}

void write_pipeline_outputs(const PipelineResult& r, const fs::path& out_dir, bool dump) {
  fs::create_directories(out_dir);
  io::save_map(out_dir / "image_only.geojson", r.image_only);
  io::save_map(out_dir / "pointcloud_only.geojson", r.pointcloud_only);
  io::save_map(out_dir / "multimodal.geojson", r.multimodal);
  io::write_file_atomic(out_dir / "multimodal.svg", io::map_to_svg(r.multimodal));
  if (r.multimodal_report) {
    io::write_file_atomic(out_dir / "report.json", comparison_to_json(r));
    io::write_file_atomic(out_dir / "report.txt", comparison_to_text(r));
  }
  nlohmann::json timing = nlohmann::json::array();
  for (const auto& [stage, secs] : r.timing) timing.push_back({{"stage", stage}, {"seconds", secs}});
  io::write_file_atomic(out_dir / "timing.json",
                        nlohmann::json{{"frames", r.frames_used},
                                       {"processing_seconds", r.processing_seconds},
                                       {"stages", timing}}
                                .dump(2) +
                            "\n");
  if (dump) {
    io::save_labeled(out_dir / "image_labeled.txt", r.image_labeled);
    io::save_labeled(out_dir / "intensity_labeled.txt", r.intensity_labeled);
    io::save_labeled(out_dir / "multimodal_labeled.txt", r.multimodal_labeled);
    io::save_intensity_image(out_dir / "intensity.png", r.intensity);
    io::MaskMeta meta;
    meta.grid = r.grid;
    io::save_label_mask(out_dir / "segmentation.png", r.segmentation, meta);
  }
}

std::vector<SweepRow> run_framecount_sweep(const fs::path& scene_dir,
                                           std::span<const std::size_t> ks,
                                           const PipelineConfig& cfg) {
  if (ks.empty()) throw Error(ErrorCode::kInvalidArgument, "no frame counts given");
  const std::size_t k_max = *std::max_element(ks.begin(), ks.end());
  const SceneInputs scene = load_scene(scene_dir, k_max);
  std::vector<SweepRow> rows;
  for (std::size_t k : ks) {
    PipelineConfig c = cfg;
    c.frame_count = k;
    const PipelineResult r = run_pipeline(scene, c);
    SweepRow row;
    row.frames = k;
    row.seconds = r.processing_seconds;
    row.labeled_points = r.multimodal_labeled.size();
    if (r.multimodal_report) row.miou = r.multimodal_report->miou;
    rows.push_back(row);
  }
  return rows;
}

std::string sweep_to_text(std::span<const SweepRow> rows) {
  std::ostringstream out;
  out << "frames  mIoU     seconds   labeled_points\n";
  for (const auto& r : rows) {
    std::string k = std::to_string(r.frames);
    k.resize(8, ' ');
    std::string m = r.miou ? fixed(*r.miou, 4) : std::string("-");
    m.resize(9, ' ');
    std::string s = fixed(r.seconds, 3);
    s.resize(10, ' ');
    out << k << m << s << r.labeled_points << "\n";
  }
  return out.str();
}

}  // namespace rsmap
