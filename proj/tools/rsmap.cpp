// rsmap: map generation from roadside camera masks and LiDAR frames.
//
// Exit codes: 0 success, 2 input error, 3 config error, 4 invariant violation.

#include <CLI11.hpp>
#include <cstdio>
#include <iostream>
#include <json.hpp>
#include <sstream>

#include "rsmap/config.hpp"
#include "rsmap/errors.hpp"
#include "rsmap/fusion.hpp"
#include "rsmap/ground.hpp"
#include "rsmap/io.hpp"
#include "rsmap/metrics.hpp"
#include "rsmap/parallel.hpp"
#include "rsmap/pipeline.hpp"
#include "rsmap/raster.hpp"
#include "rsmap/synth.hpp"
#include "rsmap/vectorize.hpp"

namespace fs = std::filesystem;
using namespace rsmap;

namespace {

constexpr int kExitInput = 2;
constexpr int kExitConfig = 3;
constexpr int kExitInvariant = 4;

struct ConfigArgs {
  std::string file;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;

  void attach(CLI::App* app) {
    app->add_option("--config", file, "key = value config file");
    app->add_option("--set", overrides, "override a config key (key=value)");
    app->add_option("--seed", seed, "seed for every random draw");
    app->add_option("--jobs", jobs, "worker threads");
  }

  PipelineConfig build() const {
    PipelineConfig cfg = file.empty() ? PipelineConfig{} : load_config(file);
    for (const auto& o : overrides) apply_override(cfg, o);
    if (seed) cfg.seed = *seed;
    if (jobs) cfg.jobs = *jobs;
    cfg.validate();
    return cfg;
  }
};

Point3 parse_origin(const std::string& text) {
  std::vector<double> v;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      v.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw Error(ErrorCode::kInvalidArgument, "bad origin '" + text + "'");
    }
  }
  if (v.size() < 2 || v.size() > 3) {
    throw Error(ErrorCode::kInvalidArgument, "origin must be x,y or x,y,z");
  }
  return {v[0], v[1], v.size() == 3 ? v[2] : 0.0, 0.0};
}

PointCloud load_clouds(const std::vector<std::string>& files) {
  PointCloud out;
  for (const auto& f : files) {
    const PointCloud c = io::load_cloud(f);
    if (out.points.empty()) {
      out.frame_id = c.frame_id;
      out.timestamp = c.timestamp;
    }
    out.points.insert(out.points.end(), c.points.begin(), c.points.end());
  }
  return out;
}

void log(const std::string& msg) { std::cerr << msg << "\n"; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Vectorized road-marking maps from roadside camera and LiDAR"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic intersection scene");
  std::string synth_out, synth_spec;
  std::optional<std::uint64_t> synth_seed;
  std::optional<int> synth_frames;
  bool synth_clean = false;
  int synth_jobs = 1;
  synth->add_option("--out", synth_out, "scene directory")->required();
  synth->add_option("--spec", synth_spec, "scene spec JSON");
  synth->add_option("--seed", synth_seed, "scene seed");
  synth->add_option("--frames", synth_frames, "frame count");
  synth->add_flag("--clean", synth_clean, "disable noise and degradations");
  synth->add_option("--jobs", synth_jobs, "worker threads");

  // ground
  auto* ground = app.add_subcommand("ground", "split a frame into ground and non-ground");
  std::string ground_in, ground_out, nonground_out;
  ConfigArgs ground_cfg;
  ground->add_option("--in", ground_in, "input cloud")->required();
  ground->add_option("--out", ground_out, "ground cloud")->required();
  ground->add_option("--non-ground", nonground_out, "non-ground cloud");
  ground_cfg.attach(ground);

  // raster
  auto* raster = app.add_subcommand("raster", "mean-intensity BEV image and its segmentation");
  std::vector<std::string> raster_in;
  std::string raster_grid, raster_out, raster_seg, raster_zones;
  ConfigArgs raster_cfg;
  raster->add_option("--in", raster_in, "ground clouds")->required();
  raster->add_option("--grid", raster_grid, "grid JSON (default: cloud bounds)");
  raster->add_option("--out", raster_out, "intensity PNG")->required();
  raster->add_option("--segment", raster_seg, "write the threshold segmentation here");
  raster->add_option("--zones", raster_zones, "BEV class prior PNG");
  raster_cfg.attach(raster);

  // fuse
  auto* fuse = app.add_subcommand("fuse", "label ground points or merge labeled sets");
  std::string fuse_cloud, fuse_mask, fuse_calib, fuse_seg, fuse_out;
  std::vector<std::string> fuse_merge;
  double fuse_camera_time = std::numeric_limits<double>::quiet_NaN();
  ConfigArgs fuse_cfg;
  fuse->add_option("--cloud", fuse_cloud, "ground cloud");
  fuse->add_option("--mask", fuse_mask, "camera segmentation PNG (image path)");
  fuse->add_option("--calib", fuse_calib, "calibration JSON (image path)");
  fuse->add_option("--seg", fuse_seg, "BEV segmentation PNG (intensity path)");
  fuse->add_option("--merge", fuse_merge, "labeled point files to merge");
  fuse->add_option("--camera-time", fuse_camera_time, "mask timestamp for the sync check");
  fuse->add_option("--out", fuse_out, "labeled points")->required();
  fuse_cfg.attach(fuse);

  // vectorize
  auto* vect = app.add_subcommand("vectorize", "vector map from labeled points");
  std::string vect_in, vect_out, vect_svg;
  ConfigArgs vect_cfg;
  vect->add_option("--in", vect_in, "labeled points")->required();
  vect->add_option("--out", vect_out, "GeoJSON map")->required();
  vect->add_option("--svg", vect_svg, "also render an SVG");
  vect_cfg.attach(vect);

  // eval
  auto* eval = app.add_subcommand("eval", "compare a map with ground truth");
  std::string eval_pred, eval_gt, eval_out, eval_origin;
  ConfigArgs eval_cfg;
  eval->add_option("--pred", eval_pred, "predicted map")->required();
  eval->add_option("--gt", eval_gt, "ground-truth map")->required();
  eval->add_option("--out", eval_out, "report JSON");
  eval->add_option("--origin", eval_origin, "sensor x,y[,z] for per-distance IoU");
  eval_cfg.attach(eval);

  // pipeline
  auto* pipe = app.add_subcommand("pipeline", "full flow on a scene directory");
  std::string pipe_scene, pipe_out;
  std::optional<std::size_t> pipe_frames;
  bool pipe_dump = false;
  ConfigArgs pipe_cfg;
  pipe->add_option("--scene", pipe_scene, "scene directory")->required();
  pipe->add_option("--out", pipe_out, "output directory")->required();
  pipe->add_option("--frames", pipe_frames, "use the first k frames");
  pipe->add_flag("--dump", pipe_dump, "write intermediate artifacts");
  pipe_cfg.attach(pipe);

  // sweep-frames
  auto* sweep = app.add_subcommand("sweep-frames", "mIoU and time against frame count");
  std::string sweep_scene, sweep_out;
  std::vector<std::size_t> sweep_ks{1, 10, 20, 50};
  ConfigArgs sweep_cfg;
  sweep->add_option("--scene", sweep_scene, "scene directory")->required();
  sweep->add_option("--ks", sweep_ks, "frame counts")->delimiter(',');
  sweep->add_option("--out", sweep_out, "write the table here too");
  sweep_cfg.attach(sweep);

  // density
  auto* dens = app.add_subcommand("density", "ground point density by distance");
  std::vector<std::string> dens_in;
  std::string dens_origin = "0,0", dens_grid;
  dens->add_option("--in", dens_in, "ground clouds")->required();
  dens->add_option("--origin", dens_origin, "sensor x,y[,z]");
  dens->add_option("--grid", dens_grid, "region grid JSON (default: cloud bounds)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (synth->parsed()) {
      SceneSpec spec = synth_spec.empty() ? SceneSpec{}
                                          : scene_spec_from_json(io::read_file(synth_spec));
      if (synth_seed) spec.seed = *synth_seed;
      if (synth_frames) spec.frame_count = *synth_frames;
      if (synth_clean) spec = spec.without_degradations();
      const Scene scene = generate_scene(spec, synth_jobs);
      write_scene(scene, synth_out);
      log("wrote " + std::to_string(scene.frames.size()) + " frames and " +
          std::to_string(scene.gt.elements.size()) + " ground-truth elements to " + synth_out);
    } else if (ground->parsed()) {
      const PipelineConfig cfg = ground_cfg.build();
      const PointCloud cloud = io::load_cloud(ground_in);
      RansacConfig rc = cfg.ransac;
      rc.seed = derive_seed(cfg.seed, cloud.frame_id);
      const GroundSplit split = extract_ground(cloud, rc);
      io::save_cloud(ground_out, split.ground);
      if (!nonground_out.empty()) io::save_cloud(nonground_out, split.non_ground);
      const auto& nrm = split.plane.normal;
      std::printf("ground %zu non_ground %zu normal %.6f %.6f %.6f d %.6f\n",
                  split.ground.points.size(), split.non_ground.points.size(), nrm[0], nrm[1],
                  nrm[2], split.plane.d);
    } else if (raster->parsed()) {
      const PipelineConfig cfg = raster_cfg.build();
      const PointCloud cloud = load_clouds(raster_in);
      const GridSpec grid = raster_grid.empty()
                                ? grid_from_bounds(cloud.points, cfg.grid_cell.value_or(0.01))
                                : io::load_grid(raster_grid);
      RasterOptions opts;
      opts.normalize_intensity = cfg.normalize_intensity;
      const IntensityImage image = rasterize_intensity(cloud, grid, opts);
      io::save_intensity_image(raster_out, image);
      if (!raster_seg.empty()) {
        LabelMask seg;
        if (!raster_zones.empty()) {
          io::MaskMeta meta;
          const LabelMask zones = io::load_label_mask(raster_zones, &meta);
          if (!meta.grid) throw Error(ErrorCode::kMissingInput, "zones sidecar lacks a grid");
          const LabelMask z = resample_mask(zones, *meta.grid, grid);
          seg = segment_intensity(image, cfg.intensity_threshold, &z);
        } else {
          seg = segment_intensity(image, cfg.intensity_threshold);
        }
        io::MaskMeta meta;
        meta.grid = grid;
        io::save_label_mask(raster_seg, seg, meta);
      }
      log("rasterized " + std::to_string(cloud.points.size() - image.skipped_points) +
          " points, skipped " + std::to_string(image.skipped_points));
    } else if (fuse->parsed()) {
      const PipelineConfig cfg = fuse_cfg.build();
      LabeledPoints out;
      if (!fuse_merge.empty()) {
        std::vector<LabeledPoints> sets;
        for (const auto& f : fuse_merge) sets.push_back(io::load_labeled(f));
        out = aggregate_frames(std::span<const LabeledPoints>(sets), sets.size());
      } else {
        if (fuse_cloud.empty()) throw Error(ErrorCode::kInvalidArgument, "--cloud is required");
        const PointCloud cloud = io::load_cloud(fuse_cloud);
        if (!fuse_mask.empty()) {
          if (fuse_calib.empty()) throw Error(ErrorCode::kInvalidArgument, "--calib is required");
          io::MaskMeta meta;
          const LabelMask mask = io::load_label_mask(fuse_mask, &meta);
          const double camera_time =
              std::isnan(fuse_camera_time) ? meta.timestamp.value_or(cloud.timestamp)
                                           : fuse_camera_time;
          check_sync(cloud.timestamp, camera_time, cfg.sync_tolerance);
          out = label_by_image(cloud, mask, io::load_calibration(fuse_calib));
        } else if (!fuse_seg.empty()) {
          io::MaskMeta meta;
          const LabelMask seg = io::load_label_mask(fuse_seg, &meta);
          if (!meta.grid) throw Error(ErrorCode::kMissingInput, "segmentation sidecar lacks a grid");
          out = label_by_intensity(cloud, *meta.grid, seg);
        } else {
          throw Error(ErrorCode::kInvalidArgument, "give --mask/--calib, --seg or --merge");
        }
      }
      io::save_labeled(fuse_out, out);
      log("labeled " + std::to_string(out.size()) + " points");
    } else if (vect->parsed()) {
      const PipelineConfig cfg = vect_cfg.build();
      const VectorMap map = vectorize_map(io::load_labeled(vect_in), cfg.vectorize);
      io::save_map(vect_out, map);
      if (!vect_svg.empty()) io::write_file_atomic(vect_svg, io::map_to_svg(map));
      log("wrote " + std::to_string(map.elements.size()) + " elements");
    } else if (eval->parsed()) {
      const PipelineConfig cfg = eval_cfg.build();
      const VectorMap pred = io::load_map(eval_pred);
      const VectorMap gt = io::load_map(eval_gt);
      EvalReport report = evaluate(pred, gt, cfg.match);
      if (!eval_origin.empty()) {
        const auto bins = default_distance_bins();
        report.by_distance =
            evaluate_by_distance(pred, gt, parse_origin(eval_origin), bins, cfg.match);
      }
      if (!eval_out.empty()) io::write_file_atomic(eval_out, report_to_json(report));
      std::cout << report_to_text(report);
    } else if (pipe->parsed()) {
      PipelineConfig cfg = pipe_cfg.build();
      if (pipe_frames) cfg.frame_count = *pipe_frames;
      const PipelineResult r = run_pipeline(fs::path(pipe_scene), cfg);
      write_pipeline_outputs(r, pipe_out, pipe_dump);
      for (const auto& [stage, secs] : r.timing) {
        log(stage + " " + std::to_string(secs) + " s");
      }
      if (r.multimodal_report) {
        std::cout << comparison_to_text(r);
      } else {
        log("no ground truth; wrote maps only");
      }
    } else if (sweep->parsed()) {
      const PipelineConfig cfg = sweep_cfg.build();
      const auto rows = run_framecount_sweep(fs::path(sweep_scene), sweep_ks, cfg);
      const std::string table = sweep_to_text(rows);
      if (!sweep_out.empty()) io::write_file_atomic(sweep_out, table);
      std::cout << table;
    } else if (dens->parsed()) {
      const PointCloud cloud = load_clouds(dens_in);
      std::optional<GridSpec> region;
      if (!dens_grid.empty()) region = io::load_grid(dens_grid);
      const auto bins = default_distance_bins();
      const auto rows = density_by_distance(cloud, parse_origin(dens_origin), bins, region);
      std::printf("distance   count     area_m2    density\n");
      for (const auto& r : rows) {
        std::printf("%2.0f-%2.0f m   %-9zu %-10.2f %.3f\n", r.bin.r_min, r.bin.r_max, r.count,
                    r.area, r.density);
      }
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    switch (e.code()) {
      case ErrorCode::kConfigError:
        return kExitConfig;
      case ErrorCode::kInvariantViolation:
        return kExitInvariant;
      default:
        return kExitInput;
    }
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvariant;
  }
  return 0;
}
