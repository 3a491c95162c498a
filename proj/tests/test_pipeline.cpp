#include <gtest/gtest.h>

#include <fstream>
#include <map>
#include <sstream>

#include "rsmap/io.hpp"
#include "rsmap/pipeline.hpp"
#include "rsmap/synth.hpp"
#include "test_util.hpp"

namespace rsmap {
namespace {

namespace fs = std::filesystem;

SceneSpec small_spec(int frames = 3) {
  SceneSpec s;
  s.image_width = 640;
  s.image_height = 360;
  s.focal_px = 320;
  s.frame_count = frames;
  return s;
}

fs::path small_scene(const std::string& name, int frames = 3) {
  const auto dir = test::scratch_dir(name);
  write_scene(generate_scene(small_spec(frames)), dir);
  return dir;
}

std::map<ElementClass, int> class_counts(const VectorMap& m) {
  std::map<ElementClass, int> out;
  for (const auto& e : m.elements) ++out[e.element];
  return out;
}

TEST(LoadScene, ReadsEverything) {
  const auto dir = small_scene("load_all");
  const SceneInputs s = load_scene(dir);
  EXPECT_EQ(s.frames.size(), 3u);
  EXPECT_EQ(s.masks.size(), 3u);
  EXPECT_EQ(s.mask_timestamps.size(), 3u);
  EXPECT_TRUE(s.grid);
  EXPECT_TRUE(s.zones);
  ASSERT_TRUE(s.gt);
  EXPECT_EQ(s.gt->elements.size(), 32u);
  for (std::size_t i = 0; i < s.frames.size(); ++i) EXPECT_EQ(s.frames[i].frame_id, i);
  EXPECT_EQ(load_scene(dir, 2).frames.size(), 2u);
  EXPECT_EQ(test::error_code_of([&] { load_scene(dir, 4); }), ErrorCode::kFrameCountExceeded);
}

TEST(LoadScene, MissingInputsNameTheFile) {
  const auto dir = small_scene("load_missing", 2);
  fs::remove(dir / "masks" / "001.png");
  try {
    load_scene(dir);
    FAIL() << "expected MissingInput";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMissingInput);
    EXPECT_NE(std::string(e.what()).find("001.png"), std::string::npos) << e.what();
  }
  fs::remove(dir / "calib.json");
  try {
    load_scene(dir);
    FAIL() << "expected MissingInput";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMissingInput);
    EXPECT_NE(std::string(e.what()).find("calib.json"), std::string::npos) << e.what();
  }
  EXPECT_EQ(test::error_code_of([] { load_scene("/nonexistent/scene"); }), ErrorCode::kMissingInput);
}

TEST(Pipeline, SyncViolation) {
  SceneInputs s = load_scene(small_scene("sync", 2));
  s.mask_timestamps[1] += 0.05;
  EXPECT_EQ(test::error_code_of([&] { run_pipeline(s, PipelineConfig{}); }),
            ErrorCode::kSyncViolation);
  PipelineConfig loose;
  loose.sync_tolerance = 0.1;
  EXPECT_NO_THROW(run_pipeline(s, loose));
}

TEST(Pipeline, WithoutGroundTruthWritesMapsOnly) {
  const auto dir = small_scene("no_gt", 2);
  fs::remove(dir / "gt.geojson");
  const PipelineResult r = run_pipeline(dir, PipelineConfig{});
  EXPECT_FALSE(r.multimodal_report);
  const auto out = test::scratch_dir("no_gt_out");
  write_pipeline_outputs(r, out, false);
  for (const char* f : {"image_only.geojson", "pointcloud_only.geojson", "multimodal.geojson",
                        "multimodal.svg", "timing.json"}) {
    EXPECT_TRUE(fs::exists(out / f)) << f;
  }
  EXPECT_FALSE(fs::exists(out / "report.json"));
  EXPECT_FALSE(fs::exists(out / "multimodal_labeled.txt"));
}

TEST(Pipeline, CleanUniformSceneRecoversEveryElement) {
  SceneSpec spec = SceneSpec{}.without_degradations();
  spec.falloff_exponent = 0.0;
  spec.density_ref = 30.0;
  spec.frame_count = 10;
  const Scene scene = generate_scene(spec);
  const auto dir = test::scratch_dir("clean_uniform");
  write_scene(scene, dir);
  const PipelineResult r = run_pipeline(dir, PipelineConfig{});
  const auto gt = class_counts(scene.gt);
  EXPECT_EQ(class_counts(r.multimodal), gt);
  EXPECT_EQ(class_counts(r.pointcloud_only), gt);
  ASSERT_TRUE(r.multimodal_report);
  EXPECT_GE(*r.multimodal_report->miou, *r.image_report->miou);
  EXPECT_GE(*r.multimodal_report->miou, *r.pointcloud_report->miou);
  EXPECT_GT(*r.multimodal_report->miou, 0.5);
}

TEST(Pipeline, MergeIsSupersetOfBothPaths) {
  const PipelineResult r = run_pipeline(small_scene("superset"), PipelineConfig{});
  for (ElementClass cls : kMapClasses) {
    EXPECT_GE(r.multimodal_labeled.count(cls), r.image_labeled.count(cls));
    EXPECT_GE(r.multimodal_labeled.count(cls), r.intensity_labeled.count(cls));
    EXPECT_LE(r.multimodal_labeled.count(cls),
              r.image_labeled.count(cls) + r.intensity_labeled.count(cls));
  }
  EXPECT_GT(r.processing_seconds, 0.0);
  EXPECT_EQ(r.timing.front().first, "load");
}

TEST(Pipeline, StagesComposeThroughFiles) {
  const auto dir = small_scene("compose");
  const PipelineConfig cfg;
  const PipelineResult r = run_pipeline(dir, cfg);
  const auto out = test::scratch_dir("compose_out");
  write_pipeline_outputs(r, out, true);
  const LabeledPoints reloaded = io::load_labeled(out / "multimodal_labeled.txt");
  EXPECT_EQ(reloaded.size(), r.multimodal_labeled.size());
  const VectorMap again = vectorize_map(reloaded, cfg.vectorize);
  EXPECT_EQ(io::map_to_geojson(again), io::read_file(out / "multimodal.geojson"));
  EXPECT_TRUE(fs::exists(out / "segmentation.png"));
  EXPECT_TRUE(fs::exists(out / "intensity.png"));
}

TEST(Pipeline, DeterministicAcrossRunsAndJobs) {
  const auto dir = small_scene("determinism");
  PipelineConfig cfg;
  const auto a = test::scratch_dir("det_a"), b = test::scratch_dir("det_b");
  write_pipeline_outputs(run_pipeline(dir, cfg), a, false);
  cfg.jobs = 3;
  write_pipeline_outputs(run_pipeline(dir, cfg), b, false);
  for (const char* f : {"image_only.geojson", "pointcloud_only.geojson", "multimodal.geojson",
                        "multimodal.svg", "report.json", "report.txt"}) {
    EXPECT_EQ(io::read_file(a / f), io::read_file(b / f)) << f;
  }
}

TEST(Pipeline, FrameSubsetMatchesTruncatedScene) {
  const auto dir = small_scene("subset", 3);
  PipelineConfig cfg;
  cfg.frame_count = 2;
  const PipelineResult a = run_pipeline(dir, cfg);
  EXPECT_EQ(a.frames_used, 2u);
  const SceneInputs s = load_scene(dir, 2);
  const PipelineResult b = run_pipeline(s, PipelineConfig{});
  EXPECT_EQ(io::map_to_geojson(a.multimodal), io::map_to_geojson(b.multimodal));
}

TEST(Sweep, RowsPerFrameCount) {
  const auto dir = small_scene("sweep", 2);
  const std::vector<std::size_t> one{1};
  const auto rows = run_framecount_sweep(dir, one, PipelineConfig{});
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].frames, 1u);
  EXPECT_TRUE(rows[0].miou);
  EXPECT_GT(rows[0].labeled_points, 0u);
  const std::vector<std::size_t> too_many{1, 5};
  EXPECT_EQ(test::error_code_of([&] { run_framecount_sweep(dir, too_many, PipelineConfig{}); }),
            ErrorCode::kFrameCountExceeded);
  EXPECT_NE(sweep_to_text(rows).find("frames"), std::string::npos);
}

TEST(ResampleMask, IdentityAndCoarsening) {
  auto mask = make_label_mask(4, 4);
  mask.at(1, 2) = 2;
  const GridSpec fine{0, 0, 1, 1, 4, 4};
  EXPECT_EQ(resample_mask(mask, fine, fine).labels, mask.labels);
  const GridSpec coarse{0, 0, 2, 2, 2, 2};
  const LabelMask c = resample_mask(mask, fine, coarse);
  EXPECT_EQ(c.width, 2);
  EXPECT_EQ(c.height, 2);
  // Cell centre (1, 1) of coarse cell (0, 0) falls in fine cell (1, 1).
  EXPECT_EQ(c.at(0, 0), mask.at(1, 1));
  EXPECT_EQ(c.at(0, 1), mask.at(1, 3));
}

TEST(PipelineGrid, Precedence) {
  SceneInputs s;
  const std::vector<Point3> pts{{0, 0, 0, 0}, {2, 3, 0, 0}};
  PipelineConfig cfg;
  const GridSpec bounds = pipeline_grid(s, cfg, pts);
  EXPECT_EQ(bounds.cell_size_x, 0.01);
  s.grid = GridSpec{-1, -1, 0.05, 0.05, 100, 120};
  EXPECT_EQ(pipeline_grid(s, cfg, pts), *s.grid);
  cfg.grid_cell = 0.1;
  const GridSpec g = pipeline_grid(s, cfg, pts);
  EXPECT_EQ(g.cell_size_x, 0.1);
  EXPECT_EQ(g.x_min, -1.0);
  EXPECT_EQ(g.cols, 50);
  EXPECT_EQ(g.rows, 60);
}

}  // namespace
}  // namespace rsmap
