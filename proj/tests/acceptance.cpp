// One PASS/FAIL line per acceptance criterion. Exit status is nonzero when
// any criterion fails.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "oracles.hpp"
#include "rsmap/errors.hpp"
#include "rsmap/geometry.hpp"
#include "rsmap/ground.hpp"
#include "rsmap/io.hpp"
#include "rsmap/metrics.hpp"
#include "rsmap/pipeline.hpp"
#include "rsmap/raster.hpp"
#include "rsmap/synth.hpp"
#include "rsmap/vectorize.hpp"

namespace fs = std::filesystem;
using namespace rsmap;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok && pass) detail = what;
    pass = pass && ok;
  }
};

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("rsmap_acceptance_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string fmt(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

std::string sci(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2e", v);
  return buf;
}

VectorMap single(const MapElement& e) {
  VectorMap m;
  m.elements = {e};
  return m;
}

// ---------------------------------------------------------------- 1

Outcome metric_oracles() {
  Outcome out;
  std::mt19937_64 rng(1001);
  const GridSpec grid{0, 0, 0.01, 0.01, 400, 400};
  double worst_iou = 0.0;
  for (int pair = 0; pair < 20; ++pair) {
    MapElement a = oracle::random_shape(rng), b = oracle::random_shape(rng);
    a.element = b.element = ElementClass::kStopLine;
    const double got = iou(rasterize_map(single(a), ElementClass::kStopLine, grid, 0.2),
                           rasterize_map(single(b), ElementClass::kStopLine, grid, 0.2));
    const double expected = oracle::pixel_iou(a, b, 0.2, 0, 0, 4, 4, 0.01);
    const double rel = expected > 0 ? std::abs(got - expected) / expected : std::abs(got);
    worst_iou = std::max(worst_iou, rel);
    out.require(rel <= 1e-6, "iou pair " + std::to_string(pair) + " off by " + sci(rel));
  }
  double worst_cd = 0.0;
  for (int pair = 0; pair < 20; ++pair) {
    const auto a = oracle::random_polyline(rng), b = oracle::random_polyline(rng);
    const double got = chamfer_one_way({a, false}, {b, false}, 0.1);
    const double expected =
        oracle::chamfer(oracle::resample(a, false, 0.1), oracle::resample(b, false, 0.1));
    worst_cd = std::max(worst_cd, std::abs(got - expected));
    out.require(std::abs(got - expected) <= 1e-9, "chamfer pair " + std::to_string(pair));
  }
  const double ap = average_precision_from_ranking({true, false}, 2);
  out.require(ap == 0.5, "AP [TP, FP] with 2 GT = " + std::to_string(ap));
  if (out.pass) {
    out.detail = "worst iou rel err " + sci(worst_iou) + ", worst chamfer err " +
                 sci(worst_cd) + ", AP " + fmt(ap, 1);
  }
  return out;
}

// ---------------------------------------------------------------- 2

bool point_less(const Point3& a, const Point3& b) {
  return std::tie(a.x, a.y, a.z, a.intensity) < std::tie(b.x, b.y, b.z, b.intensity);
}

Outcome ransac_recovery() {
  Outcome out;
  int within = 0;
  for (int run = 0; run < 100; ++run) {
    std::mt19937_64 rng(5000 + run);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::normal_distribution<double> noise(0.0, 0.01);
    // Random unit normal tilted at most 30 degrees from +z.
    const double tilt = std::acos(1.0 - (1.0 - std::cos(std::numbers::pi / 6)) * (u(rng) + 1) / 2);
    const double az = std::numbers::pi * u(rng);
    const Vector3 n{std::sin(tilt) * std::cos(az), std::sin(tilt) * std::sin(az), std::cos(tilt)};
    const double offset = 5.0 * u(rng);
    // Orthonormal in-plane basis.
    Vector3 e1{n[2], 0.0, -n[0]};
    const double l1 = std::hypot(e1[0], e1[2]);
    e1 = {e1[0] / l1, 0.0, e1[2] / l1};
    const Vector3 e2{n[1] * e1[2] - n[2] * e1[1], n[2] * e1[0] - n[0] * e1[2],
                     n[0] * e1[1] - n[1] * e1[0]};
    PointCloud cloud;
    for (int i = 0; i < 1000; ++i) {
      Point3 p;
      if (i < 700) {
        const double s = 20 * u(rng), t = 20 * u(rng), h = noise(rng);
        p = {s * e1[0] + t * e2[0] + (h - offset) * n[0], s * e1[1] + t * e2[1] + (h - offset) * n[1],
             s * e1[2] + t * e2[2] + (h - offset) * n[2], 0.0};
      } else {
        p = {20 * u(rng), 20 * u(rng), 10 * u(rng), 0.0};
      }
      cloud.points.push_back(p);
    }
    std::shuffle(cloud.points.begin(), cloud.points.end(), rng);
    RansacConfig cfg;
    cfg.inlier_threshold = 0.05;
    cfg.seed = static_cast<std::uint64_t>(run);
    const GroundSplit split = extract_ground(cloud, cfg);
    Vector3 got = split.plane.normal;
    if (got[2] < 0) got = {-got[0], -got[1], -got[2]};
    if (angle_between_deg(got, n) <= 1.0) ++within;

    std::vector<Point3> joined = split.ground.points;
    joined.insert(joined.end(), split.non_ground.points.begin(), split.non_ground.points.end());
    std::vector<Point3> ref = cloud.points;
    std::sort(joined.begin(), joined.end(), point_less);
    std::sort(ref.begin(), ref.end(), point_less);
    out.require(joined == ref, "run " + std::to_string(run) + ": ground + non-ground != input");
    for (const auto& p : split.ground.points) {
      out.require(std::abs(split.plane.signed_distance(p)) <= 0.05,
                  "run " + std::to_string(run) + ": ground point beyond threshold");
    }
    for (const auto& p : split.non_ground.points) {
      out.require(std::abs(split.plane.signed_distance(p)) > 0.05,
                  "run " + std::to_string(run) + ": non-ground point within threshold");
    }
  }
  out.require(within >= 95, std::to_string(within) + "/100 normals within 1 deg");
  if (out.pass) out.detail = std::to_string(within) + "/100 normals within 1 deg, partitions exact";
  return out;
}

// ---------------------------------------------------------------- 3

Outcome vectorization_geometry() {
  Outcome out;
  std::vector<Point3> rect;
  for (int i = 0; i <= 60; ++i)
    for (int j = 0; j <= 40; ++j) rect.push_back({i * 0.05, j * 0.05, 0.0, 0.0});
  const auto ring = alpha_shape_polygon(rect, 0.5);
  const double area = polygon_area(ring), perim = polygon_perimeter(ring);
  out.require(std::abs(area - 6.0) <= 0.05 * 6.0, "alpha-shape area " + fmt(area));
  out.require(std::abs(perim - 10.0) <= 0.05 * 10.0, "alpha-shape perimeter " + fmt(perim));

  std::vector<Point3> line;
  for (int i = 0; i <= 40; ++i) {
    const double t = -3.0 + 0.25 * i;
    line.push_back({1.5 + 0.6 * t, -2.0 + 0.8 * t, 0.0, 0.0});
  }
  const auto seg = fit_line_segment(line);
  const Vec2 lo{1.5 + 0.6 * -3.0, -2.0 + 0.8 * -3.0}, hi{1.5 + 0.6 * 7.0, -2.0 + 0.8 * 7.0};
  const double err = std::min(std::max(norm(seg[0] - lo), norm(seg[1] - hi)),
                              std::max(norm(seg[0] - hi), norm(seg[1] - lo)));
  out.require(err <= 1e-9, "fit_line_segment endpoint error " + sci(err));

  std::mt19937_64 rng(3003);
  std::uniform_real_distribution<double> xy(0.0, 12.0), z(-0.3, 0.3);
  for (int scene = 0; scene < 50; ++scene) {
    std::vector<Point3> pts(300 + 4 * scene);
    for (auto& p : pts) p = {xy(rng), xy(rng), z(rng), 0.0};
    out.require(cluster_nn(pts, 0.5, 3) == oracle::union_find_clusters(pts, 0.5, 3),
                "cluster_nn differs from union-find on scene " + std::to_string(scene));
  }
  if (out.pass) {
    out.detail = "area " + fmt(area) + ", perimeter " + fmt(perim) + ", line err " +
                 sci(err) + ", 50/50 clusterings equal";
  }
  return out;
}

// ---------------------------------------------------------------- 4

Outcome equation_conformance() {
  Outcome out;
  std::mt19937_64 rng(4004);
  std::uniform_real_distribution<double> ang(-std::numbers::pi, std::numbers::pi);
  std::uniform_real_distribution<double> coord(-60.0, 60.0);
  double worst = 0.0;
  int checked = 0;
  for (int trial = 0; trial < 500; ++trial) {
    CameraCalibration c;
    c.f = 0.004;
    c.dx = 3e-6;
    c.dy = 3.2e-6;
    c.u0 = 960;
    c.v0 = 540;
    c.R = look_rotation(ang(rng), ang(rng) / 2);
    c.T = {coord(rng) / 4, coord(rng) / 4, coord(rng) / 4};
    c.image_width = 1920;
    c.image_height = 1080;
    const Point3 p{coord(rng), coord(rng), coord(rng), 0.0};
    const auto proj = project_point(p, c);
    if (!proj) continue;
    const Point3 back = back_project(proj->pixel, proj->depth, c);
    worst = std::max(worst, std::sqrt((back.x - p.x) * (back.x - p.x) +
                                      (back.y - p.y) * (back.y - p.y) +
                                      (back.z - p.z) * (back.z - p.z)));
    ++checked;
  }
  out.require(checked > 100, "too few projectable points");
  out.require(worst <= 1e-9, "projection round trip error " + sci(worst));

  const GridSpec g{-3.0, 2.0, 0.25, 0.25, 8, 8};
  const auto first = grid_index({-3.0, 2.0, 0.0, 0.0}, g);
  const auto second = grid_index({-3.0 + 0.25, 2.0 + 0.25, 0.0, 0.0}, g);
  out.require(first && first->col == 0 && first->row == 0, "x = x_min not in cell 0");
  out.require(second && second->col == 1 && second->row == 1, "x = x_min + cell not in cell 1");

  PointCloud cell;
  cell.points = {{0.005, 0.005, 0.0, 100.0}, {0.002, 0.007, 0.0, 200.0}};
  const IntensityImage img = rasterize_intensity(cell, GridSpec{0, 0, 0.01, 0.01, 1, 1});
  out.require(img.gray(0, 0) == 150.0, "intensity {100, 200} -> " + std::to_string(img.gray(0, 0)));
  if (out.pass) {
    out.detail = "round trip " + sci(worst) + " m over " + std::to_string(checked) +
                 " points, grid cells 0/1, intensity " + fmt(img.gray(0, 0), 1);
  }
  return out;
}

// ---------------------------------------------------------------- 5

Outcome fusion_dominance() {
  Outcome out;
  int strict = 0;
  std::string rows;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    SceneSpec spec;
    spec.seed = seed;
    const auto dir = fresh_dir("fusion_" + std::to_string(seed));
    write_scene(generate_scene(spec), dir);
    const PipelineResult r = run_pipeline(dir, PipelineConfig{});
    const double im = *r.image_report->miou, pc = *r.pointcloud_report->miou,
                 mm = *r.multimodal_report->miou;
    out.require(mm >= im && mm >= pc, "scene " + std::to_string(seed) + ": mm " + fmt(mm) +
                                          " im " + fmt(im) + " pc " + fmt(pc));
    strict += mm > im && mm > pc;
    rows += " " + fmt(mm, 3) + "/" + fmt(im, 3) + "/" + fmt(pc, 3);
    fs::remove_all(dir);
  }
  out.require(strict >= 8, std::to_string(strict) + "/10 strictly greater");
  if (out.pass) out.detail = std::to_string(strict) + "/10 strict; mm/im/pc" + rows;
  return out;
}

// ---------------------------------------------------------------- 6, 7

Outcome frame_count(const fs::path& scene) {
  Outcome out;
  const std::vector<std::size_t> ks{1, 10, 20, 50};
  const auto rows = run_framecount_sweep(scene, ks, PipelineConfig{});
  std::string detail;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    detail += " k=" + std::to_string(rows[i].frames) + " mIoU " + fmt(*rows[i].miou) + " " +
              fmt(rows[i].seconds, 2) + " s;";
    if (i == 0) continue;
    out.require(*rows[i].miou >= *rows[i - 1].miou,
                "mIoU drops at k=" + std::to_string(rows[i].frames) + ":" + detail);
    out.require(rows[i].seconds > rows[i - 1].seconds,
                "time does not grow at k=" + std::to_string(rows[i].frames) + ":" + detail);
  }
  if (out.pass) out.detail = detail;
  return out;
}

Outcome distance_falloff(const fs::path& scene) {
  Outcome out;
  const PipelineResult r = run_pipeline(scene, PipelineConfig{});
  const auto& density = r.multimodal_report->density;
  const auto& local = r.multimodal_report->by_distance;
  out.require(density.size() == 5 && local.size() == 5, "expected five distance bins");
  std::string dens_text, miou_text;
  for (std::size_t i = 0; i < density.size(); ++i) {
    dens_text += " " + fmt(density[i].density, 2);
    miou_text += " " + (local[i].miou ? fmt(*local[i].miou, 3) : std::string("-"));
  }
  for (std::size_t i = 1; i < density.size(); ++i) {
    out.require(density[i].density < density[i - 1].density, "density not decreasing:" + dens_text);
  }
  for (std::size_t i = 1; i < local.size(); ++i) {
    out.require(local[i].miou && local[i - 1].miou && *local[i].miou <= *local[i - 1].miou,
                "local mIoU increases:" + miou_text);
  }
  if (out.pass) out.detail = "density" + dens_text + "; local mIoU" + miou_text;
  return out;
}

// ---------------------------------------------------------------- 8

Outcome determinism(const fs::path& scene) {
  Outcome out;
  const auto a = fresh_dir("det_a"), b = fresh_dir("det_b");
  for (const auto& dir : {a, b}) {
    const std::string cmd = std::string(RSMAP_CLI_PATH) + " pipeline --scene " + scene.string() +
                            " --out " + dir.string() + " --seed 11 > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    out.require(WIFEXITED(status) && WEXITSTATUS(status) == 0, "pipeline exited abnormally");
  }
  int compared = 0;
  for (const char* f : {"image_only.geojson", "pointcloud_only.geojson", "multimodal.geojson",
                        "report.json", "report.txt"}) {
    const bool same = fs::exists(a / f) && io::read_file(a / f) == io::read_file(b / f);
    out.require(same, std::string(f) + " differs");
    compared += same;
  }
  if (out.pass) out.detail = std::to_string(compared) + " files byte-identical";
  return out;
}

}  // namespace

int main() {
  int failures = 0;
  const auto report = [&](int id, const char* name, double limit_s,
                          const std::function<Outcome()>& criterion) {
    const auto t0 = Clock::now();
    Outcome out;
    try {
      out = criterion();
    } catch (const std::exception& e) {
      out.pass = false;
      out.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    if (limit_s > 0 && secs >= limit_s) {
      out.detail = "took " + fmt(secs, 1) + " s, limit " + fmt(limit_s, 0) + " s; " + out.detail;
      out.pass = false;
    }
    failures += !out.pass;
    std::printf("%s criterion %d %s (%.1f s): %s\n", out.pass ? "PASS" : "FAIL", id, name, secs,
                out.detail.c_str());
    std::fflush(stdout);
  };

  report(1, "metric oracles", 10, metric_oracles);
  report(2, "RANSAC recovery", 30, ransac_recovery);
  report(3, "vectorization geometry", 0, vectorization_geometry);
  report(4, "projection/grid/intensity conformance", 0, equation_conformance);
  report(5, "fusion dominance", 300, fusion_dominance);

  // One default 50-frame scene with density falloff exponent 2 serves 6-8.
  const auto scene = fresh_dir("scene");
  bool scene_ok = true;
  try {
    const SceneSpec spec;
    write_scene(generate_scene(spec), scene);
    scene_ok = spec.frame_count == 50 && spec.falloff_exponent == 2.0;
  } catch (const std::exception& e) {
    std::printf("scene generation failed: %s\n", e.what());
    scene_ok = false;
  }
  const auto needs_scene = [&](std::function<Outcome(const fs::path&)> fn) {
    return [&, fn] {
      if (!scene_ok) return Outcome{false, "no 50-frame falloff-2 scene"};
      return fn(scene);
    };
  };
  report(6, "frame-count monotonicity", 0, needs_scene(frame_count));
  report(7, "distance falloff", 0, needs_scene(distance_falloff));
  report(8, "end-to-end determinism", 0, needs_scene(determinism));
  fs::remove_all(scene);

  std::printf("%d/8 criteria passed\n", 8 - failures);
  return failures == 0 ? 0 : 1;
}
