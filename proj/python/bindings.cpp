#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "rsmap/config.hpp"
#include "rsmap/errors.hpp"
#include "rsmap/geometry.hpp"
#include "rsmap/ground.hpp"
#include "rsmap/io.hpp"
#include "rsmap/metrics.hpp"
#include "rsmap/pipeline.hpp"
#include "rsmap/raster.hpp"
#include "rsmap/synth.hpp"
#include "rsmap/vectorize.hpp"

namespace py = pybind11;
using namespace rsmap;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

// Accepts (n, 2), (n, 3) or (n, 4) arrays; missing columns are zero.
std::vector<Point3> points_of(const Array& a) {
  if (a.ndim() != 2 || a.shape(1) < 2 || a.shape(1) > 4) {
    throw Error(ErrorCode::kInvalidArgument, "expected an (n, 2..4) array");
  }
  const auto v = a.unchecked<2>();
  std::vector<Point3> out(static_cast<std::size_t>(a.shape(0)));
  for (py::ssize_t i = 0; i < a.shape(0); ++i) {
    out[i].x = v(i, 0);
    out[i].y = v(i, 1);
    if (a.shape(1) > 2) out[i].z = v(i, 2);
    if (a.shape(1) > 3) out[i].intensity = v(i, 3);
  }
  return out;
}

Array array_of(const std::vector<Point3>& pts) {
  Array out({static_cast<py::ssize_t>(pts.size()), py::ssize_t{4}});
  auto v = out.mutable_unchecked<2>();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    v(i, 0) = pts[i].x;
    v(i, 1) = pts[i].y;
    v(i, 2) = pts[i].z;
    v(i, 3) = pts[i].intensity;
  }
  return out;
}

Array array_of(const std::vector<Vec2>& pts) {
  Array out({static_cast<py::ssize_t>(pts.size()), py::ssize_t{2}});
  auto v = out.mutable_unchecked<2>();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    v(i, 0) = pts[i].x;
    v(i, 1) = pts[i].y;
  }
  return out;
}

std::vector<Vec2> vec2_of(const Array& a) {
  std::vector<Vec2> out;
  for (const auto& p : points_of(a)) out.push_back({p.x, p.y});
  return out;
}

PipelineConfig config_of(const std::string& text) { return parse_config(text); }

}  // namespace

PYBIND11_MODULE(_rsmap, m) {
  m.doc() = "Vectorized road-marking maps from roadside camera masks and LiDAR";

  static py::exception<Error> error(m, "RsmapError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = py::reinterpret_borrow<py::object>(error.ptr())(e.what());
      exc.attr("code") = std::string(to_string(e.code()));
      PyErr_SetObject(error.ptr(), exc.ptr());
    }
  });

  m.def(
      "project_point",
      [](const Vector3& point, const std::string& calib_json) -> py::object {
        const Point3 p{point[0], point[1], point[2], 0.0};
        const auto proj = project_point(p, io::calibration_from_json(calib_json));
        if (!proj) return py::none();
        return py::make_tuple(proj->pixel.u, proj->pixel.v, proj->depth);
      },
      py::arg("point"), py::arg("calib_json"),
      "Pixel (u, v) and camera depth of a world point, or None behind the camera.");

  m.def(
      "grid_index",
      [](double x, double y, const std::string& grid_json) -> py::object {
        const auto idx = grid_index({x, y, 0.0, 0.0}, io::grid_from_json(grid_json));
        if (!idx) return py::none();
        return py::make_tuple(idx->col, idx->row);
      },
      py::arg("x"), py::arg("y"), py::arg("grid_json"));

  m.def(
      "extract_ground",
      [](const Array& points, double threshold, int max_iterations, std::uint64_t seed) {
        PointCloud cloud;
        cloud.points = points_of(points);
        RansacConfig cfg;
        cfg.inlier_threshold = threshold;
        cfg.max_iterations = max_iterations;
        cfg.seed = seed;
        const GroundSplit split = extract_ground(cloud, cfg);
        const auto& n = split.plane.normal;
        return py::make_tuple(array_of(split.ground.points), array_of(split.non_ground.points),
                              py::make_tuple(n[0], n[1], n[2], split.plane.d));
      },
      py::arg("points"), py::arg("threshold") = 0.05, py::arg("max_iterations") = 500,
      py::arg("seed") = 0, "Returns (ground, non_ground, (nx, ny, nz, d)).");

  m.def(
      "mean_intensity",
      [](const Array& points, const std::string& grid_json) {
        PointCloud cloud;
        cloud.points = points_of(points);
        const IntensityImage img = rasterize_intensity(cloud, io::grid_from_json(grid_json));
        Array out({static_cast<py::ssize_t>(img.spec.rows), static_cast<py::ssize_t>(img.spec.cols)});
        std::copy(img.cells.begin(), img.cells.end(), out.mutable_data());
        return out;
      },
      py::arg("points"), py::arg("grid_json"),
      "Mean-intensity BEV image, row 0 at minimum y.");

  m.def(
      "sor_denoise",
      [](const Array& points, int k, double n_sigma) {
        return array_of(sor_denoise(points_of(points), k, n_sigma));
      },
      py::arg("points"), py::arg("k") = 16, py::arg("n_sigma") = 2.0);

  m.def(
      "cluster_nn",
      [](const Array& points, double radius, std::size_t min_size) {
        return cluster_nn(points_of(points), radius, min_size);
      },
      py::arg("points"), py::arg("radius") = 0.5, py::arg("min_size") = 10);

  m.def(
      "alpha_shape",
      [](const Array& points, double alpha) {
        return array_of(alpha_shape_polygon(points_of(points), alpha));
      },
      py::arg("points"), py::arg("alpha") = 0.5, "Counter-clockwise boundary ring.");

  m.def(
      "fit_line_segment",
      [](const Array& points) {
        const auto seg = fit_line_segment(points_of(points));
        return array_of(std::vector<Vec2>{seg[0], seg[1]});
      },
      py::arg("points"));

  m.def(
      "chamfer_one_way",
      [](const Array& pred, const Array& gt, bool pred_closed, bool gt_closed, double step) {
        return chamfer_one_way({vec2_of(pred), pred_closed}, {vec2_of(gt), gt_closed}, step);
      },
      py::arg("pred"), py::arg("gt"), py::arg("pred_closed") = false,
      py::arg("gt_closed") = false, py::arg("step") = 0.1);

  m.def("average_precision_from_ranking", &average_precision_from_ranking,
        py::arg("tp_in_rank_order"), py::arg("gt_count"));

  m.def(
      "evaluate",
      [](const std::string& pred_geojson, const std::string& gt_geojson,
         const std::string& config) {
        const PipelineConfig cfg = config_of(config);
        return report_to_json(
            evaluate(io::map_from_geojson(pred_geojson), io::map_from_geojson(gt_geojson), cfg.match));
      },
      py::arg("pred_geojson"), py::arg("gt_geojson"), py::arg("config") = "",
      "Report JSON comparing two GeoJSON maps.");

  m.def(
      "synth",
      [](const std::filesystem::path& out_dir, const std::string& spec_json, int jobs) {
        write_scene(generate_scene(scene_spec_from_json(spec_json), jobs), out_dir);
      },
      py::arg("out_dir"), py::arg("spec_json") = "{}", py::arg("jobs") = 1,
      "Writes a synthetic intersection scene directory.");

  m.def(
      "run_pipeline",
      [](const std::filesystem::path& scene_dir, const std::filesystem::path& out_dir,
         const std::string& config, bool dump) {
        const PipelineResult r = run_pipeline(scene_dir, config_of(config));
        write_pipeline_outputs(r, out_dir, dump);
        return r.multimodal_report ? py::object(py::str(comparison_to_json(r))) : py::none();
      },
      py::arg("scene_dir"), py::arg("out_dir"), py::arg("config") = "", py::arg("dump") = false,
      "Runs all three paths; returns the comparison JSON when ground truth exists.");
}
