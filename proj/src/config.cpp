#include "rsmap/config.hpp"

#include <charconv>
#include <sstream>

#include "rsmap/errors.hpp"
#include "rsmap/io.hpp"

namespace rsmap {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    throw Error(ErrorCode::kConfigError, key + ": expected a number, got '" + v + "'");
  }
  return out;
}

std::int64_t to_int(const std::string& key, const std::string& v) {
  std::int64_t out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    throw Error(ErrorCode::kConfigError, key + ": expected an integer, got '" + v + "'");
  }
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw Error(ErrorCode::kConfigError, key + ": expected true or false, got '" + v + "'");
}

void check(bool ok, const char* key, const char* range) {
  if (!ok) throw Error(ErrorCode::kConfigError, std::string(key) + ": must be " + range);
}

std::string num(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace

void PipelineConfig::validate() const {
  if (grid_cell) check(*grid_cell > 0.0, "grid.cell", "positive");
  check(ransac.max_iterations >= 1, "ransac.max_iterations", ">= 1");
  check(ransac.inlier_threshold > 0.0, "ransac.threshold", "positive");
  check(ransac.min_inliers_fraction > 0.0 && ransac.min_inliers_fraction <= 1.0,
        "ransac.min_inliers", "in (0, 1]");
  check(vectorize.sor_k >= 1, "sor.k", ">= 1");
  check(vectorize.sor_n_sigma >= 0.0, "sor.n_sigma", "non-negative");
  check(vectorize.cluster_radius > 0.0, "cluster.radius", "positive");
  check(vectorize.min_cluster_size >= 1, "cluster.min_size", ">= 1");
  check(vectorize.alpha > 0.0, "alpha", "positive");
  check(vectorize.split_length > 0.0, "split.length", "positive");
  check(vectorize.split_interval > 0.0, "split.interval", "positive");
  check(intensity_threshold >= 0.0 && intensity_threshold <= 255.0, "intensity.threshold",
        "in [0, 255]");
  check(match.eval_cell > 0.0, "eval.cell", "positive");
  check(match.line_width > 0.0, "eval.line_width", "positive");
  check(match.cd_threshold > 0.0, "eval.cd_threshold", "positive");
  check(match.iou_threshold >= 0.0 && match.iou_threshold < 1.0, "eval.iou_threshold",
        "in [0, 1)");
  check(match.sample_step > 0.0, "eval.sample_step", "positive");
  check(sync_tolerance >= 0.0, "sync.tolerance", "non-negative");
  if (frame_count) check(*frame_count >= 1, "frames", ">= 1");
  check(jobs >= 1, "jobs", ">= 1");
}

void apply_setting(PipelineConfig& cfg, const std::string& key, const std::string& value) {
  const std::string& v = value;
  if (key == "grid.cell") cfg.grid_cell = to_double(key, v);
  else if (key == "ransac.max_iterations") cfg.ransac.max_iterations = static_cast<int>(to_int(key, v));
  else if (key == "ransac.threshold") cfg.ransac.inlier_threshold = to_double(key, v);
  else if (key == "ransac.min_inliers") cfg.ransac.min_inliers_fraction = to_double(key, v);
  else if (key == "sor.k") cfg.vectorize.sor_k = static_cast<int>(to_int(key, v));
  else if (key == "sor.n_sigma") cfg.vectorize.sor_n_sigma = to_double(key, v);
  else if (key == "cluster.radius") cfg.vectorize.cluster_radius = to_double(key, v);
  else if (key == "cluster.min_size") {
    const auto n = to_int(key, v);
    check(n >= 1, "cluster.min_size", ">= 1");
    cfg.vectorize.min_cluster_size = static_cast<std::size_t>(n);
  } else if (key == "alpha") cfg.vectorize.alpha = to_double(key, v);
  else if (key == "split.length") cfg.vectorize.split_length = to_double(key, v);
  else if (key == "split.interval") cfg.vectorize.split_interval = to_double(key, v);
  else if (key == "intensity.threshold") cfg.intensity_threshold = to_double(key, v);
  else if (key == "intensity.normalize") cfg.normalize_intensity = to_bool(key, v);
  else if (key == "eval.cell") cfg.match.eval_cell = to_double(key, v);
  else if (key == "eval.line_width") cfg.match.line_width = to_double(key, v);
  else if (key == "eval.cd_threshold") cfg.match.cd_threshold = to_double(key, v);
  else if (key == "eval.iou_threshold") cfg.match.iou_threshold = to_double(key, v);
  else if (key == "eval.sample_step") cfg.match.sample_step = to_double(key, v);
  else if (key == "sync.tolerance") cfg.sync_tolerance = to_double(key, v);
  else if (key == "frames") {
    const auto n = to_int(key, v);
    check(n >= 1, "frames", ">= 1");
    cfg.frame_count = static_cast<std::size_t>(n);
  } else if (key == "seed") {
    const auto n = to_int(key, v);
    check(n >= 0, "seed", "non-negative");
    cfg.seed = static_cast<std::uint64_t>(n);
  } else if (key == "jobs") cfg.jobs = static_cast<int>(to_int(key, v));
  else throw Error(ErrorCode::kConfigError, "unknown key '" + key + "'");
}

void apply_override(PipelineConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw Error(ErrorCode::kConfigError, "expected key=value, got '" + assignment + "'");
  }
  apply_setting(cfg, trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

PipelineConfig parse_config(const std::string& text) {
  PipelineConfig cfg;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::kConfigError,
                  "line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    try {
      apply_setting(cfg, key, trim(line.substr(eq + 1)));
    } catch (const Error& e) {
      throw Error(ErrorCode::kConfigError, "line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  cfg.validate();
  return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = io::read_file(path);
  } catch (const Error& e) {
    throw Error(ErrorCode::kConfigError, e.what());
  }
  return parse_config(text);
}

std::string config_to_text(const PipelineConfig& c) {
  std::ostringstream out;
  if (c.grid_cell) out << "grid.cell = " << num(*c.grid_cell) << "\n";
  out << "ransac.max_iterations = " << c.ransac.max_iterations << "\n"
      << "ransac.threshold = " << num(c.ransac.inlier_threshold) << "\n"
      << "ransac.min_inliers = " << num(c.ransac.min_inliers_fraction) << "\n"
      << "sor.k = " << c.vectorize.sor_k << "\n"
      << "sor.n_sigma = " << num(c.vectorize.sor_n_sigma) << "\n"
      << "cluster.radius = " << num(c.vectorize.cluster_radius) << "\n"
      << "cluster.min_size = " << c.vectorize.min_cluster_size << "\n"
      << "alpha = " << num(c.vectorize.alpha) << "\n"
      << "split.length = " << num(c.vectorize.split_length) << "\n"
      << "split.interval = " << num(c.vectorize.split_interval) << "\n"
      << "intensity.threshold = " << num(c.intensity_threshold) << "\n"
      << "intensity.normalize = " << (c.normalize_intensity ? "true" : "false") << "\n"
      << "eval.cell = " << num(c.match.eval_cell) << "\n"
      << "eval.line_width = " << num(c.match.line_width) << "\n"
      << "eval.cd_threshold = " << num(c.match.cd_threshold) << "\n"
      << "eval.iou_threshold = " << num(c.match.iou_threshold) << "\n"
      << "eval.sample_step = " << num(c.match.sample_step) << "\n"
      << "sync.tolerance = " << num(c.sync_tolerance) << "\n";
  if (c.frame_count) out << "frames = " << *c.frame_count << "\n";
  out << "seed = " << c.seed << "\n"
      << "jobs = " << c.jobs << "\n";
  return out.str();
}

}  // namespace rsmap
