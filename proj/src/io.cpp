#include "rsmap/io.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "rsmap/errors.hpp"

namespace rsmap::io {

using nlohmann::json;

void write_file_atomic(const fs::path& path, const std::string& contents) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw Error(ErrorCode::kIoError, "cannot write " + tmp.string());
    }
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw Error(ErrorCode::kIoError, "short write to " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kMissingInput, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

namespace {

json parse_json(const std::string& text, const char* what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kIoError, std::string("malformed ") + what + ": " + e.what());
  }
}

template <typename T>
T required(const json& j, const char* key) {
  if (!j.contains(key)) {
    throw Error(ErrorCode::kIoError, std::string("missing key '") + key + "'");
  }
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kIoError, std::string("bad value for '") + key + "'");
  }
}

void append_number(std::string& out, double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, res.ptr);
}

double parse_number(std::string_view token, std::size_t line_no) {
  double v = 0.0;
  const auto res = std::from_chars(token.data(), token.data() + token.size(), v);
  if (res.ec != std::errc() || res.ptr != token.data() + token.size()) {
    throw Error(ErrorCode::kIoError, "bad number '" + std::string(token) +
                                         "' on line " + std::to_string(line_no));
  }
  return v;
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    const std::size_t j = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i > j) out.push_back(line.substr(j, i - j));
  }
  return out;
}

template <typename Fn>
void for_each_line(const std::string& text, Fn&& fn) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    ++line_no;
    std::string_view line(text.data() + pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    fn(line, line_no);
    pos = end + 1;
  }
}

std::optional<std::uint32_t> frame_from_stem(const fs::path& path) {
  const std::string stem = path.stem().string();
  std::uint32_t v = 0;
  const auto res = std::from_chars(stem.data(), stem.data() + stem.size(), v);
  if (res.ec == std::errc() && res.ptr == stem.data() + stem.size()) return v;
  return std::nullopt;
}

json class_table_to_json(const ClassTable& table) {
  json arr = json::array();
  for (const auto& [id, entry] : table) {
    arr.push_back({{"id", id},
                   {"name", std::string(class_name(entry.element))},
                   {"gray", entry.gray}});
  }
  return arr;
}

ClassTable class_table_from_json(const json& arr) {
  ClassTable table;
  for (const auto& item : arr) {
    const auto id = required<int>(item, "id");
    if (id < 0 || id > 255) throw Error(ErrorCode::kIoError, "class id out of range");
    ClassEntry entry;
    entry.element = class_from_name(required<std::string>(item, "name"));
    entry.gray = static_cast<std::uint8_t>(required<int>(item, "gray"));
    table[static_cast<std::uint8_t>(id)] = entry;
  }
  return table;
}

json grid_json(const GridSpec& spec) {
  return {{"x_min", spec.x_min},         {"y_min", spec.y_min},
          {"cell_size_x", spec.cell_size_x}, {"cell_size_y", spec.cell_size_y},
          {"cols", spec.cols},           {"rows", spec.rows}};
}

GridSpec grid_of(const json& j) {
  GridSpec spec;
  spec.x_min = required<double>(j, "x_min");
  spec.y_min = required<double>(j, "y_min");
  spec.cell_size_x = required<double>(j, "cell_size_x");
  spec.cell_size_y = required<double>(j, "cell_size_y");
  spec.cols = required<int>(j, "cols");
  spec.rows = required<int>(j, "rows");
  spec.validate();
  return spec;
}

}  // namespace

// ---------------------------------------------------------------------------

std::string calibration_to_json(const CameraCalibration& calib) {
  json j = {{"f", calib.f},
            {"dx", calib.dx},
            {"dy", calib.dy},
            {"u0", calib.u0},
            {"v0", calib.v0},
            {"R", calib.R},
            {"T", calib.T},
            {"image_width", calib.image_width},
            {"image_height", calib.image_height}};
  return j.dump(2) + "\n";
}

CameraCalibration calibration_from_json(const std::string& text) {
  const json j = parse_json(text, "calibration");
  CameraCalibration c;
  c.f = required<double>(j, "f");
  c.dx = required<double>(j, "dx");
  c.dy = required<double>(j, "dy");
  c.u0 = required<double>(j, "u0");
  c.v0 = required<double>(j, "v0");
  const auto r = required<std::vector<double>>(j, "R");
  const auto t = required<std::vector<double>>(j, "T");
  if (r.size() != 9 || t.size() != 3) {
    throw Error(ErrorCode::kIoError, "R needs 9 values and T needs 3");
  }
  std::copy(r.begin(), r.end(), c.R.begin());
  std::copy(t.begin(), t.end(), c.T.begin());
  c.image_width = required<int>(j, "image_width");
  c.image_height = required<int>(j, "image_height");
  c.validate();
  return c;
}

void save_calibration(const fs::path& path, const CameraCalibration& calib) {
  write_file_atomic(path, calibration_to_json(calib));
}

CameraCalibration load_calibration(const fs::path& path) {
  return calibration_from_json(read_file(path));
}

std::string grid_to_json(const GridSpec& spec) { return grid_json(spec).dump(2) + "\n"; }

GridSpec grid_from_json(const std::string& text) {
  return grid_of(parse_json(text, "grid"));
}

void save_grid(const fs::path& path, const GridSpec& spec) {
  write_file_atomic(path, grid_to_json(spec));
}

GridSpec load_grid(const fs::path& path) { return grid_from_json(read_file(path)); }

// ---------------------------------------------------------------------------

std::string cloud_to_ascii(const PointCloud& cloud) {
  std::string out = "# frame_id: " + std::to_string(cloud.frame_id) + "\n# timestamp: ";
  append_number(out, cloud.timestamp);
  out += "\n";
  for (const auto& p : cloud.points) {
    append_number(out, p.x);
    out += ' ';
    append_number(out, p.y);
    out += ' ';
    append_number(out, p.z);
    out += ' ';
    append_number(out, p.intensity);
    out += '\n';
  }
  return out;
}

PointCloud cloud_from_ascii(const std::string& text) {
  PointCloud cloud;
  for_each_line(text, [&](std::string_view line, std::size_t line_no) {
    const auto hash = line.find('#');
    if (hash != std::string_view::npos) {
      const auto comment = line.substr(hash + 1);
      const auto tokens = split_ws(comment);
      if (tokens.size() == 2 && tokens[0] == "frame_id:") {
        cloud.frame_id = static_cast<std::uint32_t>(parse_number(tokens[1], line_no));
      } else if (tokens.size() == 2 && tokens[0] == "timestamp:") {
        cloud.timestamp = parse_number(tokens[1], line_no);
      }
      line = line.substr(0, hash);
    }
    const auto tokens = split_ws(line);
    if (tokens.empty()) return;
    if (tokens.size() != 4) {
      throw Error(ErrorCode::kIoError,
                  "expected 'x y z intensity' on line " + std::to_string(line_no));
    }
    Point3 p{parse_number(tokens[0], line_no), parse_number(tokens[1], line_no),
             parse_number(tokens[2], line_no), parse_number(tokens[3], line_no)};
    if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z)) {
      throw Error(ErrorCode::kIoError, "non-finite point on line " + std::to_string(line_no));
    }
    cloud.points.push_back(p);
  });
  return cloud;
}

namespace {

static_assert(std::endian::native == std::endian::little,
              "binary cloud I/O assumes a little-endian host");

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T>
T get(const std::string& in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw Error(ErrorCode::kIoError, "truncated binary cloud");
  T v;
  std::memcpy(&v, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

}  // namespace

std::string cloud_to_binary(const PointCloud& cloud) {
  std::string out = "RSPC";
  put<std::uint32_t>(out, static_cast<std::uint32_t>(cloud.points.size()));
  put<std::uint64_t>(out, static_cast<std::uint64_t>(std::llround(cloud.timestamp * 1e6)));
  out.reserve(out.size() + cloud.points.size() * 16);
  for (const auto& p : cloud.points) {
    put<float>(out, static_cast<float>(p.x));
    put<float>(out, static_cast<float>(p.y));
    put<float>(out, static_cast<float>(p.z));
    put<float>(out, static_cast<float>(p.intensity));
  }
  return out;
}

PointCloud cloud_from_binary(const std::string& bytes) {
  if (bytes.size() < 16 || bytes.compare(0, 4, "RSPC") != 0) {
    throw Error(ErrorCode::kIoError, "not an RSPC cloud");
  }
  std::size_t pos = 4;
  const auto count = get<std::uint32_t>(bytes, pos);
  const auto micros = get<std::uint64_t>(bytes, pos);
  if (bytes.size() != 16 + static_cast<std::size_t>(count) * 16) {
    throw Error(ErrorCode::kIoError, "RSPC size does not match point count");
  }
  PointCloud cloud;
  cloud.timestamp = static_cast<double>(micros) * 1e-6;
  cloud.points.resize(count);
  for (auto& p : cloud.points) {
    p.x = get<float>(bytes, pos);
    p.y = get<float>(bytes, pos);
    p.z = get<float>(bytes, pos);
    p.intensity = get<float>(bytes, pos);
  }
  return cloud;
}

void save_cloud(const fs::path& path, const PointCloud& cloud) {
  write_file_atomic(path, path.extension() == ".rspc" ? cloud_to_binary(cloud)
                                                      : cloud_to_ascii(cloud));
}

PointCloud load_cloud(const fs::path& path) {
  const std::string data = read_file(path);
  if (path.extension() == ".rspc") {
    PointCloud cloud = cloud_from_binary(data);
    if (const auto id = frame_from_stem(path)) cloud.frame_id = *id;
    return cloud;
  }
  return cloud_from_ascii(data);
}

// ---------------------------------------------------------------------------

std::string labeled_to_ascii(const LabeledPoints& labeled) {
  std::string out;
  for (const auto& [id, entry] : labeled.class_table) {
    out += "# class " + std::to_string(id) + " " + std::string(class_name(entry.element)) +
           " " + std::to_string(entry.gray) + "\n";
  }
  for (const auto& [cls, pts] : labeled.by_class) {
    const auto id = label_of(labeled.class_table, cls);
    if (!id) throw Error(ErrorCode::kUnknownLabel, "class missing from table");
    for (const auto& lp : pts) {
      append_number(out, lp.point.x);
      out += ' ';
      append_number(out, lp.point.y);
      out += ' ';
      append_number(out, lp.point.z);
      out += ' ';
      append_number(out, lp.point.intensity);
      out += ' ' + std::to_string(*id) + '\n';
    }
  }
  return out;
}

LabeledPoints labeled_from_ascii(const std::string& text) {
  ClassTable table;
  std::vector<std::pair<Point3, int>> rows;
  for_each_line(text, [&](std::string_view line, std::size_t line_no) {
    const auto hash = line.find('#');
    if (hash != std::string_view::npos) {
      const auto tokens = split_ws(line.substr(hash + 1));
      if (tokens.size() == 4 && tokens[0] == "class") {
        ClassEntry entry;
        entry.element = class_from_name(tokens[2]);
        entry.gray = static_cast<std::uint8_t>(parse_number(tokens[3], line_no));
        table[static_cast<std::uint8_t>(parse_number(tokens[1], line_no))] = entry;
      }
      line = line.substr(0, hash);
    }
    const auto tokens = split_ws(line);
    if (tokens.empty()) return;
    if (tokens.size() != 5) {
      throw Error(ErrorCode::kIoError,
                  "expected 'x y z intensity class_id' on line " + std::to_string(line_no));
    }
    rows.push_back({{parse_number(tokens[0], line_no), parse_number(tokens[1], line_no),
                     parse_number(tokens[2], line_no), parse_number(tokens[3], line_no)},
                    static_cast<int>(parse_number(tokens[4], line_no))});
  });
  LabeledPoints out;
  if (!table.empty()) out.class_table = table;
  for (const auto& [p, id] : rows) {
    if (id < 0 || id > 255) throw Error(ErrorCode::kUnknownLabel, "class id out of range");
    const ElementClass cls = element_of(out.class_table, static_cast<std::uint8_t>(id));
    if (cls == ElementClass::kBackground) continue;
    out.by_class[cls].push_back({p, Provenance::kMerged, 0});
  }
  return out;
}

void save_labeled(const fs::path& path, const LabeledPoints& labeled) {
  write_file_atomic(path, labeled_to_ascii(labeled));
}

LabeledPoints load_labeled(const fs::path& path) {
  return labeled_from_ascii(read_file(path));
}

// ---------------------------------------------------------------------------

std::string encode_png(const GrayImage& image) {
  png_image img;
  std::memset(&img, 0, sizeof(img));
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(image.width);
  img.height = static_cast<png_uint_32>(image.height);
  img.format = PNG_FORMAT_GRAY;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&img, nullptr, &size, 0, image.pixels.data(), 0, nullptr)) {
    throw Error(ErrorCode::kIoError, std::string("png encode: ") + img.message);
  }
  std::string out(size, '\0');
  if (!png_image_write_to_memory(&img, out.data(), &size, 0, image.pixels.data(), 0,
                                 nullptr)) {
    throw Error(ErrorCode::kIoError, std::string("png encode: ") + img.message);
  }
  out.resize(size);
  return out;
}

GrayImage decode_png(const std::string& bytes) {
  png_image img;
  std::memset(&img, 0, sizeof(img));
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&img, bytes.data(), bytes.size())) {
    throw Error(ErrorCode::kIoError, std::string("png decode: ") + img.message);
  }
  img.format = PNG_FORMAT_GRAY;
  GrayImage out;
  out.width = static_cast<int>(img.width);
  out.height = static_cast<int>(img.height);
  out.pixels.resize(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, out.pixels.data(), 0, nullptr)) {
    png_image_free(&img);
    throw Error(ErrorCode::kIoError, std::string("png decode: ") + img.message);
  }
  return out;
}

fs::path sidecar_path(const fs::path& png) {
  fs::path p = png;
  p.replace_extension(".json");
  return p;
}

void save_label_mask(const fs::path& png, const LabelMask& mask, const MaskMeta& meta) {
  mask.validate();
  GrayImage img{mask.width, mask.height, {}};
  img.pixels.resize(mask.labels.size());
  for (std::size_t i = 0; i < mask.labels.size(); ++i) {
    img.pixels[i] = mask.class_table.at(mask.labels[i]).gray;
  }
  json side = {{"kind", "label_mask"},
               {"width", mask.width},
               {"height", mask.height},
               {"class_table", class_table_to_json(mask.class_table)}};
  if (meta.grid) side["grid"] = grid_json(*meta.grid);
  if (meta.timestamp) side["timestamp"] = *meta.timestamp;
  if (meta.frame_id) side["frame_id"] = *meta.frame_id;
  write_file_atomic(png, encode_png(img));
  write_file_atomic(sidecar_path(png), side.dump(2) + "\n");
}

LabelMask load_label_mask(const fs::path& png, MaskMeta* meta) {
  const fs::path side_path = sidecar_path(png);
  if (!fs::exists(side_path)) {
    throw Error(ErrorCode::kMissingInput, "missing mask sidecar " + side_path.string());
  }
  const json side = parse_json(read_file(side_path), "mask sidecar");
  const GrayImage img = decode_png(read_file(png));
  LabelMask mask;
  mask.width = img.width;
  mask.height = img.height;
  mask.class_table = class_table_from_json(required<json>(side, "class_table"));
  if (required<int>(side, "width") != img.width || required<int>(side, "height") != img.height) {
    throw Error(ErrorCode::kDimensionMismatch, "mask sidecar size differs from PNG");
  }
  std::array<int, 256> id_of_gray;
  id_of_gray.fill(-1);
  for (const auto& [id, entry] : mask.class_table) id_of_gray[entry.gray] = id;
  mask.labels.resize(img.pixels.size());
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    const int id = id_of_gray[img.pixels[i]];
    if (id < 0) {
      throw Error(ErrorCode::kUnknownLabel,
                  "gray value " + std::to_string(img.pixels[i]) + " not in class table");
    }
    mask.labels[i] = static_cast<std::uint8_t>(id);
  }
  mask.validate();
  if (meta) {
    *meta = {};
    if (side.contains("grid")) meta->grid = grid_of(side["grid"]);
    if (side.contains("timestamp")) meta->timestamp = side["timestamp"].get<double>();
    if (side.contains("frame_id")) meta->frame_id = side["frame_id"].get<std::uint32_t>();
  }
  return mask;
}

void save_intensity_image(const fs::path& png, const IntensityImage& image) {
  GrayImage img{image.spec.cols, image.spec.rows, {}};
  img.pixels.resize(image.cells.size());
  for (std::size_t i = 0; i < image.cells.size(); ++i) {
    img.pixels[i] = static_cast<std::uint8_t>(std::lround(std::clamp(image.cells[i], 0.0, 255.0)));
  }
  std::size_t occupied = 0;
  for (auto c : image.counts) occupied += c > 0;
  json side = {{"kind", "intensity_image"},
               {"grid", grid_json(image.spec)},
               {"occupied_cells", occupied},
               {"skipped_points", image.skipped_points}};
  write_file_atomic(png, encode_png(img));
  write_file_atomic(sidecar_path(png), side.dump(2) + "\n");
}

// ---------------------------------------------------------------------------

std::string map_to_geojson(const VectorMap& map) {
  json features = json::array();
  for (const auto& e : map.elements) {
    json coords = json::array();
    for (const auto& v : e.vertices) coords.push_back({v.x, v.y});
    json geometry;
    if (e.kind == GeometryKind::kPolygon) {
      if (!e.vertices.empty()) coords.push_back({e.vertices.front().x, e.vertices.front().y});
      geometry = {{"type", "Polygon"}, {"coordinates", json::array({coords})}};
    } else {
      geometry = {{"type", "LineString"}, {"coordinates", coords}};
    }
    features.push_back({{"type", "Feature"},
                        {"geometry", geometry},
                        {"properties",
                         {{"class", std::string(class_name(e.element))},
                          {"support_count", e.support_count},
                          {"confidence", e.confidence}}}});
  }
  json doc = {{"type", "FeatureCollection"}, {"crs_note", map.crs_note}, {"features", features}};
  return doc.dump(1) + "\n";
}

VectorMap map_from_geojson(const std::string& text) {
  const json doc = parse_json(text, "GeoJSON");
  if (required<std::string>(doc, "type") != "FeatureCollection") {
    throw Error(ErrorCode::kIoError, "expected a FeatureCollection");
  }
  VectorMap map;
  if (doc.contains("crs_note")) map.crs_note = doc["crs_note"].get<std::string>();
  for (const auto& f : required<json>(doc, "features")) {
    const json& geom = required<json>(f, "geometry");
    const json& props = required<json>(f, "properties");
    MapElement e;
    e.element = class_from_name(required<std::string>(props, "class"));
    if (props.contains("support_count")) e.support_count = props["support_count"].get<std::size_t>();
    if (props.contains("confidence")) e.confidence = props["confidence"].get<double>();
    const auto type = required<std::string>(geom, "type");
    const auto read_ring = [](const json& arr) {
      std::vector<Vec2> out;
      for (const auto& c : arr) out.push_back({c.at(0).get<double>(), c.at(1).get<double>()});
      return out;
    };
    if (type == "LineString") {
      e.kind = GeometryKind::kPolyline;
      e.vertices = read_ring(required<json>(geom, "coordinates"));
    } else if (type == "Polygon") {
      e.kind = GeometryKind::kPolygon;
      const json& rings = required<json>(geom, "coordinates");
      if (rings.empty()) throw Error(ErrorCode::kIoError, "polygon without rings");
      e.vertices = read_ring(rings.at(0));
      if (e.vertices.size() > 1 && e.vertices.front() == e.vertices.back()) e.vertices.pop_back();
    } else {
      throw Error(ErrorCode::kIoError, "unsupported geometry type " + type);
    }
    map.elements.push_back(std::move(e));
  }
  map.validate();
  return map;
}

void save_map(const fs::path& path, const VectorMap& map) {
  write_file_atomic(path, map_to_geojson(map));
}

VectorMap load_map(const fs::path& path) { return map_from_geojson(read_file(path)); }

std::string map_to_svg(const VectorMap& map, double pixels_per_metre) {
  double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  bool first = true;
  for (const auto& e : map.elements) {
    for (const auto& v : e.vertices) {
      if (first) {
        x0 = x1 = v.x;
        y0 = y1 = v.y;
        first = false;
      }
      x0 = std::min(x0, v.x);
      x1 = std::max(x1, v.x);
      y0 = std::min(y0, v.y);
      y1 = std::max(y1, v.y);
    }
  }
  const double pad = 2.0;
  x0 -= pad;
  y0 -= pad;
  x1 += pad;
  y1 += pad;
  const double w = (x1 - x0) * pixels_per_metre, h = (y1 - y0) * pixels_per_metre;
  // Map y grows upwards, SVG y downwards.
  const auto px = [&](Vec2 v) {
    std::ostringstream s;
    s << (v.x - x0) * pixels_per_metre << ',' << (y1 - v.y) * pixels_per_metre;
    return s.str();
  };
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
      << "\" viewBox=\"0 0 " << w << ' ' << h << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"#202020\"/>\n";
  for (const auto& e : map.elements) {
    std::string points;
    for (const auto& v : e.vertices) points += px(v) + ' ';
    if (e.kind == GeometryKind::kPolygon) {
      svg << "<polygon points=\"" << points
          << "\" fill=\"#3060ff\" fill-opacity=\"0.5\" stroke=\"#3060ff\"/>\n";
    } else {
      const char* color = e.element == ElementClass::kStopLine ? "#ffd000" : "#30c030";
      svg << "<polyline points=\"" << points << "\" fill=\"none\" stroke=\"" << color
          << "\" stroke-width=\"" << 0.3 * pixels_per_metre << "\"/>\n";
    }
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace rsmap::io
