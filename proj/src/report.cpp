#include <cstdio>
#include <json.hpp>
#include <sstream>

#include "rsmap/metrics.hpp"
#include "rsmap/raster.hpp"

namespace rsmap {

namespace {

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

std::string bin_name(const DistanceBin& b) {
  return fixed(b.r_min, 0) + "-" + fixed(b.r_max, 0) + "m";
}

nlohmann::json optional_number(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

}  // namespace

std::string report_to_json(const EvalReport& report) {
  using nlohmann::json;
  json iou = json::object();
  for (const auto& [cls, v] : report.iou) iou[std::string(class_name(cls))] = v;
  json ap = json::object();
  for (const auto& [cls, v] : report.ap) ap[std::string(class_name(cls))] = optional_number(v);
  json instances = json::array();
  for (const auto& c : report.instance_cd) {
    instances.push_back({{"class", std::string(class_name(c.element))},
                         {"pred_index", c.pred_index},
                         {"cd", c.cd},
                         {"true_positive", c.true_positive}});
  }
  json density = json::array();
  for (const auto& row : report.density) {
    density.push_back({{"r_min", row.bin.r_min},
                       {"r_max", row.bin.r_max},
                       {"count", row.count},
                       {"area", row.area},
                       {"density", row.density}});
  }
  json local = json::array();
  for (const auto& l : report.by_distance) {
    json li = json::object();
    for (const auto& [cls, v] : l.iou) li[std::string(class_name(cls))] = v;
    local.push_back({{"r_min", l.bin.r_min},
                     {"r_max", l.bin.r_max},
                     {"iou", li},
                     {"miou", optional_number(l.miou)}});
  }
  json timing = json::array();
  for (const auto& [stage, secs] : report.timing) {
    timing.push_back({{"stage", stage}, {"seconds", secs}});
  }
  const GridSpec& g = report.eval_grid;
  json doc = {{"iou", iou},
              {"miou", optional_number(report.miou)},
              {"ap", ap},
              {"instance_cd", instances},
              {"density", density},
              {"by_distance", local},
              {"timing", timing},
              {"eval_grid",
               {{"x_min", g.x_min},
                {"y_min", g.y_min},
                {"cell_size_x", g.cell_size_x},
                {"cell_size_y", g.cell_size_y},
                {"cols", g.cols},
                {"rows", g.rows}}}};
  return doc.dump(2) + "\n";
}

std::string report_to_text(const EvalReport& report) {
  std::ostringstream out;
  out << "class                 IoU      AP\n";
  for (ElementClass cls : kMapClasses) {
    const auto it = report.iou.find(cls);
    const auto ap = report.ap.find(cls);
    if (it == report.iou.end() && ap == report.ap.end()) continue;
    std::string name(class_name(cls));
    name.resize(20, ' ');
    out << name << "  " << (it != report.iou.end() ? fixed(it->second, 4) : "   -  ") << "  "
        << (ap != report.ap.end() && ap->second ? fixed(*ap->second, 4) : "   -  ") << "\n";
  }
  if (!report.by_distance.empty()) {
    out << "\nlocal mIoU by distance\n";
    for (const auto& l : report.by_distance) {
      out << "  " << bin_name(l.bin) << "  " << (l.miou ? fixed(*l.miou, 4) : "-") << "\n";
    }
  }
  if (!report.density.empty()) {
    out << "\nground density (pts/m^2)\n";
    for (const auto& row : report.density) {
      out << "  " << bin_name(row.bin) << "  " << fixed(row.density, 2) << "\n";
    }
  }
  if (!report.timing.empty()) {
    out << "\ntiming (s)\n";
    for (const auto& [stage, secs] : report.timing) {
      out << "  " << stage << "  " << fixed(secs, 3) << "\n";
    }
  }
  out << "mIoU " << (report.miou ? fixed(*report.miou, 4) : "nan") << "\n";
  return out.str();
}

}  // namespace rsmap
