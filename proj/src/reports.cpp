#include <cmath>
#include <cstdio>
#include <sstream>

#include <json.hpp>

#include "protofg3d/pipeline.hpp"

namespace protofg3d {

std::string eval_report_text(const EvalReport& report) {
  std::ostringstream os;
  char buf[128];
  std::snprintf(buf, sizeof buf, "AIA %.4f  ACA %.4f  per-view AIA %.4f\n", report.aia, report.aca,
                report.per_view_aia);
  os << buf << "class  count  correct  accuracy\n";
  for (Eigen::Index c = 0; c < report.confusion.rows(); ++c) {
    const int count = report.confusion.row(c).sum();
    if (count == 0) {
      std::snprintf(buf, sizeof buf, "%5ld  %5d  %7d  %8s\n", long(c), 0, 0, "n/a");
    } else {
      std::snprintf(buf, sizeof buf, "%5ld  %5d  %7d  %8.4f\n", long(c), count, report.confusion(c, c),
                    report.per_class_accuracy(c));
    }
    os << buf;
  }
  if (!report.excluded_classes.empty()) {
    os << "excluded from ACA (no test shapes):";
    for (int c : report.excluded_classes) os << ' ' << c;
    os << '\n';
  }
  return os.str();
}

std::string eval_report_json(const EvalReport& report) {
  nlohmann::json j;
  j["aia"] = report.aia;
  j["aca"] = report.aca;
  j["per_view_aia"] = report.per_view_aia;
  nlohmann::json per_class = nlohmann::json::array();
  for (Eigen::Index c = 0; c < report.per_class_accuracy.size(); ++c) {
    const double a = report.per_class_accuracy(c);
    per_class.push_back(std::isnan(a) ? nlohmann::json(nullptr) : nlohmann::json(a));
  }
  j["per_class_accuracy"] = per_class;
  nlohmann::json confusion = nlohmann::json::array();
  for (Eigen::Index r = 0; r < report.confusion.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < report.confusion.cols(); ++c) row.push_back(report.confusion(r, c));
    confusion.push_back(row);
  }
  j["confusion"] = confusion;
  j["excluded_classes"] = report.excluded_classes;
  return j.dump(2);
}

std::string inspect_report_json(const InspectReport& report) {
  nlohmann::json shapes = nlohmann::json::array();
  for (const ShapeInspection& s : report.shapes) {
    nlohmann::json protos = nlohmann::json::array();
    for (const PrototypeHit& h : s.top_prototypes)
      protos.push_back({{"class", h.cls}, {"k", h.k}, {"similarity", h.similarity}, {"exemplar", h.exemplar}});
    nlohmann::json views = nlohmann::json::array();
    for (const ViewHit& v : s.top_views)
      views.push_back({{"view", v.view}, {"k", v.k}, {"similarity", v.similarity}});
    shapes.push_back({{"shape_id", s.shape_id},
                      {"label", s.label},
                      {"predicted", s.predicted},
                      {"top_prototypes", protos},
                      {"top_views", views}});
  }
  return nlohmann::json{{"shapes", shapes}}.dump(2);
}

}  // namespace protofg3d
