#include "protofg3d/data.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include "binary_io.hpp"
#include "protofg3d/error.hpp"

namespace protofg3d {

namespace {

constexpr char kDatasetMagic[] = "PFGE";
constexpr std::uint16_t kDatasetVersion = 1;
constexpr int kMaxAnchorAttempts = 10000;

Dataset empty_like(const Dataset& d) {
  Dataset out;
  out.kind = d.kind;
  out.views = d.views;
  out.dim = d.dim;
  out.classes = d.classes;
  return out;
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

std::vector<int> Dataset::class_counts() const {
  std::vector<int> counts(std::max(classes, 0), 0);
  for (const ViewBatch& s : shapes)
    if (s.label >= 0 && s.label < classes) ++counts[s.label];
  return counts;
}

TrainTestSplit split_train_test(const Dataset& dataset) {
  TrainTestSplit out{empty_like(dataset), empty_like(dataset)};
  std::vector<int> seen(dataset.classes, 0);
  for (const ViewBatch& s : dataset.shapes) {
    const int j = seen.at(s.label)++;
    (j % 5 == 4 ? out.test : out.train).shapes.push_back(s);
  }
  return out;
}

void SynthSpec::validate() const {
  require(classes >= 1 && views >= 1 && dim >= 1 && subclusters >= 1, "synthetic settings: counts must be >= 1");
  require(counts.size() == std::size_t(classes), "synthetic settings: need one shape count per class");
  for (int n : counts) require(n >= 1, "synthetic settings: every class needs at least one shape");
  require(noise >= 0 && std::isfinite(noise), "synthetic settings: noise must be nonnegative");
  require(anchors.size() == 0 || (anchors.rows() == Eigen::Index(classes) * subclusters && anchors.cols() == dim),
          "synthetic settings: explicit anchors must be (classes*subclusters) x dim");
}

SyntheticData generate_synthetic(const SynthSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const int anchor_count = spec.classes * spec.subclusters;

  SyntheticData out;
  if (spec.anchors.size() > 0) {
    out.anchors = spec.anchors.rowwise().normalized();
  } else {
    out.anchors.resize(anchor_count, spec.dim);
    int attempts = 0;
    for (int a = 0; a < anchor_count;) {
      if (++attempts > kMaxAnchorAttempts)
        throw Error(ErrorCode::InfeasibleSeparation,
                    "could not place " + std::to_string(anchor_count) + " anchors with cosine separation " +
                        std::to_string(spec.min_separation) + " in dimension " + std::to_string(spec.dim));
      Eigen::RowVectorXd cand(spec.dim);
      for (int d = 0; d < spec.dim; ++d) cand(d) = gauss(rng);
      const double norm = cand.norm();
      if (norm < 1e-12) continue;
      cand /= norm;
      bool ok = true;
      for (int b = 0; b < a && ok; ++b) ok = 1.0 - cand.dot(out.anchors.row(b)) >= spec.min_separation;
      if (ok) out.anchors.row(a++) = cand;
    }
  }

  Dataset& ds = out.dataset;
  ds.kind = PayloadKind::Raw;
  ds.views = spec.views;
  ds.dim = spec.dim;
  ds.classes = spec.classes;
  std::uniform_int_distribution<int> pick_sub(0, spec.subclusters - 1);
  for (int c = 0; c < spec.classes; ++c) {
    std::vector<std::pair<int, ViewBatch>> shapes;
    for (int i = 0; i < spec.counts[c]; ++i) {
      const int sub = pick_sub(rng);
      const auto anchor = out.anchors.row(c * spec.subclusters + sub);
      ViewBatch shape;
      shape.label = c;
      shape.views.resize(spec.views, spec.dim);
      for (int v = 0; v < spec.views; ++v)
        for (int d = 0; d < spec.dim; ++d)
          shape.views(v, d) = static_cast<float>(anchor(d) + spec.noise * gauss(rng));
      shapes.emplace_back(sub, std::move(shape));
    }
    std::stable_sort(shapes.begin(), shapes.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    for (auto& [sub, shape] : shapes) {
      shape.shape_id = static_cast<std::uint32_t>(ds.shapes.size());
      out.subcluster.push_back(sub);
      ds.shapes.push_back(std::move(shape));
    }
  }
  out.split = split_train_test(ds);
  return out;
}

// ---------------------------------------------------------------------------
// PFGE v1: "PFGE", u16 version, u8 kind, u32 shapes, u32 V, u32 D, u32 C,
// then per shape u32 id, u32 label, V*D f32 (view-major).

void write_dataset(std::ostream& os, const Dataset& dataset) {
  io::BinaryWriter w(os);
  w.bytes(kDatasetMagic);
  w.u16(kDatasetVersion);
  w.u8(static_cast<std::uint8_t>(dataset.kind));
  w.u32(static_cast<std::uint32_t>(dataset.shapes.size()));
  w.u32(static_cast<std::uint32_t>(dataset.views));
  w.u32(static_cast<std::uint32_t>(dataset.dim));
  w.u32(static_cast<std::uint32_t>(dataset.classes));
  for (const ViewBatch& s : dataset.shapes) {
    require(s.views.rows() == dataset.views && s.views.cols() == dataset.dim,
            "write_dataset: shape " + std::to_string(s.shape_id) + " does not match the header dimensions");
    w.u32(s.shape_id);
    w.u32(static_cast<std::uint32_t>(s.label));
    for (int v = 0; v < dataset.views; ++v)
      for (int d = 0; d < dataset.dim; ++d) w.f32(static_cast<float>(s.views(v, d)));
  }
}

Dataset read_dataset(std::istream& is, const std::string& source) {
  io::BinaryReader r(is, source, ErrorCode::FormatMismatch);
  if (r.bytes(4, "dataset magic") != kDatasetMagic)
    throw Error(ErrorCode::FormatMismatch, source + ": bad dataset magic (expected PFGE)");
  const std::uint16_t version = r.u16("dataset version");
  if (version != kDatasetVersion)
    throw Error(ErrorCode::FormatMismatch,
                source + ": unsupported dataset version: expected 1, found " + std::to_string(version));
  const std::uint8_t kind = r.u8("payload kind");
  if (kind > 1) throw Error(ErrorCode::FormatMismatch, source + ": unknown payload kind " + std::to_string(kind));
  const std::uint32_t count = r.u32("shape count");
  const std::uint32_t V = r.u32("view count");
  const std::uint32_t D = r.u32("dimension");
  const std::uint32_t C = r.u32("class count");
  constexpr std::uint32_t kLimit = 1u << 20;
  if (V == 0 || D == 0 || C == 0 || V > kLimit || D > kLimit || C > kLimit)
    throw Error(ErrorCode::FormatMismatch, source + ": invalid header dimensions");

  Dataset ds;
  ds.kind = static_cast<PayloadKind>(kind);
  ds.views = static_cast<int>(V);
  ds.dim = static_cast<int>(D);
  ds.classes = static_cast<int>(C);
  r.set_truncation_code(ErrorCode::CountMismatch);
  for (std::uint32_t i = 0; i < count; ++i) {
    if (r.at_end())
      throw Error(ErrorCode::CountMismatch, source + ": header claims " + std::to_string(count) +
                                                " shapes, payload has " + std::to_string(i));
    ViewBatch s;
    s.shape_id = r.u32("shape id");
    const std::uint32_t label = r.u32("label");
    if (label >= C)
      throw Error(ErrorCode::FormatMismatch, source + ": shape " + std::to_string(s.shape_id) + " has label " +
                                                 std::to_string(label) + " >= class count " + std::to_string(C));
    s.label = static_cast<int>(label);
    s.views.resize(V, D);
    for (std::uint32_t v = 0; v < V; ++v)
      for (std::uint32_t d = 0; d < D; ++d) s.views(v, d) = r.f32("view values");
    ds.shapes.push_back(std::move(s));
  }
  if (!r.at_end())
    throw Error(ErrorCode::CountMismatch,
                source + ": header claims " + std::to_string(count) + " shapes, payload has trailing data");
  return ds;
}

void write_dataset(const Dataset& dataset, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error(ErrorCode::IoFailure, "cannot open '" + path + "' for writing");
  write_dataset(os, dataset);
  if (!os) throw Error(ErrorCode::IoFailure, "failed writing '" + path + "'");
}

Dataset read_dataset(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorCode::IoFailure, "cannot open '" + path + "'");
  return read_dataset(is, path);
}

void write_csv(const Dataset& dataset, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error(ErrorCode::IoFailure, "cannot open '" + path + "' for writing");
  os << "shape_id,view_id,label";
  for (int d = 0; d < dataset.dim; ++d) os << ",f" << d;
  os << '\n';
  char buf[32];
  for (const ViewBatch& s : dataset.shapes) {
    for (int v = 0; v < s.view_count(); ++v) {
      os << s.shape_id << ',' << v << ',' << s.label;
      for (int d = 0; d < dataset.dim; ++d) {
        std::snprintf(buf, sizeof buf, "%.9g", static_cast<double>(static_cast<float>(s.views(v, d))));
        os << ',' << buf;
      }
      os << '\n';
    }
  }
  if (!os) throw Error(ErrorCode::IoFailure, "failed writing '" + path + "'");
}

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

long parse_integer(const std::string& s, const std::string& path, long line, const char* what) {
  errno = 0;
  char* end = nullptr;
  const long v = std::strtol(s.c_str(), &end, 10);
  if (s.empty() || *end != '\0' || errno != 0 || v < 0)
    throw Error(ErrorCode::ParseError,
                path + ":" + std::to_string(line) + ": invalid " + what + " '" + s + "'");
  return v;
}

double parse_real(const std::string& s, const std::string& path, long line) {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || *end != '\0' || errno == ERANGE || !std::isfinite(v))
    throw Error(ErrorCode::ParseError, path + ":" + std::to_string(line) + ": invalid value '" + s + "'");
  return v;
}

}  // namespace

ImportResult import_csv(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorCode::IoFailure, "cannot open '" + path + "'");

  std::string line;
  long line_no = 1;
  if (!std::getline(is, line)) throw Error(ErrorCode::ParseError, path + ":1: missing header row");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const std::vector<std::string> header = split_fields(line);
  if (header.size() < 4 || header[0] != "shape_id" || header[1] != "view_id" || header[2] != "label")
    throw Error(ErrorCode::ParseError, path + ":1: header must be shape_id,view_id,label,f0..f{D-1}");
  const int D = static_cast<int>(header.size()) - 3;
  for (int d = 0; d < D; ++d)
    if (header[3 + d] != "f" + std::to_string(d))
      throw Error(ErrorCode::ParseError, path + ":1: expected column 'f" + std::to_string(d) + "'");

  struct Pending {
    int label;
    long first_line;
    std::map<long, Eigen::RowVectorXd> views;
  };
  std::map<long, Pending> shapes;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string> f = split_fields(line);
    if (f.size() != header.size())
      throw Error(ErrorCode::ParseError, path + ":" + std::to_string(line_no) + ": expected " +
                                             std::to_string(header.size()) + " fields, found " +
                                             std::to_string(f.size()));
    const long shape_id = parse_integer(f[0], path, line_no, "shape_id");
    const long view_id = parse_integer(f[1], path, line_no, "view_id");
    const long label = parse_integer(f[2], path, line_no, "label");
    if (shape_id > 0xFFFFFFFFL || label > (1L << 20))
      throw Error(ErrorCode::ParseError, path + ":" + std::to_string(line_no) + ": id out of range");
    Eigen::RowVectorXd values(D);
    for (int d = 0; d < D; ++d) values(d) = static_cast<float>(parse_real(f[3 + d], path, line_no));

    auto [it, inserted] = shapes.try_emplace(shape_id, Pending{static_cast<int>(label), line_no, {}});
    if (!inserted && it->second.label != label)
      throw Error(ErrorCode::ParseError, path + ":" + std::to_string(line_no) + ": shape " +
                                             std::to_string(shape_id) + " changes label");
    if (!it->second.views.emplace(view_id, std::move(values)).second)
      throw Error(ErrorCode::ParseError, path + ":" + std::to_string(line_no) + ": duplicate view " +
                                             std::to_string(view_id) + " for shape " + std::to_string(shape_id));
  }
  if (shapes.empty()) throw Error(ErrorCode::ParseError, path + ": no data rows");

  std::size_t V = 0;
  for (const auto& [id, p] : shapes) V = std::max(V, p.views.size());
  ImportResult out;
  Dataset& ds = out.dataset;
  ds.kind = PayloadKind::Embedded;
  ds.views = static_cast<int>(V);
  ds.dim = D;
  int max_label = 0;
  for (auto& [id, p] : shapes) {
    if (p.views.size() != V)
      throw Error(ErrorCode::RaggedViews, path + ": shape " + std::to_string(id) + " has " +
                                              std::to_string(p.views.size()) + " views, expected " +
                                              std::to_string(V));
    ViewBatch s;
    s.shape_id = static_cast<std::uint32_t>(id);
    s.label = p.label;
    s.views.resize(static_cast<Eigen::Index>(V), D);
    Eigen::Index v = 0;
    for (auto& [view_id, row] : p.views) s.views.row(v++) = row;
    max_label = std::max(max_label, p.label);
    ds.shapes.push_back(std::move(s));
  }
  ds.classes = max_label + 1;
  const std::vector<int> counts = ds.class_counts();
  for (int c = 0; c < ds.classes; ++c)
    if (counts[c] == 0) out.warnings.push_back("class " + std::to_string(c) + " has no shapes");
  return out;
}

Dataset load_dataset(const std::string& path) {
  if (ends_with(path, ".csv")) return import_csv(path).dataset;
  return read_dataset(path);
}

}  // namespace protofg3d
