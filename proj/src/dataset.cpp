#include "dawa/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <limits>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string_view>

#include "dawa/rng.hpp"

namespace dawa {

void Dataset::validate(double lo, double hi) const {
  if (dim <= 0) throw ArgumentError("dataset: dim must be positive");
  if (num_classes <= 0) throw ArgumentError("dataset: class count must be positive");
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& ex = rows[r];
    if (ex.x.size() != dim) throw DimensionError("dataset row " + std::to_string(r) + ": wrong feature count");
    if (ex.y < 0 || ex.y >= num_classes) throw ArgumentError("dataset row " + std::to_string(r) + ": label out of range");
    if (!numkit::all_finite(ex.x) || (ex.x.array() < lo).any() || (ex.x.array() > hi).any())
      throw ArgumentError("dataset row " + std::to_string(r) + ": feature outside [" + format_double(lo) + ", " +
                          format_double(hi) + "]");
  }
}

DatasetKind parse_dataset_kind(const std::string& name) {
  if (name == "blobs") return DatasetKind::Blobs;
  if (name == "rings") return DatasetKind::Rings;
  throw ArgumentError("kind: expected blobs or rings, got '" + name + "'");
}

Dataset gen_dataset(const GenSpec& spec) {
  if (spec.num_classes < 2) throw ArgumentError("classes: need K >= 2");
  if (spec.dim < 2) throw ArgumentError("dim: need d >= 2");
  if (spec.per_class < 1) throw ArgumentError("per-class: need n >= 1");
  if (!(spec.spread >= 0)) throw ArgumentError("spread: must be >= 0");

  Rng rng{spec.seed, 0x44415441u};
  const Index k = spec.num_classes, d = spec.dim;
  Dataset out;
  out.dim = d;
  out.num_classes = k;

  Mat centers(k, d);
  if (spec.kind == DatasetKind::Blobs)
    for (Index c = 0; c < k; ++c)
      for (Index j = 0; j < d; ++j) centers(c, j) = rng.uniform01();

  for (Index i = 0; i < spec.per_class; ++i) {
    for (Index c = 0; c < k; ++c) {
      Vec x(d);
      if (spec.kind == DatasetKind::Blobs) {
        for (Index j = 0; j < d; ++j) x(j) = centers(c, j) + spec.spread * rng.normal();
      } else {
        Vec dir(d);
        for (Index j = 0; j < d; ++j) dir(j) = rng.normal();
        const double n = dir.norm();
        if (n > 0) dir /= n;
        x = (static_cast<double>(c + 1) + spec.spread * rng.normal()) * dir;
      }
      out.rows.push_back({std::move(x), c});
    }
  }

  Vec lo = Vec::Constant(d, std::numeric_limits<double>::infinity());
  Vec hi = -lo;
  for (const auto& ex : out.rows) {
    lo = lo.cwiseMin(ex.x);
    hi = hi.cwiseMax(ex.x);
  }
  for (auto& ex : out.rows)
    for (Index j = 0; j < d; ++j) {
      const double range = hi(j) - lo(j);
      ex.x(j) = range > 0 ? std::clamp((ex.x(j) - lo(j)) / range, 0.0, 1.0) : 0.5;
    }
  return out;
}

std::pair<Dataset, Dataset> split_per_class(const Dataset& data, Index first_per_class) {
  std::pair<Dataset, Dataset> out;
  for (Dataset* d : {&out.first, &out.second}) {
    d->dim = data.dim;
    d->num_classes = data.num_classes;
  }
  std::vector<Index> seen(static_cast<std::size_t>(data.num_classes), 0);
  for (const auto& ex : data.rows) {
    auto& n = seen.at(static_cast<std::size_t>(ex.y));
    (n++ < first_per_class ? out.first : out.second).rows.push_back(ex);
  }
  return out;
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string dataset_to_csv(const Dataset& data) {
  std::string out = "# dawa-dataset v1 dim=" + std::to_string(data.dim) + " classes=" +
                    std::to_string(data.num_classes) + " rows=" + std::to_string(data.rows.size()) + "\n";
  out += "label";
  for (Index j = 0; j < data.dim; ++j) out += ",x" + std::to_string(j);
  out += "\n";
  for (const auto& ex : data.rows) {
    out += std::to_string(ex.y);
    for (Index j = 0; j < ex.x.size(); ++j) {
      out += ',';
      out += format_double(ex.x(j));
    }
    out += '\n';
  }
  return out;
}

namespace {

struct LineCursor {
  std::string_view text;
  std::size_t pos = 0;

  bool next(std::string_view& line, std::size_t& start) {
    if (pos >= text.size()) return false;
    start = pos;
    const std::size_t nl = text.find('\n', pos);
    const std::size_t end = nl == std::string_view::npos ? text.size() : nl;
    line = text.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    pos = nl == std::string_view::npos ? text.size() : nl + 1;
    return true;
  }
};

long long header_field(std::string_view header, std::string_view key, std::size_t offset) {
  const std::string pat = " " + std::string(key) + "=";
  const std::size_t at = header.find(pat);
  if (at == std::string_view::npos) throw ParseError("dataset header lacks " + std::string(key), offset);
  const char* first = header.data() + at + pat.size();
  long long value = 0;
  const auto res = std::from_chars(first, header.data() + header.size(), value);
  if (res.ec != std::errc() || value < 0)
    throw ParseError("dataset header: bad value for " + std::string(key), offset + at + pat.size());
  return value;
}

}  // namespace

Dataset dataset_from_csv(const std::string& text) {
  LineCursor cur{text};
  std::string_view line;
  std::size_t start = 0;
  if (!cur.next(line, start) || !line.starts_with("# dawa-dataset v1"))
    throw ParseError("missing '# dawa-dataset v1' header", 0);
  Dataset out;
  out.dim = header_field(line, "dim", start);
  out.num_classes = header_field(line, "classes", start);
  const auto n_rows = static_cast<std::size_t>(header_field(line, "rows", start));
  if (out.dim <= 0 || out.num_classes <= 0) throw ParseError("dataset header: dim and classes must be positive", start);
  if (!cur.next(line, start) || !line.starts_with("label")) throw ParseError("missing column header", start);

  while (cur.next(line, start)) {
    if (line.empty()) continue;
    LabeledExample ex;
    ex.x.resize(out.dim);
    const char* p = line.data();
    const char* end = line.data() + line.size();
    long long label = 0;
    auto res = std::from_chars(p, end, label);
    if (res.ec != std::errc()) throw ParseError("bad label", start);
    if (label < 0 || label >= out.num_classes) throw ParseError("label out of range", start);
    ex.y = label;
    p = res.ptr;
    for (Index j = 0; j < out.dim; ++j) {
      if (p == end || *p != ',') throw ParseError("row has fewer than " + std::to_string(out.dim) + " features",
                                                  start + static_cast<std::size_t>(p - line.data()));
      ++p;
      double v = 0;
      res = std::from_chars(p, end, v);
      if (res.ec != std::errc() || !std::isfinite(v))
        throw ParseError("bad feature value", start + static_cast<std::size_t>(p - line.data()));
      ex.x(j) = v;
      p = res.ptr;
    }
    if (p != end) throw ParseError("row has extra fields", start + static_cast<std::size_t>(p - line.data()));
    out.rows.push_back(std::move(ex));
  }
  if (out.rows.size() != n_rows)
    throw ParseError("header says " + std::to_string(n_rows) + " rows, found " + std::to_string(out.rows.size()),
                     text.size());
  return out;
}

void save_dataset(const Dataset& data, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << dataset_to_csv(data);
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open dataset " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return dataset_from_csv(ss.str());
}

}  // namespace dawa
