#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "dawa/dummynet.hpp"

namespace dawa {

static_assert(std::endian::native == std::endian::little, "model files are little-endian; add byte swapping");

namespace {

template <typename T>
void put(std::string& out, T value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  template <typename T>
  T get(const char* what) {
    if (bytes_.size() - pos_ < sizeof(T))
      throw ParseError(std::string("model file truncated while reading ") + what, pos_);
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  double get_finite(const char* what) {
    const std::size_t at = pos_;
    const double v = get<double>(what);
    if (!std::isfinite(v)) throw ParseError(std::string("non-finite value in ") + what, at);
    return v;
  }

  std::size_t pos() const { return pos_; }
  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_model(const Model& model) {
  if (!model.all_finite()) throw ArgumentError("save_model: model has non-finite parameters");
  std::string out(kModelMagic, sizeof(kModelMagic));
  put<std::uint32_t>(out, kModelVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(model.num_classes()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(model.layer_dims().size()));
  for (Index d : model.layer_dims()) put<std::uint32_t>(out, static_cast<std::uint32_t>(d));
  for (std::size_t l = 0; l < model.depth(); ++l) {
    const Mat& w = model.weight(l);  // row-major storage
    out.append(reinterpret_cast<const char*>(w.data()), sizeof(double) * static_cast<std::size_t>(w.size()));
    const Vec& b = model.bias(l);
    out.append(reinterpret_cast<const char*>(b.data()), sizeof(double) * static_cast<std::size_t>(b.size()));
  }
  return out;
}

Model deserialize_model(const std::string& bytes) {
  Reader r(bytes);
  if (bytes.size() < sizeof(kModelMagic) || std::memcmp(bytes.data(), kModelMagic, sizeof(kModelMagic)) != 0)
    throw ParseError("bad magic, not a model file", 0);
  for (std::size_t i = 0; i < sizeof(kModelMagic); ++i) r.get<char>("magic");

  const std::size_t version_at = r.pos();
  const auto version = r.get<std::uint32_t>("version");
  if (version != kModelVersion)
    throw ParseError("unsupported model version " + std::to_string(version), version_at);

  const std::size_t k_at = r.pos();
  const auto k = r.get<std::uint32_t>("class count");
  const std::size_t n_at = r.pos();
  const auto n = r.get<std::uint32_t>("layer count");
  if (n < 2 || n > 64) throw ParseError("layer count " + std::to_string(n) + " out of range", n_at);
  std::vector<Index> dims;
  for (std::uint32_t i = 0; i < n; ++i) {
    const std::size_t at = r.pos();
    const auto d = r.get<std::uint32_t>("layer dims");
    if (d == 0 || d > (1u << 20)) throw ParseError("layer dim out of range", at);
    dims.push_back(d);
  }
  if (k == 0 || dims.back() != 2 * static_cast<Index>(k))
    throw ParseError("output dim " + std::to_string(dims.back()) + " does not equal 2*K for K=" + std::to_string(k),
                     k_at);

  Model model(dims, k);
  for (std::size_t l = 0; l < model.depth(); ++l) {
    Mat& w = model.weight(l);
    for (Index i = 0; i < w.size(); ++i) w.data()[i] = r.get_finite("weights");
    Vec& b = model.bias(l);
    for (Index i = 0; i < b.size(); ++i) b(i) = r.get_finite("biases");
  }
  if (!r.at_end()) throw ParseError("trailing bytes after parameters", r.pos());
  return model;
}

void save_model(const Model& model, const std::filesystem::path& path) {
  const std::string bytes = serialize_model(model);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

Model load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open model file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize_model(ss.str());
}

}  // namespace dawa
