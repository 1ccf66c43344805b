#include "dawa/manifest.hpp"

#include <openssl/evp.h>

#include <array>
#include <fstream>
#include <memory>
#include <sstream>
#include <stdexcept>

namespace dawa {

std::string sha256_hex(std::string_view bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md.data(), &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("sha256 failed");
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 0xf];
  }
  return out;
}

std::string file_sha256(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return sha256_hex(ss.str());
}

Manifest::Manifest(std::string command) {
  doc_["tool"] = "dawa";
  doc_["manifest_version"] = 1;
  doc_["command"] = std::move(command);
  doc_["params"] = nlohmann::json::object();
  doc_["inputs"] = nlohmann::json::object();
  doc_["outputs"] = nlohmann::json::array();
}

Manifest& Manifest::param(const std::string& key, nlohmann::json value) {
  doc_["params"][key] = std::move(value);
  return *this;
}

Manifest& Manifest::input(const std::string& role, const std::filesystem::path& path) {
  doc_["inputs"][role] = {{"path", path.string()}, {"sha256", file_sha256(path)}};
  return *this;
}

Manifest& Manifest::output(const std::string& role, const std::filesystem::path& path) {
  doc_["outputs"].push_back({{"role", role}, {"path", path.string()}});
  return *this;
}

void Manifest::write(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << doc_.dump(2) << '\n';
}

}  // namespace dawa
