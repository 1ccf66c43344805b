#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "json.hpp"

namespace dawa {

std::string sha256_hex(std::string_view bytes);
std::string file_sha256(const std::filesystem::path& path);

// Run record written next to every output: command, parameters, seeds and
// SHA-256 digests of the input files.
class Manifest {
 public:
  explicit Manifest(std::string command);

  Manifest& param(const std::string& key, nlohmann::json value);
  Manifest& input(const std::string& role, const std::filesystem::path& path);
  Manifest& output(const std::string& role, const std::filesystem::path& path);

  const nlohmann::json& json() const { return doc_; }
  void write(const std::filesystem::path& path) const;

 private:
  nlohmann::json doc_;
};

}  // namespace dawa
