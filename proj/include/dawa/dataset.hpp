#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "dawa/dummynet.hpp"

namespace dawa {

struct LabeledExample {
  Vec x;
  Index y = 0;
};

struct Dataset {
  Index dim = 0;
  Index num_classes = 0;
  std::vector<LabeledExample> rows;

  std::size_t size() const noexcept { return rows.size(); }
  bool empty() const noexcept { return rows.empty(); }
  // Labels in range, dims consistent, features finite and inside [lo, hi].
  void validate(double lo = 0.0, double hi = 1.0) const;
};

enum class DatasetKind { Blobs, Rings };

DatasetKind parse_dataset_kind(const std::string& name);

struct GenSpec {
  DatasetKind kind = DatasetKind::Blobs;
  Index num_classes = 4;
  Index dim = 16;
  Index per_class = 200;
  std::uint64_t seed = 7;
  double spread = 0.35;
};

// Synthetic classification data, min-max scaled per feature into [0, 1].
// Row r has label r mod K, so classes are balanced and interleaved.
//   blobs: one Gaussian cloud (std = spread) around a uniform random center per class
//   rings: class k on the sphere of radius k+1 around the origin, radial noise = spread
Dataset gen_dataset(const GenSpec& spec);

// First `first_per_class` rows of every class go to the first set, the rest to the second.
std::pair<Dataset, Dataset> split_per_class(const Dataset& data, Index first_per_class);

// CSV layout: a "# dawa-dataset v1 dim=<d> classes=<K> rows=<n>" line, a column
// header "label,x0,...", then one row per example. Values use shortest
// round-trip formatting, so write -> read is exact.
std::string dataset_to_csv(const Dataset& data);
Dataset dataset_from_csv(const std::string& text);
void save_dataset(const Dataset& data, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

// Shortest decimal string that parses back to exactly `v`.
std::string format_double(double v);

}  // namespace dawa
