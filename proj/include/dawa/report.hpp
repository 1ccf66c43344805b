#pragma once

// Merges evaluation CSVs into a comparison table: one row per defense, one
// column per attack, plus the overestimation gap between the conventional
// AutoAttack proxy and the multi-target dual-label attack.

#include <string>
#include <vector>

namespace dawa {

struct ReportRow {
  std::string defense;
  std::string attack;
  std::size_t examples = 0;
  std::size_t clean_correct = 0;
  double clean_accuracy = 0.0;
  double robust_accuracy = 0.0;
  double mean_iterations_to_success = 0.0;
  double dummy_capture_rate = 0.0;
  std::string dataset_digest;
  std::string seed;
  std::string config_digest;
};

std::vector<ReportRow> parse_report_csv(const std::string& text);

struct ComparisonTable {
  std::vector<std::string> columns;  // "defense", "clean", attacks..., optionally "delta"
  struct Row {
    std::string defense;
    std::vector<double> values;  // percentages, aligned with columns[1..]
  };
  std::vector<Row> rows;
};

// Rows of the same defense must come from the same example set.
ComparisonTable compare_table(const std::vector<ReportRow>& rows);

// Full precision.
std::string table_to_csv(const ComparisonTable& table);
// Two decimals, aligned, with the full-scale reference row as an annotation.
std::string table_to_text(const ComparisonTable& table);

struct ReferenceRow {
  const char* defense;
  double clean, pgd, cw, mifpe, dawa, autoattack, dawa_mt, delta;
};
// Full-scale reference figures (ResNet-18, CIFAR-10, eps = 8/255), percent.
inline constexpr ReferenceRow kFullScaleReference{"PGD-AT+DUCAT (ResNet-18, CIFAR-10)", 88.81, 62.71, 73.03, 65.14,
                                                  32.01, 58.61, 29.52, 29.09};

}  // namespace dawa
