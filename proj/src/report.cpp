#include "dawa/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "dawa/dataset.hpp"
#include "dawa/errors.hpp"

namespace dawa {

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(line);
  while (std::getline(ss, cur, ',')) out.push_back(cur);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double to_double(const std::string& s, std::size_t offset) {
  double v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw ParseError("bad number '" + s + "'", offset);
  return v;
}

std::size_t to_size(const std::string& s, std::size_t offset) {
  std::size_t v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw ParseError("bad count '" + s + "'", offset);
  return v;
}

constexpr const char* kHeader =
    "defense,attack,examples,clean_correct,clean_accuracy,robust_accuracy,mean_iterations_to_success,"
    "dummy_capture_rate,dataset_digest,seed,config_digest";

}  // namespace

std::vector<ReportRow> parse_report_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t offset = 0;
  if (!std::getline(in, line) || line != kHeader) throw ParseError("not an evaluation report (header mismatch)", 0);
  offset += line.size() + 1;
  std::vector<ReportRow> rows;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      offset += 1;
      continue;
    }
    const auto f = split(line);
    if (f.size() != 11) throw ParseError("report row needs 11 fields, got " + std::to_string(f.size()), offset);
    ReportRow r;
    r.defense = f[0];
    r.attack = f[1];
    r.examples = to_size(f[2], offset);
    r.clean_correct = to_size(f[3], offset);
    r.clean_accuracy = to_double(f[4], offset);
    r.robust_accuracy = to_double(f[5], offset);
    r.mean_iterations_to_success = to_double(f[6], offset);
    r.dummy_capture_rate = to_double(f[7], offset);
    r.dataset_digest = f[8];
    r.seed = f[9];
    r.config_digest = f[10];
    rows.push_back(std::move(r));
    offset += line.size() + 1;
  }
  return rows;
}

ComparisonTable compare_table(const std::vector<ReportRow>& rows) {
  // Attack columns: known attacks in canonical order, then others by first appearance.
  static const std::vector<std::string> canonical{"pgd", "cw", "mifpe", "dawa", "aa-proxy", "dawa-mt"};
  std::vector<std::string> attacks;
  for (const auto& name : canonical)
    if (std::any_of(rows.begin(), rows.end(), [&](const ReportRow& r) { return r.attack == name; }))
      attacks.push_back(name);
  for (const auto& r : rows)
    if (r.attack != "none" && std::find(attacks.begin(), attacks.end(), r.attack) == attacks.end())
      attacks.push_back(r.attack);
  const bool has_delta = std::find(attacks.begin(), attacks.end(), "aa-proxy") != attacks.end() &&
                         std::find(attacks.begin(), attacks.end(), "dawa-mt") != attacks.end();

  ComparisonTable t;
  t.columns = {"defense", "clean"};
  t.columns.insert(t.columns.end(), attacks.begin(), attacks.end());
  if (has_delta) t.columns.push_back("delta");

  std::vector<std::string> defenses;
  std::map<std::string, std::vector<const ReportRow*>> by_defense;
  for (const auto& r : rows) {
    if (!by_defense.count(r.defense)) defenses.push_back(r.defense);
    by_defense[r.defense].push_back(&r);
  }
  for (const auto& d : defenses) {
    const auto& group = by_defense[d];
    const ReportRow& first = *group.front();
    for (const ReportRow* r : group)
      if (r->dataset_digest != first.dataset_digest || r->examples != first.examples ||
          r->clean_correct != first.clean_correct)
        throw ArgumentError("defense '" + d + "': reports were computed on different example sets");
    ComparisonTable::Row row{d, {100.0 * first.clean_accuracy}};
    std::map<std::string, double> robust;
    for (const ReportRow* r : group) robust[r->attack] = 100.0 * r->robust_accuracy;
    for (const auto& a : attacks) row.values.push_back(robust.count(a) ? robust[a] : std::nan(""));
    if (has_delta) row.values.push_back(robust.count("aa-proxy") && robust.count("dawa-mt")
                                            ? robust["aa-proxy"] - robust["dawa-mt"]
                                            : std::nan(""));
    t.rows.push_back(std::move(row));
  }
  return t;
}

std::string table_to_csv(const ComparisonTable& t) {
  std::string out;
  for (std::size_t i = 0; i < t.columns.size(); ++i) out += (i ? "," : "") + t.columns[i];
  out += '\n';
  for (const auto& r : t.rows) {
    out += r.defense;
    for (double v : r.values) out += ',' + format_double(v);
    out += '\n';
  }
  return out;
}

std::string table_to_text(const ComparisonTable& t) {
  std::size_t w0 = 7;
  for (const auto& r : t.rows) w0 = std::max(w0, r.defense.size());
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-*s", static_cast<int>(w0), "defense");
  out += buf;
  for (std::size_t i = 1; i < t.columns.size(); ++i) {
    std::snprintf(buf, sizeof buf, "  %9s", t.columns[i].c_str());
    out += buf;
  }
  out += '\n';
  for (const auto& r : t.rows) {
    std::snprintf(buf, sizeof buf, "%-*s", static_cast<int>(w0), r.defense.c_str());
    out += buf;
    for (double v : r.values) {
      std::snprintf(buf, sizeof buf, "  %9.2f", v);
      out += buf;
    }
    out += '\n';
  }
  const auto& ref = kFullScaleReference;
  out += "\n# reference: " + std::string(ref.defense) + "\n";
  std::snprintf(buf, sizeof buf,
                "#   clean %.2f  pgd %.2f  cw %.2f  mifpe %.2f  dawa %.2f  autoattack %.2f  dawa-mt %.2f  delta %.2f\n",
                ref.clean, ref.pgd, ref.cw, ref.mifpe, ref.dawa, ref.autoattack, ref.dawa_mt, ref.delta);
  out += buf;
  return out;
}

}  // namespace dawa
