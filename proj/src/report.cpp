#include "suq/report.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

namespace suq {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

[[noreturn]] void fail(ErrorKind kind, const std::string& msg) { throw Error(kind, msg); }

const std::vector<std::string> kMetricsHeader = {
    "method", "subject_id", "status", "ece", "ece_pooled", "signed_gap", "u_e", "bnf", "dice",
    "dice_pooled", "best_tau_ue", "best_tau_bnf", "calibration_class", "dice_degenerate",
    "ue_degenerate", "mask_applied", "reason"};

std::string num(double v) { return fmt::format("{}", v); }

std::string opt(const std::optional<double>& v) { return v ? num(*v) : std::string(); }

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

void write_row(std::ostream& out, const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out << ',';
    out << csv_field(fields[i]);
  }
  out << '\n';
}

// Reads one record; quoted fields may contain separators and doubled quotes.
bool read_record(std::istream& in, std::vector<std::string>& fields) {
  fields.clear();
  std::string field;
  bool quoted = false;
  bool any = false;
  for (int ch = in.get(); ch != EOF; ch = in.get()) {
    any = true;
    const char c = static_cast<char>(ch);
    if (quoted) {
      if (c == '"') {
        if (in.peek() == '"') {
          field += '"';
          in.get();
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else if (c == '\n') {
      fields.push_back(std::move(field));
      return true;
    } else if (c != '\r') {
      field += c;
    }
  }
  if (!any) return false;
  fields.push_back(std::move(field));
  return true;
}

std::optional<double> parse_opt(const std::string& s) {
  if (s.empty()) return std::nullopt;
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size()) fail(ErrorKind::invalid_argument, "bad number '" + s + "' in metrics CSV");
  return v;
}

std::string path_component(const std::string& name) {
  std::string out = name;
  for (char& c : out) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '+' || c == '.')) c = '_';
  }
  if (out.empty() || out == "." || out == "..") out = "_" + out;
  return out;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::io, "cannot write " + path.string());
  out << content;
  if (!out) fail(ErrorKind::io, "write failure on " + path.string());
}

const char* direction_arrow(Direction d) { return d == Direction::lower_is_better ? "down" : "up"; }

json method_summary_json(const MethodSummary& m) {
  json j;
  j["method"] = m.method;
  j["kind"] = to_string(m.kind);
  j["evaluated"] = m.evaluated;
  j["failed"] = m.failed;
  if (m.pooled) {
    j["pooled_ece"] = m.pooled->ece;
    j["pooled_signed_gap"] = m.pooled->signed_gap;
    j["mean_subject_ece"] = m.mean_subject_ece;
    j["mean_dice"] = m.mean_dice;
    j["pooled_dice"] = m.pooled_dice.value;
    j["mask_applied"] = m.pooled->mask_applied;
    const SweepRow& ue = m.sweep->rows[m.sweep->best_overlap_index];
    const SweepRow& bn = m.sweep->rows[m.sweep->best_bnf_index];
    j["best_tau_ue"] = ue.tau;
    j["u_e"] = ue.mean_overlap;
    j["best_tau_bnf"] = bn.tau;
    j["bnf"] = bn.bnf;
    j["calibration_classes"] = {{"underconfident", m.underconfident},
                                {"overconfident", m.overconfident},
                                {"well_calibrated", m.well_calibrated}};
  }
  return j;
}

}  // namespace

std::vector<int> dense_ranks(std::span<const double> means, Direction direction) {
  std::vector<long long> keys;
  keys.reserve(means.size());
  for (double m : means) keys.push_back(std::llround(m * 1000.0));
  std::vector<long long> distinct = keys;
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (direction == Direction::higher_is_better) std::reverse(distinct.begin(), distinct.end());

  std::vector<int> ranks;
  ranks.reserve(keys.size());
  for (long long k : keys) {
    const auto pos = std::find(distinct.begin(), distinct.end(), k) - distinct.begin();
    ranks.push_back(static_cast<int>(pos) + 1);
  }
  return ranks;
}

RankTable rank_methods(std::span<const MetricsRow> rows, const std::string& dataset) {
  struct Column {
    const char* name;
    Direction direction;
    std::optional<double> MetricsRow::*field;
    double scale;
  };
  const Column columns[] = {{"ECE%", Direction::lower_is_better, &MetricsRow::ece, 100.0},
                            {"U-E", Direction::higher_is_better, &MetricsRow::u_e, 1.0},
                            {"BnF", Direction::higher_is_better, &MetricsRow::bnf, 1.0},
                            {"Dice", Direction::higher_is_better, &MetricsRow::dice, 1.0}};

  RankTable table;
  table.dataset = dataset;
  for (const Column& col : columns) {
    RankColumn rc;
    rc.metric = col.name;
    rc.direction = col.direction;
    std::vector<double> means;
    for (const MetricsRow& r : rows) {
      if (r.subject_id != kDatasetRowId || !r.ok || !(r.*col.field)) continue;
      rc.entries.push_back({r.method, *(r.*col.field) * col.scale, 0});
      means.push_back(rc.entries.back().mean);
    }
    const std::vector<int> ranks = dense_ranks(means, col.direction);
    for (std::size_t i = 0; i < ranks.size(); ++i) rc.entries[i].rank = ranks[i];
    table.columns.push_back(std::move(rc));
  }
  return table;
}

std::string format_rank_table(const RankTable& table) {
  std::vector<std::string> methods;
  for (const auto& col : table.columns)
    for (const auto& e : col.entries)
      if (std::find(methods.begin(), methods.end(), e.method) == methods.end()) methods.push_back(e.method);

  std::size_t width = 6;
  for (const auto& m : methods) width = std::max(width, m.size());

  std::string out;
  if (!table.dataset.empty()) out += table.dataset + "\n";
  out += fmt::format("{:<{}}", "method", width);
  for (const auto& col : table.columns)
    out += fmt::format("  {:>14}", col.metric + (col.direction == Direction::lower_is_better ? " (lo)" : " (hi)"));
  out += "\n";
  for (const auto& m : methods) {
    out += fmt::format("{:<{}}", m, width);
    for (const auto& col : table.columns) {
      auto it = std::find_if(col.entries.begin(), col.entries.end(), [&](const RankEntry& e) { return e.method == m; });
      out += it == col.entries.end() ? fmt::format("  {:>14}", "-")
                                     : fmt::format("  {:>14}", fmt::format("{:.3f} ({})", it->mean, it->rank));
    }
    out += "\n";
  }
  return out;
}

void write_metrics_csv(std::span<const MetricsRow> rows, std::ostream& out) {
  write_row(out, kMetricsHeader);
  for (const MetricsRow& r : rows) {
    write_row(out, {r.method, r.subject_id, r.ok ? "ok" : "skipped", opt(r.ece), opt(r.ece_pooled),
                    opt(r.signed_gap), opt(r.u_e), opt(r.bnf), opt(r.dice), opt(r.dice_pooled),
                    opt(r.best_tau_ue), opt(r.best_tau_bnf), r.calibration_class,
                    r.dice_degenerate ? "1" : "0", r.ue_degenerate ? "1" : "0", r.mask_applied ? "1" : "0",
                    r.reason});
  }
}

std::vector<MetricsRow> read_metrics_csv(std::istream& in) {
  std::vector<std::string> fields;
  if (!read_record(in, fields) || fields != kMetricsHeader)
    fail(ErrorKind::invalid_argument, "metrics CSV has an unexpected header");
  std::vector<MetricsRow> rows;
  while (read_record(in, fields)) {
    if (fields.size() == 1 && fields[0].empty()) continue;
    if (fields.size() != kMetricsHeader.size())
      fail(ErrorKind::invalid_argument, "metrics CSV row with " + std::to_string(fields.size()) + " fields");
    MetricsRow r;
    r.method = fields[0];
    r.subject_id = fields[1];
    r.ok = fields[2] == "ok";
    r.ece = parse_opt(fields[3]);
    r.ece_pooled = parse_opt(fields[4]);
    r.signed_gap = parse_opt(fields[5]);
    r.u_e = parse_opt(fields[6]);
    r.bnf = parse_opt(fields[7]);
    r.dice = parse_opt(fields[8]);
    r.dice_pooled = parse_opt(fields[9]);
    r.best_tau_ue = parse_opt(fields[10]);
    r.best_tau_bnf = parse_opt(fields[11]);
    r.calibration_class = fields[12];
    r.dice_degenerate = fields[13] == "1";
    r.ue_degenerate = fields[14] == "1";
    r.mask_applied = fields[15] == "1";
    r.reason = fields[16];
    rows.push_back(std::move(r));
  }
  return rows;
}

void write_rank_csv(const RankTable& table, std::ostream& out) {
  write_row(out, {"metric", "direction", "method", "mean", "rank"});
  for (const auto& col : table.columns) {
    for (const auto& e : col.entries)
      write_row(out, {col.metric, direction_arrow(col.direction), e.method, num(e.mean), std::to_string(e.rank)});
  }
}

void write_diagram_csv(const ReliabilityBins& bins, std::ostream& out) {
  write_row(out, {"bin_lower", "bin_upper", "count", "mean_confidence", "accuracy"});
  for (const DiagramRow& r : reliability_diagram(bins)) {
    write_row(out, {num(r.bin_lower), num(r.bin_upper), std::to_string(r.count), num(r.mean_confidence),
                    num(r.accuracy)});
  }
}

void emit_reports(const EvaluationResult& result, const fs::path& out_dir) {
  if (result.methods.empty()) fail(ErrorKind::invalid_argument, "no methods were evaluated, nothing to report");

  fs::create_directories(out_dir / "diagrams");

  std::ostringstream metrics;
  write_metrics_csv(result.rows, metrics);
  write_file(out_dir / "metrics.csv", metrics.str());

  std::ostringstream ranks;
  write_rank_csv(rank_methods(result.rows, result.dataset_name), ranks);
  write_file(out_dir / "ranks.csv", ranks.str());

  std::ostringstream sweep;
  write_row(sweep, {"method", "tau", "mean_u_e", "u_e_subjects", "bnf"});
  for (const auto& m : result.methods) {
    if (!m.sweep) continue;
    for (const auto& row : m.sweep->rows)
      write_row(sweep, {m.method, num(row.tau), num(row.mean_overlap), std::to_string(row.overlap_subjects), num(row.bnf)});
  }
  write_file(out_dir / "sweep.csv", sweep.str());

  for (const auto& m : result.methods) {
    const fs::path dir = out_dir / "diagrams" / path_component(m.method);
    fs::create_directories(dir);
    if (m.pooled) {
      std::ostringstream d;
      write_diagram_csv(m.pooled->bins, d);
      write_file(dir / "dataset.csv", d.str());
    }
    if (m.evaluated > 0) fs::create_directories(dir / "subjects");
    for (const auto& s : m.subjects) {
      if (!s.ok) continue;
      std::ostringstream d;
      write_diagram_csv(s.calibration.bins, d);
      write_file(dir / "subjects" / (path_component(s.subject_id) + ".csv"), d.str());
    }
  }

  json summary;
  summary["dataset_name"] = result.dataset_name;
  summary["config"] = {{"bins", result.options.n_bins},
                       {"tau_grid", result.options.tau_grid},
                       {"epsilon", result.options.epsilon},
                       {"mask", result.options.use_mask},
                       {"confidence", "foreground probability"},
                       {"ece_table_value", "mean of subject-level ECE"}};
  summary["methods"] = json::array();
  for (const auto& m : result.methods) summary["methods"].push_back(method_summary_json(m));
  summary["failures"] = result.failures;
  write_file(out_dir / "summary.json", summary.dump(2) + "\n");
}

}  // namespace suq
