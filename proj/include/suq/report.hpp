#ifndef SUQ_REPORT_HPP
#define SUQ_REPORT_HPP

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "suq/calibration.hpp"
#include "suq/evaluate.hpp"

namespace suq {

enum class Direction { lower_is_better, higher_is_better };

struct RankEntry {
  std::string method;
  double mean = 0.0;
  int rank = 0;
};

struct RankColumn {
  std::string metric;  // "ECE%", "U-E", "BnF", "Dice"
  Direction direction = Direction::higher_is_better;
  std::vector<RankEntry> entries;  // input method order
};

struct RankTable {
  std::string dataset;
  std::vector<RankColumn> columns;
};

/// Dense ranks over means rounded to three decimals; equal rounded means share a rank.
std::vector<int> dense_ranks(std::span<const double> means, Direction direction);

/// Builds the table from dataset ("ALL") rows that completed. ECE enters in percent.
RankTable rank_methods(std::span<const MetricsRow> rows, const std::string& dataset = {});

/// "mean (rank)" table, one line per method.
std::string format_rank_table(const RankTable& table);

void write_metrics_csv(std::span<const MetricsRow> rows, std::ostream& out);
std::vector<MetricsRow> read_metrics_csv(std::istream& in);

void write_rank_csv(const RankTable& table, std::ostream& out);
void write_diagram_csv(const ReliabilityBins& bins, std::ostream& out);

/// Writes metrics.csv, ranks.csv, sweep.csv, diagrams/ and summary.json into
/// `out_dir`. Throws before touching the filesystem when no method was evaluated.
void emit_reports(const EvaluationResult& result, const std::filesystem::path& out_dir);

}  // namespace suq

#endif  // SUQ_REPORT_HPP
