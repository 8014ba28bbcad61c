#pragma once

// Result tables: one row per (scenario, algorithm, seed) run, plus a small
// CSV reader shared with the plotter.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

namespace edgeorch {

struct ResultRow {
  std::string scenario_id;
  std::string algorithm;
  std::uint64_t seed = 0;
  std::optional<double> total_delay;  // empty when the run failed or the plan is infeasible
  double cpu_used = 0.0;
  double gpu_used = 0.0;
  double mem_used = 0.0;
  std::uint64_t episodes_or_evals = 0;
  double wallclock_ms = 0.0;
};

inline constexpr const char* kResultHeader =
    "scenario_id,algorithm,seed,total_delay,cpu_used,gpu_used,mem_used,episodes_or_evals,wallclock_ms";
inline constexpr const char* kInfeasibleMark = "infeasible";

std::string format_row(const ResultRow& row, bool with_wallclock = true);

// Appends rows and flushes after each one. The header is written when the
// file is new or empty.
class ResultWriter {
 public:
  explicit ResultWriter(const std::filesystem::path& path);
  void append(const ResultRow& row);

 private:
  std::ofstream out_;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> lines;  // 1-based source line of each row

  std::size_t column(const std::string& name) const;  // throws ParseError if absent
};

// Plain comma separation without quoting. Throws ParseError naming the line
// for ragged rows; an empty text has no header and is rejected.
CsvTable parse_csv(const std::string& text);

std::vector<ResultRow> parse_results(const std::string& text);
std::vector<ResultRow> read_results(const std::filesystem::path& path);

// Parses a numeric CSV field; throws ParseError naming the line and column.
double csv_number(const CsvTable& table, std::size_t row, std::size_t column);

}  // namespace edgeorch
