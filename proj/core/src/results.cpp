#include "edgeorch/results.hpp"

#include <cstdio>
#include <cstdlib>
#include <sstream>

#include "edgeorch/errors.hpp"
#include "edgeorch/scenario_io.hpp"

namespace edgeorch {

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(line.substr(start, comma - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

std::uint64_t csv_count(const CsvTable& t, std::size_t row, std::size_t col) {
  const auto& s = t.rows[row][col];
  char* end = nullptr;
  const unsigned long long v = std::strtoull(s.c_str(), &end, 10);
  if (s.empty() || *end != '\0' || s[0] == '-')
    throw ParseError("line " + std::to_string(t.lines[row]) + ": column '" + t.header[col] + "' is not a count");
  return v;
}

}  // namespace

std::string format_row(const ResultRow& r, bool with_wallclock) {
  std::string s = r.scenario_id + "," + r.algorithm + "," + std::to_string(r.seed) + "," +
                  (r.total_delay ? num(*r.total_delay) : std::string(kInfeasibleMark)) + "," + num(r.cpu_used) + "," +
                  num(r.gpu_used) + "," + num(r.mem_used) + "," + std::to_string(r.episodes_or_evals) + ",";
  if (with_wallclock) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", r.wallclock_ms);
    s += buf;
  }
  return s;
}

ResultWriter::ResultWriter(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const bool fresh = !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
  out_.open(path, std::ios::app);
  if (!out_) throw ConfigError("cannot open " + path.string());
  if (fresh) out_ << kResultHeader << '\n' << std::flush;
}

void ResultWriter::append(const ResultRow& row) {
  if (row.scenario_id.find(',') != std::string::npos || row.algorithm.find(',') != std::string::npos)
    throw ContractViolation("result labels must not contain commas");
  out_ << format_row(row) << '\n' << std::flush;
}

std::size_t CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  throw ParseError("line 1: missing column '" + name + "'");
}

CsvTable parse_csv(const std::string& text) {
  CsvTable t;
  std::istringstream is(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split(line);
    if (t.header.empty()) {
      t.header = std::move(fields);
      continue;
    }
    if (fields.size() != t.header.size())
      throw ParseError("line " + std::to_string(lineno) + ": expected " + std::to_string(t.header.size()) +
                       " fields, found " + std::to_string(fields.size()));
    t.rows.push_back(std::move(fields));
    t.lines.push_back(lineno);
  }
  if (t.header.empty()) throw ParseError("line 1: CSV is empty");
  return t;
}

double csv_number(const CsvTable& t, std::size_t row, std::size_t col) {
  const auto& s = t.rows[row][col];
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || *end != '\0')
    throw ParseError("line " + std::to_string(t.lines[row]) + ": column '" + t.header[col] + "' is not a number");
  return v;
}

std::vector<ResultRow> parse_results(const std::string& text) {
  const auto t = parse_csv(text);
  const std::size_t c_sc = t.column("scenario_id"), c_alg = t.column("algorithm"), c_seed = t.column("seed"),
                    c_delay = t.column("total_delay"), c_cpu = t.column("cpu_used"), c_gpu = t.column("gpu_used"),
                    c_mem = t.column("mem_used"), c_ep = t.column("episodes_or_evals"),
                    c_wall = t.column("wallclock_ms");
  std::vector<ResultRow> out;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    ResultRow r;
    r.scenario_id = t.rows[i][c_sc];
    r.algorithm = t.rows[i][c_alg];
    r.seed = csv_count(t, i, c_seed);
    if (t.rows[i][c_delay] != kInfeasibleMark) {
      r.total_delay = csv_number(t, i, c_delay);
      if (!(*r.total_delay > 0.0))
        throw ParseError("line " + std::to_string(t.lines[i]) + ": total_delay must be positive");
    }
    r.cpu_used = csv_number(t, i, c_cpu);
    r.gpu_used = csv_number(t, i, c_gpu);
    r.mem_used = csv_number(t, i, c_mem);
    r.episodes_or_evals = csv_count(t, i, c_ep);
    r.wallclock_ms = t.rows[i][c_wall].empty() ? 0.0 : csv_number(t, i, c_wall);
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<ResultRow> read_results(const std::filesystem::path& path) { return parse_results(read_file(path)); }

}  // namespace edgeorch
