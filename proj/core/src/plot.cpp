#include "edgeorch/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>

#include "edgeorch/errors.hpp"
#include "edgeorch/results.hpp"
#include "edgeorch/scenario_io.hpp"

namespace edgeorch {

namespace {

constexpr double kWidth = 720, kHeight = 440;
constexpr double kLeft = 80, kRight = 170, kTop = 40, kBottom = 60;

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"};

std::string f(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string render_svg(const LineChart& c) {
  const bool categorical = !c.x_ticks.empty();
  const std::size_t points = categorical ? c.x_ticks.size() : c.x_values.size();
  for (const auto& s : c.series)
    if (s.y.size() != points) throw ContractViolation("series '" + s.name + "' does not match the x axis");

  double x_lo = 0, x_hi = points > 1 ? double(points - 1) : 1.0;
  if (!categorical && points > 0) {
    x_lo = *std::min_element(c.x_values.begin(), c.x_values.end());
    x_hi = *std::max_element(c.x_values.begin(), c.x_values.end());
  }
  if (x_hi <= x_lo) x_hi = x_lo + 1.0;
  double y_lo = std::numeric_limits<double>::infinity(), y_hi = -y_lo;
  for (const auto& s : c.series)
    for (double v : s.y)
      if (std::isfinite(v)) {
        y_lo = std::min(y_lo, v);
        y_hi = std::max(y_hi, v);
      }
  if (!std::isfinite(y_lo)) y_lo = 0.0, y_hi = 1.0;
  if (y_hi <= y_lo) {
    const double pad = std::max(1.0, std::abs(y_lo) * 0.05);
    y_lo -= pad;
    y_hi += pad;
  }

  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  auto px = [&](std::size_t i) {
    const double x = categorical ? double(i) : c.x_values[i];
    const double t = categorical && points == 1 ? 0.5 : (x - x_lo) / (x_hi - x_lo);
    return kLeft + t * pw;
  };
  auto py = [&](double y) { return kTop + (1.0 - (y - y_lo) / (y_hi - y_lo)) * ph; };

  std::string s;
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + f(kWidth) + "\" height=\"" + f(kHeight) +
       "\" viewBox=\"0 0 " + f(kWidth) + " " + f(kHeight) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s += "<text x=\"" + f(kWidth / 2) + "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" + escape(c.title) +
       "</text>\n";
  s += "<line x1=\"" + f(kLeft) + "\" y1=\"" + f(kTop + ph) + "\" x2=\"" + f(kLeft + pw) + "\" y2=\"" + f(kTop + ph) +
       "\" stroke=\"black\"/>\n";
  s += "<line x1=\"" + f(kLeft) + "\" y1=\"" + f(kTop) + "\" x2=\"" + f(kLeft) + "\" y2=\"" + f(kTop + ph) +
       "\" stroke=\"black\"/>\n";

  for (int k = 0; k <= 4; ++k) {
    const double v = y_lo + (y_hi - y_lo) * k / 4.0;
    s += "<line x1=\"" + f(kLeft - 4) + "\" y1=\"" + f(py(v)) + "\" x2=\"" + f(kLeft) + "\" y2=\"" + f(py(v)) +
         "\" stroke=\"black\"/>\n";
    s += "<text x=\"" + f(kLeft - 8) + "\" y=\"" + f(py(v) + 4) + "\" text-anchor=\"end\">" + tick(v) + "</text>\n";
  }
  if (categorical) {
    for (std::size_t i = 0; i < points; ++i)
      s += "<text x=\"" + f(px(i)) + "\" y=\"" + f(kTop + ph + 18) + "\" text-anchor=\"middle\">" +
           escape(c.x_ticks[i]) + "</text>\n";
  } else {
    for (int k = 0; k <= 4; ++k) {
      const double v = x_lo + (x_hi - x_lo) * k / 4.0;
      const double x = kLeft + (v - x_lo) / (x_hi - x_lo) * pw;
      s += "<text x=\"" + f(x) + "\" y=\"" + f(kTop + ph + 18) + "\" text-anchor=\"middle\">" + tick(v) + "</text>\n";
    }
  }
  s += "<text x=\"" + f(kLeft + pw / 2) + "\" y=\"" + f(kHeight - 16) + "\" text-anchor=\"middle\">" +
       escape(c.x_label) + "</text>\n";
  s += "<text x=\"18\" y=\"" + f(kTop + ph / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 18 " +
       f(kTop + ph / 2) + ")\">" + escape(c.y_label) + "</text>\n";

  for (std::size_t k = 0; k < c.series.size(); ++k) {
    const auto& series = c.series[k];
    const char* color = kPalette[k % std::size(kPalette)];
    std::string pts;
    auto flush = [&] {
      if (!pts.empty())
        s += "<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"2\" points=\"" + pts +
             "\"/>\n";
      pts.clear();
    };
    for (std::size_t i = 0; i < points; ++i) {
      if (!std::isfinite(series.y[i])) {
        flush();
        continue;
      }
      if (!pts.empty()) pts += ' ';
      pts += f(px(i)) + "," + f(py(series.y[i]));
    }
    flush();
    const double ly = kTop + 10 + 20 * double(k);
    s += "<line x1=\"" + f(kLeft + pw + 12) + "\" y1=\"" + f(ly) + "\" x2=\"" + f(kLeft + pw + 32) + "\" y2=\"" +
         f(ly) + "\" stroke=\"" + color + "\" stroke-width=\"2\"/>\n";
    s += "<text x=\"" + f(kLeft + pw + 38) + "\" y=\"" + f(ly + 4) + "\">" + escape(series.name) + "</text>\n";
  }
  s += "</svg>\n";
  return s;
}

namespace {

std::vector<LineChart> result_charts(const std::vector<ResultRow>& rows) {
  std::vector<std::string> scenarios, algorithms;
  auto note = [](std::vector<std::string>& v, const std::string& x) {
    if (std::find(v.begin(), v.end(), x) == v.end()) v.push_back(x);
  };
  for (const auto& r : rows) {
    note(scenarios, r.scenario_id);
    note(algorithms, r.algorithm);
  }
  struct Metric {
    const char* key;
    const char* label;
    double ResultRow::*field;
  };
  const Metric metrics[] = {{"total_delay", "total delay (s)", nullptr},
                            {"cpu_used", "CPU cores used", &ResultRow::cpu_used},
                            {"gpu_used", "GPUs used", &ResultRow::gpu_used},
                            {"mem_used", "memory used (GB)", &ResultRow::mem_used}};
  std::vector<LineChart> charts;
  for (const auto& m : metrics) {
    LineChart c;
    c.title = m.key;
    c.x_label = "scenario";
    c.y_label = m.label;
    c.x_ticks = scenarios;
    for (const auto& alg : algorithms) {
      Series s{alg, {}};
      for (const auto& sc : scenarios) {
        double sum = 0.0;
        int n = 0;
        for (const auto& r : rows) {
          if (r.algorithm != alg || r.scenario_id != sc || !r.total_delay) continue;
          sum += m.field ? r.*m.field : *r.total_delay;
          ++n;
        }
        s.y.push_back(n ? sum / n : std::numeric_limits<double>::quiet_NaN());
      }
      c.series.push_back(std::move(s));
    }
    charts.push_back(std::move(c));
  }
  return charts;
}

std::vector<LineChart> training_charts(const CsvTable& t) {
  const std::size_t c_ep = t.column("episode");
  std::vector<double> x;
  for (std::size_t i = 0; i < t.rows.size(); ++i) x.push_back(csv_number(t, i, c_ep));
  auto column = [&](const std::string& name) {
    const std::size_t c = t.column(name);
    Series s{name, {}};
    for (std::size_t i = 0; i < t.rows.size(); ++i) s.y.push_back(csv_number(t, i, c));
    return s;
  };
  LineChart delay{"total_delay", "episode", "total delay (s)", {}, x, {column("total_delay")}};
  LineChart ret{"episode_return", "episode", "return", {}, x, {column("episode_return")}};
  LineChart loss{"losses", "episode", "loss", {}, x,
                 {column("A_loss"), column("C_loss"), column("A_sil"), column("C_sil")}};
  return {delay, ret, loss};
}

}  // namespace

std::vector<std::filesystem::path> emit_plots(const std::filesystem::path& csv, const std::filesystem::path& out_dir) {
  const auto text = read_file(csv);
  const auto table = parse_csv(text);
  if (table.rows.empty()) throw ParseError("line 2: CSV has no data rows");
  std::vector<LineChart> charts;
  const auto& h = table.header;
  if (std::find(h.begin(), h.end(), "scenario_id") != h.end()) {
    charts = result_charts(parse_results(text));
  } else if (std::find(h.begin(), h.end(), "episode") != h.end()) {
    charts = training_charts(table);
  } else {
    throw ParseError("line 1: header matches neither a result table nor a training log");
  }
  std::vector<std::pair<std::filesystem::path, std::string>> files;
  for (const auto& c : charts) files.emplace_back(out_dir / (csv.stem().string() + "_" + c.title + ".svg"), render_svg(c));
  std::vector<std::filesystem::path> written;
  for (const auto& [path, svg] : files) {
    write_file(path, svg);
    written.push_back(path);
  }
  return written;
}

}  // namespace edgeorch
