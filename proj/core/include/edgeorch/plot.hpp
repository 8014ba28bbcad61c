#pragma once

// Standalone SVG line charts for result tables and training logs.

#include <filesystem>
#include <string>
#include <vector>

namespace edgeorch {

struct Series {
  std::string name;
  std::vector<double> y;  // NaN leaves a gap
};

struct LineChart {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<std::string> x_ticks;  // categorical positions; numeric axes use x_values
  std::vector<double> x_values;
  std::vector<Series> series;
};

// Deterministic for a fixed chart.
std::string render_svg(const LineChart& chart);

// Result tables give one chart per metric (x = scenario in order of first
// appearance, mean over seeds, one series per algorithm); training logs give
// delay, return and loss charts over episodes. Nothing is written unless the
// whole CSV parses and holds at least one row. Returns the files written.
std::vector<std::filesystem::path> emit_plots(const std::filesystem::path& csv, const std::filesystem::path& out_dir);

}  // namespace edgeorch
