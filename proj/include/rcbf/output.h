#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "rcbf/sim.h"

namespace rcbf {

/// Writes the trajectory with header
///   t, x_1..x_n, xhat_1..xhat_n, u_1..u_m, d_1..d_m, h, slack.
/// Values use the shortest round-trip representation. Throws IoError.
void write_csv(const Trajectory& traj, const std::filesystem::path& path);

/// Parses a file produced by write_csv; n and m are inferred from the header.
/// The outcome is not stored in the CSV and is left at its default. Throws
/// IoError for unreadable files and ConfigurationError for malformed content.
Trajectory read_csv(const std::filesystem::path& path);

/// Shortest decimal text that parses back to exactly `v`.
std::string format_double(double v);

struct PlotSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

struct PlotSpec {
  std::string title;
  std::string x_label = "t [s]";
  std::string y_label;
  std::vector<PlotSeries> series;
  /// Draws a dashed reference line at y = 0 (the safe-set boundary for h).
  bool zero_line = false;
};

/// Standalone SVG line plot with axes, tick labels and a legend. Non-finite
/// samples break the polyline. Throws IoError.
void emit_svg_plot(const PlotSpec& spec, const std::filesystem::path& path);

/// The SVG document as a string.
std::string render_svg_plot(const PlotSpec& spec);

}  // namespace rcbf
