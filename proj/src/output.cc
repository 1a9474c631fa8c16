#include "rcbf/output.h"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "rcbf/errors.h"

namespace rcbf {
namespace {

std::ofstream open_for_write(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  return out;
}

void finish_write(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

std::vector<std::string> split_commas(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(line.substr(start, comma - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

double parse_cell(const std::string& s, std::size_t line_no) {
  double v = 0.0;
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  const auto res = std::from_chars(begin, end, v);
  if (res.ec != std::errc() || res.ptr != end) {
    throw ConfigurationError("line " + std::to_string(line_no) + ": bad number '" + s + "'");
  }
  return v;
}

std::string xml_escape(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

// Step of roughly `target` ticks snapped to 1, 2 or 5 times a power of ten.
double nice_step(double span, int target) {
  const double raw = span / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  const double norm = raw / mag;
  double step = 10.0;
  if (norm <= 1.0) {
    step = 1.0;
  } else if (norm <= 2.0) {
    step = 2.0;
  } else if (norm <= 5.0) {
    step = 5.0;
  }
  return step * mag;
}

std::string tick_text(double v, double step) {
  if (std::abs(v) < 1e-12 * std::max(1.0, step)) v = 0.0;
  std::ostringstream os;
  os.precision(4);
  os << v;
  return os.str();
}

constexpr std::array<const char*, 10> kPalette = {
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

// Keeps at most ~2 * buckets points while preserving each bucket's extrema.
std::vector<std::size_t> decimate(const std::vector<double>& y, std::size_t buckets) {
  std::vector<std::size_t> idx;
  if (y.size() <= 2 * buckets) {
    idx.resize(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) idx[i] = i;
    return idx;
  }
  const double width = static_cast<double>(y.size()) / static_cast<double>(buckets);
  for (std::size_t b = 0; b < buckets; ++b) {
    const auto lo = static_cast<std::size_t>(b * width);
    const auto hi = std::min(y.size(), static_cast<std::size_t>((b + 1) * width));
    if (lo >= hi) continue;
    std::size_t imin = lo;
    std::size_t imax = lo;
    for (std::size_t i = lo; i < hi; ++i) {
      if (!std::isfinite(y[i])) {
        // Keep breaks visible.
        idx.push_back(i);
        continue;
      }
      if (!std::isfinite(y[imin]) || y[i] < y[imin]) imin = i;
      if (!std::isfinite(y[imax]) || y[i] > y[imax]) imax = i;
    }
    idx.push_back(std::min(imin, imax));
    idx.push_back(std::max(imin, imax));
  }
  idx.push_back(y.size() - 1);
  std::sort(idx.begin(), idx.end());
  idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
  return idx;
}

}  // namespace

std::string format_double(double v) {
  std::array<char, 32> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

void write_csv(const Trajectory& traj, const std::filesystem::path& path) {
  std::ofstream out = open_for_write(path);
  const long n = traj.states.empty() ? 0 : traj.states.front().size();
  const long m = traj.inputs.empty() ? 0 : traj.inputs.front().size();
  out << "t";
  for (long i = 1; i <= n; ++i) out << ",x_" << i;
  for (long i = 1; i <= n; ++i) out << ",xhat_" << i;
  for (long i = 1; i <= m; ++i) out << ",u_" << i;
  for (long i = 1; i <= m; ++i) out << ",d_" << i;
  out << ",h,slack\n";
  for (std::size_t k = 0; k < traj.size(); ++k) {
    out << format_double(traj.times[k]);
    for (const auto* vec : {&traj.states[k], &traj.estimates[k], &traj.inputs[k],
                            &traj.disturbances[k]}) {
      for (Eigen::Index i = 0; i < vec->size(); ++i) out << ',' << format_double((*vec)[i]);
    }
    out << ',' << format_double(traj.h_values[k]) << ',' << format_double(traj.slacks[k])
        << '\n';
  }
  finish_write(out, path);
}

Trajectory read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::string line;
  if (!std::getline(in, line)) {
    throw ConfigurationError("'" + path.string() + "' is empty");
  }
  const std::vector<std::string> header = split_commas(line);
  long n = 0;
  long m = 0;
  for (const std::string& col : header) {
    if (col.rfind("x_", 0) == 0) ++n;
    if (col.rfind("u_", 0) == 0) ++m;
  }
  const std::size_t width = static_cast<std::size_t>(1 + 2 * n + 2 * m + 2);
  if (header.size() != width || header.front() != "t" || header[width - 2] != "h" ||
      header.back() != "slack") {
    throw ConfigurationError("'" + path.string() + "': unexpected header '" + line + "'");
  }

  Trajectory traj;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::vector<std::string> cells = split_commas(line);
    if (cells.size() != width) {
      throw ConfigurationError("'" + path.string() + "' line " + std::to_string(line_no) +
                               ": expected " + std::to_string(width) + " columns, got " +
                               std::to_string(cells.size()));
    }
    std::size_t c = 0;
    auto take = [&](long count) {
      Eigen::VectorXd v(count);
      for (long i = 0; i < count; ++i) v[i] = parse_cell(cells[c++], line_no);
      return v;
    };
    traj.times.push_back(parse_cell(cells[c++], line_no));
    traj.states.push_back(take(n));
    traj.estimates.push_back(take(n));
    traj.inputs.push_back(take(m));
    traj.disturbances.push_back(take(m));
    traj.h_values.push_back(parse_cell(cells[c++], line_no));
    traj.slacks.push_back(parse_cell(cells[c++], line_no));
  }
  return traj;
}

std::string render_svg_plot(const PlotSpec& spec) {
  constexpr double kWidth = 820.0;
  constexpr double kHeight = 500.0;
  constexpr double kLeft = 80.0;
  constexpr double kRight = 200.0;
  constexpr double kTop = 40.0;
  constexpr double kBottom = 60.0;
  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kHeight - kTop - kBottom;

  double xmin = std::numeric_limits<double>::infinity();
  double xmax = -xmin;
  double ymin = xmin;
  double ymax = -xmin;
  for (const PlotSeries& s : spec.series) {
    const std::size_t count = std::min(s.x.size(), s.y.size());
    for (std::size_t i = 0; i < count; ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      ymin = std::min(ymin, s.y[i]);
      ymax = std::max(ymax, s.y[i]);
    }
  }
  if (!std::isfinite(xmin)) {
    xmin = 0.0;
    xmax = 1.0;
    ymin = 0.0;
    ymax = 1.0;
  }
  if (spec.zero_line) {
    ymin = std::min(ymin, 0.0);
    ymax = std::max(ymax, 0.0);
  }
  if (xmax - xmin <= 0.0) {
    xmin -= 0.5;
    xmax += 0.5;
  }
  if (ymax - ymin <= 0.0) {
    ymin -= 0.5;
    ymax += 0.5;
  }
  const double ypad = 0.05 * (ymax - ymin);
  ymin -= ypad;
  ymax += ypad;

  auto px = [&](double x) { return kLeft + (x - xmin) / (xmax - xmin) * plot_w; };
  auto py = [&](double y) { return kTop + (ymax - y) / (ymax - ymin) * plot_h; };

  std::ostringstream os;
  os.precision(6);
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
     << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
     << kHeight << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
     << "<rect x=\"0\" y=\"0\" width=\"" << kWidth << "\" height=\"" << kHeight
     << "\" fill=\"white\"/>\n";
  if (!spec.title.empty()) {
    os << "<text x=\"" << kLeft + plot_w / 2 << "\" y=\"24\" text-anchor=\"middle\" "
       << "font-size=\"15\">" << xml_escape(spec.title) << "</text>\n";
  }

  // Ticks and grid.
  const double xstep = nice_step(xmax - xmin, 6);
  const double ystep = nice_step(ymax - ymin, 6);
  os << "<g stroke=\"#e0e0e0\" stroke-width=\"1\">\n";
  for (double t = std::ceil(xmin / xstep) * xstep; t <= xmax + 1e-9 * xstep; t += xstep) {
    os << "<line x1=\"" << px(t) << "\" y1=\"" << kTop << "\" x2=\"" << px(t) << "\" y2=\""
       << kTop + plot_h << "\"/>\n";
  }
  for (double t = std::ceil(ymin / ystep) * ystep; t <= ymax + 1e-9 * ystep; t += ystep) {
    os << "<line x1=\"" << kLeft << "\" y1=\"" << py(t) << "\" x2=\"" << kLeft + plot_w
       << "\" y2=\"" << py(t) << "\"/>\n";
  }
  os << "</g>\n<g fill=\"#333333\">\n";
  for (double t = std::ceil(xmin / xstep) * xstep; t <= xmax + 1e-9 * xstep; t += xstep) {
    os << "<text x=\"" << px(t) << "\" y=\"" << kTop + plot_h + 18
       << "\" text-anchor=\"middle\">" << xml_escape(tick_text(t, xstep)) << "</text>\n";
  }
  for (double t = std::ceil(ymin / ystep) * ystep; t <= ymax + 1e-9 * ystep; t += ystep) {
    os << "<text x=\"" << kLeft - 8 << "\" y=\"" << py(t) + 4
       << "\" text-anchor=\"end\">" << xml_escape(tick_text(t, ystep)) << "</text>\n";
  }
  os << "</g>\n";

  // Axes box and labels.
  os << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << plot_w
     << "\" height=\"" << plot_h << "\" fill=\"none\" stroke=\"black\"/>\n";
  os << "<text x=\"" << kLeft + plot_w / 2 << "\" y=\"" << kHeight - 16
     << "\" text-anchor=\"middle\">" << xml_escape(spec.x_label) << "</text>\n";
  os << "<text x=\"20\" y=\"" << kTop + plot_h / 2
     << "\" text-anchor=\"middle\" transform=\"rotate(-90 20 " << kTop + plot_h / 2
     << ")\">" << xml_escape(spec.y_label) << "</text>\n";

  if (spec.zero_line) {
    os << "<line x1=\"" << kLeft << "\" y1=\"" << py(0.0) << "\" x2=\"" << kLeft + plot_w
       << "\" y2=\"" << py(0.0)
       << "\" stroke=\"black\" stroke-width=\"1.2\" stroke-dasharray=\"6 4\"/>\n";
  }

  for (std::size_t s = 0; s < spec.series.size(); ++s) {
    const PlotSeries& series = spec.series[s];
    const char* color = kPalette[s % kPalette.size()];
    const std::size_t count = std::min(series.x.size(), series.y.size());
    std::vector<double> y(series.y.begin(), series.y.begin() + static_cast<long>(count));
    std::ostringstream points;
    points.precision(6);
    auto flush = [&]() {
      if (points.tellp() > 0) {
        os << "<polyline fill=\"none\" stroke=\"" << color
           << "\" stroke-width=\"1.5\" points=\"" << points.str() << "\"/>\n";
      }
      points.str("");
      points.clear();
    };
    for (std::size_t i : decimate(y, 1500)) {
      if (!std::isfinite(series.x[i]) || !std::isfinite(y[i])) {
        flush();
        continue;
      }
      points << px(series.x[i]) << ',' << py(y[i]) << ' ';
    }
    flush();
    const double ly = kTop + 14 + 18.0 * static_cast<double>(s);
    const double lx = kLeft + plot_w + 14;
    os << "<line x1=\"" << lx << "\" y1=\"" << ly - 4 << "\" x2=\"" << lx + 22 << "\" y2=\""
       << ly - 4 << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n"
       << "<text x=\"" << lx + 28 << "\" y=\"" << ly << "\">" << xml_escape(series.label)
       << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

void emit_svg_plot(const PlotSpec& spec, const std::filesystem::path& path) {
  std::ofstream out = open_for_write(path);
  out << render_svg_plot(spec);
  finish_write(out, path);
}

}  // namespace rcbf
