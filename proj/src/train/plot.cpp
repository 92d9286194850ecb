#include "relab/train/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <string>

#include "relab/dynamics/probe.hpp"
#include "relab/errors.hpp"

namespace relab {

namespace {

struct Point {
  double x = 0.0;
  double y = 0.0;
  double lo = 0.0;
  double hi = 0.0;
};

struct Series {
  std::string label;
  std::vector<Point> points;
};

// Chart key ("ov_per", "loss", ...) -> series in input order.
using Charts = std::map<std::string, std::vector<Series>>;

constexpr double kW = 720, kH = 420, kLeft = 70, kRight = 170, kTop = 36, kBottom = 50;
const char* const kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double to_num(const std::string& s, const std::filesystem::path& file, std::size_t line) {
  if (s == "nan" || s == "NaN" || s.empty()) return std::numeric_limits<double>::quiet_NaN();
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw FormatError(file.string() + ":" + std::to_string(line) + ": not a number: '" + s + "'");
  }
}

void add_point(Charts& charts, const std::string& key, const std::string& label, Point p) {
  auto& list = charts[key];
  if (list.empty() || list.back().label != label) list.push_back({label, {}});
  list.back().points.push_back(p);
}

void read_csv(const std::filesystem::path& file, const std::string& label, Charts& charts) {
  std::ifstream in(file);
  if (!in) throw InputError("cannot open " + file.string());
  std::string line;
  if (!std::getline(in, line)) throw InputError(file.string() + " is empty");
  const auto header = split(line);
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line))
    if (!line.empty()) rows.push_back(split(line));
  if (rows.empty()) throw InputError(file.string() + " has no data rows");
  for (std::size_t i = 0; i < rows.size(); ++i)
    if (rows[i].size() != header.size())
      throw FormatError(file.string() + ":" + std::to_string(i + 2) + ": expected " + std::to_string(header.size()) +
                        " columns");

  if (header == std::vector<std::string>{"step", "probe", "metric", "mean", "ci_low", "ci_high", "n_layers"}) {
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto& r = rows[i];
      add_point(charts, r[1] + "_" + r[2], label,
                {to_num(r[0], file, i + 2), to_num(r[3], file, i + 2), to_num(r[4], file, i + 2),
                 to_num(r[5], file, i + 2)});
    }
  } else if (header == std::vector<std::string>{"step", "layer", "probe", "metric", "value", "is_nan"}) {
    std::vector<DynamicsRow> dyn;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto& r = rows[i];
      dyn.push_back({static_cast<std::int64_t>(to_num(r[0], file, i + 2)),
                     static_cast<std::size_t>(to_num(r[1], file, i + 2)), r[2], r[3], to_num(r[4], file, i + 2)});
    }
    for (const auto& a : aggregate_rows(dyn))
      add_point(charts, a.probe + "_" + a.metric, label,
                {static_cast<double>(a.step), a.stats.mean, a.stats.ci_low, a.stats.ci_high});
  } else if (header == std::vector<std::string>{"step", "loss", "lr", "tokens_seen"}) {
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const double x = to_num(rows[i][0], file, i + 2);
      const double loss = to_num(rows[i][1], file, i + 2), lr = to_num(rows[i][2], file, i + 2);
      add_point(charts, "loss", label, {x, loss, loss, loss});
      add_point(charts, "lr", label, {x, lr, lr, lr});
    }
  } else {
    throw FormatError(file.string() + ": unrecognised CSV header");
  }
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::string coord(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '&') out += "&amp;";
    else out += c;
  }
  return out;
}

void render(const std::string& title, const std::vector<Series>& series, const std::filesystem::path& path) {
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : series)
    for (const auto& p : s.points) {
      x0 = std::min(x0, p.x);
      x1 = std::max(x1, p.x);
      if (std::isfinite(p.y)) {
        y0 = std::min({y0, p.y, std::isfinite(p.lo) ? p.lo : p.y});
        y1 = std::max({y1, p.y, std::isfinite(p.hi) ? p.hi : p.y});
      }
    }
  if (!std::isfinite(y0)) y0 = 0.0, y1 = 1.0;
  if (x1 <= x0) x1 = x0 + 1.0;
  if (y1 <= y0) y0 -= 0.5, y1 += 0.5;
  const double pad = 0.05 * (y1 - y0);
  y0 -= pad;
  y1 += pad;
  const double pw = kW - kLeft - kRight, ph = kH - kTop - kBottom;
  auto sx = [&](double x) { return kLeft + (x - x0) / (x1 - x0) * pw; };
  auto sy = [&](double y) { return kTop + (1.0 - (y - y0) / (y1 - y0)) * ph; };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
      << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << kLeft << "\" y=\"20\" font-size=\"14\">" << escape(title) << "</text>\n";
  svg << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << pw << "\" height=\"" << ph
      << "\" fill=\"none\" stroke=\"#444\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double xv = x0 + (x1 - x0) * i / 4.0, yv = y0 + (y1 - y0) * i / 4.0;
    svg << "<text x=\"" << coord(sx(xv)) << "\" y=\"" << coord(kH - kBottom + 16) << "\" text-anchor=\"middle\">"
        << fmt(xv) << "</text>\n";
    svg << "<text x=\"" << coord(kLeft - 6) << "\" y=\"" << coord(sy(yv) + 4) << "\" text-anchor=\"end\">" << fmt(yv)
        << "</text>\n";
    svg << "<line x1=\"" << kLeft << "\" x2=\"" << kLeft + pw << "\" y1=\"" << coord(sy(yv)) << "\" y2=\""
        << coord(sy(yv)) << "\" stroke=\"#eee\"/>\n";
  }
  svg << "<text x=\"" << coord(kLeft + pw / 2) << "\" y=\"" << coord(kH - 12) << "\" text-anchor=\"middle\">step</text>\n";

  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* color = kColors[k % std::size(kColors)];
    // Bands and lines run over maximal stretches of finite points.
    std::vector<std::vector<Point>> runs(1);
    for (const auto& p : s.points) {
      if (std::isfinite(p.y)) runs.back().push_back(p);
      else if (!runs.back().empty()) runs.emplace_back();
    }
    for (const auto& run : runs) {
      if (run.empty()) continue;
      const bool band = std::any_of(run.begin(), run.end(), [](const Point& p) { return p.hi > p.lo; });
      if (band && run.size() > 1) {
        svg << "<polygon fill=\"" << color << "\" fill-opacity=\"0.18\" stroke=\"none\" points=\"";
        for (const auto& p : run) svg << coord(sx(p.x)) << ',' << coord(sy(p.hi)) << ' ';
        for (auto it = run.rbegin(); it != run.rend(); ++it) svg << coord(sx(it->x)) << ',' << coord(sy(it->lo)) << ' ';
        svg << "\"/>\n";
      }
      if (run.size() > 1) {
        svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
        for (const auto& p : run) svg << coord(sx(p.x)) << ',' << coord(sy(p.y)) << ' ';
        svg << "\"/>\n";
      }
    }
    const bool markers = s.points.size() <= 200;
    for (const auto& p : s.points) {
      if (std::isfinite(p.y)) {
        if (markers)
          svg << "<circle cx=\"" << coord(sx(p.x)) << "\" cy=\"" << coord(sy(p.y)) << "\" r=\"3\" fill=\"" << color
              << "\"/>\n";
      } else {
        svg << "<circle class=\"nan\" cx=\"" << coord(sx(p.x)) << "\" cy=\"" << coord(kTop + ph - 6)
            << "\" r=\"4\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\"/>\n";
      }
    }
    const double ly = kTop + 12 + 18.0 * static_cast<double>(k);
    svg << "<line x1=\"" << coord(kW - kRight + 12) << "\" x2=\"" << coord(kW - kRight + 32) << "\" y1=\"" << coord(ly)
        << "\" y2=\"" << coord(ly) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    svg << "<text x=\"" << coord(kW - kRight + 38) << "\" y=\"" << coord(ly + 4) << "\">" << escape(s.label)
        << "</text>\n";
  }
  svg << "</svg>\n";
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw InputError("cannot write " + path.string());
  out << svg.str();
}

// Series names: paths relative to the inputs' common directory, minus the
// file stem when every input shares it.
std::vector<std::string> labels(const std::vector<std::filesystem::path>& inputs) {
  std::vector<std::filesystem::path> abs;
  for (const auto& p : inputs) abs.push_back(std::filesystem::absolute(p).lexically_normal());
  auto common = abs.front().parent_path();
  for (const auto& p : abs)
    while (!common.empty() && p.lexically_relative(common).string().starts_with(".."))
      common = common.parent_path();
  const bool same_stem = std::all_of(abs.begin(), abs.end(), [&](const auto& p) { return p.stem() == abs.front().stem(); });
  std::vector<std::string> out;
  for (const auto& p : abs) {
    auto rel = p.lexically_relative(common);
    auto name = same_stem ? rel.parent_path() : rel.parent_path() / rel.stem();
    out.push_back(name.empty() || name == "." ? p.stem().string() : name.string());
  }
  return out;
}

}  // namespace

std::vector<std::filesystem::path> plot_csvs(const std::vector<std::filesystem::path>& inputs,
                                             const std::filesystem::path& out_dir) {
  if (inputs.empty()) throw InputError("no input CSVs");
  const auto names = labels(inputs);
  Charts charts;
  for (std::size_t i = 0; i < inputs.size(); ++i) read_csv(inputs[i], names[i], charts);
  std::filesystem::create_directories(out_dir);
  std::vector<std::filesystem::path> written;
  for (const auto& [key, series] : charts) {
    const auto path = out_dir / (key + ".svg");
    render(key, series, path);
    written.push_back(path);
  }
  return written;
}

}  // namespace relab
