#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>

#include "capmeter/report.hpp"

namespace capmeter::report {

namespace {

constexpr double kPanelWidth = 400.0;
constexpr double kPanelHeight = 320.0;
constexpr double kMargin = 50.0;

std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", x);
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

std::string label_num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", x);
  return buf;
}

struct Series {
  std::string name;
  std::string colour;
  std::vector<std::pair<double, double>> xy;  // (log10 N, value)
};

void draw_panel(std::ostream& out, double x0, const std::string& title, const std::vector<Series>& series) {
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin, ymin = xmin, ymax = -xmin;
  for (const auto& s : series)
    for (const auto& [x, y] : s.xy) {
      xmin = std::min(xmin, x);
      xmax = std::max(xmax, x);
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
    }
  const double left = x0 + kMargin, right = x0 + kPanelWidth - 10.0;
  const double top = 30.0, bottom = kPanelHeight - 40.0;

  out << "<text x=\"" << num(x0 + kPanelWidth / 2) << "\" y=\"18\" text-anchor=\"middle\">" << title
      << "</text>\n";
  out << "<rect x=\"" << num(left) << "\" y=\"" << num(top) << "\" width=\"" << num(right - left)
      << "\" height=\"" << num(bottom - top) << "\" fill=\"none\" stroke=\"black\"/>\n";
  if (!std::isfinite(xmin)) return;
  if (xmax - xmin < 1e-12) {
    xmin -= 0.5;
    xmax += 0.5;
  }
  if (ymax - ymin < 1e-12) {
    ymin -= 0.5;
    ymax += 0.5;
  }
  const double pad = 0.05 * (ymax - ymin);
  ymin -= pad;
  ymax += pad;
  auto px = [&](double x) { return left + (x - xmin) / (xmax - xmin) * (right - left); };
  auto py = [&](double y) { return bottom - (y - ymin) / (ymax - ymin) * (bottom - top); };

  for (int decade = static_cast<int>(std::ceil(xmin)); decade <= static_cast<int>(std::floor(xmax)); ++decade) {
    const double x = px(decade);
    out << "<line x1=\"" << num(x) << "\" y1=\"" << num(bottom) << "\" x2=\"" << num(x) << "\" y2=\""
        << num(bottom + 5) << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << num(x) << "\" y=\"" << num(bottom + 18) << "\" text-anchor=\"middle\">1e" << decade
        << "</text>\n";
  }
  for (int i = 0; i <= 4; ++i) {
    const double y = ymin + (ymax - ymin) * i / 4.0;
    out << "<text x=\"" << num(left - 4) << "\" y=\"" << num(py(y) + 4) << "\" text-anchor=\"end\">"
        << label_num(y) << "</text>\n";
  }
  out << "<text x=\"" << num((left + right) / 2) << "\" y=\"" << num(kPanelHeight - 6)
      << "\" text-anchor=\"middle\">N (log scale)</text>\n";

  double legend_y = top + 14;
  for (const auto& s : series) {
    if (s.xy.empty()) continue;
    out << "<polyline fill=\"none\" stroke=\"" << s.colour << "\" points=\"";
    for (std::size_t i = 0; i < s.xy.size(); ++i)
      out << (i ? " " : "") << num(px(s.xy[i].first)) << ',' << num(py(s.xy[i].second));
    out << "\"/>\n";
    for (const auto& [x, y] : s.xy)
      out << "<circle cx=\"" << num(px(x)) << "\" cy=\"" << num(py(y)) << "\" r=\"2.5\" fill=\"" << s.colour
          << "\"/>\n";
    out << "<text x=\"" << num(right - 6) << "\" y=\"" << num(legend_y) << "\" text-anchor=\"end\" fill=\""
        << s.colour << "\">" << s.name << "</text>\n";
    legend_y += 14;
  }
}

}  // namespace

void write_svg_plot(std::ostream& out, const std::string& title, const std::vector<FitRow>& rows) {
  Series energy{"U", "#1f77b4", {}};
  Series sigmoid{"C sigmoid", "#d62728", {}};
  Series polynomial{"C polynomial", "#2ca02c", {}};
  for (const auto& r : rows) {
    if (r.n <= 0) continue;
    const double x = std::log10(static_cast<double>(r.n));
    energy.xy.emplace_back(x, r.u_mean);
    if (r.c_sigmoid) sigmoid.xy.emplace_back(x, *r.c_sigmoid);
    if (r.c_polynomial) polynomial.xy.emplace_back(x, *r.c_polynomial);
  }
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(2 * kPanelWidth) << "\" height=\""
      << num(kPanelHeight + 20) << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  out << "<text x=\"" << num(kPanelWidth) << "\" y=\"" << num(kPanelHeight + 14)
      << "\" text-anchor=\"middle\">" << escape(title) << "</text>\n";
  draw_panel(out, 0.0, "average energy U(N)", {energy});
  draw_panel(out, kPanelWidth, "learning capacity C(N)", {sigmoid, polynomial});
  out << "</svg>\n";
}

}  // namespace capmeter::report
