#include "sfn/plot.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "sfn/error.hpp"

namespace sfn {

namespace {

constexpr double kWidth = 800.0, kHeight = 300.0;
constexpr double kLeft = 50.0, kRight = 20.0, kTop = 40.0, kBottom = 40.0;

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string escape(const std::string& text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string render_density_svg(const DensityPlot& plot) {
  const std::size_t n = plot.ground_truth.size();
  if (n == 0 || plot.predicted.size() != n) {
    fail(ErrorCode::invalid_argument, "density plot needs equal, non-empty series");
  }
  double lo = 0.0, hi = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    lo = std::min({lo, plot.ground_truth[i], plot.predicted[i]});
    hi = std::max({hi, plot.ground_truth[i], plot.predicted[i]});
  }
  if (hi - lo < 1e-9) hi = lo + 1.0;
  const double span_x = kWidth - kLeft - kRight, span_y = kHeight - kTop - kBottom;
  auto x = [&](double i) { return kLeft + (n == 1 ? 0.5 : i / static_cast<double>(n - 1)) * span_x; };
  auto y = [&](double v) { return kTop + (hi - v) / (hi - lo) * span_y; };
  auto polyline = [&](const std::vector<double>& series, const char* colour) {
    std::ostringstream os;
    os << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < n; ++i) os << (i ? " " : "") << num(x(static_cast<double>(i))) << ',' << num(y(series[i]));
    os << "\"/>\n";
    return os.str();
  };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << kLeft << "\" y=\"20\">" << escape(plot.title) << "  gt=" << num(plot.gt_count)
     << "  pred=" << num(plot.pred_count) << "</text>\n";
  os << "<line x1=\"" << kLeft << "\" y1=\"" << num(y(0.0)) << "\" x2=\"" << kWidth - kRight << "\" y2=\""
     << num(y(0.0)) << "\" stroke=\"#999\"/>\n";
  os << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\"" << kHeight - kBottom
     << "\" stroke=\"#999\"/>\n";
  os << "<text x=\"5\" y=\"" << num(y(hi) + 4) << "\">" << num(hi) << "</text>\n";
  os << "<text x=\"5\" y=\"" << num(y(lo) + 4) << "\">" << num(lo) << "</text>\n";
  for (std::size_t s : plot.view_starts) {
    if (s == 0 || s >= n) continue;
    const double px = x(static_cast<double>(s) - 0.5);
    os << "<line x1=\"" << num(px) << "\" y1=\"" << kTop << "\" x2=\"" << num(px) << "\" y2=\""
       << kHeight - kBottom << "\" stroke=\"#bbb\" stroke-dasharray=\"4 3\"/>\n";
  }
  os << polyline(plot.ground_truth, "#2a7");
  os << polyline(plot.predicted, "#c33");
  os << "<text x=\"" << kWidth - 200 << "\" y=\"" << kHeight - 12 << "\" fill=\"#2a7\">ground truth</text>\n";
  os << "<text x=\"" << kWidth - 100 << "\" y=\"" << kHeight - 12 << "\" fill=\"#c33\">predicted</text>\n";
  os << "<text x=\"" << kLeft << "\" y=\"" << kHeight - 12 << "\">downsampled frame</text>\n";
  os << "</svg>\n";
  return os.str();
}

}  // namespace sfn
