#include "segcal/svg.hpp"

#include <cstdio>

namespace segcal {

namespace {

constexpr double kSize = 440.0;    // canvas side
constexpr double kMargin = 50.0;   // plot inset
constexpr double kPlot = kSize - 2 * kMargin;

double px(double unit) { return kMargin + unit * kPlot; }
double py(double unit) { return kSize - kMargin - unit * kPlot; }

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

void open_canvas(std::string& s, const char* x_label, const char* y_label) {
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(kSize) + "\" height=\"" +
       num(kSize) + "\" viewBox=\"0 0 " + num(kSize) + " " + num(kSize) + "\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  // axes
  s += "<line x1=\"" + num(px(0)) + "\" y1=\"" + num(py(0)) + "\" x2=\"" + num(px(1)) +
       "\" y2=\"" + num(py(0)) + "\" stroke=\"black\"/>\n";
  s += "<line x1=\"" + num(px(0)) + "\" y1=\"" + num(py(0)) + "\" x2=\"" + num(px(0)) +
       "\" y2=\"" + num(py(1)) + "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double u = i / 4.0;
    s += "<text x=\"" + num(px(u)) + "\" y=\"" + num(py(0) + 18) +
         "\" font-size=\"11\" text-anchor=\"middle\">" + num(u) + "</text>\n";
    s += "<text x=\"" + num(px(0) - 8) + "\" y=\"" + num(py(u) + 4) +
         "\" font-size=\"11\" text-anchor=\"end\">" + num(u) + "</text>\n";
  }
  s += "<text x=\"" + num(px(0.5)) + "\" y=\"" + num(kSize - 8) +
       "\" font-size=\"13\" text-anchor=\"middle\">" + x_label + "</text>\n";
  s += "<text x=\"14\" y=\"" + num(py(0.5)) + "\" font-size=\"13\" text-anchor=\"middle\" " +
       "transform=\"rotate(-90 14 " + num(py(0.5)) + ")\">" + y_label + "</text>\n";
}

}  // namespace

std::string reliability_svg(const CalibrationBins& bins) {
  std::string s;
  open_canvas(s, "confidence", "accuracy");
  // identity diagonal: perfect calibration
  s += "<line x1=\"" + num(px(0)) + "\" y1=\"" + num(py(0)) + "\" x2=\"" + num(px(1)) +
       "\" y2=\"" + num(py(1)) + "\" stroke=\"gray\" stroke-dasharray=\"5,4\"/>\n";
  for (const auto& r : bins.reliability_data()) {
    if (!r.accuracy) continue;
    const double x0 = px(r.lo);
    const double w = px(r.hi) - px(r.lo);
    const double y = py(*r.accuracy);
    s += "<rect x=\"" + num(x0 + 1) + "\" y=\"" + num(y) + "\" width=\"" + num(w - 2) +
         "\" height=\"" + num(py(0) - y) +
         "\" fill=\"steelblue\" fill-opacity=\"0.7\" stroke=\"none\"/>\n";
    const double cx = px(*r.avg_conf);
    s += "<line x1=\"" + num(cx) + "\" y1=\"" + num(py(0)) + "\" x2=\"" + num(cx) + "\" y2=\"" +
         num(y) + "\" stroke=\"darkorange\" stroke-width=\"2\"/>\n";
  }
  s += "</svg>\n";
  return s;
}

std::string sweep_svg(std::span<const SweepPoint> points) {
  std::string s;
  open_canvas(s, "recall", "precision");
  std::string path;
  for (const auto& p : points) {
    if (!p.precision) continue;
    const std::string x = num(px(p.recall));
    const std::string y = num(py(*p.precision));
    path += (path.empty() ? "M" : " L") + x + " " + y;
    s += "<circle cx=\"" + x + "\" cy=\"" + y + "\" r=\"3.5\" fill=\"steelblue\"/>\n";
  }
  if (!path.empty())
    s += "<path d=\"" + path + "\" fill=\"none\" stroke=\"steelblue\" stroke-width=\"1.5\"/>\n";
  s += "</svg>\n";
  return s;
}

}  // namespace segcal
