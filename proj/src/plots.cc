#include "orchard/plots.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

namespace orchard {

namespace {

constexpr double kWidth = 640.0;
constexpr double kHeight = 420.0;
constexpr double kLeft = 60.0, kRight = 20.0, kTop = 40.0, kBottom = 50.0;

std::string Fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", x);
  return buf;
}

std::string Escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string Header(const std::string& title) {
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + Fmt(kWidth) +
         "\" height=\"" + Fmt(kHeight) + "\" viewBox=\"0 0 " + Fmt(kWidth) + " " +
         Fmt(kHeight) + "\" font-family=\"sans-serif\" font-size=\"12\">\n" +
         "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n" +
         "<text x=\"" + Fmt(kWidth / 2) + "\" y=\"22\" text-anchor=\"middle\" " +
         "font-size=\"15\">" + Escape(title) + "</text>\n";
}

std::string Text(double x, double y, const std::string& s,
                 const std::string& anchor = "middle") {
  return "<text x=\"" + Fmt(x) + "\" y=\"" + Fmt(y) + "\" text-anchor=\"" + anchor +
         "\">" + Escape(s) + "</text>\n";
}

std::string Line(double x0, double y0, double x1, double y1, const std::string& style) {
  return "<line x1=\"" + Fmt(x0) + "\" y1=\"" + Fmt(y0) + "\" x2=\"" + Fmt(x1) +
         "\" y2=\"" + Fmt(y1) + "\" " + style + "/>\n";
}

// Round upper axis limit with about five ticks.
double NiceMax(double v) {
  if (!(v > 0.0)) return 1.0;
  const double step = std::pow(10.0, std::floor(std::log10(v)));
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    if (m * step >= v) return m * step;
  }
  return 10.0 * step;
}

struct Axes {
  double xmax, ymax;
  double X(double x) const { return kLeft + x / xmax * (kWidth - kLeft - kRight); }
  double Y(double y) const {
    return kHeight - kBottom - y / ymax * (kHeight - kTop - kBottom);
  }
};

std::string YTicks(const Axes& a, const std::string& label) {
  std::string out = Line(kLeft, kTop, kLeft, kHeight - kBottom, "stroke=\"black\"");
  for (int i = 0; i <= 5; ++i) {
    const double v = a.ymax * i / 5.0;
    out += Line(kLeft - 4, a.Y(v), kLeft, a.Y(v), "stroke=\"black\"");
    out += Text(kLeft - 6, a.Y(v) + 4, Fmt(v), "end");
  }
  out += "<text x=\"16\" y=\"" + Fmt(kHeight / 2) +
         "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " + Fmt(kHeight / 2) +
         ")\">" + Escape(label) + "</text>\n";
  return out;
}

}  // namespace

std::string CountBarChartSvg(const CountReport& report) {
  double top = 0.0;
  for (const auto& [tree, tc] : report.per_tree) {
    top = std::max({top, static_cast<double>(tc.estimated),
                    static_cast<double>(tc.ground_truth.value_or(0))});
  }
  const Axes a{1.0, NiceMax(top)};
  std::string out = Header("Fruit count per tree");
  out += YTicks(a, "fruits");
  out += Line(kLeft, kHeight - kBottom, kWidth - kRight, kHeight - kBottom,
              "stroke=\"black\"");
  const int n = std::max<int>(1, static_cast<int>(report.per_tree.size()));
  const double slot = (kWidth - kLeft - kRight) / n;
  const double bar = slot * 0.35;
  int i = 0;
  for (const auto& [tree, tc] : report.per_tree) {
    const double x = kLeft + slot * i + slot * 0.15;
    auto rect = [&](double x0, double v, const char* color) {
      return "<rect x=\"" + Fmt(x0) + "\" y=\"" + Fmt(a.Y(v)) + "\" width=\"" +
             Fmt(bar) + "\" height=\"" + Fmt(a.Y(0) - a.Y(v)) + "\" fill=\"" + color +
             "\"/>\n";
    };
    out += rect(x, tc.estimated, "#1f77b4");
    if (tc.ground_truth) out += rect(x + bar, *tc.ground_truth, "#ff7f0e");
    out += Text(x + bar, kHeight - kBottom + 16, std::to_string(tree));
    ++i;
  }
  out += Text(kWidth / 2, kHeight - 12, "tree");
  out += "<rect x=\"" + Fmt(kWidth - 170) + "\" y=\"34\" width=\"12\" height=\"12\" "
         "fill=\"#1f77b4\"/>\n" + Text(kWidth - 152, 44, "estimated", "start");
  out += "<rect x=\"" + Fmt(kWidth - 90) + "\" y=\"34\" width=\"12\" height=\"12\" "
         "fill=\"#ff7f0e\"/>\n" + Text(kWidth - 72, 44, "truth", "start");
  return out + "</svg>\n";
}

std::string CountScatterSvg(const CountReport& report) {
  std::vector<std::pair<double, double>> pts;
  double top = 0.0;
  for (const auto& [tree, tc] : report.per_tree) {
    if (!tc.ground_truth) continue;
    pts.emplace_back(*tc.ground_truth, tc.estimated);
    top = std::max({top, static_cast<double>(*tc.ground_truth),
                    static_cast<double>(tc.estimated)});
  }
  const double lim = NiceMax(top);
  const Axes a{lim, lim};
  std::string out = Header("Estimated against ground truth");
  out += YTicks(a, "estimated");
  out += Line(kLeft, kHeight - kBottom, kWidth - kRight, kHeight - kBottom,
              "stroke=\"black\"");
  for (int i = 0; i <= 5; ++i) {
    const double v = lim * i / 5.0;
    out += Line(a.X(v), kHeight - kBottom, a.X(v), kHeight - kBottom + 4,
                "stroke=\"black\"");
    out += Text(a.X(v), kHeight - kBottom + 16, Fmt(v));
  }
  out += Text(kWidth / 2, kHeight - 12, "ground truth");
  out += Line(a.X(0), a.Y(0), a.X(lim), a.Y(lim),
              "stroke=\"gray\" stroke-dasharray=\"4 4\"");
  if (report.regression) {
    const Regression& r = *report.regression;
    auto clamp = [&](double y) { return std::clamp(y, 0.0, lim); };
    out += Line(a.X(0), a.Y(clamp(r.intercept)), a.X(lim),
                a.Y(clamp(r.slope * lim + r.intercept)), "stroke=\"#d62728\"");
    out += Text(kLeft + 10, kTop + 14,
                "y = " + Fmt(r.slope) + " x + " + Fmt(r.intercept) +
                    ", R2 = " + Fmt(r.r2),
                "start");
  }
  for (const auto& [x, y] : pts) {
    out += "<circle cx=\"" + Fmt(a.X(x)) + "\" cy=\"" + Fmt(a.Y(y)) +
           "\" r=\"4\" fill=\"#1f77b4\"/>\n";
  }
  return out + "</svg>\n";
}

}  // namespace orchard
