#include "psg/plot.hpp"

#include <algorithm>
#include <cstdio>

namespace psg {

namespace {

constexpr double kWidth = 480, kHeight = 400;
constexpr double kLeft = 60, kRight = 20, kTop = 40, kBottom = 50;

double px(double r) { return kLeft + std::clamp(r, 0.0, 1.0) * (kWidth - kLeft - kRight); }
double py(double p) { return kHeight - kBottom - std::clamp(p, 0.0, 1.0) * (kHeight - kTop - kBottom); }

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
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

std::string render_pr_svg(const std::vector<PrPoint>& curve, const std::string& title) {
  std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(kWidth) +
                    "\" height=\"" + num(kHeight) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg += "<text x=\"" + num(kWidth / 2) + "\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">" +
         escape(title) + "</text>\n";
  for (int i = 0; i <= 10; ++i) {
    const double t = i / 10.0;
    const std::string stroke = i == 0 ? "black" : "#dddddd";
    svg += "<line x1=\"" + num(px(t)) + "\" y1=\"" + num(py(0)) + "\" x2=\"" + num(px(t)) +
           "\" y2=\"" + num(py(1)) + "\" stroke=\"" + stroke + "\"/>\n";
    svg += "<line x1=\"" + num(px(0)) + "\" y1=\"" + num(py(t)) + "\" x2=\"" + num(px(1)) +
           "\" y2=\"" + num(py(t)) + "\" stroke=\"" + stroke + "\"/>\n";
    if (i % 2 == 0) {
      svg += "<text x=\"" + num(px(t)) + "\" y=\"" + num(py(0) + 16) +
             "\" text-anchor=\"middle\">" + num(t).substr(0, 3) + "</text>\n";
      svg += "<text x=\"" + num(px(0) - 6) + "\" y=\"" + num(py(t) + 4) +
             "\" text-anchor=\"end\">" + num(t).substr(0, 3) + "</text>\n";
    }
  }
  svg += "<text x=\"" + num(px(0.5)) + "\" y=\"" + num(kHeight - 12) +
         "\" text-anchor=\"middle\">Recall</text>\n";
  svg += "<text x=\"16\" y=\"" + num(py(0.5)) + "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " +
         num(py(0.5)) + ")\">Precision</text>\n";
  if (!curve.empty()) {
    svg += "<polyline fill=\"none\" stroke=\"#c0392b\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < curve.size(); ++i) {
      if (i) svg += ' ';
      svg += num(px(curve[i].recall)) + "," + num(py(curve[i].precision));
    }
    svg += "\"/>\n";
  }
  svg += "</svg>\n";
  return svg;
}

}  // namespace psg
