#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "sibyl/table.hpp"  // format_number

namespace sibyl {

/// Minimal grouped bar chart: bars, axes and labels only. Output is
/// deterministic text so rendered reports diff cleanly across runs.
struct BarChart {
  std::string title;
  std::string y_label;
  std::vector<std::string> groups;                // x categories
  std::vector<std::string> series;                // one color per series
  std::vector<std::vector<double>> values;        // [series][group]

  std::string render() const {
    const double width = 900, height = 420;
    const double ml = 70, mr = 20, mt = 40, mb = 90;
    const double plot_w = width - ml - mr, plot_h = height - mt - mb;
    static const char* palette[] = {"#4c72b0", "#dd8452", "#55a868", "#c44e52",
                                    "#8172b3", "#937860", "#da8bc3", "#8c8c8c"};

    double vmax = 0.0, vmin = 0.0;
    for (const auto& row : values)
      for (double v : row) {
        vmax = std::max(vmax, v);
        vmin = std::min(vmin, v);
      }
    if (vmax == vmin) vmax = vmin + 1.0;
    const double span = vmax - vmin;

    auto ypix = [&](double v) { return mt + plot_h * (1.0 - (v - vmin) / span); };
    auto num = [](double v) { return format_number(v); };

    std::string svg;
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(width) + "\" height=\"" +
           num(height) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    svg += "<text x=\"" + num(width / 2) + "\" y=\"20\" text-anchor=\"middle\" font-size=\"16\">" +
           title + "</text>\n";

    // y axis with 5 ticks
    for (int i = 0; i <= 5; ++i) {
      const double v = vmin + span * i / 5.0;
      const double y = ypix(v);
      svg += "<line x1=\"" + num(ml) + "\" y1=\"" + num(y) + "\" x2=\"" + num(width - mr) +
             "\" y2=\"" + num(y) + "\" stroke=\"#dddddd\"/>\n";
      svg += "<text x=\"" + num(ml - 8) + "\" y=\"" + num(y + 4) +
             "\" text-anchor=\"end\">" + num(std::round(v * 1000.0) / 1000.0) + "</text>\n";
    }
    svg += "<text x=\"16\" y=\"" + num(mt + plot_h / 2) + "\" transform=\"rotate(-90 16 " +
           num(mt + plot_h / 2) + ")\" text-anchor=\"middle\">" + y_label + "</text>\n";

    const std::size_t ng = groups.size(), ns = series.size();
    const double group_w = plot_w / std::max<std::size_t>(ng, 1);
    const double bar_w = group_w * 0.8 / std::max<std::size_t>(ns, 1);
    for (std::size_t g = 0; g < ng; ++g) {
      const double gx = ml + group_w * g + group_w * 0.1;
      for (std::size_t s = 0; s < ns; ++s) {
        const double v = values[s][g];
        const double y0 = ypix(std::max(v, 0.0)), y1 = ypix(std::min(v, 0.0));
        svg += "<rect x=\"" + num(gx + bar_w * s) + "\" y=\"" + num(y0) + "\" width=\"" +
               num(bar_w) + "\" height=\"" + num(std::max(y1 - y0, 0.5)) + "\" fill=\"" +
               palette[s % 8] + "\"/>\n";
      }
      svg += "<text x=\"" + num(gx + group_w * 0.4) + "\" y=\"" + num(height - mb + 16) +
             "\" text-anchor=\"end\" transform=\"rotate(-35 " + num(gx + group_w * 0.4) + " " +
             num(height - mb + 16) + ")\">" + groups[g] + "</text>\n";
    }
    // baseline
    svg += "<line x1=\"" + num(ml) + "\" y1=\"" + num(ypix(std::max(0.0, vmin))) + "\" x2=\"" +
           num(width - mr) + "\" y2=\"" + num(ypix(std::max(0.0, vmin))) +
           "\" stroke=\"#333333\"/>\n";
    // legend
    for (std::size_t s = 0; s < ns; ++s) {
      const double lx = ml + 120.0 * s;
      svg += "<rect x=\"" + num(lx) + "\" y=\"" + num(height - 24) +
             "\" width=\"12\" height=\"12\" fill=\"" + palette[s % 8] + "\"/>\n";
      svg += "<text x=\"" + num(lx + 16) + "\" y=\"" + num(height - 14) + "\">" + series[s] +
             "</text>\n";
    }
    svg += "</svg>\n";
    return svg;
  }
};

}  // namespace sibyl
