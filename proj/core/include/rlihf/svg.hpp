#pragma once

#include <string>
#include <vector>

namespace rlihf::svg {

struct Series {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
    std::vector<double> band;  // optional +- half-width around y
};

struct Panel {
    std::string title;
    std::string x_label;
    std::string y_label;
    std::vector<Series> series;
};

// Single panel with axes, ticks and a legend.
std::string line_plot(const Panel& panel, double width = 640, double height = 400);

// Panels laid out row-major in `columns` columns.
std::string panel_grid(const std::vector<Panel>& panels, int columns, double panel_width = 420,
                       double panel_height = 300);

// Ticks at 1/2/5 x 10^k covering [lo, hi].
std::vector<double> nice_ticks(double lo, double hi, int target = 5);

}  // namespace rlihf::svg
