#pragma once

#include <string>
#include <vector>

namespace diffeo::cli {

struct Series {
    std::string label;
    std::vector<double> x, y;
    bool markers = false;
};

struct PlotSpec {
    std::string title;
    std::string x_label;
    std::string y_label;
    bool log_y = false;
};

/// Static line plot; non-finite points are skipped, log_y drops non-positive ones.
std::string line_plot(const PlotSpec& spec, const std::vector<Series>& series);

}  // namespace diffeo::cli
