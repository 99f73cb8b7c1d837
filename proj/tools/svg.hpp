#pragma once

#include <string>
#include <vector>

#include "slogan/numerics.hpp"

namespace slogan::cli {

struct ScatterLayer {
    Mat points;  // n x 2
    std::string color;
    double radius = 1.5;
    double opacity = 0.6;
    bool outlined = false;  // black stroke, drawn for emphasized markers
    std::string label;      // legend entry; empty = none
};

/// Color for component `c` from a ten-color qualitative palette.
std::string palette(int c);

/// Static scatter plot of 2-d layers in draw order, with axes and a legend.
/// Output depends only on the inputs (no timestamps).
std::string scatter_svg(const std::vector<ScatterLayer>& layers, const std::string& title, int size = 640);

void write_text_file(const std::string& path, const std::string& text);

}  // namespace slogan::cli
