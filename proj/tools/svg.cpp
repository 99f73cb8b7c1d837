#include "svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace slogan::cli {

std::string palette(int c) {
    static const char* colors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                   "#8c564b", "#e377c2", "#bcbd22", "#17becf", "#7f7f7f"};
    return colors[((c % 10) + 10) % 10];
}

namespace {

std::string fmt(double x) {
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

}  // namespace

std::string scatter_svg(const std::vector<ScatterLayer>& layers, const std::string& title, int size) {
    double lo_x = std::numeric_limits<double>::infinity(), hi_x = -lo_x, lo_y = lo_x, hi_y = -lo_x;
    for (const auto& l : layers) {
        if (l.points.rows() == 0) continue;
        if (l.points.cols() != 2) throw ShapeMismatch("scatter_svg: points must have two columns");
        lo_x = std::min(lo_x, l.points.col(0).minCoeff());
        hi_x = std::max(hi_x, l.points.col(0).maxCoeff());
        lo_y = std::min(lo_y, l.points.col(1).minCoeff());
        hi_y = std::max(hi_y, l.points.col(1).maxCoeff());
    }
    if (!std::isfinite(lo_x)) lo_x = lo_y = -1.0, hi_x = hi_y = 1.0;
    // Equal aspect ratio around the data, with a small margin.
    const double span = std::max({hi_x - lo_x, hi_y - lo_y, 1e-9}) * 1.1;
    const double cx = 0.5 * (lo_x + hi_x), cy = 0.5 * (lo_y + hi_y);
    const double pad = 40.0, plot = size - 2 * pad;
    auto px = [&](double x) { return pad + (x - cx + span / 2) / span * plot; };
    auto py = [&](double y) { return pad + (cy + span / 2 - y) / span * plot; };

    std::ostringstream s;
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size << "\" height=\"" << size
      << "\" viewBox=\"0 0 " << size << ' ' << size << "\">\n";
    s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    s << "<text x=\"" << size / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">"
      << escape(title) << "</text>\n";
    s << "<rect x=\"" << fmt(pad) << "\" y=\"" << fmt(pad) << "\" width=\"" << fmt(plot) << "\" height=\"" << fmt(plot)
      << "\" fill=\"none\" stroke=\"#444\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double t = cx - span / 2 + span * i / 4.0;
        const double u = cy - span / 2 + span * i / 4.0;
        s << "<text x=\"" << fmt(px(t)) << "\" y=\"" << fmt(pad + plot + 16)
          << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">" << fmt(t) << "</text>\n";
        s << "<text x=\"" << fmt(pad - 4) << "\" y=\"" << fmt(py(u) + 3)
          << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">" << fmt(u) << "</text>\n";
    }
    for (const auto& l : layers) {
        s << "<g fill=\"" << l.color << "\" fill-opacity=\"" << fmt(l.opacity) << "\"";
        if (l.outlined) s << " stroke=\"black\" stroke-width=\"1.5\"";
        s << ">\n";
        for (Eigen::Index i = 0; i < l.points.rows(); ++i)
            s << "<circle cx=\"" << fmt(px(l.points(i, 0))) << "\" cy=\"" << fmt(py(l.points(i, 1))) << "\" r=\""
              << fmt(l.radius) << "\"/>\n";
        s << "</g>\n";
    }
    int row = 0;
    for (const auto& l : layers) {
        if (l.label.empty()) continue;
        const double y = pad + 12 + 14 * row++;
        s << "<circle cx=\"" << fmt(pad + plot - 90) << "\" cy=\"" << fmt(y - 4) << "\" r=\"4\" fill=\"" << l.color
          << "\"/><text x=\"" << fmt(pad + plot - 82) << "\" y=\"" << fmt(y)
          << "\" font-family=\"sans-serif\" font-size=\"10\">" << escape(l.label) << "</text>\n";
    }
    s << "</svg>\n";
    return s.str();
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + path);
    out << text;
    if (!out) throw ConfigError("write failed for " + path);
}

}  // namespace slogan::cli
