#include "svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace diffeo::cli {

namespace {

constexpr double kWidth = 480, kHeight = 300, kPad = 48;
const char* const kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string tick(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
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

std::string line_plot(const PlotSpec& spec, const std::vector<Series>& series) {
    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    auto yv = [&](double y) { return spec.log_y ? std::log10(y) : y; };
    auto usable = [&](double x, double y) { return std::isfinite(x) && std::isfinite(y) && (!spec.log_y || y > 0); };
    for (const auto& s : series) {
        for (size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
            if (!usable(s.x[i], s.y[i])) continue;
            x0 = std::min(x0, s.x[i]);
            x1 = std::max(x1, s.x[i]);
            y0 = std::min(y0, yv(s.y[i]));
            y1 = std::max(y1, yv(s.y[i]));
        }
    }
    if (!(x0 <= x1)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    if (x1 - x0 < 1e-300) x0 -= 0.5, x1 += 0.5;
    if (y1 - y0 < 1e-300) y0 -= 0.5, y1 += 0.5;
    auto px = [&](double x) { return kPad + (kWidth - 2 * kPad) * (x - x0) / (x1 - x0); };
    auto py = [&](double y) { return kHeight - kPad - (kHeight - 2 * kPad) * (yv(y) - y0) / (y1 - y0); };

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << kPad << "\" y=\"20\" font-size=\"13\">" << escape(spec.title) << "</text>\n";
    os << "<rect x=\"" << kPad << "\" y=\"" << kPad << "\" width=\"" << kWidth - 2 * kPad << "\" height=\""
       << kHeight - 2 * kPad << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int k = 0; k <= 4; ++k) {
        const double fx = x0 + (x1 - x0) * k / 4, fy = y0 + (y1 - y0) * k / 4;
        const double tx = kPad + (kWidth - 2 * kPad) * k / 4, ty = kHeight - kPad - (kHeight - 2 * kPad) * k / 4;
        os << "<text x=\"" << num(tx) << "\" y=\"" << kHeight - kPad + 16
           << "\" font-size=\"10\" text-anchor=\"middle\">" << tick(fx) << "</text>\n";
        os << "<text x=\"" << kPad - 4 << "\" y=\"" << num(ty + 3) << "\" font-size=\"10\" text-anchor=\"end\">"
           << (spec.log_y ? "1e" + tick(fy) : tick(fy)) << "</text>\n";
    }
    os << "<text x=\"" << kWidth / 2 << "\" y=\"" << kHeight - 8 << "\" font-size=\"11\" text-anchor=\"middle\">"
       << escape(spec.x_label) << "</text>\n";
    os << "<text x=\"12\" y=\"" << kHeight / 2 << "\" font-size=\"11\" transform=\"rotate(-90 12 " << kHeight / 2
       << ")\" text-anchor=\"middle\">" << escape(spec.y_label) << "</text>\n";
    for (size_t k = 0; k < series.size(); ++k) {
        const auto& s = series[k];
        const char* color = kColors[k % 5];
        os << "<polyline fill=\"none\" stroke=\"" << color << "\" points=\"";
        for (size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
            if (usable(s.x[i], s.y[i])) os << num(px(s.x[i])) << "," << num(py(s.y[i])) << " ";
        }
        os << "\"/>\n";
        if (s.markers) {
            for (size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
                if (!usable(s.x[i], s.y[i])) continue;
                os << "<circle cx=\"" << num(px(s.x[i])) << "\" cy=\"" << num(py(s.y[i])) << "\" r=\"2.5\" fill=\""
                   << color << "\"/>\n";
            }
        }
        if (!s.label.empty()) {
            os << "<text x=\"" << kWidth - kPad - 4 << "\" y=\"" << kPad + 14 + 14 * k
               << "\" font-size=\"11\" text-anchor=\"end\" fill=\"" << color << "\">" << escape(s.label)
               << "</text>\n";
        }
    }
    os << "</svg>\n";
    return os.str();
}

}  // namespace diffeo::cli
