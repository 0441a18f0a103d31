#include "rlihf/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace rlihf::svg {

namespace {

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
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

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string tick_label(double v) {
    char buf[32];
    if (v != 0.0 && (std::fabs(v) >= 1e5 || std::fabs(v) < 1e-3)) {
        std::snprintf(buf, sizeof buf, "%.0e", v);
    } else {
        std::snprintf(buf, sizeof buf, "%g", v);
    }
    return buf;
}

void draw_panel(std::ostringstream& out, const Panel& panel, double ox, double oy, double w, double h) {
    const double left = 60, right = 12, top = 28, bottom = 44;
    const double pw = w - left - right, ph = h - top - bottom;

    double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
    double ymin = xmin, ymax = -xmin;
    for (const auto& s : panel.series) {
        for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
            const double b = i < s.band.size() ? s.band[i] : 0.0;
            xmin = std::min(xmin, s.x[i]);
            xmax = std::max(xmax, s.x[i]);
            ymin = std::min(ymin, s.y[i] - b);
            ymax = std::max(ymax, s.y[i] + b);
        }
    }
    if (!std::isfinite(xmin)) xmin = 0, xmax = 1, ymin = 0, ymax = 1;
    if (xmax == xmin) xmin -= 0.5, xmax += 0.5;
    if (ymax == ymin) ymin -= 0.5, ymax += 0.5;
    const auto yt = nice_ticks(ymin, ymax);
    const auto xt = nice_ticks(xmin, xmax);
    ymin = std::min(ymin, yt.front());
    ymax = std::max(ymax, yt.back());

    auto sx = [&](double x) { return ox + left + (x - xmin) / (xmax - xmin) * pw; };
    auto sy = [&](double y) { return oy + top + (1.0 - (y - ymin) / (ymax - ymin)) * ph; };

    out << "<g font-family=\"sans-serif\" font-size=\"11\">\n";
    out << "<text x=\"" << num(ox + left + pw / 2) << "\" y=\"" << num(oy + 18)
        << "\" text-anchor=\"middle\" font-size=\"13\">" << escape(panel.title) << "</text>\n";
    out << "<rect x=\"" << num(ox + left) << "\" y=\"" << num(oy + top) << "\" width=\"" << num(pw)
        << "\" height=\"" << num(ph) << "\" fill=\"none\" stroke=\"#333\"/>\n";
    for (double t : yt) {
        if (t < ymin || t > ymax) continue;
        out << "<line x1=\"" << num(ox + left) << "\" x2=\"" << num(ox + left + pw) << "\" y1=\"" << num(sy(t))
            << "\" y2=\"" << num(sy(t)) << "\" stroke=\"#ddd\"/>\n";
        out << "<text x=\"" << num(ox + left - 4) << "\" y=\"" << num(sy(t) + 4) << "\" text-anchor=\"end\">"
            << tick_label(t) << "</text>\n";
    }
    for (double t : xt) {
        if (t < xmin || t > xmax) continue;
        out << "<text x=\"" << num(sx(t)) << "\" y=\"" << num(oy + top + ph + 14) << "\" text-anchor=\"middle\">"
            << tick_label(t) << "</text>\n";
    }
    out << "<text x=\"" << num(ox + left + pw / 2) << "\" y=\"" << num(oy + h - 6) << "\" text-anchor=\"middle\">"
        << escape(panel.x_label) << "</text>\n";
    out << "<text transform=\"translate(" << num(ox + 14) << "," << num(oy + top + ph / 2)
        << ") rotate(-90)\" text-anchor=\"middle\">" << escape(panel.y_label) << "</text>\n";

    for (std::size_t k = 0; k < panel.series.size(); ++k) {
        const auto& s = panel.series[k];
        const char* color = kPalette[k % std::size(kPalette)];
        const std::size_t n = std::min(s.x.size(), s.y.size());
        if (s.band.size() >= n && n > 0) {
            out << "<polygon fill=\"" << color << "\" fill-opacity=\"0.15\" stroke=\"none\" points=\"";
            for (std::size_t i = 0; i < n; ++i) out << num(sx(s.x[i])) << ',' << num(sy(s.y[i] + s.band[i])) << ' ';
            for (std::size_t i = n; i-- > 0;) out << num(sx(s.x[i])) << ',' << num(sy(s.y[i] - s.band[i])) << ' ';
            out << "\"/>\n";
        }
        out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.6\" points=\"";
        for (std::size_t i = 0; i < n; ++i) out << num(sx(s.x[i])) << ',' << num(sy(s.y[i])) << ' ';
        out << "\"/>\n";
        const double ly = oy + top + 12 + 14 * static_cast<double>(k);
        out << "<line x1=\"" << num(ox + left + 8) << "\" x2=\"" << num(ox + left + 26) << "\" y1=\"" << num(ly - 4)
            << "\" y2=\"" << num(ly - 4) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
        out << "<text x=\"" << num(ox + left + 30) << "\" y=\"" << num(ly) << "\">" << escape(s.label) << "</text>\n";
    }
    out << "</g>\n";
}

std::string header(double w, double h) {
    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(w) << "\" height=\"" << num(h)
        << "\" viewBox=\"0 0 " << num(w) << ' ' << num(h) << "\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    return out.str();
}

}  // namespace

std::vector<double> nice_ticks(double lo, double hi, int target) {
    if (!(hi > lo)) return {lo};
    const double raw = (hi - lo) / std::max(1, target);
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double step = mag;
    for (double m : {1.0, 2.0, 5.0, 10.0}) {
        step = m * mag;
        if (step >= raw) break;
    }
    std::vector<double> ticks;
    const double start = std::floor(lo / step) * step;
    for (double t = start; t <= hi + step * 0.5; t += step) ticks.push_back(std::fabs(t) < step * 1e-9 ? 0.0 : t);
    return ticks;
}

std::string line_plot(const Panel& panel, double width, double height) {
    std::ostringstream out;
    out << header(width, height);
    draw_panel(out, panel, 0, 0, width, height);
    out << "</svg>\n";
    return out.str();
}

std::string panel_grid(const std::vector<Panel>& panels, int columns, double panel_width, double panel_height) {
    columns = std::max(1, columns);
    const int rows = static_cast<int>((panels.size() + columns - 1) / columns);
    std::ostringstream out;
    out << header(panel_width * columns, panel_height * std::max(rows, 1));
    for (std::size_t i = 0; i < panels.size(); ++i) {
        const double ox = panel_width * static_cast<double>(i % columns);
        const double oy = panel_height * static_cast<double>(i / columns);
        draw_panel(out, panels[i], ox, oy, panel_width, panel_height);
    }
    out << "</svg>\n";
    return out.str();
}

}  // namespace rlihf::svg
