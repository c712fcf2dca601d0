#pragma once

#include <charconv>
#include <cmath>
#include <sstream>
#include <string>
#include <string_view>

namespace judgeagg {

/// Shortest round-trip decimal form of a double; tables and chart value
/// labels share this formatter so the two always agree byte for byte.
inline std::string format_double(double v) {
    char buf[40];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

/// Fixed low-precision form for coordinates and axis ticks.
inline std::string format_coord(double v) {
    char buf[40];
    auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, 2);
    return std::string(buf, res.ptr);
}

inline std::string xml_escape(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    for (char c : text) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out.push_back(c);
        }
    }
    return out;
}

/// Append-only SVG document builder; just enough for static report charts.
class SvgDocument {
public:
    SvgDocument(double width, double height) : width_(width), height_(height) {}

    void line(double x1, double y1, double x2, double y2, std::string_view stroke,
              double stroke_width = 1.0) {
        body_ << "  <line x1=\"" << format_coord(x1) << "\" y1=\"" << format_coord(y1)
              << "\" x2=\"" << format_coord(x2) << "\" y2=\"" << format_coord(y2)
              << "\" stroke=\"" << stroke << "\" stroke-width=\""
              << format_coord(stroke_width) << "\"/>\n";
    }

    void rect(double x, double y, double w, double h, std::string_view fill) {
        body_ << "  <rect x=\"" << format_coord(x) << "\" y=\"" << format_coord(y)
              << "\" width=\"" << format_coord(w) << "\" height=\"" << format_coord(h)
              << "\" fill=\"" << fill << "\"/>\n";
    }

    void circle(double cx, double cy, double r, std::string_view fill) {
        body_ << "  <circle cx=\"" << format_coord(cx) << "\" cy=\"" << format_coord(cy)
              << "\" r=\"" << format_coord(r) << "\" fill=\"" << fill << "\"/>\n";
    }

    void polyline(const std::string& points, std::string_view stroke,
                  double stroke_width = 1.5) {
        body_ << "  <polyline points=\"" << points << "\" fill=\"none\" stroke=\"" << stroke
              << "\" stroke-width=\"" << format_coord(stroke_width) << "\"/>\n";
    }

    void text(double x, double y, std::string_view content, double size = 11.0,
              std::string_view anchor = "start", std::string_view fill = "#333333") {
        body_ << "  <text x=\"" << format_coord(x) << "\" y=\"" << format_coord(y)
              << "\" font-size=\"" << format_coord(size)
              << "\" font-family=\"sans-serif\" text-anchor=\"" << anchor << "\" fill=\""
              << fill << "\">" << xml_escape(content) << "</text>\n";
    }

    std::string str() const {
        std::ostringstream out;
        out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
            << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << format_coord(width_)
            << "\" height=\"" << format_coord(height_) << "\" viewBox=\"0 0 "
            << format_coord(width_) << " " << format_coord(height_) << "\">\n"
            << "  <rect x=\"0\" y=\"0\" width=\"" << format_coord(width_) << "\" height=\""
            << format_coord(height_) << "\" fill=\"#ffffff\"/>\n"
            << body_.str() << "</svg>\n";
        return out.str();
    }

private:
    double width_;
    double height_;
    std::ostringstream body_;
};

/// Series colors in a fixed rotation.
inline std::string_view series_color(std::size_t index) {
    static constexpr std::string_view kColors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                                   "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};
    return kColors[index % (sizeof(kColors) / sizeof(kColors[0]))];
}

}  // namespace judgeagg
