#include "plot.hpp"

#include "hspi/errors.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <memory>
#include <sstream>

namespace hspi::plot {

namespace {

constexpr double kWidth = 640, kHeight = 420;
constexpr double kLeft = 70, kRight = 20, kTop = 40, kBottom = 55;
const char* const kColours[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

std::string escape(const std::string& s)
{
    std::string out;
    for (char c : s) {
        switch (c) {
        case '<':
            out += "&lt;";
            break;
        case '>':
            out += "&gt;";
            break;
        case '&':
            out += "&amp;";
            break;
        default:
            out += c;
        }
    }
    return out;
}

struct Frame {
    double x0, x1, y0, y1;

    double px(double x) const { return kLeft + (x - x0) / (x1 - x0) * (kWidth - kLeft - kRight); }
    double py(double y) const { return kHeight - kBottom - (y - y0) / (y1 - y0) * (kHeight - kTop - kBottom); }
};

void open_svg(std::ostream& os, const std::string& title)
{
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
       << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
       << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
       << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << escape(title)
       << "</text>\n";
}

void axes(std::ostream& os, const Frame& f, const std::string& xl, const std::string& yl)
{
    os << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << kWidth - kLeft - kRight << "\" height=\""
       << kHeight - kTop - kBottom << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int k = 0; k <= 4; ++k) {
        const double x = f.x0 + (f.x1 - f.x0) * k / 4;
        const double y = f.y0 + (f.y1 - f.y0) * k / 4;
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.3g", x);
        os << "<text x=\"" << f.px(x) << "\" y=\"" << kHeight - kBottom + 16 << "\" text-anchor=\"middle\">" << buf
           << "</text>\n";
        std::snprintf(buf, sizeof buf, "%.3g", y);
        os << "<text x=\"" << kLeft - 6 << "\" y=\"" << f.py(y) + 4 << "\" text-anchor=\"end\">" << buf << "</text>\n";
    }
    os << "<text x=\"" << (kLeft + kWidth - kRight) / 2 << "\" y=\"" << kHeight - 12 << "\" text-anchor=\"middle\">"
       << escape(xl) << "</text>\n";
    os << "<text x=\"16\" y=\"" << (kTop + kHeight - kBottom) / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
       << (kTop + kHeight - kBottom) / 2 << ")\">" << escape(yl) << "</text>\n";
}

void save(const std::filesystem::path& path, const std::string& text)
{
    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    out << text;
    if (!out)
        throw DataError("cannot write " + path.string());
}

} // namespace

void write_line_svg(const std::filesystem::path& path, const LineChart& chart)
{
    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    std::size_t points = 0;
    for (const auto& s : chart.series)
        for (std::size_t k = 0; k < s.x.size(); ++k) {
            if (!std::isfinite(s.x[k]) || !std::isfinite(s.y[k]))
                continue;
            x0 = std::min(x0, s.x[k]);
            x1 = std::max(x1, s.x[k]);
            y0 = std::min(y0, s.y[k]);
            y1 = std::max(y1, s.y[k]);
            ++points;
        }
    if (points == 0)
        throw DataError("nothing to plot for " + path.string());
    if (chart.guide_y) {
        y0 = std::min(y0, *chart.guide_y);
        y1 = std::max(y1, *chart.guide_y);
    }
    if (x1 <= x0)
        x1 = x0 + 1;
    if (y1 <= y0)
        y1 = y0 + 1;
    const double pad = 0.05 * (y1 - y0);
    const Frame f{x0, x1, y0 - pad, y1 + pad};

    std::ostringstream os;
    open_svg(os, chart.title);
    axes(os, f, chart.x_label, chart.y_label);
    if (chart.guide_y)
        os << "<line x1=\"" << kLeft << "\" x2=\"" << kWidth - kRight << "\" y1=\"" << f.py(*chart.guide_y)
           << "\" y2=\"" << f.py(*chart.guide_y) << "\" stroke=\"grey\" stroke-dasharray=\"5,4\"/>\n";
    for (std::size_t s = 0; s < chart.series.size(); ++s) {
        const auto& ser = chart.series[s];
        const char* colour = kColours[s % std::size(kColours)];
        os << "<polyline fill=\"none\" stroke-width=\"1.5\" stroke=\"" << colour << "\" points=\"";
        for (std::size_t k = 0; k < ser.x.size(); ++k)
            if (std::isfinite(ser.x[k]) && std::isfinite(ser.y[k]))
                os << f.px(ser.x[k]) << ',' << f.py(ser.y[k]) << ' ';
        os << "\"/>\n";
        os << "<text x=\"" << kWidth - kRight - 8 << "\" y=\"" << kTop + 16 + 16 * s << "\" text-anchor=\"end\" fill=\""
           << colour << "\">" << escape(ser.name) << "</text>\n";
    }
    os << "</svg>\n";
    save(path, os.str());
}

void write_histogram_svg(const std::filesystem::path& path, const std::string& title, const std::string& x_label,
                         const std::vector<double>& edges, const std::vector<long long>& counts)
{
    if (counts.empty() || edges.size() != counts.size() + 1)
        throw DataError("malformed histogram for " + path.string());
    const long long peak = *std::max_element(counts.begin(), counts.end());
    const Frame f{edges.front(), edges.back(), 0.0, static_cast<double>(std::max(peak, 1LL)) * 1.05};
    std::ostringstream os;
    open_svg(os, title);
    axes(os, f, x_label, "frames");
    for (std::size_t k = 0; k < counts.size(); ++k) {
        const double xa = f.px(edges[k]), xb = f.px(edges[k + 1]);
        const double top = f.py(static_cast<double>(counts[k]));
        os << "<rect x=\"" << xa << "\" y=\"" << top << "\" width=\"" << std::max(xb - xa - 1, 0.5) << "\" height=\""
           << f.py(0) - top << "\" fill=\"" << kColours[0] << "\"/>\n";
    }
    os << "</svg>\n";
    save(path, os.str());
}

void write_png(const std::filesystem::path& path, const RealGrid& image, bool log_scale)
{
    if (image.size() == 0)
        throw DataError("empty image for " + path.string());
    RealGrid v = image;
    if (log_scale) {
        const double mx = v.maxCoeff();
        const double floor = mx > 0 ? mx * 1e-6 : 1e-300;
        v = v.cwiseMax(floor).array().log10().matrix();
    }
    const double lo = v.minCoeff(), hi = v.maxCoeff();
    const double span = hi > lo ? hi - lo : 1.0;

    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path());
    std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.string().c_str(), "wb"), &std::fclose);
    if (!fp)
        throw DataError("cannot write " + path.string());
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw DataError("libpng initialisation failed for " + path.string());
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw DataError("libpng failed writing " + path.string());
    }
    const auto rows = static_cast<png_uint_32>(v.rows());
    const auto cols = static_cast<png_uint_32>(v.cols());
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, cols, rows, 8, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<png_byte> row(cols);
    for (png_uint_32 i = 0; i < rows; ++i) {
        for (png_uint_32 j = 0; j < cols; ++j)
            row[j] = static_cast<png_byte>(std::lround(255.0 * (v(i, j) - lo) / span));
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

} // namespace hspi::plot
