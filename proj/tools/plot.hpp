#ifndef HSPI_TOOLS_PLOT_HPP
#define HSPI_TOOLS_PLOT_HPP

#include "hspi/types.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace hspi::plot {

struct Series {
    std::string name;
    std::vector<double> x;
    std::vector<double> y;
};

struct LineChart {
    std::string title;
    std::string x_label;
    std::string y_label;
    std::vector<Series> series;
    /// Dashed horizontal guide, e.g. the 0.5 FRC threshold.
    std::optional<double> guide_y;
};

void write_line_svg(const std::filesystem::path& path, const LineChart& chart);

void write_histogram_svg(const std::filesystem::path& path, const std::string& title, const std::string& x_label,
                         const std::vector<double>& edges, const std::vector<long long>& counts);

/// 8-bit grey PNG scaled min..max; `log_scale` maps log10(v) over six decades
/// below the maximum.
void write_png(const std::filesystem::path& path, const RealGrid& image, bool log_scale);

} // namespace hspi::plot

#endif // HSPI_TOOLS_PLOT_HPP
