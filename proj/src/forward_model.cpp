#include "hspi/forward_model.hpp"

#include "hspi/errors.hpp"

namespace hspi {

namespace {

template <typename Scalar>
Scalar bilinear(const Grid<Scalar>& grid, double row, double col)
{
    const Eigen::Index rows = grid.rows();
    const Eigen::Index cols = grid.cols();
    const double fr = std::floor(row);
    const double fc = std::floor(col);
    if (fr < -1.0 || fc < -1.0 || fr > static_cast<double>(rows) || fc > static_cast<double>(cols))
        return Scalar(0);
    const auto r0 = static_cast<Eigen::Index>(fr);
    const auto c0 = static_cast<Eigen::Index>(fc);
    const double wr = row - fr;
    const double wc = col - fc;

    auto at = [&](Eigen::Index r, Eigen::Index c) -> Scalar {
        if (r < 0 || c < 0 || r >= rows || c >= cols)
            return Scalar(0);
        return grid(r, c);
    };
    return at(r0, c0) * ((1.0 - wr) * (1.0 - wc)) + at(r0, c0 + 1) * ((1.0 - wr) * wc)
        + at(r0 + 1, c0) * (wr * (1.0 - wc)) + at(r0 + 1, c0 + 1) * (wr * wc);
}

} // namespace

Complex sample_bilinear(const ComplexGrid& grid, double row, double col) { return bilinear(grid, row, col); }

double sample_bilinear(const RealGrid& grid, double row, double col) { return bilinear(grid, row, col); }

std::vector<Complex> sample_rotated(const ComplexGrid& model, const DetectorGeometry& geom, double theta)
{
    const double side = geom.side();
    const double c = geom.center();
    std::vector<Complex> out;
    out.reserve(geom.good_pixels().size());
    for (int p : geom.good_pixels()) {
        const Vec2d qm = rotate_coord(geom.q(p), -theta);
        out.push_back(sample_bilinear(model, c + qm.x() * side, c + qm.y() * side));
    }
    return out;
}

RealGrid render_frame(const ComplexModel& model, const DetectorGeometry& geom, const LatentParams& latent,
                      const SphereReference& ref)
{
    if (model.side() != geom.side() || model.grid.cols() != geom.side())
        throw ConfigError("model and detector dimensions differ");

    const std::vector<Complex> rotated = sample_rotated(model.grid, geom, latent.theta);
    RealGrid out = RealGrid::Zero(geom.side(), geom.side());
    const auto& good = geom.good_pixels();
    for (std::size_t g = 0; g < good.size(); ++g) {
        const int p = good[g];
        const double intensity
            = composite_intensity(rotated[g], geom.q(p), latent.diameter_px, latent.shift_px, ref.contrast);
        out(p / geom.side(), p % geom.side()) = intensity * model.scale;
    }
    return out;
}

} // namespace hspi
