#include "hspi/geometry.hpp"

#include "hspi/errors.hpp"

#include <string>

namespace hspi {

DetectorGeometry build_detector(int side_px, double aperture_radius_px, double hole_radius_px)
{
    if (side_px < 3 || side_px % 2 == 0)
        throw ConfigError("detector side must be odd and >= 3, got " + std::to_string(side_px));
    if (!(hole_radius_px >= 0.0))
        throw ConfigError("hole radius must be non-negative");
    if (!(hole_radius_px < aperture_radius_px))
        throw ConfigError("hole radius must be smaller than the aperture radius");
    if (aperture_radius_px > side_px / 2.0)
        throw ConfigError("aperture radius exceeds half the detector side");

    DetectorGeometry g;
    g.side_ = side_px;
    g.center_ = (side_px - 1) / 2.0;
    g.aperture_radius_ = aperture_radius_px;
    g.hole_radius_ = hole_radius_px;

    const int n = side_px * side_px;
    const int c = (side_px - 1) / 2;
    g.mask_.resize(static_cast<std::size_t>(n));
    g.q_.resize(static_cast<std::size_t>(n));
    g.good_index_.assign(static_cast<std::size_t>(n), -1);

    for (int i = 0; i < side_px; ++i) {
        for (int j = 0; j < side_px; ++j) {
            const int p = i * side_px + j;
            const int di = i - c;
            const int dj = j - c;
            // Integer offsets keep the classification exactly centro-symmetric.
            const double r = std::sqrt(static_cast<double>(di * di + dj * dj));
            PixelClass cls = PixelClass::Good;
            if (r < hole_radius_px)
                cls = PixelClass::Hole;
            else if (r >= aperture_radius_px)
                cls = PixelClass::Corner;
            g.mask_[static_cast<std::size_t>(p)] = cls;
            g.q_[static_cast<std::size_t>(p)] = Vec2d(di, dj) / static_cast<double>(side_px);
            switch (cls) {
            case PixelClass::Good:
                g.good_index_[static_cast<std::size_t>(p)] = static_cast<int>(g.good_.size());
                g.good_.push_back(p);
                break;
            case PixelClass::Hole: ++g.n_hole_; break;
            case PixelClass::Corner: ++g.n_corner_; break;
            }
        }
    }
    return g;
}

MaskGrid DetectorGeometry::good_mask() const
{
    MaskGrid m = MaskGrid::Zero(side_, side_);
    for (int p : good_)
        m(p / side_, p % side_) = 1;
    return m;
}

} // namespace hspi
