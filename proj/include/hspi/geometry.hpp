#ifndef HSPI_GEOMETRY_HPP
#define HSPI_GEOMETRY_HPP

#include "hspi/types.hpp"

#include <cmath>
#include <cstdint>
#include <vector>

namespace hspi {

enum class PixelClass : std::uint8_t { Good = 0, Hole = 1, Corner = 2 };

/// Square detector / model lattice with an exact central pixel.
///
/// Pixel (i, j) has flat index p = i * side + j and momentum transfer
/// q = ((i - c), (j - c)) / side in cycles per real-space pixel, where
/// c = (side - 1) / 2. The same lattice indexes the real-space grids.
class DetectorGeometry {
public:
    DetectorGeometry() = default;

    int side() const { return side_; }
    int n_pixels() const { return side_ * side_; }
    double center() const { return center_; }
    double aperture_radius() const { return aperture_radius_; }
    double hole_radius() const { return hole_radius_; }

    /// q_max in cycles per pixel, i.e. aperture radius / side.
    double q_max() const { return aperture_radius_ / side_; }

    PixelClass pixel_class(int p) const { return mask_[static_cast<std::size_t>(p)]; }
    bool is_good(int p) const { return pixel_class(p) == PixelClass::Good; }
    const std::vector<PixelClass>& mask() const { return mask_; }

    Vec2d q(int p) const { return q_[static_cast<std::size_t>(p)]; }
    double radius_px(int p) const { return q(p).norm() * side_; }

    /// Flat indices of GOOD pixels, ascending.
    const std::vector<int>& good_pixels() const { return good_; }
    /// Position of p in good_pixels(), or -1 for HOLE/CORNER pixels.
    int good_index(int p) const { return good_index_[static_cast<std::size_t>(p)]; }

    int n_good() const { return static_cast<int>(good_.size()); }
    int n_hole() const { return n_hole_; }
    int n_corner() const { return n_corner_; }

    /// Per-pixel GOOD flag as a grid (1 = GOOD).
    MaskGrid good_mask() const;

    friend DetectorGeometry build_detector(int side_px, double aperture_radius_px, double hole_radius_px);

private:
    int side_ = 0;
    double center_ = 0.0;
    double aperture_radius_ = 0.0;
    double hole_radius_ = 0.0;
    std::vector<PixelClass> mask_;
    std::vector<Vec2d> q_;
    std::vector<int> good_;
    std::vector<int> good_index_;
    int n_hole_ = 0;
    int n_corner_ = 0;
};

/// Throws ConfigError for an even or too-small side, or inconsistent radii.
DetectorGeometry build_detector(int side_px, double aperture_radius_px, double hole_radius_px);

/// Counter-clockwise rotation of a 2-vector by theta radians.
template <typename Scalar>
Vec2<Scalar> rotate_coord(const Vec2<Scalar>& q, Scalar theta)
{
    using std::cos;
    using std::sin;
    const Scalar c = cos(theta);
    const Scalar s = sin(theta);
    return Vec2<Scalar>(c * q.x() - s * q.y(), s * q.x() + c * q.y());
}

} // namespace hspi

#endif // HSPI_GEOMETRY_HPP
