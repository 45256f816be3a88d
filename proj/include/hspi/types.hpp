#ifndef HSPI_TYPES_HPP
#define HSPI_TYPES_HPP

#include <Eigen/Core>

#include <complex>
#include <cstdint>

namespace hspi {

// Image-like grids are row-major so that flat pixel index p = i * side + j
// matches the on-disk layout.
template <typename Scalar>
using Grid = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using Vec2 = Eigen::Matrix<Scalar, 2, 1>;

using Complex = std::complex<double>;
using RealGrid = Grid<double>;
using ComplexGrid = Grid<Complex>;
using MaskGrid = Grid<std::uint8_t>;
using Vec2d = Vec2<double>;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

inline double deg_to_rad(double deg) { return deg * kPi / 180.0; }
inline double rad_to_deg(double rad) { return rad * 180.0 / kPi; }

} // namespace hspi

#endif // HSPI_TYPES_HPP
