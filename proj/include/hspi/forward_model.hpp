#ifndef HSPI_FORWARD_MODEL_HPP
#define HSPI_FORWARD_MODEL_HPP

#include "hspi/geometry.hpp"
#include "hspi/types.hpp"

#include <cmath>
#include <vector>

namespace hspi {

/// Spherical reference particle. The diameter is the nominal value; frames
/// carry their own diameter in LatentParams.
struct SphereReference {
    double diameter_px = 7.0;
    double contrast = 11.0;
};

/// Per-frame hidden variables: in-plane rotation, reference diameter and
/// reference shift (lab frame, pixels).
struct LatentParams {
    double theta = 0.0;
    double diameter_px = 7.0;
    Vec2d shift_px = Vec2d::Zero();
};

/// Complex Fourier amplitudes of the target on the detector lattice.
///
/// Rendered intensities are scale * |F|^2, so `scale` carries the fluence
/// calibration and `grid` stays in density units.
struct ComplexModel {
    ComplexGrid grid;
    MaskGrid reliable;
    double scale = 1.0;

    int side() const { return static_cast<int>(grid.rows()); }
};

/// Normalised form factor 3 (sin x - x cos x) / x^3 of a uniform ball.
template <typename Scalar>
Scalar sphere_form_factor(Scalar x)
{
    using std::abs;
    using std::cos;
    using std::sin;
    if (abs(x) < Scalar(1e-3)) {
        const Scalar x2 = x * x;
        return Scalar(1) - x2 / Scalar(10) + x2 * x2 / Scalar(280);
    }
    return Scalar(3) * (sin(x) - x * cos(x)) / (x * x * x);
}

/// Fourier amplitude of a projected uniform sphere of the given diameter,
/// weighted by its density contrast; q_mag in cycles per pixel.
template <typename Scalar>
Scalar sphere_ft(Scalar q_mag, Scalar diameter_px, Scalar contrast)
{
    const Scalar volume = Scalar(kPi / 6.0) * diameter_px * diameter_px * diameter_px;
    return contrast * volume * sphere_form_factor(Scalar(kPi) * q_mag * diameter_px);
}

template <typename Scalar>
Scalar sphere_ft(Scalar q_mag, const SphereReference& ref)
{
    return sphere_ft(q_mag, Scalar(ref.diameter_px), Scalar(ref.contrast));
}

/// |F_o + F_s(|q|, D) exp(2 pi i q.t)|^2 at a single pixel.
template <typename Scalar>
Scalar composite_intensity(const std::complex<Scalar>& object_ft, const Vec2<Scalar>& q, Scalar diameter_px,
                           const Vec2<Scalar>& shift_px, Scalar contrast)
{
    const Scalar amp = sphere_ft(q.norm(), diameter_px, contrast);
    const Scalar phase = Scalar(kTwoPi) * q.dot(shift_px);
    return std::norm(object_ft + std::polar(amp, phase));
}

/// Bilinear interpolation of real and imaginary parts at fractional pixel
/// coordinates (row, col). Neighbours outside the grid contribute zero.
Complex sample_bilinear(const ComplexGrid& grid, double row, double col);
double sample_bilinear(const RealGrid& grid, double row, double col);

/// Model values at R(-theta) q for every GOOD detector pixel, in
/// geom.good_pixels() order.
std::vector<Complex> sample_rotated(const ComplexGrid& model, const DetectorGeometry& geom, double theta);

/// Full composite intensity image for one frame; HOLE/CORNER pixels are zero.
RealGrid render_frame(const ComplexModel& model, const DetectorGeometry& geom, const LatentParams& latent,
                      const SphereReference& ref);

} // namespace hspi

#endif // HSPI_FORWARD_MODEL_HPP
