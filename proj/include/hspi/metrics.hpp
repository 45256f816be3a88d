#ifndef HSPI_METRICS_HPP
#define HSPI_METRICS_HPP

#include "hspi/forward_model.hpp"
#include "hspi/maxlp.hpp"
#include "hspi/simulate.hpp"
#include "hspi/types.hpp"

#include <optional>
#include <string>
#include <vector>

namespace hspi {

struct FrcCurve {
    double ring_width_px = 1.0;
    int side_px = 0;
    /// Ring centres in pixels and in cycles per pixel.
    std::vector<double> radius_px;
    std::vector<double> q;
    std::vector<double> value;
    std::vector<long long> n_pixels;
    /// False for rings with no usable pixels; their value is 0.
    std::vector<bool> valid;

    std::size_t size() const { return value.size(); }
};

/// Ring-wise Re{sum A conj(B)} / sqrt(sum |A|^2 sum |B|^2) over pixels
/// reliable in both models (and set in `mask`, if given). Ring k collects
/// pixels whose radius rounds to k ring widths.
FrcCurve frc(const ComplexModel& a, const ComplexModel& b, double ring_width_px = 1.0,
             const MaskGrid* mask = nullptr);

struct Resolution {
    double radius_px = 0.0;
    double q = 0.0;
    /// Set when the curve starts below 0.5.
    bool flagged = false;
    /// Set when the curve never drops below 0.5.
    bool saturated = false;
};

/// First downward crossing of 0.5, linearly interpolated between ring
/// centres. Invalid rings are skipped. Throws DataError for an empty curve.
Resolution resolution_at_half(const FrcCurve& curve);

struct Alignment {
    /// Rotation alpha with recon ~ R(alpha) truth, radians.
    double theta = 0.0;
    /// Point inversion applied before rotation (magnitude mode only).
    bool inverted = false;
    /// Real-space shift applied after rotation, pixels.
    Vec2d shift_px = Vec2d::Zero();
    double correlation = 0.0;
};

struct AlignConfig {
    /// Candidate spacing in degrees for the exhaustive stage.
    double step_deg = 1.0;
    double tol_deg = 0.1;
    /// Search inversion too, with rotations over [0, 180) only.
    bool magnitude_mode = false;
    /// Largest translation considered, pixels.
    int max_shift_px = 12;
};

/// Pearson correlation of two grids, optionally within a mask.
double real_correlation(const RealGrid& a, const RealGrid& b, const MaskGrid* mask = nullptr);

/// rho'(r) = rho(c + R(-alpha)(r - c)), bilinear.
RealGrid rotate_density(const RealGrid& density, double alpha);
/// rho'(r) = rho(2c - r).
RealGrid invert_density(const RealGrid& density);
/// Shift by a real vector via a Fourier phase ramp.
RealGrid shift_density(const RealGrid& density, const Vec2d& shift_px);

/// Undoes `al` on a density: inversion, rotation by -theta, then shift.
RealGrid apply_alignment(const RealGrid& recon, const Alignment& al);
/// Same transform in Fourier space: F'(q) = F(+-R(theta) q) exp(-2 pi i q.s).
ComplexModel apply_alignment(const ComplexModel& recon, const Alignment& al);

/// Best rotation (and inversion in magnitude mode) and translation mapping
/// recon onto truth, by exhaustive candidates then golden-section refinement.
Alignment align_global(const RealGrid& recon, const RealGrid& truth, const AlignConfig& cfg = {});

/// Real-space density of a model: Re IFT of the reliable values.
RealGrid model_density(const ComplexModel& model);

/// align_global on the densities of two models, with the truth restricted
/// to the pixels reliable in `recon` so both images share one band.
Alignment align_models(const ComplexModel& recon, const ComplexModel& truth, const AlignConfig& cfg = {});

struct ErrorStats {
    std::vector<double> values;
    double mean = 0.0;
    double sigma = 0.0;
};

struct LatentErrors {
    ErrorStats theta_deg;
    ErrorStats diameter_px;
    ErrorStats shift_x_px;
    ErrorStats shift_y_px;
    /// Fraction of frames whose prediction was the Friedel twin.
    double flipped_fraction = 0.0;
};

/// Errors of assigned latents against the truth, given the model's global
/// rotation `theta_offset` (and translation `model_shift`) from alignment.
/// Orientation errors are wrapped to (-90, 90] deg; a 180 deg mismatch
/// selects the Friedel twin, which negates the predicted shift.
/// Throws DataError on a frame-count mismatch.
LatentErrors latent_errors(const Assignment& assignment, const LatentGrid& grid, const std::vector<FrameTruth>& truth,
                           double theta_offset, const Vec2d& model_shift = Vec2d::Zero());

struct Histogram {
    std::vector<double> edges;
    std::vector<long long> counts;
};

Histogram histogram(const std::vector<double>& values, double lo, double hi, int n_bins);

/// Population standard deviation.
ErrorStats summarize(std::vector<double> values);

/// Wrap an angle in degrees into (-180, 180].
double wrap_deg_180(double deg);

/// Full width at half maximum of a 1-D profile around its peak, with linear
/// interpolation at the half-level crossings.
double profile_fwhm(const std::vector<double>& profile);

} // namespace hspi

#endif // HSPI_METRICS_HPP
