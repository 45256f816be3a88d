#ifndef HSPI_PHASE_FILL_HPP
#define HSPI_PHASE_FILL_HPP

#include "hspi/forward_model.hpp"
#include "hspi/types.hpp"

#include <cstdint>
#include <vector>

namespace hspi {

/// Real-space support constraint.
struct SupportMask {
    MaskGrid mask;

    double area_fraction() const;
    int n_components() const;
};

/// What P_M enforces at reliable pixels.
enum class FourierConstraint {
    /// Replace with the known complex value.
    Complex,
    /// Keep the current phase, impose the known modulus.
    Magnitude,
};

struct SupportConfig {
    /// Band in units of q_max, where q_max is the largest |q| on the grid edge.
    double q_lo_frac = 0.15;
    double q_hi_frac = 0.5;
    double threshold_frac = 0.05;
    /// Gaussian smoothing of the band-passed image before thresholding, px.
    double smooth_sigma_px = 1.0;
    double max_area_fraction = 0.25;
};

/// Support from moderate-q data.
///
/// The band is Hann-tapered. Complex mode thresholds the smoothed dark-field
/// image |IFT(F band)|.
/// Magnitude mode thresholds the band-limited autocorrelation IFT(|F|^2 band)
/// sampled at twice the radius, which gives a centred support of the
/// object's size. Both are morphologically closed. Throws DataError when the
/// result is empty or covers max_area_fraction or more of the grid.
SupportMask estimate_support(const ComplexModel& model, FourierConstraint mode, const SupportConfig& cfg = {});

/// Disc-shaped support of the given radius about the grid centre.
SupportMask disc_support(int side, double radius_px);

/// Support of a density: pixels above threshold_frac * max, dilated by
/// `dilate_px` pixels.
SupportMask support_from_density(const RealGrid& density, double threshold_frac = 1e-6, int dilate_px = 0);

struct DifferenceMapConfig {
    FourierConstraint mode = FourierConstraint::Complex;
    double beta = 0.7;
    int n_iter = 500;
    std::uint64_t seed = 1;
};

struct PhaseResult {
    /// P_S(P_M(x)) at the iterate with the smallest error.
    RealGrid density;
    /// Known values at reliable pixels, transform of `density` elsewhere.
    ComplexModel filled;
    std::vector<double> error_trace;
    double best_error = 0.0;
    int best_iteration = 0;
    bool diverged = false;
};

/// Difference-map phase retrieval
///   x <- x + beta [P_S(2 P_M(x) - x) - P_M(x)]
/// with P_M acting on the reliable pixels of `known` only and P_S zeroing
/// outside the support and clipping negative density. The error metric is
/// the update norm ||P_S(2 P_M(x) - x) - P_M(x)|| relative to ||P_M(x)||.
/// Stops early, flagging `diverged`, once the error stays above 10x its
/// minimum for 50 consecutive iterations.
PhaseResult difference_map(const ComplexModel& known, const SupportMask& support, const DifferenceMapConfig& cfg = {});

} // namespace hspi

#endif // HSPI_PHASE_FILL_HPP
