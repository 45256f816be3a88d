#ifndef HSPI_TESTS_PIPELINE_HPP
#define HSPI_TESTS_PIPELINE_HPP

#include "hspi/baseline_spi.hpp"
#include "hspi/maxlp.hpp"
#include "hspi/metrics.hpp"
#include "hspi/object_gen.hpp"
#include "hspi/phase_fill.hpp"
#include "hspi/simulate.hpp"

#include <optional>

namespace hspi::acceptance {

/// Detector and sampling for one tier. FRC radii in the reduced tier are
/// scaled by the aperture ratio; the beam stop keeps its pixel radius since
/// interpolation error next to it depends on pixels, not on q.
struct Scale {
    int side_px;
    double aperture_px;
    double hole_px;

    /// Converts a ring radius quoted for the full 185 px detector.
    double ring(double radius_at_full) const { return radius_at_full * aperture_px / 92.5; }
};

inline constexpr Scale kFull{185, 92.5, 4.0};
inline constexpr Scale kReduced{97, 48.5, 4.0};

struct Target {
    RealGrid base;
    std::optional<RealGrid> subunit;
    HeterogeneitySpec heterogeneity;
    /// What a perfect reconstruction converges to.
    RealGrid average;
};

Target homogeneous_target(const Scale& s, std::uint64_t seed);
Target heterogeneous_target(const Scale& s, HeterogeneityMode mode, const TargetSpec& subunit_spec,
                            const Vec2d& offset_px, std::uint64_t seed);

struct HoloRun {
    DetectorGeometry geom;
    SimulationResult sim;
    LatentGrid grid;
    MaxlpState state;
    ComplexModel truth;
    Alignment alignment;
    ComplexModel aligned;
    FrcCurve frc;
    Resolution resolution;
    LatentErrors errors;
    double seconds = 0.0;
};

HoloRun run_holographic(const Scale& s, const Target& t, int n_frames, double photons, int n_iter,
                        std::uint64_t seed);

struct BaselineRun {
    DetectorGeometry geom;
    BaselineResult result;
    Alignment alignment;
    RealGrid aligned_density;
    FrcCurve frc;
    Resolution resolution;
    double seconds = 0.0;
};

BaselineRun run_baseline(const Scale& s, const Target& t, int n_frames, double photons, int n_iter,
                         std::uint64_t seed);

} // namespace hspi::acceptance

#endif // HSPI_TESTS_PIPELINE_HPP
