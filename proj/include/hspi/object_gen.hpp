#ifndef HSPI_OBJECT_GEN_HPP
#define HSPI_OBJECT_GEN_HPP

#include "hspi/forward_model.hpp"
#include "hspi/geometry.hpp"
#include "hspi/types.hpp"

#include <cstdint>
#include <random>

namespace hspi {

/// Random agglomerate of projected spheres ("blobs").
struct TargetSpec {
    int side_px = 185;
    int n_blobs = 100;
    double blob_radius_min_px = 2.0;
    double blob_radius_max_px = 5.0;
    /// Radius of the disc that contains every blob.
    double extent_px = 17.5;
    double density = 1.0;
    std::uint64_t seed = 1;
};

/// Analytic integral of a projected sphere of radius a and unit density.
inline double blob_volume(double radius_px) { return 4.0 / 3.0 * kPi * radius_px * radius_px * radius_px; }

/// Adds density * 2 sqrt(a^2 - |r - center|^2) to `grid`, integrating each
/// pixel with a 5x5 sub-sample so the discrete sum tracks the analytic volume.
void add_projected_sphere(RealGrid& grid, const Vec2d& center, double radius_px, double density);

/// Sum of n_blobs projected spheres with radii uniform in [min, max] and
/// centres uniform in the disc of radius (extent - radius) about the grid
/// centre. Deterministic for a fixed spec.
RealGrid random_blob_object(const TargetSpec& spec);

enum class HeterogeneityMode { TwoState, Continuous };

/// Moving subunit parameters. `offset_px` is the nominal (state A) offset of
/// the subunit from the grid centre; state B sits at -offset_px.
struct HeterogeneitySpec {
    HeterogeneityMode mode = HeterogeneityMode::TwoState;
    Vec2d offset_px = Vec2d(8.0, 0.0);
    double sigma_px = 0.5;
};

/// Subunit grid (centred) shifted by `offset_px` with bilinear splatting.
/// Throws DataError when any non-zero pixel would leave the grid.
RealGrid place_subunit(const RealGrid& subunit, const Vec2d& offset_px);

struct VariantDraw {
    RealGrid density;
    /// 0 = state A, 1 = state B, -1 for continuous draws.
    int state = -1;
    /// Offset actually applied to the subunit.
    Vec2d offset_px = Vec2d::Zero();
};

/// base + subunit placed for a forced two-state selection (0 = A, 1 = B).
RealGrid two_state_variant(const RealGrid& base, const RealGrid& subunit, const HeterogeneitySpec& spec, int state);

/// base + subunit placed at offset_px + displacement.
RealGrid continuous_variant(const RealGrid& base, const RealGrid& subunit, const HeterogeneitySpec& spec,
                            const Vec2d& displacement_px);

/// Random draw: TWO_STATE picks A or B with probability 1/2; CONTINUOUS
/// displaces by N(0, sigma^2) per axis.
VariantDraw heterogeneous_variant(const RealGrid& base, const RealGrid& subunit, const HeterogeneitySpec& spec,
                                  std::mt19937_64& rng);

/// Real-space average over the variant distribution. TWO_STATE is exact;
/// CONTINUOUS integrates the Gaussian displacement with a 0.05 px quadrature.
RealGrid average_structure(const RealGrid& base, const RealGrid& subunit, const HeterogeneitySpec& spec);

/// Centred DFT of a density. All pixels flagged reliable, scale 1.
ComplexModel density_to_model(const RealGrid& density);

/// As above, with reliability restricted to GOOD pixels of `geom`.
ComplexModel density_to_model(const RealGrid& density, const DetectorGeometry& geom);

} // namespace hspi

#endif // HSPI_OBJECT_GEN_HPP
