#ifndef HSPI_SIMULATE_HPP
#define HSPI_SIMULATE_HPP

#include "hspi/forward_model.hpp"
#include "hspi/geometry.hpp"
#include "hspi/object_gen.hpp"

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

namespace hspi {

struct LatentConfig {
    double mean_diameter_px = 7.0;
    double sigma_diameter_px = 0.5;
    double sigma_shift_px = 1.0;
};

/// Photon counts of one frame. Single-photon pixels are stored as bare
/// indices; pixels with two or more photons carry an explicit count.
struct SparseFrame {
    std::vector<std::uint32_t> one_indices;
    std::vector<std::uint32_t> multi_indices;
    std::vector<std::int32_t> multi_counts;

    long long total_photons() const;
    bool empty() const { return one_indices.empty() && multi_indices.empty(); }
};

struct DatasetMeta {
    int side_px = 0;
    double aperture_radius_px = 0.0;
    double hole_radius_px = 0.0;
    double contrast = 11.0;
    LatentConfig latents;
    double target_photons = 0.0;
    double scale = 1.0;
    bool with_reference = true;
    std::uint64_t seed = 0;
};

struct SparseDataset {
    DatasetMeta meta;
    std::vector<SparseFrame> frames;

    DetectorGeometry geometry() const;
    long long total_photons() const;
};

/// Ground truth for one frame.
struct FrameTruth {
    LatentParams latent;
    int state = -1;
    Vec2d subunit_offset_px = Vec2d::Zero();
};

/// Where per-frame target densities come from: a fixed object, or a rigid
/// base plus a moving subunit re-drawn every frame.
struct TargetSource {
    RealGrid base;
    std::optional<RealGrid> subunit;
    HeterogeneitySpec heterogeneity;

    bool heterogeneous() const { return subunit.has_value(); }
};

/// Per-frame generator: splitmix64(seed ^ frame_index) seeds an mt19937_64,
/// so each frame's stream is independent of scheduling.
std::mt19937_64 frame_rng(std::uint64_t seed, std::uint64_t frame_index);

/// theta ~ U[0, 2 pi), D ~ N(mean, sigma^2) truncated to D > 0,
/// t ~ N(0, sigma_t^2) per axis. Zero sigmas give the mean exactly.
LatentParams sample_latents(std::mt19937_64& rng, const LatentConfig& cfg);

/// Independent Poisson draw per GOOD pixel of `intensity`.
/// Throws NumericalError on negative or non-finite intensity.
SparseFrame poisson_sample(const RealGrid& intensity, const DetectorGeometry& geom, std::mt19937_64& rng);

struct SimulationConfig {
    int n_frames = 1000;
    double target_photons = 1e4;
    std::uint64_t seed = 1;
    bool with_reference = true;
    LatentConfig latents;
    double contrast = 11.0;
    int n_probe = 64;
};

/// Scale such that the mean (over n_probe latent and state draws) of the
/// summed GOOD-pixel intensity equals target_photons. Probe draws use their
/// own stream derived from `seed`.
double calibrate_scale(const TargetSource& source, const DetectorGeometry& geom, const SimulationConfig& cfg);

struct SimulationResult {
    SparseDataset dataset;
    std::vector<FrameTruth> truth;
};

SimulationResult generate_dataset(const TargetSource& source, const DetectorGeometry& geom,
                                  const SimulationConfig& cfg);

} // namespace hspi

#endif // HSPI_SIMULATE_HPP
