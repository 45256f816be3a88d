#ifndef HSPI_CONFIG_HPP
#define HSPI_CONFIG_HPP

#include "hspi/baseline_spi.hpp"
#include "hspi/maxlp.hpp"
#include "hspi/metrics.hpp"
#include "hspi/object_gen.hpp"
#include "hspi/phase_fill.hpp"
#include "hspi/simulate.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

namespace hspi {

enum class ObjectKind { Homogeneous, TwoState, Continuous };

struct GeometrySection {
    int side_px = 185;
    double aperture_radius_px = 92.5;
    double hole_radius_px = 4.0;
};

struct ObjectSection {
    ObjectKind kind = ObjectKind::Homogeneous;
    TargetSpec target;
    TargetSpec subunit{185, 20, 1.5, 3.0, 5.0, 1.0, 0};
    Vec2d subunit_offset_px = Vec2d(8.0, 0.0);
    double subunit_sigma_px = 0.5;
    /// Optional external density (raw float64 stem) replacing the generator.
    std::optional<std::filesystem::path> density_file;
};

struct ReferenceSection {
    double mean_diameter_px = 7.0;
    double sigma_diameter_px = 0.5;
    double contrast = 11.0;
};

struct SimulateSection {
    int n_frames = 1000;
    double photons_per_frame = 1e4;
    double sigma_shift_px = 1.0;
    bool with_reference = true;
    /// Also write a reference-free dataset for the baseline arm.
    bool baseline_dataset = false;
    int n_probe = 64;
};

struct LatentGridSection {
    double theta_step_deg = 2.0;
    /// Empty means mean +- 2 sigma of the reference section.
    std::optional<double> diameter_min_px;
    std::optional<double> diameter_max_px;
    double diameter_step_px = 0.5;
    double shift_max_px = 2.0;
    double shift_step_px = 1.0;
};

struct MaxlpSection {
    int n_iter = 20;
    int n_min = 10;
    double phase_spread_min = kPi / 4.0;
    double shrink = 0.5;
    double tol_rel = 1e-3;
    int max_polls = 200;
};

struct PhaseSection {
    double beta = 0.7;
    int n_iter = 500;
    double q_lo_frac = 0.15;
    double q_hi_frac = 0.5;
    double threshold_frac = 0.05;
    double smooth_sigma_px = 1.0;
};

struct BaselineSection {
    int n_iter = 30;
    double theta_step_deg = 2.0;
};

struct MetricsSection {
    double ring_width_px = 1.0;
    double align_step_deg = 1.0;
    int histogram_bins = 41;
};

/// Whole-experiment configuration. Relative paths are resolved against the
/// directory holding the config file.
struct RunConfig {
    std::uint64_t seed = 0;
    std::filesystem::path base_dir;
    std::filesystem::path output_dir;
    GeometrySection geometry;
    ObjectSection object;
    ReferenceSection reference;
    SimulateSection simulate;
    LatentGridSection latent_grid;
    MaxlpSection maxlp;
    PhaseSection phase;
    BaselineSection baseline;
    MetricsSection metrics;

    DetectorGeometry detector() const;
    LatentConfig latent_config() const;
    LatentGrid latent_grid_values() const;
    SimulationConfig simulation(bool with_reference) const;
    MaxlpConfig maxlp_config() const;
    SupportConfig support_config() const;
    DifferenceMapConfig phase_config(FourierConstraint mode) const;
    std::vector<double> baseline_thetas() const;
    EmcConfig emc_config() const;

    /// Replaces the run seed and every seed derived from it.
    void set_seed(std::uint64_t seed);

    /// Seed of a pipeline stage, derived from the run seed.
    std::uint64_t stage_seed(std::uint64_t stage) const;
};

/// Parses TOML text. Unknown sections or keys, a missing seed, wrong types
/// and out-of-range values raise ConfigError.
RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir);
RunConfig load_config(const std::filesystem::path& path);

/// Fully resolved configuration as TOML.
std::string dump_config(const RunConfig& cfg);

std::string to_string(ObjectKind kind);

} // namespace hspi

#endif // HSPI_CONFIG_HPP
