#ifndef HSPI_MAXLP_HPP
#define HSPI_MAXLP_HPP

#include "hspi/forward_model.hpp"
#include "hspi/geometry.hpp"
#include "hspi/simulate.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

namespace hspi {

/// Sampled search space for the per-frame latent parameters. Angles are in
/// radians. Steps are recorded for error reporting.
struct LatentGrid {
    std::vector<double> thetas;
    std::vector<double> diameters;
    std::vector<double> shifts_x;
    std::vector<double> shifts_y;
    double theta_step = 0.0;
    double diameter_step = 0.0;
    double shift_step = 0.0;

    struct Index {
        int theta = 0;
        int diameter = 0;
        int shift_x = 0;
        int shift_y = 0;
    };

    std::size_t size() const { return thetas.size() * diameters.size() * shifts_x.size() * shifts_y.size(); }
    std::size_t flatten(const Index& idx) const;
    Index unflatten(std::size_t h) const;
    LatentParams at(const Index& idx) const;

    /// Throws ConfigError when any axis is empty or non-finite.
    void validate() const;
};

/// lo, lo + step, ... up to hi (inclusive within 1e-9 step).
std::vector<double> make_range(double lo, double hi, double step);

/// 0..178 deg in 2 deg steps, mean +- 2 sigma diameters in 0.5 px steps and
/// +-2 px shifts in 1 px steps.
LatentGrid default_latent_grid(const LatentConfig& latents);

struct FrameAssignment {
    LatentGrid::Index index;
    double log_likelihood = 0.0;
};

struct Assignment {
    std::vector<FrameAssignment> frames;

    double total_log_likelihood() const;
};

/// Sum over GOOD pixels of K log I - I for one frame, evaluated sparsely:
/// the -I term over all GOOD pixels, K log I only over occupied pixels.
/// Pixels with K > 0 and I = 0 use I = 1e-20.
double frame_log_likelihood(const SparseFrame& frame, const ComplexModel& model, const LatentParams& latent,
                            const DetectorGeometry& geom, const SphereReference& ref);

/// Hard assignment of every frame to its most likely grid point. Ties go to
/// the lowest flat grid index.
Assignment assign_latents(const SparseDataset& dataset, const ComplexModel& model, const LatentGrid& grid,
                          const DetectorGeometry& geom);

/// Observations of one model pixel, in scaled units where the predicted
/// count is |G + c|^2 with c = B exp(i phi) the reference term.
///
/// Zero-count observations only enter through -sum |G + c|^2, which is
/// quadratic in G, so they are folded into running sums.
class PixelObservations {
public:
    struct Positive {
        int count;
        Complex reference;
    };

    void add(int count, double reference_amplitude, double phase);

    double log_likelihood(const Complex& g) const;

    long long size() const { return n_zero_ + static_cast<long long>(positive_.size()); }
    bool empty() const { return size() == 0; }
    /// max - min of the reference phase 2 pi q.t over all observations.
    double phase_spread() const { return empty() ? 0.0 : phase_max_ - phase_min_; }
    long long total_counts() const;
    const std::vector<Positive>& positive() const { return positive_; }

private:
    std::vector<Positive> positive_;
    long long n_zero_ = 0;
    double zero_ref_norm_ = 0.0;
    Complex zero_ref_sum_{0.0, 0.0};
    double phase_min_ = 0.0;
    double phase_max_ = 0.0;
};

struct PatternSearchConfig {
    /// <= 0 selects |init|, or 1 when init is zero.
    double init_step = 0.0;
    double shrink = 0.5;
    /// <= 0 selects tol_rel * init_step.
    double tol = 0.0;
    double tol_rel = 1e-3;
    int max_iter = 200;
};

struct PatternSearchResult {
    Complex value;
    double objective = 0.0;
    int iterations = 0;
};

/// Maximises PixelObservations::log_likelihood by polling the 3x3 stencil of
/// spacing h around the incumbent; moves to the best improving point, else
/// shrinks h. Stops when h < tol or after max_iter polls. Empty observations
/// return init. Throws NumericalError on a NaN or +inf objective.
PatternSearchResult pixel_pattern_search(const PixelObservations& obs, const Complex& init,
                                         const PatternSearchConfig& cfg = {});

struct UpdateConfig {
    PatternSearchConfig search;
    int n_min = 10;
    double phase_spread_min = kPi / 4.0;
};

/// Observations of every model pixel under the assigned latents. Detector
/// pixels are binned to the nearest model pixel after rotation by -theta;
/// entries landing on non-GOOD model pixels are dropped.
std::vector<PixelObservations> collect_observations(const SparseDataset& dataset, const Assignment& assignment,
                                                    const LatentGrid& grid, const DetectorGeometry& geom);

/// C-step: independent pattern search per GOOD model pixel, initialised from
/// prev_model. Pixels with fewer than n_min observations or a phase spread
/// below phase_spread_min are flagged unreliable.
ComplexModel update_model(const SparseDataset& dataset, const Assignment& assignment, const LatentGrid& grid,
                          const DetectorGeometry& geom, const ComplexModel& prev_model, const UpdateConfig& cfg = {});

/// Same as update_model, processing pixels in the given order.
ComplexModel update_model_ordered(const std::vector<PixelObservations>& observations, const DetectorGeometry& geom,
                                  const ComplexModel& prev_model, const UpdateConfig& cfg,
                                  const std::vector<int>& pixel_order);

struct IterationLog {
    int iteration = 0;
    double log_likelihood = 0.0;
    double rms_change = 0.0;
    int n_reliable = 0;
};

struct MaxlpConfig {
    int n_iter = 20;
    std::uint64_t seed = 1;
    UpdateConfig update;
};

struct MaxlpState {
    ComplexModel model;
    Assignment assignment;
    std::vector<IterationLog> trace;
};

/// Complex Gaussian start with E|F|^2 = sum K / (n_frames n_GOOD) / scale on
/// GOOD pixels.
ComplexModel initial_model(const SparseDataset& dataset, const DetectorGeometry& geom, std::uint64_t seed);

/// Alternates assign_latents and update_model. `on_iteration` (optional) is
/// called after every iteration, e.g. for checkpointing. `resume` continues
/// from a saved state whose trace records the completed iterations.
MaxlpState maxlp_reconstruct(const SparseDataset& dataset, const LatentGrid& grid, const MaxlpConfig& cfg,
                             const std::function<void(const MaxlpState&)>& on_iteration = {},
                             std::optional<MaxlpState> resume = std::nullopt);

} // namespace hspi

#endif // HSPI_MAXLP_HPP
