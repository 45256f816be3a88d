#ifndef HSPI_BASELINE_SPI_HPP
#define HSPI_BASELINE_SPI_HPP

#include "hspi/geometry.hpp"
#include "hspi/phase_fill.hpp"
#include "hspi/simulate.hpp"
#include "hspi/types.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace hspi {

/// Merged diffraction intensity in photons per frame. `known` marks pixels
/// that received tomogram weight.
struct IntensityModel {
    RealGrid intensity;
    MaskGrid known;
    std::vector<double> thetas;
};

struct EmcConfig {
    int n_iter = 30;
    std::uint64_t seed = 1;
};

struct EmcIteration {
    int iteration = 0;
    /// Sum over frames of log mean_theta P(K | W, theta), up to a constant.
    double log_likelihood = 0.0;
    double mutual_information = 0.0;
};

struct EmcResult {
    IntensityModel model;
    std::vector<EmcIteration> trace;
};

/// W sampled at R(-theta) q for every GOOD pixel.
std::vector<double> expand_tomogram(const RealGrid& model, const DetectorGeometry& geom, double theta);

/// Adds bilinear weights of the tomogram positions R(-theta) q into
/// `numerator` (value * weight * tomo_weight) and `denominator`
/// (weight * tomo_weight). This is the adjoint of expand_tomogram.
void compress_tomogram(const std::vector<double>& tomogram, double tomo_weight, const DetectorGeometry& geom,
                       double theta, RealGrid& numerator, RealGrid& denominator);

/// Normalised per-frame orientation probabilities for model W.
/// Row d holds P(theta | K_d, W).
Eigen::MatrixXd emc_probabilities(const SparseDataset& dataset, const RealGrid& model,
                                  const std::vector<double>& thetas, const DetectorGeometry& geom,
                                  double* log_likelihood = nullptr);

/// Expand-maximise-compress over in-plane rotations with soft weights.
/// Throws ConfigError for an empty theta list and DataError when the
/// dataset has no photons.
EmcResult emc_intensity(const SparseDataset& dataset, const std::vector<double>& thetas, const DetectorGeometry& geom,
                        const EmcConfig& cfg = {}, const std::function<void(const EmcIteration&)>& on_iteration = {});

/// Same as emc_intensity from a given starting model (after one E-step).
EmcResult emc_intensity_from(const SparseDataset& dataset, const std::vector<double>& thetas,
                             const DetectorGeometry& geom, RealGrid start, int n_iter,
                             const std::function<void(const EmcIteration&)>& on_iteration = {});

struct BaselineConfig {
    EmcConfig emc;
    SupportConfig support;
    DifferenceMapConfig phase{FourierConstraint::Magnitude, 0.7, 500, 1};
};

struct BaselineResult {
    EmcResult emc;
    /// sqrt(intensity) with `known` as the reliability flags.
    ComplexModel magnitudes;
    SupportMask support;
    PhaseResult phased;
};

/// emc_intensity, then sqrt, support estimation and magnitude-mode
/// difference map.
BaselineResult baseline_reconstruct(const SparseDataset& dataset, const std::vector<double>& thetas,
                                    const DetectorGeometry& geom, const BaselineConfig& cfg = {});

} // namespace hspi

#endif // HSPI_BASELINE_SPI_HPP
