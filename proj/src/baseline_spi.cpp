#include "hspi/baseline_spi.hpp"

#include "hspi/errors.hpp"
#include "hspi/forward_model.hpp"
#include "hspi/log.hpp"
#include "hspi/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

namespace hspi {

namespace {

constexpr double kFloor = 1e-300;

struct Stencil {
    int i0, j0;
    double fi, fj;
};

Stencil stencil_at(const DetectorGeometry& geom, int p, double theta)
{
    const int side = geom.side();
    const Vec2d r = rotate_coord(geom.q(p), -theta) * static_cast<double>(side);
    const double row = geom.center() + r.x();
    const double col = geom.center() + r.y();
    const double fl_r = std::floor(row);
    const double fl_c = std::floor(col);
    return {static_cast<int>(fl_r), static_cast<int>(fl_c), row - fl_r, col - fl_c};
}

} // namespace

std::vector<double> expand_tomogram(const RealGrid& model, const DetectorGeometry& geom, double theta)
{
    const auto& good = geom.good_pixels();
    std::vector<double> out(good.size());
    for (std::size_t g = 0; g < good.size(); ++g) {
        const Vec2d r = rotate_coord(geom.q(good[g]), -theta) * static_cast<double>(geom.side());
        out[g] = sample_bilinear(model, geom.center() + r.x(), geom.center() + r.y());
    }
    return out;
}

void compress_tomogram(const std::vector<double>& tomogram, double tomo_weight, const DetectorGeometry& geom,
                       double theta, RealGrid& numerator, RealGrid& denominator)
{
    const auto& good = geom.good_pixels();
    const int side = geom.side();
    for (std::size_t g = 0; g < good.size(); ++g) {
        const Stencil s = stencil_at(geom, good[g], theta);
        const double w[2][2] = {{(1 - s.fi) * (1 - s.fj), (1 - s.fi) * s.fj}, {s.fi * (1 - s.fj), s.fi * s.fj}};
        for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b) {
                const int i = s.i0 + a;
                const int j = s.j0 + b;
                if (i < 0 || j < 0 || i >= side || j >= side || w[a][b] == 0.0)
                    continue;
                numerator(i, j) += w[a][b] * tomogram[g];
                denominator(i, j) += w[a][b] * tomo_weight;
            }
    }
}

Eigen::MatrixXd emc_probabilities(const SparseDataset& dataset, const RealGrid& model,
                                  const std::vector<double>& thetas, const DetectorGeometry& geom,
                                  double* log_likelihood)
{
    const std::size_t n_theta = thetas.size();
    const std::size_t n_frames = dataset.frames.size();
    const int n_pix = geom.n_pixels();

    // Per-orientation log tomogram laid out over all pixels, plus sum W.
    std::vector<std::vector<double>> log_tomo(n_theta);
    std::vector<double> tomo_sum(n_theta, 0.0);
    parallel_for(n_theta, [&](std::size_t begin, std::size_t end) {
        for (std::size_t r = begin; r < end; ++r) {
            const auto tomo = expand_tomogram(model, geom, thetas[r]);
            log_tomo[r].assign(static_cast<std::size_t>(n_pix), 0.0);
            const auto& good = geom.good_pixels();
            double s = 0.0;
            for (std::size_t g = 0; g < good.size(); ++g) {
                s += tomo[g];
                log_tomo[r][static_cast<std::size_t>(good[g])] = std::log(std::max(tomo[g], kFloor));
            }
            tomo_sum[r] = s;
        }
    });

    Eigen::MatrixXd prob(static_cast<Eigen::Index>(n_frames), static_cast<Eigen::Index>(n_theta));
    std::vector<double> frame_ll(n_frames, 0.0);
    parallel_for(n_frames, [&](std::size_t begin, std::size_t end) {
        std::vector<double> ll(n_theta);
        for (std::size_t d = begin; d < end; ++d) {
            const SparseFrame& f = dataset.frames[d];
            for (std::size_t r = 0; r < n_theta; ++r) {
                const auto& lt = log_tomo[r];
                double v = -tomo_sum[r];
                for (auto p : f.one_indices)
                    v += lt[p];
                for (std::size_t k = 0; k < f.multi_indices.size(); ++k)
                    v += f.multi_counts[k] * lt[f.multi_indices[k]];
                ll[r] = v;
            }
            const double mx = *std::max_element(ll.begin(), ll.end());
            double z = 0.0;
            for (std::size_t r = 0; r < n_theta; ++r)
                z += std::exp(ll[r] - mx);
            for (std::size_t r = 0; r < n_theta; ++r)
                prob(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(r)) = std::exp(ll[r] - mx) / z;
            frame_ll[d] = mx + std::log(z / static_cast<double>(n_theta));
        }
    });
    if (log_likelihood) {
        double s = 0.0;
        for (double v : frame_ll)
            s += v;
        *log_likelihood = s;
    }
    return prob;
}

namespace {

double mutual_information(const Eigen::MatrixXd& prob)
{
    const double n_theta = static_cast<double>(prob.cols());
    double mi = 0.0;
    for (Eigen::Index d = 0; d < prob.rows(); ++d)
        for (Eigen::Index r = 0; r < prob.cols(); ++r) {
            const double p = prob(d, r);
            if (p > 0.0)
                mi += p * std::log(p * n_theta);
        }
    return prob.rows() > 0 ? mi / static_cast<double>(prob.rows()) : 0.0;
}

// Maximise and compress: photon-weighted tomograms merged back with the
// adjoint of the expansion.
RealGrid maximise_compress(const SparseDataset& dataset, const Eigen::MatrixXd& prob,
                           const std::vector<double>& thetas, const DetectorGeometry& geom, MaskGrid& known)
{
    const std::size_t n_theta = thetas.size();
    const int side = geom.side();
    const auto& good = geom.good_pixels();
    std::vector<std::vector<double>> photons(n_theta);
    std::vector<double> weight(n_theta, 0.0);
    parallel_for(n_theta, [&](std::size_t begin, std::size_t end) {
        for (std::size_t r = begin; r < end; ++r) {
            std::vector<double> acc(static_cast<std::size_t>(geom.n_pixels()), 0.0);
            double wsum = 0.0;
            for (std::size_t d = 0; d < dataset.frames.size(); ++d) {
                const double p = prob(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(r));
                if (p == 0.0)
                    continue;
                wsum += p;
                const SparseFrame& f = dataset.frames[d];
                for (auto q : f.one_indices)
                    acc[q] += p;
                for (std::size_t k = 0; k < f.multi_indices.size(); ++k)
                    acc[f.multi_indices[k]] += p * f.multi_counts[k];
            }
            photons[r].resize(good.size());
            for (std::size_t g = 0; g < good.size(); ++g)
                photons[r][g] = acc[static_cast<std::size_t>(good[g])];
            weight[r] = wsum;
        }
    });
    RealGrid num = RealGrid::Zero(side, side);
    RealGrid den = RealGrid::Zero(side, side);
    for (std::size_t r = 0; r < n_theta; ++r)
        compress_tomogram(photons[r], weight[r], geom, thetas[r], num, den);
    RealGrid out = RealGrid::Zero(side, side);
    known = MaskGrid::Zero(side, side);
    for (int i = 0; i < side; ++i)
        for (int j = 0; j < side; ++j)
            if (den(i, j) > 1e-12) {
                out(i, j) = num(i, j) / den(i, j);
                known(i, j) = geom.is_good(i * side + j) ? 1 : 0;
            }
    return out;
}

void check_inputs(const SparseDataset& dataset, const std::vector<double>& thetas, const DetectorGeometry& geom)
{
    if (thetas.empty())
        throw ConfigError("EMC orientation grid is empty");
    for (double t : thetas)
        if (!std::isfinite(t))
            throw ConfigError("EMC orientation grid has a non-finite angle");
    if (dataset.frames.empty() || dataset.total_photons() == 0)
        throw DataError("EMC needs a dataset with photons");
    if (dataset.meta.side_px != geom.side())
        throw DataError("dataset and geometry sides differ");
    if (dataset.meta.with_reference)
        log::warn("EMC baseline run on a dataset simulated with the reference particle");
}

} // namespace

EmcResult emc_intensity_from(const SparseDataset& dataset, const std::vector<double>& thetas,
                             const DetectorGeometry& geom, RealGrid start, int n_iter,
                             const std::function<void(const EmcIteration&)>& on_iteration)
{
    check_inputs(dataset, thetas, geom);
    if (n_iter < 1)
        throw ConfigError("EMC needs at least one iteration");
    EmcResult res;
    res.model.thetas = thetas;
    RealGrid model = std::move(start);
    for (int it = 1; it <= n_iter; ++it) {
        EmcIteration rec;
        rec.iteration = it;
        const Eigen::MatrixXd prob = emc_probabilities(dataset, model, thetas, geom, &rec.log_likelihood);
        rec.mutual_information = mutual_information(prob);
        model = maximise_compress(dataset, prob, thetas, geom, res.model.known);
        res.trace.push_back(rec);
        log::info("emc iteration " + std::to_string(it) + " logL " + std::to_string(rec.log_likelihood) + " MI "
                  + std::to_string(rec.mutual_information));
        if (on_iteration)
            on_iteration(rec);
    }
    res.model.intensity = model;
    return res;
}

EmcResult emc_intensity(const SparseDataset& dataset, const std::vector<double>& thetas, const DetectorGeometry& geom,
                        const EmcConfig& cfg, const std::function<void(const EmcIteration&)>& on_iteration)
{
    check_inputs(dataset, thetas, geom);
    const int side = geom.side();
    const double mean = static_cast<double>(dataset.total_photons())
                        / (static_cast<double>(dataset.frames.size()) * geom.n_good());
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> u(0.5, 1.5);
    RealGrid start = RealGrid::Zero(side, side);
    for (int p : geom.good_pixels())
        start(p / side, p % side) = mean * u(rng);
    return emc_intensity_from(dataset, thetas, geom, std::move(start), cfg.n_iter, on_iteration);
}

BaselineResult baseline_reconstruct(const SparseDataset& dataset, const std::vector<double>& thetas,
                                    const DetectorGeometry& geom, const BaselineConfig& cfg)
{
    BaselineResult res;
    res.emc = emc_intensity(dataset, thetas, geom, cfg.emc);
    const RealGrid& w = res.emc.model.intensity;
    res.magnitudes.grid = w.cwiseMax(0.0).cwiseSqrt().cast<Complex>();
    res.magnitudes.reliable = res.emc.model.known;
    res.magnitudes.scale = 1.0;
    res.support = estimate_support(res.magnitudes, FourierConstraint::Magnitude, cfg.support);
    DifferenceMapConfig dm = cfg.phase;
    dm.mode = FourierConstraint::Magnitude;
    res.phased = difference_map(res.magnitudes, res.support, dm);
    return res;
}

} // namespace hspi
