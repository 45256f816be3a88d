#include "hspi/simulate.hpp"

#include "hspi/errors.hpp"
#include "hspi/fft.hpp"
#include "hspi/log.hpp"
#include "hspi/parallel.hpp"

#include <cmath>
#include <numeric>
#include <string>

namespace hspi {

long long SparseFrame::total_photons() const
{
    long long n = static_cast<long long>(one_indices.size());
    for (auto c : multi_counts)
        n += c;
    return n;
}

DetectorGeometry SparseDataset::geometry() const
{
    return build_detector(meta.side_px, meta.aperture_radius_px, meta.hole_radius_px);
}

long long SparseDataset::total_photons() const
{
    long long n = 0;
    for (const auto& f : frames)
        n += f.total_photons();
    return n;
}

namespace {

std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t kProbeStream = 0x70726f6265ULL;

struct FrameDensity {
    ComplexModel model;
    int state = -1;
    Vec2d offset = Vec2d::Zero();
};

FrameDensity draw_density(const TargetSource& source, const ComplexModel* fixed, std::mt19937_64& rng)
{
    FrameDensity out;
    if (fixed != nullptr) {
        out.model = *fixed;
        return out;
    }
    VariantDraw draw = heterogeneous_variant(source.base, *source.subunit, source.heterogeneity, rng);
    out.model = density_to_model(draw.density);
    out.state = draw.state;
    out.offset = draw.offset_px;
    return out;
}

SphereReference reference_for(const SimulationConfig& cfg)
{
    SphereReference ref;
    ref.diameter_px = cfg.latents.mean_diameter_px;
    ref.contrast = cfg.with_reference ? cfg.contrast : 0.0;
    return ref;
}

} // namespace

std::mt19937_64 frame_rng(std::uint64_t seed, std::uint64_t frame_index)
{
    return std::mt19937_64(splitmix64(seed ^ frame_index));
}

LatentParams sample_latents(std::mt19937_64& rng, const LatentConfig& cfg)
{
    LatentParams p;
    std::uniform_real_distribution<double> angle(0.0, kTwoPi);
    p.theta = angle(rng);
    if (p.theta >= kTwoPi)
        p.theta = 0.0;

    if (cfg.sigma_diameter_px > 0.0) {
        std::normal_distribution<double> diam(cfg.mean_diameter_px, cfg.sigma_diameter_px);
        do {
            p.diameter_px = diam(rng);
        } while (!(p.diameter_px > 0.0));
    } else {
        p.diameter_px = cfg.mean_diameter_px;
    }

    if (cfg.sigma_shift_px > 0.0) {
        std::normal_distribution<double> shift(0.0, cfg.sigma_shift_px);
        p.shift_px.x() = shift(rng);
        p.shift_px.y() = shift(rng);
    } else {
        p.shift_px.setZero();
    }
    return p;
}

SparseFrame poisson_sample(const RealGrid& intensity, const DetectorGeometry& geom, std::mt19937_64& rng)
{
    if (intensity.rows() != geom.side() || intensity.cols() != geom.side())
        throw ConfigError("intensity and detector dimensions differ");
    SparseFrame frame;
    const int side = geom.side();
    for (int p : geom.good_pixels()) {
        const double mean = intensity(p / side, p % side);
        if (!(mean >= 0.0) || !std::isfinite(mean))
            throw NumericalError("negative or non-finite intensity at pixel " + std::to_string(p));
        if (mean == 0.0)
            continue;
        std::poisson_distribution<int> poisson(mean);
        const int k = poisson(rng);
        if (k == 1) {
            frame.one_indices.push_back(static_cast<std::uint32_t>(p));
        } else if (k > 1) {
            frame.multi_indices.push_back(static_cast<std::uint32_t>(p));
            frame.multi_counts.push_back(k);
        }
    }
    return frame;
}

double calibrate_scale(const TargetSource& source, const DetectorGeometry& geom, const SimulationConfig& cfg)
{
    if (!(cfg.target_photons > 0.0))
        throw ConfigError("target photons must be positive");
    if (cfg.n_probe < 1)
        throw ConfigError("n_probe must be >= 1");

    std::optional<ComplexModel> fixed;
    if (!source.heterogeneous())
        fixed = density_to_model(source.base);
    const SphereReference ref = reference_for(cfg);

    std::mt19937_64 rng = frame_rng(cfg.seed, kProbeStream);
    double total = 0.0;
    for (int k = 0; k < cfg.n_probe; ++k) {
        const LatentParams latent = sample_latents(rng, cfg.latents);
        FrameDensity fd = draw_density(source, fixed ? &*fixed : nullptr, rng);
        fd.model.scale = 1.0;
        total += render_frame(fd.model, geom, latent, ref).sum();
    }
    const double mean = total / cfg.n_probe;
    if (!(mean > 0.0))
        throw NumericalError("total rendered intensity is zero; cannot calibrate scale");
    return cfg.target_photons / mean;
}

SimulationResult generate_dataset(const TargetSource& source, const DetectorGeometry& geom,
                                  const SimulationConfig& cfg)
{
    if (cfg.n_frames < 1)
        throw ConfigError("n_frames must be >= 1");
    if (source.base.rows() != geom.side() || source.base.cols() != geom.side())
        throw ConfigError("object and detector dimensions differ");

    const double scale = calibrate_scale(source, geom, cfg);
    log::info("calibrated scale " + std::to_string(scale));

    std::optional<ComplexModel> fixed;
    if (!source.heterogeneous())
        fixed = density_to_model(source.base);
    const SphereReference ref = reference_for(cfg);

    SimulationResult result;
    auto& ds = result.dataset;
    ds.meta.side_px = geom.side();
    ds.meta.aperture_radius_px = geom.aperture_radius();
    ds.meta.hole_radius_px = geom.hole_radius();
    ds.meta.contrast = cfg.contrast;
    ds.meta.latents = cfg.latents;
    ds.meta.target_photons = cfg.target_photons;
    ds.meta.scale = scale;
    ds.meta.with_reference = cfg.with_reference;
    ds.meta.seed = cfg.seed;
    ds.frames.resize(static_cast<std::size_t>(cfg.n_frames));
    result.truth.resize(static_cast<std::size_t>(cfg.n_frames));

    parallel_for(static_cast<std::size_t>(cfg.n_frames), [&](std::size_t begin, std::size_t end) {
        for (std::size_t d = begin; d < end; ++d) {
            std::mt19937_64 rng = frame_rng(cfg.seed, d);
            FrameTruth& truth = result.truth[d];
            truth.latent = sample_latents(rng, cfg.latents);
            FrameDensity fd = draw_density(source, fixed ? &*fixed : nullptr, rng);
            fd.model.scale = scale;
            truth.state = fd.state;
            truth.subunit_offset_px = fd.offset;
            ds.frames[d] = poisson_sample(render_frame(fd.model, geom, truth.latent, ref), geom, rng);
        }
    });
    return result;
}

} // namespace hspi
