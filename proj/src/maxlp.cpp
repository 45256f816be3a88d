#include "hspi/maxlp.hpp"

#include "hspi/errors.hpp"
#include "hspi/log.hpp"
#include "hspi/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>

namespace hspi {

namespace {

constexpr double kIntensityFloor = 1e-20;

// Occupied pixels of one frame as GOOD-pixel indices.
struct FramePixels {
    std::vector<int> ones;
    std::vector<int> multi;
    std::vector<double> multi_counts;
};

std::vector<FramePixels> frames_to_good_indices(const SparseDataset& dataset, const DetectorGeometry& geom)
{
    std::vector<FramePixels> out(dataset.frames.size());
    for (std::size_t d = 0; d < dataset.frames.size(); ++d) {
        const auto& f = dataset.frames[d];
        auto& fp = out[d];
        fp.ones.reserve(f.one_indices.size());
        for (auto p : f.one_indices)
            fp.ones.push_back(geom.good_index(static_cast<int>(p)));
        for (std::size_t k = 0; k < f.multi_indices.size(); ++k) {
            fp.multi.push_back(geom.good_index(static_cast<int>(f.multi_indices[k])));
            fp.multi_counts.push_back(f.multi_counts[k]);
        }
    }
    return out;
}

double reference_contrast(const SparseDataset& dataset)
{
    return dataset.meta.with_reference ? dataset.meta.contrast : 0.0;
}

void check_dims(const ComplexModel& model, const DetectorGeometry& geom)
{
    if (model.grid.rows() != geom.side() || model.grid.cols() != geom.side())
        throw ConfigError("model and detector dimensions differ");
}

} // namespace

std::size_t LatentGrid::flatten(const Index& idx) const
{
    return ((static_cast<std::size_t>(idx.theta) * diameters.size() + static_cast<std::size_t>(idx.diameter))
                * shifts_x.size()
            + static_cast<std::size_t>(idx.shift_x))
        * shifts_y.size()
        + static_cast<std::size_t>(idx.shift_y);
}

LatentGrid::Index LatentGrid::unflatten(std::size_t h) const
{
    Index idx;
    idx.shift_y = static_cast<int>(h % shifts_y.size());
    h /= shifts_y.size();
    idx.shift_x = static_cast<int>(h % shifts_x.size());
    h /= shifts_x.size();
    idx.diameter = static_cast<int>(h % diameters.size());
    idx.theta = static_cast<int>(h / diameters.size());
    return idx;
}

LatentParams LatentGrid::at(const Index& idx) const
{
    LatentParams p;
    p.theta = thetas.at(static_cast<std::size_t>(idx.theta));
    p.diameter_px = diameters.at(static_cast<std::size_t>(idx.diameter));
    p.shift_px = Vec2d(shifts_x.at(static_cast<std::size_t>(idx.shift_x)),
                       shifts_y.at(static_cast<std::size_t>(idx.shift_y)));
    return p;
}

void LatentGrid::validate() const
{
    auto check = [](const std::vector<double>& v, const char* name) {
        if (v.empty())
            throw ConfigError(std::string("latent grid axis '") + name + "' is empty");
        for (double x : v)
            if (!std::isfinite(x))
                throw ConfigError(std::string("latent grid axis '") + name + "' has a non-finite entry");
    };
    check(thetas, "theta");
    check(diameters, "diameter");
    check(shifts_x, "shift_x");
    check(shifts_y, "shift_y");
    for (double d : diameters)
        if (!(d > 0.0))
            throw ConfigError("latent grid diameters must be positive");
}

std::vector<double> make_range(double lo, double hi, double step)
{
    if (!(step > 0.0) || hi < lo)
        throw ConfigError("invalid range specification");
    std::vector<double> out;
    const auto n = static_cast<long long>(std::floor((hi - lo) / step + 1e-9));
    for (long long k = 0; k <= n; ++k)
        out.push_back(lo + static_cast<double>(k) * step);
    return out;
}

LatentGrid default_latent_grid(const LatentConfig& latents)
{
    LatentGrid g;
    g.theta_step = deg_to_rad(2.0);
    for (int k = 0; k < 90; ++k)
        g.thetas.push_back(deg_to_rad(2.0 * k));
    g.diameter_step = 0.5;
    const double lo = latents.mean_diameter_px - 2.0 * latents.sigma_diameter_px;
    const double hi = latents.mean_diameter_px + 2.0 * latents.sigma_diameter_px;
    g.diameters = make_range(std::max(lo, g.diameter_step), hi, g.diameter_step);
    g.shift_step = 1.0;
    g.shifts_x = make_range(-2.0, 2.0, 1.0);
    g.shifts_y = g.shifts_x;
    return g;
}

double Assignment::total_log_likelihood() const
{
    double s = 0.0;
    for (const auto& f : frames)
        s += f.log_likelihood;
    return s;
}

double frame_log_likelihood(const SparseFrame& frame, const ComplexModel& model, const LatentParams& latent,
                            const DetectorGeometry& geom, const SphereReference& ref)
{
    check_dims(model, geom);
    const RealGrid intensity = render_frame(model, geom, latent, ref);
    const int side = geom.side();
    double q = 0.0;
    for (int p : geom.good_pixels())
        q -= intensity(p / side, p % side);

    int clamped = 0;
    auto log_at = [&](std::uint32_t p) {
        double v = intensity(static_cast<Eigen::Index>(p / static_cast<std::uint32_t>(side)),
                             static_cast<Eigen::Index>(p % static_cast<std::uint32_t>(side)));
        if (v < kIntensityFloor) {
            v = kIntensityFloor;
            ++clamped;
        }
        return std::log(v);
    };
    for (auto p : frame.one_indices)
        q += log_at(p);
    for (std::size_t k = 0; k < frame.multi_indices.size(); ++k)
        q += frame.multi_counts[k] * log_at(frame.multi_indices[k]);
    if (clamped > 0)
        log::debug("frame_log_likelihood: clamped " + std::to_string(clamped) + " zero-intensity pixels");
    return q;
}

Assignment assign_latents(const SparseDataset& dataset, const ComplexModel& model, const LatentGrid& grid,
                          const DetectorGeometry& geom)
{
    grid.validate();
    check_dims(model, geom);
    const auto frames = frames_to_good_indices(dataset, geom);
    const std::size_t n_frames = frames.size();
    const std::size_t n_good = geom.good_pixels().size();
    const double contrast = reference_contrast(dataset);
    const double root_scale = std::sqrt(model.scale);

    // Reference amplitude per diameter and phase ramp per shift, in scaled units.
    std::vector<std::vector<double>> amplitude(grid.diameters.size(), std::vector<double>(n_good));
    for (std::size_t k = 0; k < grid.diameters.size(); ++k)
        for (std::size_t g = 0; g < n_good; ++g)
            amplitude[k][g]
                = root_scale * sphere_ft(geom.q(geom.good_pixels()[g]).norm(), grid.diameters[k], contrast);

    const std::size_t n_sx = grid.shifts_x.size();
    const std::size_t n_sy = grid.shifts_y.size();
    std::vector<std::vector<Complex>> ramp(n_sx * n_sy, std::vector<Complex>(n_good));
    for (std::size_t a = 0; a < n_sx; ++a)
        for (std::size_t b = 0; b < n_sy; ++b)
            for (std::size_t g = 0; g < n_good; ++g) {
                const Vec2d q = geom.q(geom.good_pixels()[g]);
                ramp[a * n_sy + b][g]
                    = std::polar(1.0, kTwoPi * (q.x() * grid.shifts_x[a] + q.y() * grid.shifts_y[b]));
            }

    const std::size_t n_theta = grid.thetas.size();
    const std::size_t per_theta = grid.size() / n_theta;
    std::vector<double> best_value(n_theta * n_frames, -std::numeric_limits<double>::infinity());
    std::vector<std::size_t> best_index(n_theta * n_frames, 0);

    // Hypotheses are evaluated in blocks of kBlock sharing one interleaved
    // log-intensity table, so each gathered cache line serves kBlock sums.
    constexpr std::size_t kBlock = 8;
    parallel_for(n_theta, [&](std::size_t begin, std::size_t end) {
        std::vector<double> log_i(n_good * kBlock);
        std::vector<Complex> rotated;
        for (std::size_t t = begin; t < end; ++t) {
            rotated = sample_rotated(model.grid, geom, grid.thetas[t]);
            for (auto& v : rotated)
                v *= root_scale;
            double* bv = best_value.data() + t * n_frames;
            std::size_t* bi = best_index.data() + t * n_frames;
            for (std::size_t first = 0; first < per_theta; first += kBlock) {
                const std::size_t width = std::min(kBlock, per_theta - first);
                // The -sum I term is shared by all frames.
                double sum_i[kBlock] = {};
                for (std::size_t b = 0; b < kBlock; ++b) {
                    if (b >= width) {
                        for (std::size_t g = 0; g < n_good; ++g)
                            log_i[g * kBlock + b] = 0.0;
                        continue;
                    }
                    const std::size_t local = first + b;
                    const std::vector<Complex>& r = ramp[local % (n_sx * n_sy)];
                    const std::vector<double>& amp = amplitude[local / (n_sx * n_sy)];
                    double s = 0.0;
                    for (std::size_t g = 0; g < n_good; ++g) {
                        const double v = std::norm(rotated[g] + amp[g] * r[g]);
                        s += v;
                        log_i[g * kBlock + b] = std::log(std::max(v, kIntensityFloor));
                    }
                    sum_i[b] = s;
                }

                for (std::size_t d = 0; d < n_frames; ++d) {
                    const FramePixels& fp = frames[d];
                    double acc[kBlock] = {};
                    for (int g : fp.ones) {
                        const double* row = log_i.data() + static_cast<std::size_t>(g) * kBlock;
                        for (std::size_t b = 0; b < kBlock; ++b)
                            acc[b] += row[b];
                    }
                    for (std::size_t m = 0; m < fp.multi.size(); ++m) {
                        const double* row = log_i.data() + static_cast<std::size_t>(fp.multi[m]) * kBlock;
                        const double k = fp.multi_counts[m];
                        for (std::size_t b = 0; b < kBlock; ++b)
                            acc[b] += k * row[b];
                    }
                    for (std::size_t b = 0; b < width; ++b) {
                        const double q = acc[b] - sum_i[b];
                        if (q > bv[d]) {
                            bv[d] = q;
                            bi[d] = t * per_theta + first + b;
                        }
                    }
                }
            }
        }
    });

    Assignment out;
    out.frames.resize(n_frames);
    for (std::size_t d = 0; d < n_frames; ++d) {
        double best = -std::numeric_limits<double>::infinity();
        std::size_t idx = 0;
        for (std::size_t t = 0; t < n_theta; ++t) {
            const double v = best_value[t * n_frames + d];
            if (v > best) {
                best = v;
                idx = best_index[t * n_frames + d];
            }
        }
        if (!std::isfinite(best))
            throw NumericalError("no finite log-likelihood for frame " + std::to_string(d));
        out.frames[d].index = grid.unflatten(idx);
        out.frames[d].log_likelihood = best;
    }
    return out;
}

void PixelObservations::add(int count, double reference_amplitude, double phase)
{
    if (count < 0)
        throw DataError("negative photon count in pixel observation");
    if (empty()) {
        phase_min_ = phase;
        phase_max_ = phase;
    } else {
        phase_min_ = std::min(phase_min_, phase);
        phase_max_ = std::max(phase_max_, phase);
    }
    const Complex c = std::polar(reference_amplitude, phase);
    if (count == 0) {
        ++n_zero_;
        zero_ref_norm_ += std::norm(c);
        zero_ref_sum_ += c;
    } else {
        positive_.push_back({count, c});
    }
}

double PixelObservations::log_likelihood(const Complex& g) const
{
    // sum over zero-count entries of -|g + c|^2.
    double q = -(static_cast<double>(n_zero_) * std::norm(g) + 2.0 * (std::conj(g) * zero_ref_sum_).real()
                 + zero_ref_norm_);
    for (const auto& o : positive_) {
        const double v = std::norm(g + o.reference);
        q += o.count * std::log(v) - v;
    }
    return q;
}

long long PixelObservations::total_counts() const
{
    long long n = 0;
    for (const auto& o : positive_)
        n += o.count;
    return n;
}

PatternSearchResult pixel_pattern_search(const PixelObservations& obs, const Complex& init,
                                         const PatternSearchConfig& cfg)
{
    PatternSearchResult res{init, 0.0, 0};
    if (obs.empty())
        return res;
    if (!(cfg.shrink > 0.0 && cfg.shrink < 1.0))
        throw ConfigError("pattern search shrink factor must lie in (0, 1)");

    double h = cfg.init_step > 0.0 ? cfg.init_step : std::abs(init);
    if (!(h > 0.0))
        h = 1.0;
    const double tol = cfg.tol > 0.0 ? cfg.tol : cfg.tol_rel * h;
    if (!(h > tol))
        throw ConfigError("pattern search requires init_step > tol");

    auto objective = [&](const Complex& g) {
        const double v = obs.log_likelihood(g);
        if (std::isnan(v) || v == std::numeric_limits<double>::infinity())
            throw NumericalError("non-finite pixel log-likelihood");
        return v;
    };

    Complex x = init;
    double fx = objective(x);
    int iter = 0;
    while (iter < cfg.max_iter && h >= tol) {
        ++iter;
        Complex best = x;
        double fbest = fx;
        for (int a = -1; a <= 1; ++a) {
            for (int b = -1; b <= 1; ++b) {
                if (a == 0 && b == 0)
                    continue;
                const Complex y = x + Complex(a * h, b * h);
                const double fy = objective(y);
                if (fy > fbest) {
                    fbest = fy;
                    best = y;
                }
            }
        }
        if (fbest > fx) {
            x = best;
            fx = fbest;
        } else {
            h *= cfg.shrink;
        }
    }
    res.value = x;
    res.objective = fx;
    res.iterations = iter;
    return res;
}

std::vector<PixelObservations> collect_observations(const SparseDataset& dataset, const Assignment& assignment,
                                                    const LatentGrid& grid, const DetectorGeometry& geom)
{
    grid.validate();
    if (assignment.frames.size() != dataset.frames.size())
        throw ConfigError("assignment does not cover every frame");
    const int side = geom.side();
    const double c = geom.center();
    const auto& good = geom.good_pixels();
    const std::size_t n_good = good.size();
    const double contrast = reference_contrast(dataset);
    const double root_scale = std::sqrt(dataset.meta.scale);

    // Nearest model pixel for each GOOD detector pixel, per theta (lazily).
    std::vector<std::vector<int>> nearest(grid.thetas.size());
    auto nearest_for = [&](int t) -> const std::vector<int>& {
        auto& table = nearest[static_cast<std::size_t>(t)];
        if (table.empty()) {
            table.resize(n_good);
            const double theta = grid.thetas[static_cast<std::size_t>(t)];
            for (std::size_t g = 0; g < n_good; ++g) {
                const Vec2d qm = rotate_coord(geom.q(good[g]), -theta);
                const auto i = static_cast<long>(std::lround(c + qm.x() * side));
                const auto j = static_cast<long>(std::lround(c + qm.y() * side));
                int m = -1;
                if (i >= 0 && j >= 0 && i < side && j < side) {
                    const int p = static_cast<int>(i * side + j);
                    if (geom.is_good(p))
                        m = p;
                }
                table[g] = m;
            }
        }
        return table;
    };

    std::vector<std::vector<double>> amplitude(grid.diameters.size(), std::vector<double>(n_good));
    for (std::size_t k = 0; k < grid.diameters.size(); ++k)
        for (std::size_t g = 0; g < n_good; ++g)
            amplitude[k][g] = root_scale * sphere_ft(geom.q(good[g]).norm(), grid.diameters[k], contrast);

    std::vector<PixelObservations> obs(static_cast<std::size_t>(geom.n_pixels()));
    for (std::size_t d = 0; d < dataset.frames.size(); ++d) {
        const auto& frame = dataset.frames[d];
        const auto& idx = assignment.frames[d].index;
        const LatentParams lp = grid.at(idx);
        const auto& table = nearest_for(idx.theta);
        const auto& amp = amplitude[static_cast<std::size_t>(idx.diameter)];

        std::size_t io = 0;
        std::size_t im = 0;
        for (std::size_t g = 0; g < n_good; ++g) {
            const auto p = static_cast<std::uint32_t>(good[g]);
            int count = 0;
            if (io < frame.one_indices.size() && frame.one_indices[io] == p) {
                count = 1;
                ++io;
            } else if (im < frame.multi_indices.size() && frame.multi_indices[im] == p) {
                count = frame.multi_counts[im];
                ++im;
            }
            const int m = table[g];
            if (m < 0)
                continue;
            const double phase = kTwoPi * geom.q(good[g]).dot(lp.shift_px);
            obs[static_cast<std::size_t>(m)].add(count, amp[g], phase);
        }
    }
    return obs;
}

ComplexModel update_model_ordered(const std::vector<PixelObservations>& observations, const DetectorGeometry& geom,
                                  const ComplexModel& prev_model, const UpdateConfig& cfg,
                                  const std::vector<int>& pixel_order)
{
    check_dims(prev_model, geom);
    if (observations.size() != static_cast<std::size_t>(geom.n_pixels()))
        throw ConfigError("observation table does not match detector");
    const int side = geom.side();
    const double root_scale = std::sqrt(prev_model.scale);

    ComplexModel next = prev_model;
    next.reliable = MaskGrid::Zero(side, side);
    parallel_for(pixel_order.size(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t k = begin; k < end; ++k) {
            const int p = pixel_order[k];
            if (!geom.is_good(p))
                continue;
            const auto& o = observations[static_cast<std::size_t>(p)];
            const Complex init = root_scale * prev_model.grid(p / side, p % side);
            const PatternSearchResult r = pixel_pattern_search(o, init, cfg.search);
            next.grid(p / side, p % side) = r.value / root_scale;
            const bool ok = o.size() >= cfg.n_min && o.phase_spread() >= cfg.phase_spread_min;
            next.reliable(p / side, p % side) = ok ? 1 : 0;
        }
    });
    return next;
}

ComplexModel update_model(const SparseDataset& dataset, const Assignment& assignment, const LatentGrid& grid,
                          const DetectorGeometry& geom, const ComplexModel& prev_model, const UpdateConfig& cfg)
{
    if (!(prev_model.scale > 0.0))
        throw ConfigError("model scale must be positive");
    const auto obs = collect_observations(dataset, assignment, grid, geom);
    std::vector<int> order(static_cast<std::size_t>(geom.n_pixels()));
    std::iota(order.begin(), order.end(), 0);
    return update_model_ordered(obs, geom, prev_model, cfg, order);
}

ComplexModel initial_model(const SparseDataset& dataset, const DetectorGeometry& geom, std::uint64_t seed)
{
    if (dataset.frames.empty())
        throw DataError("dataset has no frames");
    if (!(dataset.meta.scale > 0.0))
        throw DataError("dataset scale must be positive");
    const double mean_count = static_cast<double>(dataset.total_photons())
        / (static_cast<double>(dataset.frames.size()) * geom.n_good());
    const double sigma = std::sqrt(std::max(mean_count, 1e-12) / dataset.meta.scale / 2.0);

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, sigma);
    ComplexModel m;
    m.grid = ComplexGrid::Zero(geom.side(), geom.side());
    m.reliable = MaskGrid::Zero(geom.side(), geom.side());
    m.scale = dataset.meta.scale;
    for (int p : geom.good_pixels()) {
        const double re = normal(rng);
        const double im = normal(rng);
        m.grid(p / geom.side(), p % geom.side()) = Complex(re, im);
    }
    return m;
}

MaxlpState maxlp_reconstruct(const SparseDataset& dataset, const LatentGrid& grid, const MaxlpConfig& cfg,
                             const std::function<void(const MaxlpState&)>& on_iteration,
                             std::optional<MaxlpState> resume)
{
    if (cfg.n_iter < 1)
        throw ConfigError("n_iter must be >= 1");
    grid.validate();
    const DetectorGeometry geom = dataset.geometry();

    MaxlpState state;
    if (resume) {
        state = std::move(*resume);
        check_dims(state.model, geom);
    } else {
        state.model = initial_model(dataset, geom, cfg.seed);
    }

    const int side = geom.side();
    for (int it = static_cast<int>(state.trace.size()); it < cfg.n_iter; ++it) {
        state.assignment = assign_latents(dataset, state.model, grid, geom);
        ComplexModel next = update_model(dataset, state.assignment, grid, geom, state.model, cfg.update);

        double change = 0.0;
        for (int p : geom.good_pixels())
            change += std::norm(next.grid(p / side, p % side) - state.model.grid(p / side, p % side));
        IterationLog entry;
        entry.iteration = it + 1;
        entry.log_likelihood = state.assignment.total_log_likelihood();
        entry.rms_change = std::sqrt(change / geom.n_good());
        entry.n_reliable = static_cast<int>(next.reliable.cast<int>().sum());
        state.model = std::move(next);
        state.trace.push_back(entry);
        log::info("maxlp iteration " + std::to_string(entry.iteration) + " logL "
                  + std::to_string(entry.log_likelihood) + " rms change " + std::to_string(entry.rms_change)
                  + " reliable " + std::to_string(entry.n_reliable));
        if (on_iteration)
            on_iteration(state);
    }
    return state;
}

} // namespace hspi
