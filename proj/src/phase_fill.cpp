#include "hspi/phase_fill.hpp"

#include "hspi/errors.hpp"
#include "hspi/fft.hpp"
#include "hspi/log.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <random>
#include <string>

namespace hspi {

namespace {

MaskGrid dilate(const MaskGrid& m)
{
    MaskGrid out = MaskGrid::Zero(m.rows(), m.cols());
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            std::uint8_t v = 0;
            for (Eigen::Index a = std::max<Eigen::Index>(i - 1, 0); a <= std::min(i + 1, m.rows() - 1) && !v; ++a)
                for (Eigen::Index b = std::max<Eigen::Index>(j - 1, 0); b <= std::min(j + 1, m.cols() - 1); ++b)
                    if (m(a, b)) {
                        v = 1;
                        break;
                    }
            out(i, j) = v;
        }
    return out;
}

MaskGrid erode(const MaskGrid& m)
{
    MaskGrid inv = (1 - m.array()).matrix();
    MaskGrid d = dilate(inv);
    return (1 - d.array()).matrix();
}

RealGrid gaussian_smooth(const RealGrid& in, double sigma)
{
    if (!(sigma > 0.0))
        return in;
    const int half = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> k(static_cast<std::size_t>(2 * half + 1));
    double s = 0.0;
    for (int x = -half; x <= half; ++x) {
        k[static_cast<std::size_t>(x + half)] = std::exp(-0.5 * x * x / (sigma * sigma));
        s += k[static_cast<std::size_t>(x + half)];
    }
    for (auto& v : k)
        v /= s;
    const Eigen::Index n = in.rows();
    RealGrid tmp = RealGrid::Zero(n, in.cols());
    RealGrid out = RealGrid::Zero(n, in.cols());
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < in.cols(); ++j)
            for (int x = -half; x <= half; ++x) {
                const Eigen::Index jj = j + x;
                if (jj >= 0 && jj < in.cols())
                    tmp(i, j) += k[static_cast<std::size_t>(x + half)] * in(i, jj);
            }
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < in.cols(); ++j)
            for (int x = -half; x <= half; ++x) {
                const Eigen::Index ii = i + x;
                if (ii >= 0 && ii < n)
                    out(i, j) += k[static_cast<std::size_t>(x + half)] * tmp(ii, j);
            }
    return out;
}

} // namespace

double SupportMask::area_fraction() const
{
    if (mask.size() == 0)
        return 0.0;
    return mask.cast<double>().sum() / static_cast<double>(mask.size());
}

int SupportMask::n_components() const
{
    MaskGrid seen = MaskGrid::Zero(mask.rows(), mask.cols());
    int n = 0;
    std::queue<std::pair<Eigen::Index, Eigen::Index>> todo;
    for (Eigen::Index i = 0; i < mask.rows(); ++i)
        for (Eigen::Index j = 0; j < mask.cols(); ++j) {
            if (!mask(i, j) || seen(i, j))
                continue;
            ++n;
            seen(i, j) = 1;
            todo.emplace(i, j);
            while (!todo.empty()) {
                auto [a, b] = todo.front();
                todo.pop();
                const Eigen::Index nb[4][2] = {{a - 1, b}, {a + 1, b}, {a, b - 1}, {a, b + 1}};
                for (const auto& p : nb) {
                    if (p[0] < 0 || p[1] < 0 || p[0] >= mask.rows() || p[1] >= mask.cols())
                        continue;
                    if (mask(p[0], p[1]) && !seen(p[0], p[1])) {
                        seen(p[0], p[1]) = 1;
                        todo.emplace(p[0], p[1]);
                    }
                }
            }
        }
    return n;
}

SupportMask disc_support(int side, double radius_px)
{
    SupportMask s;
    s.mask = MaskGrid::Zero(side, side);
    const double c = (side - 1) / 2.0;
    for (int i = 0; i < side; ++i)
        for (int j = 0; j < side; ++j)
            if (std::hypot(i - c, j - c) <= radius_px)
                s.mask(i, j) = 1;
    return s;
}

SupportMask support_from_density(const RealGrid& density, double threshold_frac, int dilate_px)
{
    SupportMask s;
    const double thr = threshold_frac * density.maxCoeff();
    s.mask = (density.array() > thr).cast<std::uint8_t>().matrix();
    for (int k = 0; k < dilate_px; ++k)
        s.mask = dilate(s.mask);
    return s;
}

SupportMask estimate_support(const ComplexModel& model, FourierConstraint mode, const SupportConfig& cfg)
{
    const int side = model.side();
    if (!(cfg.q_lo_frac >= 0.0 && cfg.q_lo_frac < cfg.q_hi_frac && cfg.q_hi_frac <= 1.0))
        throw ConfigError("support q band must satisfy 0 <= lo < hi <= 1 (fractions of q_max)");
    const double c = (side - 1) / 2.0;
    const double r_max = c;
    const double r_lo = cfg.q_lo_frac * r_max;
    const double r_hi = cfg.q_hi_frac * r_max;

    ComplexGrid band = ComplexGrid::Zero(side, side);
    for (int i = 0; i < side; ++i)
        for (int j = 0; j < side; ++j) {
            const double r = std::hypot(i - c, j - c);
            if (r < r_lo || r > r_hi || !model.reliable(i, j))
                continue;
            // Hann taper across the band keeps edge ringing below threshold.
            const double s = std::sin(kPi * (r - r_lo) / (r_hi - r_lo));
            const Complex v = mode == FourierConstraint::Complex ? model.grid(i, j) : Complex(std::norm(model.grid(i, j)));
            band(i, j) = s * s * v;
        }

    const ComplexGrid img = ifft2_centered(band);
    RealGrid value(side, side);
    if (mode == FourierConstraint::Complex) {
        value = img.cwiseAbs();
    } else {
        // Autocorrelation at twice the radius maps its support onto the
        // object's size.
        const RealGrid ac = img.cwiseAbs();
        for (int i = 0; i < side; ++i)
            for (int j = 0; j < side; ++j)
                value(i, j) = sample_bilinear(ac, c + 2.0 * (i - c), c + 2.0 * (j - c));
    }
    value = gaussian_smooth(value, cfg.smooth_sigma_px);

    SupportMask s;
    const double thr = cfg.threshold_frac * value.maxCoeff();
    s.mask = (value.array() > thr).cast<std::uint8_t>().matrix();
    s.mask = erode(dilate(s.mask));

    if (s.mask.cast<int>().sum() == 0)
        throw DataError("estimated support is empty");
    if (s.area_fraction() >= cfg.max_area_fraction)
        throw DataError("estimated support covers " + std::to_string(s.area_fraction() * 100.0)
                        + "% of the grid; oversampling would be lost");
    return s;
}

PhaseResult difference_map(const ComplexModel& known, const SupportMask& support, const DifferenceMapConfig& cfg)
{
    const int side = known.side();
    if (support.mask.rows() != side || support.mask.cols() != side)
        throw ConfigError("support and model dimensions differ");
    if (support.mask.cast<int>().sum() == 0)
        throw ConfigError("support is empty");
    if (cfg.n_iter < 1)
        throw ConfigError("difference map needs at least one iteration");
    if (!(cfg.beta > 0.0))
        throw ConfigError("difference map beta must be positive");

    const bool complex_mode = cfg.mode == FourierConstraint::Complex;
    const RealGrid known_mag = known.grid.cwiseAbs();

    auto project_fourier = [&](const ComplexGrid& x) {
        ComplexGrid f = fft2_centered(x);
        for (int i = 0; i < side; ++i)
            for (int j = 0; j < side; ++j) {
                if (!known.reliable(i, j))
                    continue;
                if (complex_mode) {
                    f(i, j) = known.grid(i, j);
                } else {
                    const double a = std::abs(f(i, j));
                    f(i, j) = a > 0.0 ? f(i, j) * (known_mag(i, j) / a) : Complex(known_mag(i, j), 0.0);
                }
            }
        return ifft2_centered(f);
    };
    auto project_support = [&](const ComplexGrid& x) {
        ComplexGrid out = ComplexGrid::Zero(side, side);
        for (int i = 0; i < side; ++i)
            for (int j = 0; j < side; ++j)
                if (support.mask(i, j))
                    out(i, j) = Complex(std::max(x(i, j).real(), 0.0), 0.0);
        return out;
    };

    // Start: known values with zeros elsewhere (complex mode), or known
    // moduli with random phases (magnitude mode).
    ComplexGrid start = ComplexGrid::Zero(side, side);
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> phase(0.0, kTwoPi);
    for (int i = 0; i < side; ++i)
        for (int j = 0; j < side; ++j) {
            if (!known.reliable(i, j))
                continue;
            start(i, j) = complex_mode ? known.grid(i, j) : std::polar(known_mag(i, j), phase(rng));
        }
    ComplexGrid x = ifft2_centered(start);

    PhaseResult res;
    res.best_error = std::numeric_limits<double>::infinity();
    ComplexGrid best;
    int above = 0;
    for (int it = 0; it < cfg.n_iter; ++it) {
        const ComplexGrid pm = project_fourier(x);
        const ComplexGrid diff = project_support(2.0 * pm - x) - pm;
        const double norm = pm.norm();
        const double err = norm > 0.0 ? diff.norm() / norm : diff.norm();
        if (!std::isfinite(err))
            throw NumericalError("difference map produced a non-finite iterate");
        res.error_trace.push_back(err);
        if (err < res.best_error) {
            res.best_error = err;
            res.best_iteration = it + 1;
            best = project_support(pm);
        }
        above = err > 10.0 * res.best_error ? above + 1 : 0;
        if (above >= 50) {
            res.diverged = true;
            log::warn("difference map diverging; returning iterate " + std::to_string(res.best_iteration));
            break;
        }
        x += cfg.beta * diff;
    }

    res.density = best.real();
    const ComplexGrid f = fft2_centered(best);
    res.filled.grid = f;
    res.filled.scale = known.scale;
    res.filled.reliable = MaskGrid::Ones(side, side);
    for (int i = 0; i < side; ++i)
        for (int j = 0; j < side; ++j)
            if (known.reliable(i, j) && complex_mode)
                res.filled.grid(i, j) = known.grid(i, j);
    return res;
}

} // namespace hspi
