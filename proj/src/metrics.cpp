#include "hspi/metrics.hpp"

#include "hspi/errors.hpp"
#include "hspi/fft.hpp"
#include "hspi/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace hspi {

FrcCurve frc(const ComplexModel& a, const ComplexModel& b, double ring_width_px, const MaskGrid* mask)
{
    if (a.grid.rows() != b.grid.rows() || a.grid.cols() != b.grid.cols())
        throw DataError("FRC of models with different dimensions");
    if (!(ring_width_px > 0.0))
        throw ConfigError("FRC ring width must be positive");
    const int side = a.side();
    if (mask && (mask->rows() != side || mask->cols() != side))
        throw DataError("FRC mask has the wrong dimensions");
    const double c = (side - 1) / 2.0;
    const int n_rings = static_cast<int>(std::lround(c * std::sqrt(2.0) / ring_width_px)) + 1;
    std::vector<double> cross(static_cast<std::size_t>(n_rings), 0.0);
    std::vector<double> pa(cross.size(), 0.0);
    std::vector<double> pb(cross.size(), 0.0);
    std::vector<long long> count(cross.size(), 0);
    for (int i = 0; i < side; ++i)
        for (int j = 0; j < side; ++j) {
            if (!a.reliable(i, j) || !b.reliable(i, j) || (mask && !(*mask)(i, j)))
                continue;
            const auto k = static_cast<std::size_t>(std::lround(std::hypot(i - c, j - c) / ring_width_px));
            const Complex fa = a.grid(i, j);
            const Complex fb = b.grid(i, j);
            cross[k] += (fa * std::conj(fb)).real();
            pa[k] += std::norm(fa);
            pb[k] += std::norm(fb);
            ++count[k];
        }
    // Drop trailing empty rings.
    std::size_t last = 0;
    for (std::size_t k = 0; k < count.size(); ++k)
        if (count[k] > 0)
            last = k + 1;

    FrcCurve out;
    out.ring_width_px = ring_width_px;
    out.side_px = side;
    for (std::size_t k = 0; k < last; ++k) {
        const double r = static_cast<double>(k) * ring_width_px;
        out.radius_px.push_back(r);
        out.q.push_back(r / side);
        out.n_pixels.push_back(count[k]);
        const double den = std::sqrt(pa[k] * pb[k]);
        const bool ok = count[k] > 0 && den > 0.0;
        out.valid.push_back(ok);
        out.value.push_back(ok ? std::clamp(cross[k] / den, -1.0, 1.0) : 0.0);
    }
    return out;
}

Resolution resolution_at_half(const FrcCurve& curve)
{
    Resolution res;
    int prev = -1;
    for (std::size_t k = 0; k < curve.size(); ++k) {
        if (!curve.valid[k])
            continue;
        if (curve.value[k] < 0.5) {
            if (prev < 0) {
                res.flagged = true;
                return res;
            }
            const auto p = static_cast<std::size_t>(prev);
            const double v0 = curve.value[p];
            const double v1 = curve.value[k];
            const double t = (v0 - 0.5) / (v0 - v1);
            res.radius_px = curve.radius_px[p] + t * (curve.radius_px[k] - curve.radius_px[p]);
            res.q = res.radius_px / curve.side_px;
            return res;
        }
        prev = static_cast<int>(k);
    }
    if (prev < 0)
        throw DataError("FRC curve has no valid rings");
    res.saturated = true;
    res.radius_px = curve.radius_px[static_cast<std::size_t>(prev)];
    res.q = res.radius_px / curve.side_px;
    return res;
}

double real_correlation(const RealGrid& a, const RealGrid& b, const MaskGrid* mask)
{
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw DataError("correlation of grids with different dimensions");
    double n = 0, sa = 0, sb = 0;
    for (Eigen::Index k = 0; k < a.size(); ++k)
        if (!mask || mask->data()[k]) {
            n += 1;
            sa += a.data()[k];
            sb += b.data()[k];
        }
    if (n < 2)
        return 0.0;
    const double ma = sa / n;
    const double mb = sb / n;
    double sab = 0, saa = 0, sbb = 0;
    for (Eigen::Index k = 0; k < a.size(); ++k)
        if (!mask || mask->data()[k]) {
            const double x = a.data()[k] - ma;
            const double y = b.data()[k] - mb;
            sab += x * y;
            saa += x * x;
            sbb += y * y;
        }
    return saa > 0 && sbb > 0 ? sab / std::sqrt(saa * sbb) : 0.0;
}

RealGrid rotate_density(const RealGrid& density, double alpha)
{
    const Eigen::Index side = density.rows();
    const double c = (static_cast<double>(side) - 1) / 2.0;
    RealGrid out(side, density.cols());
    for (Eigen::Index i = 0; i < side; ++i)
        for (Eigen::Index j = 0; j < density.cols(); ++j) {
            const Vec2d r = rotate_coord(Vec2d(i - c, j - c), -alpha);
            out(i, j) = sample_bilinear(density, c + r.x(), c + r.y());
        }
    return out;
}

RealGrid invert_density(const RealGrid& density)
{
    return density.reverse();
}

namespace {

ComplexGrid phase_ramp(int side, const Vec2d& shift_px)
{
    const double c = (side - 1) / 2.0;
    ComplexGrid ramp(side, side);
    for (int i = 0; i < side; ++i)
        for (int j = 0; j < side; ++j) {
            const double qs = ((i - c) * shift_px.x() + (j - c) * shift_px.y()) / side;
            ramp(i, j) = std::polar(1.0, -kTwoPi * qs);
        }
    return ramp;
}

} // namespace

RealGrid shift_density(const RealGrid& density, const Vec2d& shift_px)
{
    const int side = static_cast<int>(density.rows());
    const ComplexGrid f = fft2_centered(density).cwiseProduct(phase_ramp(side, shift_px));
    return ifft2_centered(f).real();
}

RealGrid apply_alignment(const RealGrid& recon, const Alignment& al)
{
    RealGrid r = al.inverted ? invert_density(recon) : recon;
    r = rotate_density(r, -al.theta);
    if (al.shift_px.squaredNorm() > 0.0)
        r = shift_density(r, al.shift_px);
    return r;
}

ComplexModel apply_alignment(const ComplexModel& recon, const Alignment& al)
{
    const int side = recon.side();
    const double c = (side - 1) / 2.0;
    const ComplexGrid ramp = phase_ramp(side, al.shift_px);
    ComplexModel out;
    out.scale = recon.scale;
    out.grid = ComplexGrid::Zero(side, side);
    out.reliable = MaskGrid::Zero(side, side);
    for (int i = 0; i < side; ++i)
        for (int j = 0; j < side; ++j) {
            Vec2d r = rotate_coord(Vec2d(i - c, j - c), al.theta);
            if (al.inverted)
                r = -r;
            const double row = c + r.x();
            const double col = c + r.y();
            const int i0 = static_cast<int>(std::floor(row));
            const int j0 = static_cast<int>(std::floor(col));
            const double fi = row - i0;
            const double fj = col - j0;
            const double w[2][2] = {{(1 - fi) * (1 - fj), (1 - fi) * fj}, {fi * (1 - fj), fi * fj}};
            bool ok = true;
            for (int a = 0; a < 2; ++a)
                for (int b = 0; b < 2; ++b) {
                    if (w[a][b] <= 1e-12)
                        continue;
                    const int ii = i0 + a;
                    const int jj = j0 + b;
                    if (ii < 0 || jj < 0 || ii >= side || jj >= side || !recon.reliable(ii, jj))
                        ok = false;
                }
            if (!ok)
                continue;
            out.reliable(i, j) = 1;
            out.grid(i, j) = sample_bilinear(recon.grid, row, col) * ramp(i, j);
        }
    return out;
}

namespace {

struct ShiftFit {
    Vec2d shift = Vec2d::Zero();
    double correlation = -2.0;
};

// Best translation of `moving` onto the target, via circular
// cross-correlation with a parabolic sub-pixel peak.
class ShiftSearch {
public:
    ShiftSearch(const RealGrid& target, int max_shift) : side_(static_cast<int>(target.rows())), max_shift_(max_shift)
    {
        const double n = static_cast<double>(target.size());
        const double mean = target.mean();
        sd_ = std::sqrt((target.array() - mean).square().sum() / n);
        target_ft_ = fft2_centered(RealGrid(target.array() - mean));
    }

    ShiftFit fit(const RealGrid& moving) const
    {
        ShiftFit out;
        const double n = static_cast<double>(moving.size());
        const double mean = moving.mean();
        const double sd = std::sqrt((moving.array() - mean).square().sum() / n);
        if (!(sd > 0.0) || !(sd_ > 0.0))
            return out;
        const ComplexGrid m = fft2_centered(RealGrid(moving.array() - mean));
        const RealGrid xc = ifft2_centered(ComplexGrid(target_ft_.cwiseProduct(m.conjugate()))).real();
        const int c = (side_ - 1) / 2;
        int bi = c, bj = c;
        for (int i = c - max_shift_; i <= c + max_shift_; ++i)
            for (int j = c - max_shift_; j <= c + max_shift_; ++j) {
                if (i < 0 || j < 0 || i >= side_ || j >= side_)
                    continue;
                if (xc(i, j) > xc(bi, bj))
                    bi = i, bj = j;
            }
        auto vertex = [](double ym, double y0, double yp, double& peak) {
            const double den = ym - 2 * y0 + yp;
            if (!(den < 0.0)) {
                peak = y0;
                return 0.0;
            }
            const double d = std::clamp(0.5 * (ym - yp) / den, -0.5, 0.5);
            peak = y0 - 0.25 * (ym - yp) * d;
            return d;
        };
        double pi = xc(bi, bj), pj = xc(bi, bj);
        double di = 0.0, dj = 0.0;
        if (bi > 0 && bi < side_ - 1)
            di = vertex(xc(bi - 1, bj), xc(bi, bj), xc(bi + 1, bj), pi);
        if (bj > 0 && bj < side_ - 1)
            dj = vertex(xc(bi, bj - 1), xc(bi, bj), xc(bi, bj + 1), pj);
        const double peak = std::max(pi, pj) + std::min(pi, pj) - xc(bi, bj);
        out.shift = Vec2d(bi - c + di, bj - c + dj);
        out.correlation = peak / (n * sd * sd_);
        return out;
    }

private:
    int side_;
    int max_shift_;
    double sd_ = 0.0;
    ComplexGrid target_ft_;
};

} // namespace

Alignment align_global(const RealGrid& recon, const RealGrid& truth, const AlignConfig& cfg)
{
    if (recon.rows() != truth.rows() || recon.cols() != truth.cols())
        throw DataError("alignment of grids with different dimensions");
    if (!(cfg.step_deg > 0.0) || !(cfg.tol_deg > 0.0))
        throw ConfigError("alignment steps must be positive");
    const ShiftSearch search(truth, cfg.max_shift_px);
    const double span = cfg.magnitude_mode ? 180.0 : 360.0;
    const int n_rot = std::max(1, static_cast<int>(std::lround(span / cfg.step_deg)));
    const int n_inv = cfg.magnitude_mode ? 2 : 1;

    const RealGrid inverted = invert_density(recon);
    auto evaluate = [&](int inv, double deg) {
        const RealGrid& src = inv ? inverted : recon;
        return search.fit(rotate_density(src, -deg_to_rad(deg)));
    };

    std::vector<ShiftFit> fits(static_cast<std::size_t>(n_rot * n_inv));
    parallel_for(fits.size(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t k = begin; k < end; ++k) {
            const int inv = static_cast<int>(k) / n_rot;
            const int r = static_cast<int>(k) % n_rot;
            fits[k] = evaluate(inv, r * span / n_rot);
        }
    });
    std::size_t best = 0;
    for (std::size_t k = 1; k < fits.size(); ++k)
        if (fits[k].correlation > fits[best].correlation)
            best = k;
    const int inv = static_cast<int>(best) / n_rot;
    const double step = span / n_rot;
    const double centre = (static_cast<int>(best) % n_rot) * step;

    // Golden-section refinement on [centre - step, centre + step].
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    double lo = centre - step, hi = centre + step;
    double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
    ShiftFit f1 = evaluate(inv, x1), f2 = evaluate(inv, x2);
    while (hi - lo > cfg.tol_deg) {
        if (f1.correlation >= f2.correlation) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = evaluate(inv, x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = evaluate(inv, x2);
        }
    }
    double deg = f1.correlation >= f2.correlation ? x1 : x2;
    ShiftFit fit = f1.correlation >= f2.correlation ? f1 : f2;
    if (fits[best].correlation > fit.correlation) {
        deg = centre;
        fit = fits[best];
    }
    deg = std::fmod(deg + 720.0, 360.0);

    Alignment al;
    al.theta = deg_to_rad(deg);
    al.inverted = inv == 1;
    al.shift_px = fit.shift;
    al.correlation = real_correlation(apply_alignment(recon, al), truth);
    return al;
}

RealGrid model_density(const ComplexModel& model)
{
    ComplexGrid f = model.grid;
    for (Eigen::Index k = 0; k < f.size(); ++k)
        if (!model.reliable.data()[k])
            f.data()[k] = 0.0;
    return ifft2_centered(f).real();
}

Alignment align_models(const ComplexModel& recon, const ComplexModel& truth, const AlignConfig& cfg)
{
    if (recon.side() != truth.side())
        throw DataError("alignment of models with different dimensions");
    ComplexModel band = truth;
    band.reliable = truth.reliable.cwiseProduct(recon.reliable);
    return align_global(model_density(recon), model_density(band), cfg);
}

double wrap_deg_180(double deg)
{
    double w = std::fmod(deg, 360.0);
    if (w <= -180.0)
        w += 360.0;
    else if (w > 180.0)
        w -= 360.0;
    return w;
}

ErrorStats summarize(std::vector<double> values)
{
    ErrorStats s;
    s.values = std::move(values);
    if (s.values.empty())
        return s;
    const double n = static_cast<double>(s.values.size());
    s.mean = std::accumulate(s.values.begin(), s.values.end(), 0.0) / n;
    double v = 0.0;
    for (double x : s.values)
        v += (x - s.mean) * (x - s.mean);
    s.sigma = std::sqrt(v / n);
    return s;
}

LatentErrors latent_errors(const Assignment& assignment, const LatentGrid& grid, const std::vector<FrameTruth>& truth,
                           double theta_offset, const Vec2d& model_shift)
{
    if (assignment.frames.size() != truth.size())
        throw DataError("assignment has " + std::to_string(assignment.frames.size()) + " frames but truth has "
                        + std::to_string(truth.size()));
    std::vector<double> et, ed, ex, ey;
    std::size_t flipped = 0;
    for (std::size_t d = 0; d < truth.size(); ++d) {
        const LatentParams pred = grid.at(assignment.frames[d].index);
        const LatentParams& tru = truth[d].latent;
        const double est = pred.theta + theta_offset;
        double e = wrap_deg_180(rad_to_deg(est - tru.theta));
        Vec2d t = pred.shift_px - rotate_coord(model_shift, est);
        if (e > 90.0 || e <= -90.0) {
            e += e > 0 ? -180.0 : 180.0;
            t = -t;
            ++flipped;
        }
        et.push_back(e);
        ed.push_back(pred.diameter_px - tru.diameter_px);
        ex.push_back(t.x() - tru.shift_px.x());
        ey.push_back(t.y() - tru.shift_px.y());
    }
    LatentErrors out;
    out.theta_deg = summarize(std::move(et));
    out.diameter_px = summarize(std::move(ed));
    out.shift_x_px = summarize(std::move(ex));
    out.shift_y_px = summarize(std::move(ey));
    out.flipped_fraction = truth.empty() ? 0.0 : static_cast<double>(flipped) / truth.size();
    return out;
}

Histogram histogram(const std::vector<double>& values, double lo, double hi, int n_bins)
{
    if (n_bins < 1 || !(hi > lo))
        throw ConfigError("histogram needs n_bins >= 1 and hi > lo");
    Histogram h;
    h.counts.assign(static_cast<std::size_t>(n_bins), 0);
    for (int k = 0; k <= n_bins; ++k)
        h.edges.push_back(lo + (hi - lo) * k / n_bins);
    for (double v : values) {
        if (v < lo || v > hi)
            continue;
        auto k = static_cast<int>((v - lo) / (hi - lo) * n_bins);
        ++h.counts[static_cast<std::size_t>(std::min(k, n_bins - 1))];
    }
    return h;
}

double profile_fwhm(const std::vector<double>& profile)
{
    if (profile.empty())
        throw DataError("empty profile");
    const auto peak_it = std::max_element(profile.begin(), profile.end());
    const auto peak = static_cast<std::size_t>(peak_it - profile.begin());
    const double half = *peak_it / 2.0;
    double left = 0.0, right = static_cast<double>(profile.size() - 1);
    for (std::size_t k = peak; k > 0; --k)
        if (profile[k - 1] < half) {
            left = (k - 1) + (half - profile[k - 1]) / (profile[k] - profile[k - 1]);
            break;
        }
    for (std::size_t k = peak; k + 1 < profile.size(); ++k)
        if (profile[k + 1] < half) {
            right = k + (profile[k] - half) / (profile[k] - profile[k + 1]);
            break;
        }
    return right - left;
}

} // namespace hspi
