#include "hspi/object_gen.hpp"

#include "hspi/errors.hpp"
#include "hspi/fft.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace hspi {

void add_projected_sphere(RealGrid& grid, const Vec2d& center, double radius_px, double density)
{
    constexpr int kSub = 5;
    const double r2 = radius_px * radius_px;
    const auto lo_i = static_cast<Eigen::Index>(std::floor(center.x() - radius_px - 1.0));
    const auto hi_i = static_cast<Eigen::Index>(std::ceil(center.x() + radius_px + 1.0));
    const auto lo_j = static_cast<Eigen::Index>(std::floor(center.y() - radius_px - 1.0));
    const auto hi_j = static_cast<Eigen::Index>(std::ceil(center.y() + radius_px + 1.0));
    for (Eigen::Index i = std::max<Eigen::Index>(lo_i, 0); i <= std::min(hi_i, grid.rows() - 1); ++i) {
        for (Eigen::Index j = std::max<Eigen::Index>(lo_j, 0); j <= std::min(hi_j, grid.cols() - 1); ++j) {
            double acc = 0.0;
            for (int si = 0; si < kSub; ++si) {
                const double x = static_cast<double>(i) - 0.5 + (si + 0.5) / kSub - center.x();
                for (int sj = 0; sj < kSub; ++sj) {
                    const double y = static_cast<double>(j) - 0.5 + (sj + 0.5) / kSub - center.y();
                    const double d2 = r2 - x * x - y * y;
                    if (d2 > 0.0)
                        acc += 2.0 * std::sqrt(d2);
                }
            }
            grid(i, j) += density * acc / (kSub * kSub);
        }
    }
}

RealGrid random_blob_object(const TargetSpec& spec)
{
    if (spec.n_blobs < 1)
        throw ConfigError("n_blobs must be >= 1");
    if (!(spec.blob_radius_min_px > 0.0) || spec.blob_radius_max_px < spec.blob_radius_min_px)
        throw ConfigError("invalid blob radius range");
    if (spec.blob_radius_max_px > spec.extent_px)
        throw ConfigError("blob radius exceeds object extent");
    if (spec.extent_px + 1.0 > (spec.side_px - 1) / 2.0)
        throw ConfigError("object extent does not fit inside the grid");
    if (spec.density < 0.0)
        throw ConfigError("blob density must be non-negative");

    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double c = (spec.side_px - 1) / 2.0;
    RealGrid grid = RealGrid::Zero(spec.side_px, spec.side_px);
    for (int b = 0; b < spec.n_blobs; ++b) {
        const double radius = spec.blob_radius_min_px + (spec.blob_radius_max_px - spec.blob_radius_min_px) * unit(rng);
        const double reach = spec.extent_px - radius;
        // Uniform in the disc: sqrt of a uniform radius fraction.
        const double rho = reach * std::sqrt(unit(rng));
        const double phi = kTwoPi * unit(rng);
        add_projected_sphere(grid, Vec2d(c + rho * std::cos(phi), c + rho * std::sin(phi)), radius, spec.density);
    }
    return grid;
}

RealGrid place_subunit(const RealGrid& subunit, const Vec2d& offset_px)
{
    const Eigen::Index rows = subunit.rows();
    const Eigen::Index cols = subunit.cols();
    RealGrid out = RealGrid::Zero(rows, cols);
    const double fi = std::floor(offset_px.x());
    const double fj = std::floor(offset_px.y());
    const auto di = static_cast<Eigen::Index>(fi);
    const auto dj = static_cast<Eigen::Index>(fj);
    const double wi = offset_px.x() - fi;
    const double wj = offset_px.y() - fj;
    const double w[2][2] = {{(1 - wi) * (1 - wj), (1 - wi) * wj}, {wi * (1 - wj), wi * wj}};

    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) {
            const double v = subunit(i, j);
            if (v == 0.0)
                continue;
            for (int a = 0; a < 2; ++a) {
                for (int b = 0; b < 2; ++b) {
                    if (w[a][b] == 0.0)
                        continue;
                    const Eigen::Index ti = i + di + a;
                    const Eigen::Index tj = j + dj + b;
                    if (ti < 0 || tj < 0 || ti >= rows || tj >= cols)
                        throw DataError("subunit placement leaves the grid");
                    out(ti, tj) += v * w[a][b];
                }
            }
        }
    }
    return out;
}

namespace {

void check_commensurate(const RealGrid& base, const RealGrid& subunit)
{
    if (base.rows() != subunit.rows() || base.cols() != subunit.cols())
        throw ConfigError("base and subunit grids differ in size");
}

} // namespace

RealGrid two_state_variant(const RealGrid& base, const RealGrid& subunit, const HeterogeneitySpec& spec, int state)
{
    check_commensurate(base, subunit);
    if (state != 0 && state != 1)
        throw ConfigError("two-state selector must be 0 or 1");
    const Vec2d offset = state == 0 ? spec.offset_px : Vec2d(-spec.offset_px);
    return base + place_subunit(subunit, offset);
}

RealGrid continuous_variant(const RealGrid& base, const RealGrid& subunit, const HeterogeneitySpec& spec,
                            const Vec2d& displacement_px)
{
    check_commensurate(base, subunit);
    return base + place_subunit(subunit, spec.offset_px + displacement_px);
}

VariantDraw heterogeneous_variant(const RealGrid& base, const RealGrid& subunit, const HeterogeneitySpec& spec,
                                  std::mt19937_64& rng)
{
    VariantDraw draw;
    if (spec.mode == HeterogeneityMode::TwoState) {
        std::bernoulli_distribution coin(0.5);
        draw.state = coin(rng) ? 1 : 0;
        draw.offset_px = draw.state == 0 ? spec.offset_px : Vec2d(-spec.offset_px);
        draw.density = two_state_variant(base, subunit, spec, draw.state);
        return draw;
    }
    Vec2d disp = Vec2d::Zero();
    if (spec.sigma_px > 0.0) {
        std::normal_distribution<double> normal(0.0, spec.sigma_px);
        disp.x() = normal(rng);
        disp.y() = normal(rng);
    }
    draw.offset_px = spec.offset_px + disp;
    draw.density = continuous_variant(base, subunit, spec, disp);
    return draw;
}

RealGrid average_structure(const RealGrid& base, const RealGrid& subunit, const HeterogeneitySpec& spec)
{
    check_commensurate(base, subunit);
    if (spec.mode == HeterogeneityMode::TwoState)
        return 0.5 * (two_state_variant(base, subunit, spec, 0) + two_state_variant(base, subunit, spec, 1));
    if (spec.sigma_px <= 0.0)
        return continuous_variant(base, subunit, spec, Vec2d::Zero());

    constexpr double kStep = 0.05;
    const int half = static_cast<int>(std::ceil(4.0 * spec.sigma_px / kStep));
    std::vector<double> w1(static_cast<std::size_t>(2 * half + 1));
    double wsum = 0.0;
    for (int k = -half; k <= half; ++k) {
        const double x = k * kStep / spec.sigma_px;
        w1[static_cast<std::size_t>(k + half)] = std::exp(-0.5 * x * x);
        wsum += w1[static_cast<std::size_t>(k + half)];
    }
    RealGrid acc = RealGrid::Zero(base.rows(), base.cols());
    for (int a = -half; a <= half; ++a) {
        for (int b = -half; b <= half; ++b) {
            const double w = w1[static_cast<std::size_t>(a + half)] * w1[static_cast<std::size_t>(b + half)] / (wsum * wsum);
            acc += w * place_subunit(subunit, spec.offset_px + Vec2d(a * kStep, b * kStep));
        }
    }
    return base + acc;
}

ComplexModel density_to_model(const RealGrid& density)
{
    if ((density.array() < 0.0).any())
        throw DataError("density must be non-negative");
    ComplexModel m;
    m.grid = fft2_centered(density);
    m.reliable = MaskGrid::Ones(density.rows(), density.cols());
    m.scale = 1.0;
    return m;
}

ComplexModel density_to_model(const RealGrid& density, const DetectorGeometry& geom)
{
    if (density.rows() != geom.side() || density.cols() != geom.side())
        throw ConfigError("density and detector dimensions differ");
    ComplexModel m = density_to_model(density);
    m.reliable = geom.good_mask();
    return m;
}

} // namespace hspi
