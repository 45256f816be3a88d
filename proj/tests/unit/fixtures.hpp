#ifndef HSPI_TESTS_FIXTURES_HPP
#define HSPI_TESTS_FIXTURES_HPP

#include "hspi/object_gen.hpp"
#include "hspi/simulate.hpp"

#include <random>

namespace hspi::test {

/// Small blob object on a 61 px grid, compact enough to phase.
inline TargetSpec small_spec(int side = 61, std::uint64_t seed = 5)
{
    TargetSpec s;
    s.side_px = side;
    s.n_blobs = 25;
    s.blob_radius_min_px = 1.5;
    s.blob_radius_max_px = 3.0;
    s.extent_px = 12.0;
    s.seed = seed;
    return s;
}

inline TargetSource source_of(const RealGrid& density)
{
    TargetSource src;
    src.base = density;
    return src;
}

inline ComplexModel random_model(int side, std::uint64_t seed, double amplitude = 3.0)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    ComplexModel m{ComplexGrid(side, side), MaskGrid::Ones(side, side), 1.0};
    for (int i = 0; i < m.grid.size(); ++i)
        m.grid(i) = std::polar(amplitude * u(rng), kTwoPi * u(rng));
    return m;
}

/// Count image of a sparse frame.
inline RealGrid counts_of(const SparseFrame& f, int side)
{
    RealGrid k = RealGrid::Zero(side, side);
    for (auto p : f.one_indices)
        k(p / side, p % side) = 1;
    for (std::size_t i = 0; i < f.multi_indices.size(); ++i)
        k(f.multi_indices[i] / side, f.multi_indices[i] % side) = f.multi_counts[i];
    return k;
}

} // namespace hspi::test

#endif // HSPI_TESTS_FIXTURES_HPP
