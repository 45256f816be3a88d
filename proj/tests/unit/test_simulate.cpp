#include "hspi/errors.hpp"
#include "hspi/io.hpp"
#include "hspi/parallel.hpp"
#include "hspi/simulate.hpp"

#include "fixtures.hpp"

#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iterator>

using namespace hspi;

namespace {

const DetectorGeometry& small_geom()
{
    static const DetectorGeometry g = build_detector(61, 30.0, 3.0);
    return g;
}

const RealGrid& small_object()
{
    static const RealGrid o = random_blob_object(test::small_spec());
    return o;
}

} // namespace

TEST_SUITE("simulate")
{
    TEST_CASE("degenerate latent distributions")
    {
        std::mt19937_64 rng(1);
        const LatentConfig cfg{7.0, 0.0, 0.0};
        for (int k = 0; k < 100; ++k) {
            const LatentParams l = sample_latents(rng, cfg);
            CHECK(l.diameter_px == 7.0);
            CHECK(l.shift_px == Vec2d::Zero());
            CHECK(l.theta >= 0.0);
            CHECK(l.theta < kTwoPi);
        }
    }

    TEST_CASE("latent moments")
    {
        std::mt19937_64 rng(2);
        const int n = 100000;
        double s1 = 0, s2 = 0, t1 = 0, t2 = 0;
        for (int k = 0; k < n; ++k) {
            const LatentParams l = sample_latents(rng, LatentConfig{});
            s1 += l.diameter_px;
            s2 += l.diameter_px * l.diameter_px;
            t1 += l.shift_px.x();
            t2 += l.shift_px.x() * l.shift_px.x();
        }
        const double mean = s1 / n;
        CHECK(mean == doctest::Approx(7.0).epsilon(0.01 / 7.0));
        CHECK(std::sqrt(s2 / n - mean * mean) == doctest::Approx(0.5).epsilon(0.02));
        CHECK(std::abs(t1 / n) < 0.01);
        CHECK(std::sqrt(t2 / n) == doctest::Approx(1.0).epsilon(0.01));
    }

    TEST_CASE("fixed seed gives an identical latent sequence")
    {
        std::mt19937_64 a = frame_rng(5, 3);
        std::mt19937_64 b = frame_rng(5, 3);
        for (int k = 0; k < 10; ++k) {
            const LatentParams x = sample_latents(a, {});
            const LatentParams y = sample_latents(b, {});
            CHECK(x.theta == y.theta);
            CHECK(x.diameter_px == y.diameter_px);
            CHECK(x.shift_px == y.shift_px);
        }
        std::mt19937_64 c = frame_rng(5, 4);
        CHECK(sample_latents(c, {}).theta != sample_latents(a, {}).theta);
    }

    TEST_CASE("scale is linear in the photon target")
    {
        SimulationConfig cfg;
        cfg.target_photons = 5e3;
        const TargetSource src = test::source_of(small_object());
        const double s1 = calibrate_scale(src, small_geom(), cfg);
        cfg.target_photons = 1e4;
        CHECK(calibrate_scale(src, small_geom(), cfg) == doctest::Approx(2 * s1).epsilon(1e-12));
        cfg.target_photons = 0;
        CHECK_THROWS_AS(calibrate_scale(src, small_geom(), cfg), ConfigError);
    }

    TEST_CASE("calibrated datasets hit the photon target")
    {
        SimulationConfig cfg;
        cfg.n_frames = 300;
        cfg.target_photons = 1e4;
        cfg.seed = 8;
        const SimulationResult r = generate_dataset(test::source_of(small_object()), small_geom(), cfg);
        const double mean = static_cast<double>(r.dataset.total_photons()) / cfg.n_frames;
        CHECK(mean >= 9.5e3);
        CHECK(mean <= 1.05e4);
    }

    TEST_CASE("single probe reproduces the exact ratio for its draw")
    {
        // Reference alone: the probe's total does not depend on its draw.
        SimulationConfig cfg;
        cfg.n_probe = 1;
        cfg.target_photons = 1e4;
        double total = 0.0;
        for (int p : small_geom().good_pixels())
            total += std::pow(sphere_ft(small_geom().q(p).norm(), 7.0, cfg.contrast), 2);
        for (double sd : {0.0, 0.5}) {
            cfg.latents.sigma_diameter_px = 0.0;
            cfg.latents.sigma_shift_px = sd;
            const double s = calibrate_scale(test::source_of(RealGrid::Zero(61, 61)), small_geom(), cfg);
            CHECK(s == doctest::Approx(1e4 / total).epsilon(1e-12));
        }
    }

    TEST_CASE("poisson sampler")
    {
        SUBCASE("zero intensity gives an empty frame")
        {
            std::mt19937_64 rng(1);
            CHECK(poisson_sample(RealGrid::Zero(61, 61), small_geom(), rng).empty());
        }
        SUBCASE("moments on a million pixels")
        {
            const DetectorGeometry g = build_detector(1201, 600.0, 0.0);
            std::mt19937_64 rng(4);
            const SparseFrame f = poisson_sample(RealGrid::Constant(1201, 1201, 3.0), g, rng);
            double s1 = static_cast<double>(f.one_indices.size());
            double s2 = s1;
            for (int c : f.multi_counts) {
                s1 += c;
                s2 += static_cast<double>(c) * c;
            }
            const double n = g.n_good();
            CHECK(n >= 1e6);
            const double mean = s1 / n;
            CHECK(mean == doctest::Approx(3.0).epsilon(0.01 / 3.0));
            CHECK((s2 / n - mean * mean) / mean == doctest::Approx(1.0).epsilon(0.02));
        }
        SUBCASE("zero-count probability at mean 5")
        {
            const DetectorGeometry g = build_detector(3, 1.5, 0.0);
            RealGrid img = RealGrid::Zero(3, 3);
            img(1, 1) = 5.0;
            std::mt19937_64 rng(7);
            const int n = 100000;
            int zeros = 0;
            for (int k = 0; k < n; ++k)
                zeros += poisson_sample(img, g, rng).empty();
            const double p = std::exp(-5.0);
            CHECK(std::abs(zeros - n * p) <= 3.0 * std::sqrt(n * p * (1 - p)));
        }
        SUBCASE("index lists are sorted, disjoint and good")
        {
            std::mt19937_64 rng(5);
            const SparseFrame f = poisson_sample(RealGrid::Constant(61, 61, 0.8), small_geom(), rng);
            CHECK(std::is_sorted(f.one_indices.begin(), f.one_indices.end()));
            CHECK(std::is_sorted(f.multi_indices.begin(), f.multi_indices.end()));
            std::vector<std::uint32_t> both;
            std::set_intersection(f.one_indices.begin(), f.one_indices.end(), f.multi_indices.begin(),
                                  f.multi_indices.end(), std::back_inserter(both));
            CHECK(both.empty());
            for (auto p : f.one_indices)
                CHECK(small_geom().is_good(static_cast<int>(p)));
            for (int c : f.multi_counts)
                CHECK(c >= 2);
        }
        SUBCASE("negative intensity is a numerical error")
        {
            std::mt19937_64 rng(1);
            CHECK_THROWS_AS(poisson_sample(RealGrid::Constant(61, 61, -1.0), small_geom(), rng), NumericalError);
        }
    }

    TEST_CASE("aggregate counts follow the rendered Poisson means")
    {
        SimulationConfig cfg;
        cfg.n_frames = 16;
        cfg.target_photons = 2e4;
        cfg.seed = 12;
        const SimulationResult r = generate_dataset(test::source_of(small_object()), small_geom(), cfg);
        ComplexModel m = density_to_model(small_object());
        m.scale = r.dataset.meta.scale;
        const SphereReference ref{7.0, cfg.contrast};
        constexpr int kBins = 6;
        std::array<double, kBins> expected{};
        std::array<double, kBins> observed{};
        for (int d = 0; d < cfg.n_frames; ++d) {
            const RealGrid mu = render_frame(m, small_geom(), r.truth[d].latent, ref);
            const RealGrid k = test::counts_of(r.dataset.frames[d], 61);
            for (int p : small_geom().good_pixels()) {
                double pk = std::exp(-mu(p));
                double tail = 1.0;
                for (int b = 0; b < kBins - 1; ++b) {
                    expected[b] += pk;
                    tail -= pk;
                    pk *= mu(p) / (b + 1);
                }
                expected[kBins - 1] += tail;
                observed[std::min(static_cast<int>(k(p)), kBins - 1)] += 1;
            }
        }
        double chi2 = 0.0;
        for (int b = 0; b < kBins; ++b)
            chi2 += std::pow(observed[b] - expected[b], 2) / expected[b];
        // 99th percentile of chi-square with 5 degrees of freedom.
        CHECK(chi2 < 15.086);
    }

    TEST_CASE("single bright frame")
    {
        SimulationConfig cfg;
        cfg.n_frames = 1;
        cfg.target_photons = 1e5;
        const SimulationResult r = generate_dataset(test::source_of(small_object()), small_geom(), cfg);
        REQUIRE(r.dataset.frames.size() == 1);
        // Per-frame totals vary with the latents; the Poisson part is 5 sigma.
        const double n = static_cast<double>(r.dataset.total_photons());
        CHECK(n > 0.5e5);
        CHECK(n < 2e5);
    }

    TEST_CASE("no reference and zero density gives empty frames")
    {
        SimulationConfig cfg;
        cfg.n_frames = 5;
        cfg.with_reference = false;
        CHECK_THROWS_AS(generate_dataset(test::source_of(RealGrid::Zero(61, 61)), small_geom(), cfg),
                        NumericalError);
        // With a fixed scale the frames would be empty; the sampler shows it.
        std::mt19937_64 rng(1);
        ComplexModel zero{ComplexGrid::Zero(61, 61), MaskGrid::Ones(61, 61), 1.0};
        const RealGrid img = render_frame(zero, small_geom(), {}, SphereReference{7.0, 0.0});
        CHECK(poisson_sample(img, small_geom(), rng).empty());
    }

    TEST_CASE("datasets are deterministic across thread counts and round-trip exactly")
    {
        SimulationConfig cfg;
        cfg.n_frames = 64;
        cfg.seed = 99;
        set_num_threads(1);
        const SimulationResult a = generate_dataset(test::source_of(small_object()), small_geom(), cfg);
        set_num_threads(4);
        const SimulationResult b = generate_dataset(test::source_of(small_object()), small_geom(), cfg);
        set_num_threads(1);
        const auto dir = std::filesystem::temp_directory_path() / "hspi-unit-sim";
        std::filesystem::create_directories(dir);
        io::save_dataset(dir / "a", a.dataset);
        io::save_dataset(dir / "b", b.dataset);
        auto slurp = [](const std::filesystem::path& p) {
            std::ifstream in(p, std::ios::binary);
            return std::string(std::istreambuf_iterator<char>(in), {});
        };
        CHECK(slurp(dir / "a.hspi") == slurp(dir / "b.hspi"));
        const SparseDataset back = io::load_dataset(dir / "a");
        REQUIRE(back.frames.size() == a.dataset.frames.size());
        for (std::size_t d = 0; d < back.frames.size(); ++d) {
            CHECK(back.frames[d].one_indices == a.dataset.frames[d].one_indices);
            CHECK(back.frames[d].multi_indices == a.dataset.frames[d].multi_indices);
            CHECK(back.frames[d].multi_counts == a.dataset.frames[d].multi_counts);
        }
        CHECK(back.meta.scale == a.dataset.meta.scale);
        std::filesystem::remove_all(dir);
    }

    TEST_CASE("heterogeneous frames record their state")
    {
        TargetSource src = test::source_of(small_object());
        TargetSpec ss = test::small_spec(61, 2);
        ss.n_blobs = 3;
        ss.extent_px = 3.0;
        ss.blob_radius_min_px = 1.0;
        ss.blob_radius_max_px = 2.0;
        src.subunit = random_blob_object(ss);
        SimulationConfig cfg;
        cfg.n_frames = 200;
        const SimulationResult r = generate_dataset(src, small_geom(), cfg);
        int a = 0;
        for (const auto& t : r.truth) {
            CHECK((t.state == 0 || t.state == 1));
            a += t.state == 0;
        }
        CHECK(a > 60);
        CHECK(a < 140);
    }
}
