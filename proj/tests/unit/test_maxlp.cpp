#include "hspi/errors.hpp"
#include "hspi/maxlp.hpp"
#include "hspi/parallel.hpp"

#include "fixtures.hpp"

#include <doctest.h>

#include <numeric>

using namespace hspi;

namespace {

struct Fixture {
    DetectorGeometry geom = build_detector(61, 30.0, 3.0);
    RealGrid object = random_blob_object(test::small_spec());
    ComplexModel truth = density_to_model(object);
    LatentGrid grid;

    Fixture()
    {
        grid.thetas = make_range(0.0, deg_to_rad(174.0), deg_to_rad(6.0));
        grid.diameters = {6.5, 7.0, 7.5};
        grid.shifts_x = grid.shifts_y = {-1.0, 0.0, 1.0};
        grid.theta_step = deg_to_rad(6.0);
        grid.diameter_step = 0.5;
        grid.shift_step = 1.0;
    }

    /// Frames rendered exactly at the given grid points.
    SparseDataset at_grid_points(const std::vector<std::size_t>& points, double photons, std::uint64_t seed) const
    {
        SimulationConfig cfg;
        cfg.target_photons = photons;
        cfg.seed = seed;
        SparseDataset ds;
        ds.meta.side_px = 61;
        ds.meta.aperture_radius_px = 30.0;
        ds.meta.hole_radius_px = 3.0;
        ds.meta.scale = calibrate_scale(test::source_of(object), geom, cfg);
        ComplexModel m = truth;
        m.scale = ds.meta.scale;
        std::mt19937_64 rng(seed);
        for (std::size_t h : points)
            ds.frames.push_back(
                poisson_sample(render_frame(m, geom, grid.at(grid.unflatten(h)), SphereReference{7.0, 11.0}), geom,
                               rng));
        return ds;
    }

    ComplexModel scaled_truth(double scale) const
    {
        ComplexModel m = truth;
        m.scale = scale;
        return m;
    }
};

SparseDataset simulated(const Fixture& f, int n_frames, double photons, std::uint64_t seed)
{
    SimulationConfig cfg;
    cfg.n_frames = n_frames;
    cfg.target_photons = photons;
    cfg.seed = seed;
    return generate_dataset(test::source_of(f.object), f.geom, cfg).dataset;
}

/// Observations with a known optimum neighbourhood.
PixelObservations synthetic_obs(Complex truth, int n, double ref_amp, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    PixelObservations obs;
    for (int k = 0; k < n; ++k) {
        const double phase = kTwoPi * u(rng);
        std::poisson_distribution<int> pois(std::norm(truth + std::polar(ref_amp, phase)));
        obs.add(pois(rng), ref_amp, phase);
    }
    return obs;
}

Complex dense_argmax(const PixelObservations& obs, Complex centre, double half_width)
{
    for (int pass = 0; pass < 2; ++pass) {
        const int n = 400;
        const double h = 2 * half_width / (n - 1);
        double best = -INFINITY;
        Complex arg = centre;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                const Complex g = centre + Complex(-half_width + i * h, -half_width + j * h);
                const double v = obs.log_likelihood(g);
                if (v > best) {
                    best = v;
                    arg = g;
                }
            }
        centre = arg;
        half_width = 2 * h;
    }
    return centre;
}

} // namespace

TEST_SUITE("maxlp")
{
    TEST_CASE("empty frame likelihood is minus the total intensity")
    {
        Fixture f;
        const ComplexModel m = f.scaled_truth(0.01);
        const LatentParams lat{0.4, 7.2, Vec2d(0.3, -0.2)};
        const SphereReference ref{7.0, 11.0};
        CHECK(frame_log_likelihood(SparseFrame{}, m, lat, f.geom, ref)
              == doctest::Approx(-render_frame(m, f.geom, lat, ref).sum()).epsilon(1e-12));
    }

    TEST_CASE("three-pixel toy")
    {
        // Intensities 1, 2, 3 on three pixels of a 3x3 detector, zero elsewhere.
        const DetectorGeometry g = build_detector(3, 1.5, 0.0);
        ComplexModel m{ComplexGrid::Zero(3, 3), MaskGrid::Ones(3, 3), 1.0};
        m.grid(0, 1) = std::sqrt(1.0);
        m.grid(1, 1) = std::sqrt(2.0);
        m.grid(2, 1) = std::sqrt(3.0);
        SparseFrame k;
        k.one_indices = {4};
        k.multi_indices = {7};
        k.multi_counts = {2};
        const double q = frame_log_likelihood(k, m, {}, g, SphereReference{7.0, 0.0});
        CHECK(q == doctest::Approx(std::log(2.0) + 2 * std::log(3.0) - 6.0).epsilon(1e-12));
    }

    TEST_CASE("sparse evaluation equals the dense pixel loop")
    {
        Fixture f;
        for (int k = 0; k < 16; ++k) {
            ComplexModel m = test::random_model(61, 100 + k, 0.5);
            m.scale = 0.7;
            std::mt19937_64 rng(k);
            const LatentParams lat = sample_latents(rng, {});
            const SphereReference ref{7.0, 11.0};
            const RealGrid mu = render_frame(m, f.geom, lat, ref);
            const SparseFrame frame = poisson_sample(mu, f.geom, rng);
            const RealGrid counts = test::counts_of(frame, 61);
            double dense = 0.0;
            for (int p : f.geom.good_pixels())
                dense += (counts(p) > 0 ? counts(p) * std::log(std::max(mu(p), 1e-20)) : 0.0) - mu(p);
            CHECK(std::abs(frame_log_likelihood(frame, m, lat, f.geom, ref) - dense)
                  <= 1e-8 * std::max(1.0, std::abs(dense)));
        }
    }

    TEST_CASE("true latent wins on a small grid at high signal")
    {
        Fixture f;
        LatentGrid g;
        g.thetas = {0.0, 0.5, 1.0};
        g.diameters = {6.5, 7.0};
        g.shifts_x = {0.0};
        g.shifts_y = {0.0};
        // Five candidates: the truth (theta 0.5, D 7) and four neighbours.
        const std::vector<LatentParams> candidates{
            {0.5, 7.0, Vec2d::Zero()}, {0.0, 7.0, Vec2d::Zero()}, {1.0, 7.0, Vec2d::Zero()},
            {0.5, 6.5, Vec2d::Zero()}, {0.5, 7.0, Vec2d(1.0, 0.0)}};
        SimulationConfig cfg;
        cfg.target_photons = 1e5;
        const double scale = calibrate_scale(test::source_of(f.object), f.geom, cfg);
        const ComplexModel m = f.scaled_truth(scale);
        std::mt19937_64 rng(3);
        const SphereReference ref{7.0, 11.0};
        const SparseFrame frame = poisson_sample(render_frame(m, f.geom, candidates[0], ref), f.geom, rng);
        const double q0 = frame_log_likelihood(frame, m, candidates[0], f.geom, ref);
        for (std::size_t k = 1; k < candidates.size(); ++k)
            CHECK(q0 > frame_log_likelihood(frame, m, candidates[k], f.geom, ref));
    }

    TEST_CASE("assignment round trip at grid points")
    {
        Fixture f;
        std::mt19937_64 rng(17);
        std::uniform_int_distribution<std::size_t> pick(0, f.grid.size() - 1);
        std::vector<std::size_t> points(100);
        for (auto& p : points)
            p = pick(rng);
        const SparseDataset ds = f.at_grid_points(points, 1e5, 4);
        const Assignment a = assign_latents(ds, f.scaled_truth(ds.meta.scale), f.grid, f.geom);
        REQUIRE(a.frames.size() == points.size());
        int hits = 0;
        for (std::size_t d = 0; d < points.size(); ++d) {
            hits += f.grid.flatten(a.frames[d].index) == points[d];
            CHECK(std::isfinite(a.frames[d].log_likelihood));
        }
        CHECK(hits >= 99);
    }

    TEST_CASE("single-point and duplicate grids")
    {
        Fixture f;
        const SparseDataset ds = simulated(f, 20, 1e4, 5);
        const ComplexModel m = f.scaled_truth(ds.meta.scale);
        LatentGrid one;
        one.thetas = {0.3};
        one.diameters = {7.0};
        one.shifts_x = one.shifts_y = {0.0};
        for (const auto& a : assign_latents(ds, m, one, f.geom).frames)
            CHECK(one.flatten(a.index) == 0);

        LatentGrid dup = one;
        dup.thetas = {0.3, 0.3};
        for (const auto& a : assign_latents(ds, m, dup, f.geom).frames)
            CHECK(a.index.theta == 0);
    }

    TEST_CASE("latent grid helpers")
    {
        const auto r = make_range(-2.0, 2.0, 1.0);
        CHECK(r == std::vector<double>{-2, -1, 0, 1, 2});
        const LatentGrid g = default_latent_grid(LatentConfig{});
        CHECK(g.thetas.size() == 90);
        CHECK(g.thetas.back() == doctest::Approx(deg_to_rad(178.0)));
        CHECK(g.diameters.front() == doctest::Approx(6.0));
        CHECK(g.diameters.back() == doctest::Approx(8.0));
        CHECK(g.shifts_x.size() == 5);
        for (std::size_t h : {std::size_t(0), g.size() / 3, g.size() - 1})
            CHECK(g.flatten(g.unflatten(h)) == h);
        LatentGrid bad = g;
        bad.diameters.clear();
        CHECK_THROWS_AS(bad.validate(), ConfigError);
    }

    TEST_CASE("pattern search recovers the constant-intensity Poisson MLE")
    {
        // Reference amplitude 0: |F|^2 -> N / n.
        PixelObservations obs;
        const std::vector<int> counts{3, 7, 4, 0, 5, 6, 2, 9};
        for (int c : counts)
            obs.add(c, 0.0, 0.0);
        const double mle = std::accumulate(counts.begin(), counts.end(), 0.0) / counts.size();
        PatternSearchConfig cfg;
        cfg.tol_rel = 1e-6;
        const PatternSearchResult r = pixel_pattern_search(obs, Complex(1.0, 1.0), cfg);
        CHECK(std::norm(r.value) == doctest::Approx(mle).epsilon(1e-4));
    }

    TEST_CASE("pattern search matches a dense-grid oracle")
    {
        // 64 frames, mean about 50 photons per pixel-frame.
        const Complex truth(2.0, 1.0);
        const PixelObservations obs = synthetic_obs(truth, 64, 6.5, 8);
        const Complex oracle = dense_argmax(obs, truth, 2.0);
        const PatternSearchResult r = pixel_pattern_search(obs, Complex(1.5, 1.5));
        CHECK(std::abs(r.value - oracle) < 0.05);
    }

    TEST_CASE("pattern search contract")
    {
        CHECK(pixel_pattern_search(PixelObservations{}, Complex(3, 4)).value == Complex(3, 4));
        for (int k = 0; k < 20; ++k) {
            const PixelObservations obs = synthetic_obs(Complex(1.0 + 0.2 * k, -0.5), 50 + k, 4.0, 200 + k);
            const Complex init(0.1 * k, 0.2);
            const PatternSearchResult r = pixel_pattern_search(obs, init);
            CHECK(obs.log_likelihood(r.value) >= obs.log_likelihood(init));
            // Local stationarity: gradient at the result below that at init.
            auto grad = [&](Complex g) {
                const double h = 1e-6;
                const double gx
                    = (obs.log_likelihood(g + Complex(h, 0)) - obs.log_likelihood(g - Complex(h, 0))) / (2 * h);
                const double gy
                    = (obs.log_likelihood(g + Complex(0, h)) - obs.log_likelihood(g - Complex(0, h))) / (2 * h);
                return std::hypot(gx, gy);
            };
            CHECK(grad(r.value) < grad(init));
        }
        PatternSearchConfig bad;
        bad.init_step = 1e-3;
        bad.tol = 1.0;
        CHECK_THROWS_AS(pixel_pattern_search(synthetic_obs(Complex(1, 0), 10, 1.0, 1), Complex(1, 0), bad),
                        ConfigError);
    }

    TEST_CASE("update marks everything unreliable when n_min exceeds the observations")
    {
        Fixture f;
        const SparseDataset ds = simulated(f, 30, 1e4, 6);
        const ComplexModel m = f.scaled_truth(ds.meta.scale);
        const Assignment a = assign_latents(ds, m, f.grid, f.geom);
        // Nearest-neighbour binning can drop two detector pixels of one frame
        // onto the same model pixel, so a pixel sees at most 2 per frame.
        UpdateConfig cfg;
        cfg.n_min = 2 * 30 + 1;
        CHECK(update_model(ds, a, f.grid, f.geom, m, cfg).reliable.cast<int>().sum() == 0);
    }

    TEST_CASE("single-latent data fails the phase-spread test")
    {
        Fixture f;
        // Every frame at theta 0, D 7, t 0: the reference phase never varies.
        const std::vector<std::size_t> points(40, f.grid.flatten({0, 1, 1, 1}));
        const SparseDataset ds = f.at_grid_points(points, 1e4, 9);
        const ComplexModel m = f.scaled_truth(ds.meta.scale);
        const Assignment a = assign_latents(ds, m, f.grid, f.geom);
        UpdateConfig cfg;
        cfg.n_min = 1;
        const ComplexModel next = update_model(ds, a, f.grid, f.geom, m, cfg);
        CHECK(next.reliable.cast<int>().sum() == 0);
        cfg.phase_spread_min = 0.0;
        CHECK(update_model(ds, a, f.grid, f.geom, m, cfg).reliable.cast<int>().sum() > 0);
    }

    TEST_CASE("update is independent of pixel order and thread count")
    {
        Fixture f;
        const SparseDataset ds = simulated(f, 100, 1e4, 7);
        const ComplexModel m = f.scaled_truth(ds.meta.scale);
        const Assignment a = assign_latents(ds, m, f.grid, f.geom);
        const auto obs = collect_observations(ds, a, f.grid, f.geom);
        std::vector<int> order(static_cast<std::size_t>(61 * 61));
        std::iota(order.begin(), order.end(), 0);
        const ComplexModel forward = update_model_ordered(obs, f.geom, m, {}, order);
        std::mt19937_64 rng(1);
        std::shuffle(order.begin(), order.end(), rng);
        const ComplexModel shuffled = update_model_ordered(obs, f.geom, m, {}, order);
        CHECK(forward.grid == shuffled.grid);
        CHECK(forward.reliable == shuffled.reliable);

        set_num_threads(3);
        const ComplexModel threaded = update_model(ds, a, f.grid, f.geom, m);
        set_num_threads(1);
        CHECK(threaded.grid == forward.grid);
    }

    TEST_CASE("reconstruction loop")
    {
        Fixture f;
        const SparseDataset ds = simulated(f, 150, 1e4, 10);
        MaxlpConfig cfg;
        cfg.seed = 3;
        SUBCASE("one iteration is one assign plus one update")
        {
            cfg.n_iter = 1;
            const MaxlpState s = maxlp_reconstruct(ds, f.grid, cfg);
            const ComplexModel init = initial_model(ds, f.geom, cfg.seed);
            const Assignment a = assign_latents(ds, init, f.grid, f.geom);
            CHECK(s.model.grid == update_model(ds, a, f.grid, f.geom, init).grid);
            CHECK(s.trace.size() == 1);
        }
        SUBCASE("likelihood mostly rises and runs repeat exactly")
        {
            cfg.n_iter = 8;
            const MaxlpState s = maxlp_reconstruct(ds, f.grid, cfg);
            int up = 0;
            for (std::size_t k = 1; k < s.trace.size(); ++k)
                up += s.trace[k].log_likelihood >= s.trace[k - 1].log_likelihood;
            CHECK(up >= 0.9 * (s.trace.size() - 1));
            const MaxlpState again = maxlp_reconstruct(ds, f.grid, cfg);
            CHECK(again.model.grid == s.model.grid);
        }
        SUBCASE("resume continues bit-exactly")
        {
            cfg.n_iter = 4;
            const MaxlpState full = maxlp_reconstruct(ds, f.grid, cfg);
            MaxlpConfig half = cfg;
            half.n_iter = 2;
            const MaxlpState first = maxlp_reconstruct(ds, f.grid, half);
            const MaxlpState resumed = maxlp_reconstruct(ds, f.grid, cfg, {}, first);
            CHECK(resumed.model.grid == full.model.grid);
            CHECK(resumed.trace.size() == 4);
        }
        SUBCASE("zero iterations is a config error")
        {
            cfg.n_iter = 0;
            CHECK_THROWS_AS(maxlp_reconstruct(ds, f.grid, cfg), ConfigError);
        }
    }
}
