#include "hspi/config.hpp"

#include "hspi/errors.hpp"

#define TOML_EXCEPTIONS 1
#include <toml.hpp>

#include <fstream>
#include <set>
#include <sstream>

namespace hspi {

namespace {

namespace fs = std::filesystem;

class SectionReader {
public:
    SectionReader(const toml::table* table, std::string name) : table_(table), name_(std::move(name)) {}

    template <typename T>
    void read(const std::string& key, T& dst)
    {
        known_.insert(key);
        if (!table_)
            return;
        const toml::node* node = table_->get(key);
        if (!node)
            return;
        if constexpr (std::is_same_v<T, bool>) {
            if (!node->is_boolean())
                fail(key, "a boolean");
            dst = node->as_boolean()->get();
        } else if constexpr (std::is_integral_v<T>) {
            if (!node->is_integer())
                fail(key, "an integer");
            const auto v = node->as_integer()->get();
            if (std::is_unsigned_v<T> && v < 0)
                fail(key, "a non-negative integer");
            dst = static_cast<T>(v);
        } else if constexpr (std::is_floating_point_v<T>) {
            if (node->is_integer())
                dst = static_cast<T>(node->as_integer()->get());
            else if (node->is_floating_point())
                dst = static_cast<T>(node->as_floating_point()->get());
            else
                fail(key, "a number");
        } else if constexpr (std::is_same_v<T, std::string>) {
            if (!node->is_string())
                fail(key, "a string");
            dst = node->as_string()->get();
        } else if constexpr (std::is_same_v<T, Vec2d>) {
            const toml::array* arr = node->as_array();
            if (!arr || arr->size() != 2)
                fail(key, "a two-element array");
            for (std::size_t k = 0; k < 2; ++k) {
                const auto v = arr->get(k)->value<double>();
                if (!v)
                    fail(key, "a two-element numeric array");
                dst[static_cast<Eigen::Index>(k)] = *v;
            }
        } else {
            static_assert(sizeof(T) == 0, "unsupported config type");
        }
    }

    template <typename T>
    void read(const std::string& key, std::optional<T>& dst)
    {
        known_.insert(key);
        if (!table_ || !table_->get(key))
            return;
        T v{};
        read(key, v);
        dst = v;
    }

    bool has(const std::string& key) const { return table_ && table_->get(key); }

    void finish() const
    {
        if (!table_)
            return;
        for (const auto& [k, v] : *table_) {
            const std::string key(k.str());
            if (!known_.count(key))
                throw ConfigError("unknown key '" + key + "' in " + where());
        }
    }

private:
    [[noreturn]] void fail(const std::string& key, const std::string& what) const
    {
        throw ConfigError("'" + key + "' in " + where() + " must be " + what);
    }
    std::string where() const { return name_.empty() ? "top level" : "[" + name_ + "]"; }

    const toml::table* table_;
    std::string name_;
    std::set<std::string> known_;
};

void require(bool ok, const std::string& msg)
{
    if (!ok)
        throw ConfigError(msg);
}

ObjectKind parse_kind(const std::string& s)
{
    if (s == "homogeneous")
        return ObjectKind::Homogeneous;
    if (s == "two_state")
        return ObjectKind::TwoState;
    if (s == "continuous")
        return ObjectKind::Continuous;
    throw ConfigError("object kind must be homogeneous, two_state or continuous, got '" + s + "'");
}

void validate(const RunConfig& c)
{
    require(c.geometry.side_px >= 3 && c.geometry.side_px % 2 == 1, "geometry.side_px must be odd and >= 3");
    require(c.geometry.hole_radius_px >= 0 && c.geometry.hole_radius_px < c.geometry.aperture_radius_px
                && c.geometry.aperture_radius_px <= c.geometry.side_px / 2.0,
            "geometry radii must satisfy 0 <= hole < aperture <= side/2");
    for (const TargetSpec* t : {&c.object.target, &c.object.subunit}) {
        require(t->n_blobs >= 1, "object n_blobs must be >= 1");
        require(t->blob_radius_min_px > 0 && t->blob_radius_min_px <= t->blob_radius_max_px,
                "object blob radii must satisfy 0 < min <= max");
        require(t->blob_radius_max_px <= t->extent_px, "object blob radius exceeds extent");
        require(t->extent_px < c.geometry.side_px / 2.0, "object extent does not fit the grid");
        require(t->density > 0, "object density must be positive");
    }
    require(c.object.subunit_sigma_px >= 0, "object.subunit_sigma_px must be >= 0");
    require(c.reference.mean_diameter_px > 0 && c.reference.sigma_diameter_px >= 0 && c.reference.contrast >= 0,
            "reference diameter must be positive and sigma, contrast non-negative");
    require(c.simulate.n_frames >= 1, "simulate.n_frames must be >= 1");
    require(c.simulate.photons_per_frame > 0, "simulate.photons_per_frame must be positive");
    require(c.simulate.sigma_shift_px >= 0, "simulate.sigma_shift_px must be >= 0");
    require(c.simulate.n_probe >= 1, "simulate.n_probe must be >= 1");
    require(c.latent_grid.theta_step_deg > 0 && c.latent_grid.theta_step_deg <= 180,
            "latent_grid.theta_step_deg must be in (0, 180]");
    require(c.latent_grid.diameter_step_px > 0 && c.latent_grid.shift_step_px > 0,
            "latent_grid steps must be positive");
    require(c.latent_grid.shift_max_px >= 0, "latent_grid.shift_max_px must be >= 0");
    require(c.maxlp.n_iter >= 1, "maxlp.n_iter must be >= 1");
    require(c.maxlp.n_min >= 0, "maxlp.n_min must be >= 0");
    require(c.maxlp.shrink > 0 && c.maxlp.shrink < 1, "maxlp.shrink must be in (0, 1)");
    require(c.maxlp.tol_rel > 0 && c.maxlp.tol_rel < 1, "maxlp.tol_rel must be in (0, 1)");
    require(c.maxlp.max_polls >= 1, "maxlp.max_polls must be >= 1");
    require(c.phase.beta > 0, "phase.beta must be positive");
    require(c.phase.n_iter >= 1, "phase.n_iter must be >= 1");
    require(c.phase.q_lo_frac >= 0 && c.phase.q_lo_frac < c.phase.q_hi_frac && c.phase.q_hi_frac <= 1,
            "phase band must satisfy 0 <= q_lo_frac < q_hi_frac <= 1");
    require(c.phase.threshold_frac >= 0 && c.phase.threshold_frac < 1, "phase.threshold_frac must be in [0, 1)");
    require(c.baseline.n_iter >= 1, "baseline.n_iter must be >= 1");
    require(c.baseline.theta_step_deg > 0 && c.baseline.theta_step_deg <= 180,
            "baseline.theta_step_deg must be in (0, 180]");
    require(c.metrics.ring_width_px > 0, "metrics.ring_width_px must be positive");
    require(c.metrics.align_step_deg > 0, "metrics.align_step_deg must be positive");
    require(c.metrics.histogram_bins >= 1, "metrics.histogram_bins must be >= 1");
}

void read_target(SectionReader& r, const std::string& prefix, TargetSpec& t)
{
    r.read(prefix + "n_blobs", t.n_blobs);
    r.read(prefix + "blob_radius_min_px", t.blob_radius_min_px);
    r.read(prefix + "blob_radius_max_px", t.blob_radius_max_px);
    r.read(prefix + "extent_px", t.extent_px);
    r.read(prefix + "density", t.density);
}

} // namespace

std::string to_string(ObjectKind kind)
{
    switch (kind) {
    case ObjectKind::Homogeneous:
        return "homogeneous";
    case ObjectKind::TwoState:
        return "two_state";
    case ObjectKind::Continuous:
        return "continuous";
    }
    return "homogeneous";
}

RunConfig parse_config(const std::string& text, const fs::path& base_dir)
{
    toml::table root;
    try {
        root = toml::parse(text);
    } catch (const toml::parse_error& e) {
        std::ostringstream msg;
        msg << "config parse error at line " << e.source().begin.line << ": " << e.description();
        throw ConfigError(msg.str());
    }

    static const std::set<std::string> sections = {"geometry", "object",      "reference", "simulate", "latent_grid",
                                                   "maxlp",    "phase",       "baseline",  "metrics"};
    RunConfig c;
    c.base_dir = base_dir;

    SectionReader top(&root, "");
    std::optional<std::int64_t> seed;
    top.read("seed", seed);
    if (!seed)
        throw ConfigError("config is missing the mandatory 'seed'");
    if (*seed < 0)
        throw ConfigError("'seed' must be non-negative");
    c.seed = static_cast<std::uint64_t>(*seed);
    std::string out = "output";
    top.read("output_dir", out);
    c.output_dir = base_dir / out;
    for (const auto& [k, v] : root) {
        const std::string key(k.str());
        if (v.is_table()) {
            if (!sections.count(key))
                throw ConfigError("unknown section [" + key + "]");
        } else if (sections.count(key)) {
            throw ConfigError("'" + key + "' must be a section");
        } else if (key != "seed" && key != "output_dir") {
            throw ConfigError("unknown key '" + key + "' at top level");
        }
    }

    auto section = [&](const char* name) { return SectionReader(root[name].as_table(), name); };

    {
        auto r = section("geometry");
        r.read("side_px", c.geometry.side_px);
        r.read("aperture_radius_px", c.geometry.aperture_radius_px);
        r.read("hole_radius_px", c.geometry.hole_radius_px);
        r.finish();
    }
    {
        auto r = section("object");
        std::string kind = to_string(c.object.kind);
        r.read("kind", kind);
        c.object.kind = parse_kind(kind);
        read_target(r, "", c.object.target);
        read_target(r, "subunit_", c.object.subunit);
        r.read("subunit_offset_px", c.object.subunit_offset_px);
        r.read("subunit_sigma_px", c.object.subunit_sigma_px);
        std::optional<std::string> file;
        r.read("density_file", file);
        if (file)
            c.object.density_file = base_dir / *file;
        r.finish();
    }
    {
        auto r = section("reference");
        r.read("mean_diameter_px", c.reference.mean_diameter_px);
        r.read("sigma_diameter_px", c.reference.sigma_diameter_px);
        r.read("contrast", c.reference.contrast);
        r.finish();
    }
    {
        auto r = section("simulate");
        r.read("n_frames", c.simulate.n_frames);
        r.read("photons_per_frame", c.simulate.photons_per_frame);
        r.read("sigma_shift_px", c.simulate.sigma_shift_px);
        r.read("with_reference", c.simulate.with_reference);
        r.read("baseline_dataset", c.simulate.baseline_dataset);
        r.read("n_probe", c.simulate.n_probe);
        r.finish();
    }
    {
        auto r = section("latent_grid");
        r.read("theta_step_deg", c.latent_grid.theta_step_deg);
        r.read("diameter_min_px", c.latent_grid.diameter_min_px);
        r.read("diameter_max_px", c.latent_grid.diameter_max_px);
        r.read("diameter_step_px", c.latent_grid.diameter_step_px);
        r.read("shift_max_px", c.latent_grid.shift_max_px);
        r.read("shift_step_px", c.latent_grid.shift_step_px);
        r.finish();
    }
    {
        auto r = section("maxlp");
        r.read("n_iter", c.maxlp.n_iter);
        r.read("n_min", c.maxlp.n_min);
        r.read("phase_spread_min", c.maxlp.phase_spread_min);
        r.read("shrink", c.maxlp.shrink);
        r.read("tol_rel", c.maxlp.tol_rel);
        r.read("max_polls", c.maxlp.max_polls);
        r.finish();
    }
    {
        auto r = section("phase");
        r.read("beta", c.phase.beta);
        r.read("n_iter", c.phase.n_iter);
        r.read("q_lo_frac", c.phase.q_lo_frac);
        r.read("q_hi_frac", c.phase.q_hi_frac);
        r.read("threshold_frac", c.phase.threshold_frac);
        r.read("smooth_sigma_px", c.phase.smooth_sigma_px);
        r.finish();
    }
    {
        auto r = section("baseline");
        r.read("n_iter", c.baseline.n_iter);
        r.read("theta_step_deg", c.baseline.theta_step_deg);
        r.finish();
    }
    {
        auto r = section("metrics");
        r.read("ring_width_px", c.metrics.ring_width_px);
        r.read("align_step_deg", c.metrics.align_step_deg);
        r.read("histogram_bins", c.metrics.histogram_bins);
        r.finish();
    }

    c.object.target.side_px = c.geometry.side_px;
    c.object.subunit.side_px = c.geometry.side_px;
    c.set_seed(c.seed);
    validate(c);
    return c;
}

RunConfig load_config(const fs::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot read config file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    const fs::path base = fs::absolute(path).parent_path();
    return parse_config(ss.str(), base);
}

std::string dump_config(const RunConfig& c)
{
    auto target = [](toml::table& t, const std::string& prefix, const TargetSpec& s) {
        t.insert(prefix + "n_blobs", s.n_blobs);
        t.insert(prefix + "blob_radius_min_px", s.blob_radius_min_px);
        t.insert(prefix + "blob_radius_max_px", s.blob_radius_max_px);
        t.insert(prefix + "extent_px", s.extent_px);
        t.insert(prefix + "density", s.density);
    };
    toml::table root;
    root.insert("seed", static_cast<std::int64_t>(c.seed));
    root.insert("output_dir", c.output_dir.string());

    toml::table geometry{{"side_px", c.geometry.side_px},
                         {"aperture_radius_px", c.geometry.aperture_radius_px},
                         {"hole_radius_px", c.geometry.hole_radius_px}};
    toml::table object{{"kind", to_string(c.object.kind)}};
    target(object, "", c.object.target);
    target(object, "subunit_", c.object.subunit);
    object.insert("subunit_offset_px", toml::array{c.object.subunit_offset_px.x(), c.object.subunit_offset_px.y()});
    object.insert("subunit_sigma_px", c.object.subunit_sigma_px);
    if (c.object.density_file)
        object.insert("density_file", c.object.density_file->string());
    toml::table reference{{"mean_diameter_px", c.reference.mean_diameter_px},
                          {"sigma_diameter_px", c.reference.sigma_diameter_px},
                          {"contrast", c.reference.contrast}};
    toml::table simulate{{"n_frames", c.simulate.n_frames},
                         {"photons_per_frame", c.simulate.photons_per_frame},
                         {"sigma_shift_px", c.simulate.sigma_shift_px},
                         {"with_reference", c.simulate.with_reference},
                         {"baseline_dataset", c.simulate.baseline_dataset},
                         {"n_probe", c.simulate.n_probe}};
    const LatentGrid g = c.latent_grid_values();
    toml::table latent{{"theta_step_deg", c.latent_grid.theta_step_deg},
                       {"diameter_min_px", g.diameters.front()},
                       {"diameter_max_px", g.diameters.back()},
                       {"diameter_step_px", c.latent_grid.diameter_step_px},
                       {"shift_max_px", c.latent_grid.shift_max_px},
                       {"shift_step_px", c.latent_grid.shift_step_px}};
    toml::table maxlp{{"n_iter", c.maxlp.n_iter},       {"n_min", c.maxlp.n_min},
                      {"phase_spread_min", c.maxlp.phase_spread_min},
                      {"shrink", c.maxlp.shrink},       {"tol_rel", c.maxlp.tol_rel},
                      {"max_polls", c.maxlp.max_polls}};
    toml::table phase{{"beta", c.phase.beta},
                      {"n_iter", c.phase.n_iter},
                      {"q_lo_frac", c.phase.q_lo_frac},
                      {"q_hi_frac", c.phase.q_hi_frac},
                      {"threshold_frac", c.phase.threshold_frac},
                      {"smooth_sigma_px", c.phase.smooth_sigma_px}};
    toml::table baseline{{"n_iter", c.baseline.n_iter}, {"theta_step_deg", c.baseline.theta_step_deg}};
    toml::table metrics{{"ring_width_px", c.metrics.ring_width_px},
                        {"align_step_deg", c.metrics.align_step_deg},
                        {"histogram_bins", c.metrics.histogram_bins}};
    root.insert("geometry", geometry);
    root.insert("object", object);
    root.insert("reference", reference);
    root.insert("simulate", simulate);
    root.insert("latent_grid", latent);
    root.insert("maxlp", maxlp);
    root.insert("phase", phase);
    root.insert("baseline", baseline);
    root.insert("metrics", metrics);
    std::ostringstream os;
    os << root << '\n';
    return os.str();
}

void RunConfig::set_seed(std::uint64_t s)
{
    seed = s;
    object.target.seed = stage_seed(1);
    object.subunit.seed = stage_seed(2);
}

std::uint64_t RunConfig::stage_seed(std::uint64_t stage) const
{
    // splitmix64 finaliser over (seed, stage).
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stage + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

DetectorGeometry RunConfig::detector() const
{
    return build_detector(geometry.side_px, geometry.aperture_radius_px, geometry.hole_radius_px);
}

LatentConfig RunConfig::latent_config() const
{
    LatentConfig l;
    l.mean_diameter_px = reference.mean_diameter_px;
    l.sigma_diameter_px = reference.sigma_diameter_px;
    l.sigma_shift_px = simulate.sigma_shift_px;
    return l;
}

LatentGrid RunConfig::latent_grid_values() const
{
    LatentGrid g;
    g.theta_step = deg_to_rad(latent_grid.theta_step_deg);
    const auto n_theta = static_cast<int>(std::ceil(180.0 / latent_grid.theta_step_deg - 1e-9));
    for (int k = 0; k < n_theta; ++k)
        g.thetas.push_back(deg_to_rad(latent_grid.theta_step_deg * k));
    g.diameter_step = latent_grid.diameter_step_px;
    const double lo = latent_grid.diameter_min_px.value_or(
        std::max(reference.mean_diameter_px - 2.0 * reference.sigma_diameter_px, latent_grid.diameter_step_px));
    const double hi =
        latent_grid.diameter_max_px.value_or(reference.mean_diameter_px + 2.0 * reference.sigma_diameter_px);
    if (!(lo > 0.0))
        throw ConfigError("latent grid diameters must be positive");
    g.diameters = make_range(lo, hi, latent_grid.diameter_step_px);
    g.shift_step = latent_grid.shift_step_px;
    g.shifts_x = make_range(-latent_grid.shift_max_px, latent_grid.shift_max_px, latent_grid.shift_step_px);
    g.shifts_y = g.shifts_x;
    g.validate();
    return g;
}

SimulationConfig RunConfig::simulation(bool with_reference) const
{
    SimulationConfig s;
    s.n_frames = simulate.n_frames;
    s.target_photons = simulate.photons_per_frame;
    s.seed = stage_seed(3);
    s.with_reference = with_reference;
    s.latents = latent_config();
    s.contrast = reference.contrast;
    s.n_probe = simulate.n_probe;
    return s;
}

MaxlpConfig RunConfig::maxlp_config() const
{
    MaxlpConfig m;
    m.n_iter = maxlp.n_iter;
    m.seed = stage_seed(4);
    m.update.n_min = maxlp.n_min;
    m.update.phase_spread_min = maxlp.phase_spread_min;
    m.update.search.shrink = maxlp.shrink;
    m.update.search.max_iter = maxlp.max_polls;
    m.update.search.tol_rel = maxlp.tol_rel;
    return m;
}

SupportConfig RunConfig::support_config() const
{
    SupportConfig s;
    s.q_lo_frac = phase.q_lo_frac;
    s.q_hi_frac = phase.q_hi_frac;
    s.threshold_frac = phase.threshold_frac;
    s.smooth_sigma_px = phase.smooth_sigma_px;
    return s;
}

DifferenceMapConfig RunConfig::phase_config(FourierConstraint mode) const
{
    DifferenceMapConfig d;
    d.mode = mode;
    d.beta = phase.beta;
    d.n_iter = phase.n_iter;
    d.seed = stage_seed(5);
    return d;
}

std::vector<double> RunConfig::baseline_thetas() const
{
    std::vector<double> t;
    // Reference-free intensities are centrosymmetric, so half a turn suffices.
    const auto n = static_cast<int>(std::ceil(180.0 / baseline.theta_step_deg - 1e-9));
    for (int k = 0; k < n; ++k)
        t.push_back(deg_to_rad(baseline.theta_step_deg * k));
    return t;
}

EmcConfig RunConfig::emc_config() const
{
    EmcConfig e;
    e.n_iter = baseline.n_iter;
    e.seed = stage_seed(6);
    return e;
}

} // namespace hspi
