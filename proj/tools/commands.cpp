#include "commands.hpp"

#include "plot.hpp"

#include "hspi/baseline_spi.hpp"
#include "hspi/errors.hpp"
#include "hspi/io.hpp"
#include "hspi/log.hpp"
#include "hspi/maxlp.hpp"
#include "hspi/metrics.hpp"
#include "hspi/object_gen.hpp"
#include "hspi/phase_fill.hpp"
#include "hspi/simulate.hpp"

#include <iostream>

namespace hspi::cli {

namespace fs = std::filesystem;
using nlohmann::json;

Layout::Layout(fs::path r)
    : root(std::move(r)), object_dir(root / "object"), data_dir(root / "data"), maxlp_dir(root / "maxlp"),
      baseline_dir(root / "baseline"), eval_dir(root / "eval"), plot_dir(root / "plots")
{
}

namespace {

fs::path suffixed(const fs::path& stem, const std::string& suffix) { return fs::path(stem.string() + suffix); }

void guard_outputs(const std::vector<fs::path>& outputs, bool force)
{
    if (force)
        return;
    for (const auto& p : outputs)
        if (fs::exists(p))
            throw ConfigError("output " + p.string() + " exists; pass --force to overwrite");
}

void require_input(const fs::path& p, const std::string& hint)
{
    if (!fs::exists(p))
        throw DataError("missing input " + p.string() + " (" + hint + ")");
}

void announce(const fs::path& p) { std::cout << "wrote " << p.string() << '\n'; }

json spec_json(const TargetSpec& t)
{
    return {{"n_blobs", t.n_blobs},
            {"blob_radius_min_px", t.blob_radius_min_px},
            {"blob_radius_max_px", t.blob_radius_max_px},
            {"extent_px", t.extent_px},
            {"density", t.density},
            {"seed", t.seed}};
}

HeterogeneitySpec heterogeneity(const RunConfig& cfg)
{
    HeterogeneitySpec h;
    h.mode = cfg.object.kind == ObjectKind::Continuous ? HeterogeneityMode::Continuous : HeterogeneityMode::TwoState;
    h.offset_px = cfg.object.subunit_offset_px;
    h.sigma_px = cfg.object.subunit_sigma_px;
    return h;
}

TargetSource load_source(const RunConfig& cfg, const Layout& lay)
{
    TargetSource src;
    if (cfg.object.kind == ObjectKind::Homogeneous) {
        require_input(suffixed(lay.density(), ".f64"), "run make-object first");
        src.base = io::load_density(lay.density());
    } else {
        require_input(suffixed(lay.base(), ".f64"), "run make-object first");
        src.base = io::load_density(lay.base());
        src.subunit = io::load_density(lay.subunit());
        src.heterogeneity = heterogeneity(cfg);
    }
    if (src.base.rows() != cfg.geometry.side_px)
        throw DataError("object grid side differs from geometry.side_px");
    return src;
}

json trace_json(const std::vector<IterationLog>& trace)
{
    json arr = json::array();
    for (const auto& t : trace)
        arr.push_back({{"iteration", t.iteration},
                       {"log_likelihood", t.log_likelihood},
                       {"rms_change", t.rms_change},
                       {"n_reliable", t.n_reliable}});
    return arr;
}

std::vector<IterationLog> trace_from_json(const json& arr)
{
    std::vector<IterationLog> out;
    for (const auto& t : arr) {
        IterationLog e;
        e.iteration = t.at("iteration").get<int>();
        e.log_likelihood = t.at("log_likelihood").get<double>();
        e.rms_change = t.at("rms_change").get<double>();
        e.n_reliable = t.at("n_reliable").get<int>();
        out.push_back(e);
    }
    return out;
}

double nondecreasing_fraction(const std::vector<double>& v)
{
    if (v.size() < 2)
        return 1.0;
    std::size_t ok = 0;
    for (std::size_t k = 1; k < v.size(); ++k)
        ok += v[k] >= v[k - 1];
    return static_cast<double>(ok) / static_cast<double>(v.size() - 1);
}

void write_maxlp_trace(const fs::path& path, const std::vector<IterationLog>& trace)
{
    io::Table t{{"iteration", "log_likelihood", "rms_change", "n_reliable"}, {}};
    for (const auto& e : trace)
        t.rows.push_back({static_cast<double>(e.iteration), e.log_likelihood, e.rms_change,
                          static_cast<double>(e.n_reliable)});
    io::write_table_csv(path, t);
}

void write_phase_trace(const fs::path& path, const PhaseResult& r)
{
    io::Table t{{"iteration", "error"}, {}};
    for (std::size_t k = 0; k < r.error_trace.size(); ++k)
        t.rows.push_back({static_cast<double>(k + 1), r.error_trace[k]});
    io::write_table_csv(path, t);
}

json phase_json(const PhaseResult& r, const SupportMask& s)
{
    return {{"best_error", r.best_error},
            {"best_iteration", r.best_iteration},
            {"iterations_run", r.error_trace.size()},
            {"diverged", r.diverged},
            {"support_area_fraction", s.area_fraction()},
            {"support_components", s.n_components()}};
}

// Checkpoint: files are written to a scratch directory that replaces the
// previous checkpoint only once complete.
void save_checkpoint(const Layout& lay, const MaxlpState& st, const LatentGrid& grid, const json& ident)
{
    const fs::path tmp = lay.maxlp_dir / "checkpoint.tmp";
    fs::remove_all(tmp);
    io::save_model(tmp / "model", st.model);
    io::write_assignment_csv(tmp / "assignment.csv", st.assignment, grid);
    json state = ident;
    state["trace"] = trace_json(st.trace);
    io::write_json(tmp / "state.json", state);
    fs::remove_all(lay.checkpoint());
    fs::rename(tmp, lay.checkpoint());
}

MaxlpState load_checkpoint(const Layout& lay, const LatentGrid& grid, const json& ident)
{
    require_input(lay.checkpoint() / "state.json", "no checkpoint to resume from");
    const json state = io::read_json(lay.checkpoint() / "state.json");
    for (const auto& [k, v] : ident.items())
        if (!state.contains(k) || state.at(k) != v)
            throw ConfigError("checkpoint was written with a different " + k + "; cannot resume");
    MaxlpState st;
    st.model = io::load_model(lay.checkpoint() / "model");
    st.assignment = io::read_assignment_csv(lay.checkpoint() / "assignment.csv", grid);
    st.trace = trace_from_json(state.at("trace"));
    return st;
}

void reconstruct_maxlp(const RunConfig& cfg, const Options& opt, const Layout& lay)
{
    const fs::path model_stem = lay.maxlp_dir / "model";
    if (!opt.resume)
        guard_outputs({suffixed(model_stem, ".c128"), lay.checkpoint()}, opt.force);
    require_input(suffixed(lay.dataset(), ".hspi"), "run simulate first");
    const SparseDataset ds = io::load_dataset(lay.dataset());
    if (!ds.meta.with_reference)
        throw DataError("the maxlp arm needs a dataset simulated with the reference particle");
    if (ds.meta.side_px != cfg.geometry.side_px)
        throw DataError("dataset side differs from geometry.side_px");
    const LatentGrid grid = cfg.latent_grid_values();
    const MaxlpConfig mc = cfg.maxlp_config();
    const json ident = {{"seed", cfg.seed}, {"n_frames", ds.frames.size()}, {"grid_size", grid.size()}};

    std::optional<MaxlpState> resume;
    if (opt.resume) {
        resume = load_checkpoint(lay, grid, ident);
        log::info("resuming after iteration " + std::to_string(resume->trace.size()));
        if (static_cast<int>(resume->trace.size()) > mc.n_iter)
            throw ConfigError("checkpoint has more iterations than maxlp.n_iter");
    }
    const MaxlpState st = maxlp_reconstruct(
        ds, grid, mc, [&](const MaxlpState& s) { save_checkpoint(lay, s, grid, ident); }, std::move(resume));

    std::vector<double> ll;
    for (const auto& e : st.trace)
        ll.push_back(e.log_likelihood);
    const json extra = {{"arm", "maxlp"},
                        {"iterations", st.trace.size()},
                        {"grid",
                         {{"n_theta", grid.thetas.size()},
                          {"n_diameter", grid.diameters.size()},
                          {"n_shift", grid.shifts_x.size()},
                          {"theta_step_rad", grid.theta_step},
                          {"diameter_step_px", grid.diameter_step},
                          {"shift_step_px", grid.shift_step}}},
                        {"likelihood_trace", ll},
                        {"nondecreasing_fraction", nondecreasing_fraction(ll)}};
    io::save_model(model_stem, st.model, extra);
    announce(suffixed(model_stem, ".c128"));
    io::write_assignment_csv(lay.maxlp_dir / "assignment.csv", st.assignment, grid);
    announce(lay.maxlp_dir / "assignment.csv");
    write_maxlp_trace(lay.maxlp_dir / "trace.csv", st.trace);
    announce(lay.maxlp_dir / "trace.csv");
}

void reconstruct_baseline(const RunConfig& cfg, const Options& opt, const Layout& lay)
{
    const fs::path stem = lay.baseline_dir / "intensity";
    const fs::path ckpt = lay.baseline_dir / "checkpoint";
    if (!opt.resume)
        guard_outputs({suffixed(stem, ".f64"), ckpt}, opt.force);
    const fs::path data = fs::exists(suffixed(lay.dataset_noref(), ".hspi")) ? lay.dataset_noref() : lay.dataset();
    require_input(suffixed(data, ".hspi"), "run simulate first");
    const SparseDataset ds = io::load_dataset(data);
    if (ds.meta.with_reference)
        throw DataError("the baseline arm needs a dataset simulated without the reference "
                        "(set simulate.baseline_dataset or simulate.with_reference = false)");
    const DetectorGeometry geom = ds.geometry();
    const auto thetas = cfg.baseline_thetas();
    const EmcConfig ec = cfg.emc_config();
    const json ident = {{"seed", cfg.seed}, {"n_frames", ds.frames.size()}, {"n_theta", thetas.size()}};

    std::vector<EmcIteration> trace;
    RealGrid start;
    MaskGrid known;
    int done = 0;
    if (opt.resume) {
        require_input(ckpt / "state.json", "no checkpoint to resume from");
        const json state = io::read_json(ckpt / "state.json");
        for (const auto& [k, v] : ident.items())
            if (!state.contains(k) || state.at(k) != v)
                throw ConfigError("checkpoint was written with a different " + k + "; cannot resume");
        for (const auto& t : state.at("trace"))
            trace.push_back({t.at("iteration").get<int>(), t.at("log_likelihood").get<double>(),
                             t.at("mutual_information").get<double>()});
        done = static_cast<int>(trace.size());
        start = io::load_density(ckpt / "intensity");
        known = io::read_raw_mask(ckpt / "known.u8", geom.side());
        if (done > ec.n_iter)
            throw ConfigError("checkpoint has more iterations than baseline.n_iter");
    }

    auto trace_to_json = [&]() {
        json arr = json::array();
        for (const auto& t : trace)
            arr.push_back({{"iteration", t.iteration},
                           {"log_likelihood", t.log_likelihood},
                           {"mutual_information", t.mutual_information}});
        return arr;
    };

    EmcResult res;
    if (done == ec.n_iter) {
        res.model.intensity = start;
        res.model.thetas = thetas;
        res.model.known = known;
    } else {
        // One EMC iteration at a time so each can be checkpointed.
        RealGrid model = start;
        for (int it = done; it < ec.n_iter; ++it) {
            EmcResult step = it == 0 ? emc_intensity(ds, thetas, geom, EmcConfig{1, ec.seed})
                                     : emc_intensity_from(ds, thetas, geom, model, 1);
            EmcIteration rec = step.trace.front();
            rec.iteration = it + 1;
            trace.push_back(rec);
            model = step.model.intensity;
            res.model = step.model;
            const fs::path tmp = lay.baseline_dir / "checkpoint.tmp";
            fs::remove_all(tmp);
            io::save_density(tmp / "intensity", model);
            io::write_raw(tmp / "known.u8", res.model.known);
            json state = ident;
            state["trace"] = trace_to_json();
            io::write_json(tmp / "state.json", state);
            fs::remove_all(ckpt);
            fs::rename(tmp, ckpt);
        }
    }
    res.trace = trace;

    std::vector<double> ll;
    for (const auto& t : trace)
        ll.push_back(t.log_likelihood);
    io::save_density(stem, res.model.intensity,
                     {{"arm", "baseline"},
                      {"iterations", trace.size()},
                      {"n_theta", thetas.size()},
                      {"theta_step_deg", cfg.baseline.theta_step_deg},
                      {"likelihood_trace", ll},
                      {"nondecreasing_fraction", nondecreasing_fraction(ll)}});
    io::write_raw(lay.baseline_dir / "known.u8", res.model.known);
    announce(suffixed(stem, ".f64"));
    io::Table t{{"iteration", "log_likelihood", "mutual_information"}, {}};
    for (const auto& e : trace)
        t.rows.push_back({static_cast<double>(e.iteration), e.log_likelihood, e.mutual_information});
    io::write_table_csv(lay.baseline_dir / "trace.csv", t);
    announce(lay.baseline_dir / "trace.csv");

    ComplexModel mags;
    mags.grid = res.model.intensity.cwiseMax(0.0).cwiseSqrt().cast<Complex>();
    mags.reliable = res.model.known;
    const SupportMask support = estimate_support(mags, FourierConstraint::Magnitude, cfg.support_config());
    const PhaseResult ph = difference_map(mags, support, cfg.phase_config(FourierConstraint::Magnitude));
    io::write_raw(lay.baseline_dir / "support.u8", support.mask);
    io::save_density(lay.baseline_dir / "density", ph.density, phase_json(ph, support));
    write_phase_trace(lay.baseline_dir / "phase_trace.csv", ph);
    announce(lay.baseline_dir / "density.f64");
    if (ph.diverged)
        log::warn("baseline phase retrieval diverged; kept the best iterate");
}

io::Table frc_table(const FrcCurve& c)
{
    io::Table t{{"ring", "radius_px", "q", "frc", "n_pixels", "valid"}, {}};
    for (std::size_t k = 0; k < c.size(); ++k)
        t.rows.push_back({static_cast<double>(k), c.radius_px[k], c.q[k], c.value[k],
                          static_cast<double>(c.n_pixels[k]), c.valid[k] ? 1.0 : 0.0});
    return t;
}

json resolution_json(const Resolution& r)
{
    return {{"radius_px", r.radius_px}, {"q", r.q}, {"flagged", r.flagged}, {"saturated", r.saturated}};
}

json alignment_json(const Alignment& a)
{
    return {{"theta_deg", rad_to_deg(a.theta)},
            {"inverted", a.inverted},
            {"shift_px", {a.shift_px.x(), a.shift_px.y()}},
            {"correlation", a.correlation}};
}

json sigma_json(const LatentErrors& e)
{
    return {{"theta_deg", e.theta_deg.sigma},
            {"diameter_px", e.diameter_px.sigma},
            {"shift_x_px", e.shift_x_px.sigma},
            {"shift_y_px", e.shift_y_px.sigma},
            {"flipped_fraction", e.flipped_fraction},
            {"n_frames", e.theta_deg.values.size()}};
}

} // namespace

void make_object(const RunConfig& cfg, const Options& opt)
{
    const Layout lay(cfg.output_dir);
    guard_outputs({suffixed(lay.density(), ".f64"), suffixed(lay.average(), ".f64")}, opt.force);
    const DetectorGeometry geom = cfg.detector();
    (void)geom;
    RealGrid base;
    json meta = {{"kind", to_string(cfg.object.kind)},
                 {"side_px", cfg.geometry.side_px},
                 {"extent_px", cfg.object.target.extent_px},
                 {"seed", cfg.seed},
                 {"spec", spec_json(cfg.object.target)}};
    if (cfg.object.density_file) {
        base = io::load_density(*cfg.object.density_file);
        if (base.rows() != cfg.geometry.side_px)
            throw DataError("external density side differs from geometry.side_px");
        if (base.minCoeff() < 0.0)
            throw DataError("external density has negative values");
        meta["source"] = cfg.object.density_file->string();
    } else {
        base = random_blob_object(cfg.object.target);
    }

    if (cfg.object.kind == ObjectKind::Homogeneous) {
        io::save_density(lay.density(), base, meta);
        io::save_density(lay.average(), base, meta);
    } else {
        const RealGrid sub = random_blob_object(cfg.object.subunit);
        const HeterogeneitySpec h = heterogeneity(cfg);
        meta["subunit"] = spec_json(cfg.object.subunit);
        meta["subunit_offset_px"] = {h.offset_px.x(), h.offset_px.y()};
        meta["subunit_sigma_px"] = h.sigma_px;
        const RealGrid nominal = h.mode == HeterogeneityMode::TwoState ? two_state_variant(base, sub, h, 0)
                                                                       : continuous_variant(base, sub, h, Vec2d::Zero());
        io::save_density(lay.base(), base, meta);
        io::save_density(lay.subunit(), sub, meta);
        io::save_density(lay.density(), nominal, meta);
        io::save_density(lay.average(), average_structure(base, sub, h), meta);
        announce(suffixed(lay.base(), ".f64"));
        announce(suffixed(lay.subunit(), ".f64"));
    }
    announce(suffixed(lay.density(), ".f64"));
    announce(suffixed(lay.average(), ".f64"));
}

void simulate(const RunConfig& cfg, const Options& opt)
{
    const Layout lay(cfg.output_dir);
    std::vector<fs::path> outs = {suffixed(lay.dataset(), ".hspi"), lay.latents()};
    if (cfg.simulate.baseline_dataset)
        outs.push_back(suffixed(lay.dataset_noref(), ".hspi"));
    guard_outputs(outs, opt.force);
    const TargetSource src = load_source(cfg, lay);
    const DetectorGeometry geom = cfg.detector();

    auto run = [&](bool with_ref, const fs::path& stem, const fs::path& latents) {
        const SimulationResult r = generate_dataset(src, geom, cfg.simulation(with_ref));
        io::save_dataset(stem, r.dataset);
        io::write_latents_csv(latents, r.truth);
        announce(suffixed(stem, ".hspi"));
        announce(latents);
        log::info("mean photons per frame "
                  + std::to_string(static_cast<double>(r.dataset.total_photons()) / r.dataset.frames.size()));
    };
    run(cfg.simulate.with_reference, lay.dataset(), lay.latents());
    if (cfg.simulate.baseline_dataset && cfg.simulate.with_reference)
        run(false, lay.dataset_noref(), lay.latents_noref());
}

void reconstruct(const RunConfig& cfg, const Options& opt)
{
    const Layout lay(cfg.output_dir);
    if (opt.arm == "maxlp")
        reconstruct_maxlp(cfg, opt, lay);
    else if (opt.arm == "baseline")
        reconstruct_baseline(cfg, opt, lay);
    else
        throw ConfigError("--arm must be maxlp or baseline");
}

void phase(const RunConfig& cfg, const Options& opt)
{
    const Layout lay(cfg.output_dir);
    guard_outputs({lay.maxlp_dir / "density.f64", lay.maxlp_dir / "support.u8"}, opt.force);
    require_input(lay.maxlp_dir / "model.c128", "run reconstruct --arm maxlp first");
    const ComplexModel model = io::load_model(lay.maxlp_dir / "model");
    const SupportMask support = estimate_support(model, FourierConstraint::Complex, cfg.support_config());
    const PhaseResult ph = difference_map(model, support, cfg.phase_config(FourierConstraint::Complex));
    io::write_raw(lay.maxlp_dir / "support.u8", support.mask);
    announce(lay.maxlp_dir / "support.u8");
    io::save_density(lay.maxlp_dir / "density", ph.density, phase_json(ph, support));
    announce(lay.maxlp_dir / "density.f64");
    io::save_model(lay.maxlp_dir / "filled", ph.filled, phase_json(ph, support));
    announce(lay.maxlp_dir / "filled.c128");
    write_phase_trace(lay.maxlp_dir / "phase_trace.csv", ph);
    if (ph.diverged)
        log::warn("phase retrieval diverged; kept the best iterate");
}

void evaluate(const RunConfig& cfg, const Options& opt)
{
    const Layout lay(cfg.output_dir);
    const DetectorGeometry geom = cfg.detector();
    const MaskGrid good = geom.good_mask();

    if (opt.recon || opt.truth) {
        if (!opt.recon || !opt.truth)
            throw ConfigError("--recon and --truth must be given together");
        const fs::path out = lay.eval_dir / "frc.csv";
        guard_outputs({out}, opt.force);
        const ComplexModel a = io::load_model(*opt.recon);
        const ComplexModel b = io::load_model(*opt.truth);
        const FrcCurve c = frc(a, b, cfg.metrics.ring_width_px, a.side() == geom.side() ? &good : nullptr);
        io::write_table_csv(out, frc_table(c));
        announce(out);
        return;
    }

    const fs::path summary_path = lay.eval_dir / "summary.json";
    guard_outputs({summary_path}, opt.force);
    require_input(suffixed(lay.average(), ".f64"), "run make-object first");
    const RealGrid truth = io::load_density(lay.average());
    const ComplexModel truth_model = density_to_model(truth, geom);
    json summary;
    bool any = false;

    if (fs::exists(lay.maxlp_dir / "model.c128")) {
        any = true;
        const ComplexModel model = io::load_model(lay.maxlp_dir / "model");
        const bool phased = fs::exists(lay.maxlp_dir / "density.f64");
        AlignConfig ac;
        ac.step_deg = cfg.metrics.align_step_deg;
        // Without phasing, compare band-limited densities so the missing hole
        // does not bias the match.
        const Alignment al = phased ? align_global(io::load_density(lay.maxlp_dir / "density"), truth, ac)
                                    : align_models(model, truth_model, ac);
        const ComplexModel aligned = apply_alignment(model, al);
        const FrcCurve curve = frc(aligned, truth_model, cfg.metrics.ring_width_px, &good);
        io::write_table_csv(lay.eval_dir / "frc_maxlp.csv", frc_table(curve));
        announce(lay.eval_dir / "frc_maxlp.csv");
        json arm = {{"alignment", alignment_json(al)},
                    {"resolution", resolution_json(resolution_at_half(curve))},
                    {"density_source", phased ? "phased" : "model"}};

        if (fs::exists(lay.maxlp_dir / "assignment.csv") && fs::exists(lay.latents())) {
            const LatentGrid grid = cfg.latent_grid_values();
            const Assignment asg = io::read_assignment_csv(lay.maxlp_dir / "assignment.csv", grid);
            const auto truth_latents = io::read_latents_csv(lay.latents());
            const LatentErrors le = latent_errors(asg, grid, truth_latents, al.theta, al.shift_px);
            io::Table t{{"frame", "theta_err_deg", "diameter_err_px", "tx_err_px", "ty_err_px"}, {}};
            for (std::size_t d = 0; d < le.theta_deg.values.size(); ++d)
                t.rows.push_back({static_cast<double>(d), le.theta_deg.values[d], le.diameter_px.values[d],
                                  le.shift_x_px.values[d], le.shift_y_px.values[d]});
            io::write_table_csv(lay.eval_dir / "latent_errors.csv", t);
            announce(lay.eval_dir / "latent_errors.csv");

            const int bins = cfg.metrics.histogram_bins;
            io::Table h{{"parameter", "bin_lo", "bin_hi", "count"}, {}};
            const struct {
                const ErrorStats* stats;
                double half_range;
            } params[] = {{&le.theta_deg, 10.0 * rad_to_deg(grid.theta_step) / 2.0},
                          {&le.diameter_px, 4.0 * grid.diameter_step},
                          {&le.shift_x_px, 4.0 * grid.shift_step},
                          {&le.shift_y_px, 4.0 * grid.shift_step}};
            for (std::size_t k = 0; k < std::size(params); ++k) {
                const Histogram hist =
                    histogram(params[k].stats->values, -params[k].half_range, params[k].half_range, bins);
                for (int b = 0; b < bins; ++b)
                    h.rows.push_back({static_cast<double>(k), hist.edges[static_cast<std::size_t>(b)],
                                      hist.edges[static_cast<std::size_t>(b) + 1],
                                      static_cast<double>(hist.counts[static_cast<std::size_t>(b)])});
            }
            io::write_table_csv(lay.eval_dir / "latent_histograms.csv", h);
            announce(lay.eval_dir / "latent_histograms.csv");
            const json sig = sigma_json(le);
            io::write_json(lay.eval_dir / "latent_sigma.json", sig);
            announce(lay.eval_dir / "latent_sigma.json");
            arm["latent_sigma"] = sig;
        }
        summary["maxlp"] = arm;
    }

    if (fs::exists(lay.baseline_dir / "density.f64")) {
        any = true;
        const RealGrid density = io::load_density(lay.baseline_dir / "density");
        AlignConfig ac;
        ac.step_deg = cfg.metrics.align_step_deg;
        ac.magnitude_mode = true;
        const Alignment al = align_global(density, truth, ac);
        ComplexModel aligned = apply_alignment(density_to_model(density), al);
        aligned.reliable = aligned.reliable.cwiseProduct(good);
        const FrcCurve curve = frc(aligned, truth_model, cfg.metrics.ring_width_px, &good);
        io::write_table_csv(lay.eval_dir / "frc_baseline.csv", frc_table(curve));
        announce(lay.eval_dir / "frc_baseline.csv");
        summary["baseline"] = {{"alignment", alignment_json(al)},
                               {"resolution", resolution_json(resolution_at_half(curve))}};
    }
    if (!any)
        throw DataError("nothing to evaluate under " + lay.root.string() + "; run reconstruct first");
    io::write_json(summary_path, summary);
    announce(summary_path);
}

void plot(const RunConfig& cfg, const Options& opt)
{
    const Layout lay(cfg.output_dir);
    int made = 0;
    auto frc_series = [](const fs::path& p, const std::string& name) {
        const io::Table t = io::read_table_csv(p);
        if (t.rows.empty())
            throw DataError("CSV has no rows: " + p.string());
        plot::Series s{name, {}, {}};
        for (const auto& r : t.rows)
            if (r.at(5) > 0.5) {
                s.x.push_back(r.at(1));
                s.y.push_back(r.at(3));
            }
        return s;
    };

    for (const auto& p : opt.csv) {
        const io::Table t = io::read_table_csv(p);
        if (t.rows.empty() || t.header.size() < 2)
            throw DataError("CSV has no data to plot: " + p.string());
        plot::LineChart chart{p.stem().string(), t.header[0], "value", {}, std::nullopt};
        for (std::size_t c = 1; c < t.header.size(); ++c) {
            plot::Series s{t.header[c], {}, {}};
            for (const auto& r : t.rows) {
                s.x.push_back(r[0]);
                s.y.push_back(r[c]);
            }
            chart.series.push_back(std::move(s));
        }
        const fs::path out = lay.plot_dir / (p.stem().string() + ".svg");
        plot::write_line_svg(out, chart);
        announce(out);
        ++made;
    }
    if (!opt.csv.empty())
        return;

    plot::LineChart frc_chart{"Fourier ring correlation", "ring radius (px)", "FRC", {}, 0.5};
    for (const char* arm : {"maxlp", "baseline"}) {
        const fs::path p = lay.eval_dir / (std::string("frc_") + arm + ".csv");
        if (fs::exists(p))
            frc_chart.series.push_back(frc_series(p, arm));
    }
    if (fs::exists(lay.eval_dir / "frc.csv"))
        frc_chart.series.push_back(frc_series(lay.eval_dir / "frc.csv", "frc"));
    if (!frc_chart.series.empty()) {
        plot::write_line_svg(lay.plot_dir / "frc.svg", frc_chart);
        announce(lay.plot_dir / "frc.svg");
        ++made;
    }

    if (fs::exists(lay.eval_dir / "latent_histograms.csv")) {
        const io::Table t = io::read_table_csv(lay.eval_dir / "latent_histograms.csv");
        if (t.rows.empty())
            throw DataError("CSV has no rows: " + (lay.eval_dir / "latent_histograms.csv").string());
        const char* names[] = {"theta_deg", "diameter_px", "shift_x_px", "shift_y_px"};
        for (int k = 0; k < 4; ++k) {
            std::vector<double> edges;
            std::vector<long long> counts;
            for (const auto& r : t.rows)
                if (static_cast<int>(r[0]) == k) {
                    if (edges.empty())
                        edges.push_back(r[1]);
                    edges.push_back(r[2]);
                    counts.push_back(static_cast<long long>(r[3]));
                }
            if (counts.empty())
                continue;
            const fs::path out = lay.plot_dir / (std::string("error_") + names[k] + ".svg");
            plot::write_histogram_svg(out, std::string("error in ") + names[k], names[k], edges, counts);
            announce(out);
            ++made;
        }
    }
    if (fs::exists(lay.maxlp_dir / "trace.csv")) {
        const io::Table t = io::read_table_csv(lay.maxlp_dir / "trace.csv");
        if (!t.rows.empty()) {
            plot::Series s{"maxlp", {}, {}};
            for (const auto& r : t.rows) {
                s.x.push_back(r[0]);
                s.y.push_back(r[1]);
            }
            plot::write_line_svg(lay.plot_dir / "maxlp_likelihood.svg",
                                 {"log-likelihood", "iteration", "sum of frame log-likelihoods", {s}, std::nullopt});
            announce(lay.plot_dir / "maxlp_likelihood.svg");
            ++made;
        }
    }

    if (fs::exists(lay.maxlp_dir / "model.c128")) {
        const ComplexModel m = io::load_model(lay.maxlp_dir / "model");
        plot::write_png(lay.plot_dir / "maxlp_model_logmag.png", m.grid.cwiseAbs(), true);
        announce(lay.plot_dir / "maxlp_model_logmag.png");
        ++made;
    }
    if (fs::exists(lay.baseline_dir / "intensity.f64")) {
        plot::write_png(lay.plot_dir / "baseline_intensity_log.png", io::load_density(lay.baseline_dir / "intensity"),
                        true);
        announce(lay.plot_dir / "baseline_intensity_log.png");
        ++made;
    }
    const std::pair<fs::path, std::string> densities[] = {{lay.average(), "truth_density.png"},
                                                          {lay.maxlp_dir / "density", "maxlp_density.png"},
                                                          {lay.baseline_dir / "density", "baseline_density.png"}};
    for (const auto& [stem, name] : densities)
        if (fs::exists(suffixed(stem, ".f64"))) {
            plot::write_png(lay.plot_dir / name, io::load_density(stem), false);
            announce(lay.plot_dir / name);
            ++made;
        }
    if (made == 0)
        throw DataError("nothing to plot under " + lay.root.string());
}

} // namespace hspi::cli
