#include "commands.hpp"

#include "hspi/config.hpp"
#include "hspi/errors.hpp"
#include "hspi/log.hpp"
#include "hspi/parallel.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <thread>

namespace {

enum ExitCode { kOk = 0, kFailure = 1, kConfig = 2, kData = 3, kNumerical = 4 };

} // namespace

int main(int argc, char** argv)
{
    hspi::log::init_from_env();

    CLI::App app{"Holographic single-particle imaging pipeline"};
    app.require_subcommand(0, 1);
    app.fallthrough();

    std::filesystem::path config_path;
    std::optional<std::filesystem::path> out_dir;
    std::optional<std::uint64_t> seed;
    int threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    bool print_config = false;
    hspi::cli::Options opt;

    app.add_option("--config", config_path, "Experiment configuration (TOML)")->required();
    app.add_option("--out", out_dir, "Output directory (overrides output_dir)");
    app.add_flag("--force", opt.force, "Overwrite existing outputs");
    app.add_option("--threads", threads, "Worker threads")->check(CLI::Range(1, 1024));
    app.add_option("--seed", seed, "Override the configured seed");
    app.add_flag("--print-config", print_config, "Print the resolved configuration and exit");

    auto* make_object = app.add_subcommand("make-object", "Generate the target density");
    auto* simulate = app.add_subcommand("simulate", "Simulate a sparse photon dataset");
    auto* reconstruct = app.add_subcommand("reconstruct", "Reconstruct from the dataset");
    reconstruct->add_option("--arm", opt.arm, "maxlp or baseline")->check(CLI::IsMember({"maxlp", "baseline"}));
    reconstruct->add_flag("--resume", opt.resume, "Continue from the last checkpoint");
    auto* phase = app.add_subcommand("phase", "Fill unreliable pixels and phase the maxlp model");
    auto* evaluate = app.add_subcommand("evaluate", "FRC, alignment and latent-error reports");
    evaluate->add_option("--recon", opt.recon, "Model stem to compare (with --truth)");
    evaluate->add_option("--truth", opt.truth, "Reference model stem (with --recon)");
    auto* plot = app.add_subcommand("plot", "Render SVG charts and PNG images");
    plot->add_option("--csv", opt.csv, "Chart these CSV files instead of the run outputs");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kConfig;
    }

    try {
        hspi::RunConfig cfg = hspi::load_config(config_path);
        if (seed)
            cfg.set_seed(*seed);
        if (out_dir)
            cfg.output_dir = std::filesystem::absolute(*out_dir);
        if (print_config) {
            std::cout << hspi::dump_config(cfg);
            return kOk;
        }
        if (app.get_subcommands().empty())
            throw hspi::ConfigError("a subcommand is required; run with --help for the list");
        hspi::set_num_threads(threads);

        if (make_object->parsed())
            hspi::cli::make_object(cfg, opt);
        else if (simulate->parsed())
            hspi::cli::simulate(cfg, opt);
        else if (reconstruct->parsed())
            hspi::cli::reconstruct(cfg, opt);
        else if (phase->parsed())
            hspi::cli::phase(cfg, opt);
        else if (evaluate->parsed())
            hspi::cli::evaluate(cfg, opt);
        else if (plot->parsed())
            hspi::cli::plot(cfg, opt);
        return kOk;
    } catch (const hspi::ConfigError& e) {
        hspi::log::error(std::string("config error: ") + e.what());
        return kConfig;
    } catch (const hspi::DataError& e) {
        hspi::log::error(std::string("data error: ") + e.what());
        return kData;
    } catch (const hspi::NumericalError& e) {
        hspi::log::error(std::string("numerical error: ") + e.what());
        return kNumerical;
    } catch (const std::filesystem::filesystem_error& e) {
        hspi::log::error(std::string("i/o error: ") + e.what());
        return kData;
    } catch (const std::exception& e) {
        hspi::log::error(std::string("error: ") + e.what());
        return kFailure;
    }
}
