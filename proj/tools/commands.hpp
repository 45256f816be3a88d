#ifndef HSPI_TOOLS_COMMANDS_HPP
#define HSPI_TOOLS_COMMANDS_HPP

#include "hspi/config.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace hspi::cli {

struct Options {
    bool force = false;
    bool resume = false;
    std::string arm = "maxlp";
    /// evaluate: direct model-vs-model FRC.
    std::optional<std::filesystem::path> recon;
    std::optional<std::filesystem::path> truth;
    /// plot: extra CSV files to chart.
    std::vector<std::filesystem::path> csv;
};

/// Output locations under the run directory.
struct Layout {
    explicit Layout(std::filesystem::path root);

    std::filesystem::path root;
    std::filesystem::path object_dir, data_dir, maxlp_dir, baseline_dir, eval_dir, plot_dir;

    std::filesystem::path density() const { return object_dir / "density"; }
    std::filesystem::path average() const { return object_dir / "average"; }
    std::filesystem::path base() const { return object_dir / "base"; }
    std::filesystem::path subunit() const { return object_dir / "subunit"; }
    std::filesystem::path dataset() const { return data_dir / "dataset"; }
    std::filesystem::path latents() const { return data_dir / "latents.csv"; }
    std::filesystem::path dataset_noref() const { return data_dir / "dataset_noref"; }
    std::filesystem::path latents_noref() const { return data_dir / "latents_noref.csv"; }
    std::filesystem::path checkpoint() const { return maxlp_dir / "checkpoint"; }
};

void make_object(const RunConfig& cfg, const Options& opt);
void simulate(const RunConfig& cfg, const Options& opt);
void reconstruct(const RunConfig& cfg, const Options& opt);
void phase(const RunConfig& cfg, const Options& opt);
void evaluate(const RunConfig& cfg, const Options& opt);
void plot(const RunConfig& cfg, const Options& opt);

} // namespace hspi::cli

#endif // HSPI_TOOLS_COMMANDS_HPP
