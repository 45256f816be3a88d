#ifndef HSPI_IO_HPP
#define HSPI_IO_HPP

#include "hspi/forward_model.hpp"
#include "hspi/maxlp.hpp"
#include "hspi/simulate.hpp"
#include "hspi/types.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace hspi::io {

namespace fs = std::filesystem;

// Sparse photon datasets: "HSPI", u16 version = 1, u32 n_frames,
// u32 n_pixels, then per frame u32 n_ones, u32 n_multi, n_ones x u32,
// n_multi x u32, n_multi x i32. Everything little-endian.
inline constexpr std::uint16_t kDatasetVersion = 1;

void write_dataset_binary(const fs::path& path, const SparseDataset& ds);
/// Reads frames only; validates structure against `meta` (sorted, disjoint,
/// GOOD indices, multi counts >= 2). Throws DataError.
std::vector<SparseFrame> read_dataset_binary(const fs::path& path, const DatasetMeta& meta);

nlohmann::json meta_to_json(const DatasetMeta& meta);
DatasetMeta meta_from_json(const nlohmann::json& j);

/// Writes <stem>.hspi and <stem>.json.
void save_dataset(const fs::path& stem, const SparseDataset& ds);
SparseDataset load_dataset(const fs::path& stem);

/// frame,theta_rad,diameter_px,tx_px,ty_px,state
void write_latents_csv(const fs::path& path, const std::vector<FrameTruth>& truth);
std::vector<FrameTruth> read_latents_csv(const fs::path& path);

// Raw little-endian row-major grids.
void write_raw(const fs::path& path, const RealGrid& grid);
RealGrid read_raw_real(const fs::path& path, int side);
/// Interleaved (re, im) float64.
void write_raw(const fs::path& path, const ComplexGrid& grid);
ComplexGrid read_raw_complex(const fs::path& path, int side);
/// One byte per pixel.
void write_raw(const fs::path& path, const MaskGrid& grid);
MaskGrid read_raw_mask(const fs::path& path, int side);

void write_json(const fs::path& path, const nlohmann::json& j);
nlohmann::json read_json(const fs::path& path);

/// Writes <stem>.c128, <stem>.reliable.u8 and <stem>.json (merged with `extra`).
void save_model(const fs::path& stem, const ComplexModel& model, const nlohmann::json& extra = {});
ComplexModel load_model(const fs::path& stem);

/// frame,theta_rad,diameter_px,tx_px,ty_px,grid_index,log_likelihood
void write_assignment_csv(const fs::path& path, const Assignment& assignment, const LatentGrid& grid);
/// Reads grid indices back; throws DataError when they do not fit `grid`.
Assignment read_assignment_csv(const fs::path& path, const LatentGrid& grid);

/// Numeric table with a header row; values written with round-trip precision.
struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
};
void write_table_csv(const fs::path& path, const Table& table);
Table read_table_csv(const fs::path& path);

/// Writes <stem>.f64 and <stem>.json (merged with `extra`).
void save_density(const fs::path& stem, const RealGrid& density, const nlohmann::json& extra = {});
RealGrid load_density(const fs::path& stem);

} // namespace hspi::io

#endif // HSPI_IO_HPP
