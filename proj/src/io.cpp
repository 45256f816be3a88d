#include "hspi/io.hpp"

#include "hspi/errors.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace hspi::io {

namespace {

std::ofstream open_out(const fs::path& path)
{
    if (path.has_parent_path())
        fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw DataError("cannot open for writing: " + path.string());
    return out;
}

std::ifstream open_in(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw DataError("cannot open for reading: " + path.string());
    return in;
}

template <typename T>
void put_le(std::ostream& out, T value)
{
    static_assert(std::is_trivially_copyable_v<T>);
    std::array<unsigned char, sizeof(T)> bytes{};
    std::memcpy(bytes.data(), &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big)
        std::reverse(bytes.begin(), bytes.end());
    out.write(reinterpret_cast<const char*>(bytes.data()), sizeof(T));
}

template <typename T>
T get_le(std::istream& in, const fs::path& path)
{
    std::array<unsigned char, sizeof(T)> bytes{};
    in.read(reinterpret_cast<char*>(bytes.data()), sizeof(T));
    if (!in)
        throw DataError("unexpected end of file: " + path.string());
    if constexpr (std::endian::native == std::endian::big)
        std::reverse(bytes.begin(), bytes.end());
    T value;
    std::memcpy(&value, bytes.data(), sizeof(T));
    return value;
}

void check_size(const fs::path& path, std::uintmax_t expected)
{
    std::error_code ec;
    const auto size = fs::file_size(path, ec);
    if (ec)
        throw DataError("cannot stat " + path.string());
    if (size != expected)
        throw DataError("unexpected size for " + path.string() + ": " + std::to_string(size) + " bytes, expected "
                        + std::to_string(expected));
}

fs::path with_suffix(const fs::path& stem, const std::string& suffix) { return fs::path(stem.string() + suffix); }

} // namespace

void write_dataset_binary(const fs::path& path, const SparseDataset& ds)
{
    auto out = open_out(path);
    out.write("HSPI", 4);
    put_le<std::uint16_t>(out, kDatasetVersion);
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(ds.frames.size()));
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(ds.meta.side_px * ds.meta.side_px));
    for (const auto& f : ds.frames) {
        if (f.multi_indices.size() != f.multi_counts.size())
            throw DataError("frame multi index/count length mismatch");
        put_le<std::uint32_t>(out, static_cast<std::uint32_t>(f.one_indices.size()));
        put_le<std::uint32_t>(out, static_cast<std::uint32_t>(f.multi_indices.size()));
        for (auto v : f.one_indices)
            put_le<std::uint32_t>(out, v);
        for (auto v : f.multi_indices)
            put_le<std::uint32_t>(out, v);
        for (auto v : f.multi_counts)
            put_le<std::int32_t>(out, v);
    }
    if (!out)
        throw DataError("write failed: " + path.string());
}

std::vector<SparseFrame> read_dataset_binary(const fs::path& path, const DatasetMeta& meta)
{
    auto in = open_in(path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "HSPI", 4) != 0)
        throw DataError("bad magic in " + path.string());
    const auto version = get_le<std::uint16_t>(in, path);
    if (version != kDatasetVersion)
        throw DataError("unsupported dataset version " + std::to_string(version));
    const auto n_frames = get_le<std::uint32_t>(in, path);
    const auto n_pixels = get_le<std::uint32_t>(in, path);
    if (n_pixels != static_cast<std::uint32_t>(meta.side_px * meta.side_px))
        throw DataError("pixel count in " + path.string() + " does not match metadata");
    if (n_frames == 0)
        throw DataError("dataset has no frames: " + path.string());

    const DetectorGeometry geom = build_detector(meta.side_px, meta.aperture_radius_px, meta.hole_radius_px);
    std::vector<SparseFrame> frames(n_frames);
    std::vector<std::uint32_t> merged;
    for (std::uint32_t d = 0; d < n_frames; ++d) {
        auto& f = frames[d];
        const auto n_ones = get_le<std::uint32_t>(in, path);
        const auto n_multi = get_le<std::uint32_t>(in, path);
        if (n_ones > n_pixels || n_multi > n_pixels)
            throw DataError("corrupt frame header at frame " + std::to_string(d));
        f.one_indices.resize(n_ones);
        f.multi_indices.resize(n_multi);
        f.multi_counts.resize(n_multi);
        for (auto& v : f.one_indices)
            v = get_le<std::uint32_t>(in, path);
        for (auto& v : f.multi_indices)
            v = get_le<std::uint32_t>(in, path);
        for (auto& v : f.multi_counts)
            v = get_le<std::int32_t>(in, path);

        auto check_list = [&](const std::vector<std::uint32_t>& idx) {
            for (std::size_t k = 0; k < idx.size(); ++k) {
                if (idx[k] >= n_pixels || !geom.is_good(static_cast<int>(idx[k])))
                    throw DataError("frame " + std::to_string(d) + " references a non-GOOD pixel");
                if (k > 0 && idx[k] <= idx[k - 1])
                    throw DataError("frame " + std::to_string(d) + " indices not strictly increasing");
            }
        };
        check_list(f.one_indices);
        check_list(f.multi_indices);
        for (auto c : f.multi_counts)
            if (c < 2)
                throw DataError("frame " + std::to_string(d) + " has a multi count below 2");
        merged.clear();
        std::set_intersection(f.one_indices.begin(), f.one_indices.end(), f.multi_indices.begin(),
                              f.multi_indices.end(), std::back_inserter(merged));
        if (!merged.empty())
            throw DataError("frame " + std::to_string(d) + " lists a pixel as both single and multi");
    }
    in.peek();
    if (!in.eof())
        throw DataError("trailing bytes in " + path.string());
    return frames;
}

nlohmann::json meta_to_json(const DatasetMeta& meta)
{
    return {
        {"format", "HSPI"},
        {"version", kDatasetVersion},
        {"geometry",
         {{"side_px", meta.side_px},
          {"aperture_radius_px", meta.aperture_radius_px},
          {"hole_radius_px", meta.hole_radius_px}}},
        {"reference",
         {{"contrast", meta.contrast},
          {"mean_diameter_px", meta.latents.mean_diameter_px},
          {"sigma_diameter_px", meta.latents.sigma_diameter_px},
          {"sigma_shift_px", meta.latents.sigma_shift_px}}},
        {"with_reference", meta.with_reference},
        {"target_photons", meta.target_photons},
        {"scale", meta.scale},
        {"seed", meta.seed},
    };
}

DatasetMeta meta_from_json(const nlohmann::json& j)
{
    try {
        DatasetMeta m;
        m.side_px = j.at("geometry").at("side_px").get<int>();
        m.aperture_radius_px = j.at("geometry").at("aperture_radius_px").get<double>();
        m.hole_radius_px = j.at("geometry").at("hole_radius_px").get<double>();
        m.contrast = j.at("reference").at("contrast").get<double>();
        m.latents.mean_diameter_px = j.at("reference").at("mean_diameter_px").get<double>();
        m.latents.sigma_diameter_px = j.at("reference").at("sigma_diameter_px").get<double>();
        m.latents.sigma_shift_px = j.at("reference").at("sigma_shift_px").get<double>();
        m.with_reference = j.at("with_reference").get<bool>();
        m.target_photons = j.at("target_photons").get<double>();
        m.scale = j.at("scale").get<double>();
        m.seed = j.at("seed").get<std::uint64_t>();
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("invalid dataset metadata: ") + e.what());
    }
}

void save_dataset(const fs::path& stem, const SparseDataset& ds)
{
    write_dataset_binary(with_suffix(stem, ".hspi"), ds);
    auto j = meta_to_json(ds.meta);
    j["n_frames"] = ds.frames.size();
    write_json(with_suffix(stem, ".json"), j);
}

SparseDataset load_dataset(const fs::path& stem)
{
    SparseDataset ds;
    ds.meta = meta_from_json(read_json(with_suffix(stem, ".json")));
    ds.frames = read_dataset_binary(with_suffix(stem, ".hspi"), ds.meta);
    return ds;
}

void write_latents_csv(const fs::path& path, const std::vector<FrameTruth>& truth)
{
    auto out = open_out(path);
    out << "frame,theta_rad,diameter_px,tx_px,ty_px,state\n";
    out.precision(17);
    for (std::size_t d = 0; d < truth.size(); ++d) {
        const auto& t = truth[d];
        out << d << ',' << t.latent.theta << ',' << t.latent.diameter_px << ',' << t.latent.shift_px.x() << ','
            << t.latent.shift_px.y() << ',' << t.state << '\n';
    }
    if (!out)
        throw DataError("write failed: " + path.string());
}

std::vector<FrameTruth> read_latents_csv(const fs::path& path)
{
    auto in = open_in(path);
    std::string line;
    if (!std::getline(in, line) || line.rfind("frame,theta_rad,diameter_px,tx_px,ty_px,state", 0) != 0)
        throw DataError("unexpected latent CSV header in " + path.string());
    std::vector<FrameTruth> out;
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        std::istringstream ss(line);
        std::string field;
        std::vector<std::string> cols;
        while (std::getline(ss, field, ','))
            cols.push_back(field);
        if (cols.size() != 6)
            throw DataError("malformed latent CSV row in " + path.string() + ": " + line);
        try {
            if (std::stoull(cols[0]) != out.size())
                throw DataError("latent CSV frames out of order in " + path.string());
            FrameTruth t;
            t.latent.theta = std::stod(cols[1]);
            t.latent.diameter_px = std::stod(cols[2]);
            t.latent.shift_px = Vec2d(std::stod(cols[3]), std::stod(cols[4]));
            t.state = std::stoi(cols[5]);
            out.push_back(t);
        } catch (const std::logic_error&) {
            throw DataError("malformed latent CSV row in " + path.string() + ": " + line);
        }
    }
    return out;
}

void write_raw(const fs::path& path, const RealGrid& grid)
{
    auto out = open_out(path);
    for (Eigen::Index i = 0; i < grid.size(); ++i)
        put_le<double>(out, grid.data()[i]);
    if (!out)
        throw DataError("write failed: " + path.string());
}

RealGrid read_raw_real(const fs::path& path, int side)
{
    check_size(path, static_cast<std::uintmax_t>(side) * side * sizeof(double));
    auto in = open_in(path);
    RealGrid g(side, side);
    for (Eigen::Index i = 0; i < g.size(); ++i)
        g.data()[i] = get_le<double>(in, path);
    return g;
}

void write_raw(const fs::path& path, const ComplexGrid& grid)
{
    auto out = open_out(path);
    for (Eigen::Index i = 0; i < grid.size(); ++i) {
        put_le<double>(out, grid.data()[i].real());
        put_le<double>(out, grid.data()[i].imag());
    }
    if (!out)
        throw DataError("write failed: " + path.string());
}

ComplexGrid read_raw_complex(const fs::path& path, int side)
{
    check_size(path, static_cast<std::uintmax_t>(side) * side * 2 * sizeof(double));
    auto in = open_in(path);
    ComplexGrid g(side, side);
    for (Eigen::Index i = 0; i < g.size(); ++i) {
        const double re = get_le<double>(in, path);
        const double im = get_le<double>(in, path);
        g.data()[i] = Complex(re, im);
    }
    return g;
}

void write_raw(const fs::path& path, const MaskGrid& grid)
{
    auto out = open_out(path);
    out.write(reinterpret_cast<const char*>(grid.data()), static_cast<std::streamsize>(grid.size()));
    if (!out)
        throw DataError("write failed: " + path.string());
}

MaskGrid read_raw_mask(const fs::path& path, int side)
{
    check_size(path, static_cast<std::uintmax_t>(side) * side);
    auto in = open_in(path);
    MaskGrid g(side, side);
    in.read(reinterpret_cast<char*>(g.data()), static_cast<std::streamsize>(g.size()));
    if (!in)
        throw DataError("read failed: " + path.string());
    return g;
}

void write_json(const fs::path& path, const nlohmann::json& j)
{
    auto out = open_out(path);
    out << j.dump(2) << '\n';
    if (!out)
        throw DataError("write failed: " + path.string());
}

nlohmann::json read_json(const fs::path& path)
{
    auto in = open_in(path);
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw DataError("invalid JSON in " + path.string() + ": " + e.what());
    }
}

void save_model(const fs::path& stem, const ComplexModel& model, const nlohmann::json& extra)
{
    write_raw(with_suffix(stem, ".c128"), model.grid);
    write_raw(with_suffix(stem, ".reliable.u8"), model.reliable);
    nlohmann::json j = extra.is_object() ? extra : nlohmann::json::object();
    j["kind"] = "complex_model";
    j["side_px"] = model.side();
    j["scale"] = model.scale;
    j["layout"] = "row-major interleaved little-endian float64 (re, im)";
    write_json(with_suffix(stem, ".json"), j);
}

ComplexModel load_model(const fs::path& stem)
{
    const auto j = read_json(with_suffix(stem, ".json"));
    ComplexModel m;
    try {
        const int side = j.at("side_px").get<int>();
        m.scale = j.at("scale").get<double>();
        m.grid = read_raw_complex(with_suffix(stem, ".c128"), side);
        m.reliable = read_raw_mask(with_suffix(stem, ".reliable.u8"), side);
    } catch (const nlohmann::json::exception& e) {
        throw DataError("invalid model metadata for " + stem.string() + ": " + e.what());
    }
    return m;
}

void save_density(const fs::path& stem, const RealGrid& density, const nlohmann::json& extra)
{
    write_raw(with_suffix(stem, ".f64"), density);
    nlohmann::json j = extra.is_object() ? extra : nlohmann::json::object();
    j["kind"] = "density";
    j["side_px"] = density.rows();
    j["layout"] = "row-major little-endian float64";
    write_json(with_suffix(stem, ".json"), j);
}

RealGrid load_density(const fs::path& stem)
{
    const auto j = read_json(with_suffix(stem, ".json"));
    try {
        return read_raw_real(with_suffix(stem, ".f64"), j.at("side_px").get<int>());
    } catch (const nlohmann::json::exception& e) {
        throw DataError("invalid density metadata for " + stem.string() + ": " + e.what());
    }
}

namespace {

std::vector<std::string> split_csv(const std::string& line)
{
    std::vector<std::string> cols;
    std::istringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ','))
        cols.push_back(field);
    if (!line.empty() && line.back() == ',')
        cols.emplace_back();
    return cols;
}

} // namespace

void write_assignment_csv(const fs::path& path, const Assignment& assignment, const LatentGrid& grid)
{
    auto out = open_out(path);
    out << "frame,theta_rad,diameter_px,tx_px,ty_px,grid_index,log_likelihood\n";
    out.precision(17);
    for (std::size_t d = 0; d < assignment.frames.size(); ++d) {
        const auto& f = assignment.frames[d];
        const LatentParams l = grid.at(f.index);
        out << d << ',' << l.theta << ',' << l.diameter_px << ',' << l.shift_px.x() << ',' << l.shift_px.y() << ','
            << grid.flatten(f.index) << ',' << f.log_likelihood << '\n';
    }
    if (!out)
        throw DataError("write failed: " + path.string());
}

Assignment read_assignment_csv(const fs::path& path, const LatentGrid& grid)
{
    auto in = open_in(path);
    std::string line;
    if (!std::getline(in, line) || line.rfind("frame,theta_rad,diameter_px,tx_px,ty_px,grid_index,log_likelihood", 0) != 0)
        throw DataError("unexpected assignment CSV header in " + path.string());
    Assignment out;
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        const auto cols = split_csv(line);
        if (cols.size() != 7)
            throw DataError("malformed assignment CSV row in " + path.string() + ": " + line);
        try {
            if (std::stoull(cols[0]) != out.frames.size())
                throw DataError("assignment CSV frames out of order in " + path.string());
            const auto h = std::stoull(cols[5]);
            if (h >= grid.size())
                throw DataError("assignment grid index out of range in " + path.string());
            FrameAssignment f;
            f.index = grid.unflatten(h);
            f.log_likelihood = std::stod(cols[6]);
            out.frames.push_back(f);
        } catch (const std::logic_error&) {
            throw DataError("malformed assignment CSV row in " + path.string() + ": " + line);
        }
    }
    return out;
}

void write_table_csv(const fs::path& path, const Table& table)
{
    auto out = open_out(path);
    for (std::size_t k = 0; k < table.header.size(); ++k)
        out << (k ? "," : "") << table.header[k];
    out << '\n';
    out.precision(17);
    for (const auto& row : table.rows) {
        if (row.size() != table.header.size())
            throw DataError("table row width differs from header for " + path.string());
        for (std::size_t k = 0; k < row.size(); ++k)
            out << (k ? "," : "") << row[k];
        out << '\n';
    }
    if (!out)
        throw DataError("write failed: " + path.string());
}

Table read_table_csv(const fs::path& path)
{
    auto in = open_in(path);
    Table t;
    std::string line;
    if (!std::getline(in, line) || line.empty())
        throw DataError("CSV file has no header: " + path.string());
    t.header = split_csv(line);
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        const auto cols = split_csv(line);
        if (cols.size() != t.header.size())
            throw DataError("malformed CSV row in " + path.string() + ": " + line);
        std::vector<double> row;
        for (const auto& c : cols) {
            try {
                std::size_t used = 0;
                row.push_back(std::stod(c, &used));
                if (used != c.size())
                    throw std::invalid_argument(c);
            } catch (const std::logic_error&) {
                throw DataError("non-numeric CSV field '" + c + "' in " + path.string());
            }
        }
        t.rows.push_back(std::move(row));
    }
    return t;
}

} // namespace hspi::io
