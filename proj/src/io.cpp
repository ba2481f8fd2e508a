#include "ega/io.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "ega/errors.hpp"

namespace ega {

namespace {

std::string format_value(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

struct RasterData {
    std::size_t height = 0, width = 0, channels = 0;
    std::vector<double> values;
};

RasterData load_raster(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open raster file '" + path + "'");
    std::string magic;
    RasterData raster;
    in >> magic >> raster.height >> raster.width >> raster.channels;
    if (!in || magic != "EGA-RASTER")
        throw InputError("raster file '" + path + "' has a malformed header");
    const std::size_t count = raster.height * raster.width * raster.channels;
    raster.values.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        if (!(in >> raster.values[i]))
            throw InputError("raster file '" + path + "' truncated at value " +
                             std::to_string(i) + " of " + std::to_string(count));
    }
    return raster;
}

void save_raster(const std::string& path, std::size_t height, std::size_t width,
                 std::size_t channels, const std::vector<double>& values) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write raster file '" + path + "'");
    out << "EGA-RASTER " << height << " " << width << " " << channels << "\n";
    const std::size_t per_line = width * channels;
    for (std::size_t y = 0; y < height; ++y) {
        for (std::size_t i = 0; i < per_line; ++i) {
            if (i) out << " ";
            out << format_value(values[y * per_line + i]);
        }
        out << "\n";
    }
}

template <typename T>
void write_le(std::ofstream& out, T value) {
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    // The build targets little-endian hosts; memcpy is the byte order.
    out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T read_le(std::ifstream& in, const std::string& path) {
    T value;
    if (!in.read(reinterpret_cast<char*>(&value), sizeof(T)))
        throw InputError("param archive '" + path + "' truncated");
    return value;
}

constexpr char kParamMagic[8] = {'E', 'G', 'A', 'P', 'A', 'R', 'M', 'S'};

const char* const kParamFields[] = {"w_q", "w_k", "w_v", "w_o", "p_k",
                                    "p_v", "query_gain", "query_bias", "ref_gain", "ref_bias"};

}  // namespace

ImagePlane load_image(const std::string& path) {
    RasterData raster = load_raster(path);
    return {raster.height, raster.width, raster.channels, std::move(raster.values)};
}

void save_image(const std::string& path, const ImagePlane& image) {
    save_raster(path, image.height, image.width, image.channels, image.values);
}

DepthMap load_depth(const std::string& path) {
    RasterData raster = load_raster(path);
    if (raster.channels != 1)
        throw InputError("depth raster '" + path + "' must have 1 channel, has " +
                         std::to_string(raster.channels));
    return {raster.height, raster.width, std::move(raster.values)};
}

void save_depth(const std::string& path, const DepthMap& depth) {
    save_raster(path, depth.height, depth.width, 1, depth.values);
}

void save_matrices(const std::string& path, const NamedMatrices& matrices) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write param archive '" + path + "'");
    out.write(kParamMagic, sizeof(kParamMagic));
    write_le<std::uint32_t>(out, 1);
    write_le<std::uint64_t>(out, matrices.size());
    for (const auto& [name, matrix] : matrices) {
        write_le<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_le<std::uint64_t>(out, matrix.rows());
        write_le<std::uint64_t>(out, matrix.cols());
        for (double v : matrix.data()) write_le<double>(out, v);
    }
}

NamedMatrices load_matrices(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open param archive '" + path + "'");
    char magic[sizeof(kParamMagic)];
    if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kParamMagic, sizeof(magic)) != 0)
        throw InputError("param archive '" + path + "' has a bad magic header");
    const auto version = read_le<std::uint32_t>(in, path);
    if (version != 1)
        throw InputError("param archive '" + path + "' has unsupported version " +
                         std::to_string(version));
    const auto count = read_le<std::uint64_t>(in, path);
    NamedMatrices matrices;
    matrices.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        const auto name_len = read_le<std::uint32_t>(in, path);
        std::string name(name_len, '\0');
        if (!in.read(name.data(), name_len))
            throw InputError("param archive '" + path + "' truncated");
        const auto rows = read_le<std::uint64_t>(in, path);
        const auto cols = read_le<std::uint64_t>(in, path);
        Matrix matrix(rows, cols);
        for (double& v : matrix.data()) v = read_le<double>(in, path);
        matrices.emplace_back(std::move(name), std::move(matrix));
    }
    return matrices;
}

void save_rig_params(const std::string& path, const RigParams& params) {
    NamedMatrices matrices;
    for (std::size_t v = 0; v < params.views(); ++v) {
        for (std::size_t s = 0; s < params.scales(); ++s) {
            const EgaParams& block = params.at(v, s);
            const std::string prefix =
                "v" + std::to_string(v) + ".s" + std::to_string(s) + ".";
            matrices.emplace_back(prefix + "w_q", block.w_q);
            matrices.emplace_back(prefix + "w_k", block.w_k);
            matrices.emplace_back(prefix + "w_v", block.w_v);
            matrices.emplace_back(prefix + "w_o", block.w_o);
            if (block.p_k) matrices.emplace_back(prefix + "p_k", *block.p_k);
            if (block.p_v) matrices.emplace_back(prefix + "p_v", *block.p_v);
            matrices.emplace_back(prefix + "query_gain", block.query_gain);
            matrices.emplace_back(prefix + "query_bias", block.query_bias);
            matrices.emplace_back(prefix + "ref_gain", block.ref_gain);
            matrices.emplace_back(prefix + "ref_bias", block.ref_bias);
        }
    }
    save_matrices(path, matrices);
}

RigParams load_rig_params(const std::string& path, const RigConfig& config) {
    const NamedMatrices matrices = load_matrices(path);
    RigParams params(config.num_cameras, config.scales.size());
    const auto find = [&](const std::string& name) -> const Matrix* {
        for (const auto& [candidate, matrix] : matrices)
            if (candidate == name) return &matrix;
        return nullptr;
    };
    for (std::size_t v = 0; v < config.num_cameras; ++v) {
        for (std::size_t s = 0; s < config.scales.size(); ++s) {
            EgaParams& block = params.at(v, s);
            const std::string prefix =
                "v" + std::to_string(v) + ".s" + std::to_string(s) + ".";
            for (const char* field : kParamFields) {
                const Matrix* matrix = find(prefix + field);
                const bool projected = config.scales[s].projection_dim.has_value();
                const bool is_projection =
                    std::strcmp(field, "p_k") == 0 || std::strcmp(field, "p_v") == 0;
                if (matrix == nullptr) {
                    if (is_projection && !projected) continue;
                    throw InputError("param archive '" + path + "' missing entry " + prefix +
                                     field);
                }
                if (std::strcmp(field, "w_q") == 0) block.w_q = *matrix;
                else if (std::strcmp(field, "w_k") == 0) block.w_k = *matrix;
                else if (std::strcmp(field, "w_v") == 0) block.w_v = *matrix;
                else if (std::strcmp(field, "w_o") == 0) block.w_o = *matrix;
                else if (std::strcmp(field, "p_k") == 0) block.p_k = *matrix;
                else if (std::strcmp(field, "p_v") == 0) block.p_v = *matrix;
                else if (std::strcmp(field, "query_gain") == 0) block.query_gain = *matrix;
                else if (std::strcmp(field, "query_bias") == 0) block.query_bias = *matrix;
                else if (std::strcmp(field, "ref_gain") == 0) block.ref_gain = *matrix;
                else block.ref_bias = *matrix;
            }
        }
    }
    return params;
}

std::string file_digest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open '" + path + "' for digest");
    std::uint64_t hash = 0xcbf29ce484222325ull;
    char chunk[4096];
    while (in.read(chunk, sizeof(chunk)) || in.gcount() > 0) {
        const std::streamsize got = in.gcount();
        for (std::streamsize i = 0; i < got; ++i) {
            hash ^= static_cast<unsigned char>(chunk[i]);
            hash *= 0x100000001b3ull;
        }
        if (!in) break;
    }
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash));
    return buf;
}

}  // namespace ega
