#include "ega/rig.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "ega/errors.hpp"

namespace ega {

namespace {

std::string key_str(std::size_t view, std::size_t scale, int time_offset) {
    return "(view " + std::to_string(view) + ", scale " + std::to_string(scale) + ", time " +
           std::to_string(time_offset) + ")";
}

RigConfig ring6(std::vector<ScaleConfig> scales) {
    RigConfig config;
    config.num_cameras = 6;
    config.neighbors.resize(6);
    for (std::size_t i = 0; i < 6; ++i)
        config.neighbors[i] = {(i + 5) % 6, (i + 1) % 6};
    config.scales = std::move(scales);
    config.heads = 8;
    config.channels = 64;
    return config;
}

}  // namespace

void validate(const RigConfig& config) {
    if (config.num_cameras == 0) throw ConfigError("config: num_cameras must be positive");
    if (config.neighbors.size() != config.num_cameras)
        throw ConfigError("config: neighbors list has " + std::to_string(config.neighbors.size()) +
                          " entries for " + std::to_string(config.num_cameras) + " cameras");
    const std::size_t n_i = config.neighbors.empty() ? 0 : config.neighbors[0].size();
    for (std::size_t i = 0; i < config.neighbors.size(); ++i) {
        if (config.neighbors[i].size() != n_i)
            throw ConfigError("config: camera " + std::to_string(i) + " has " +
                              std::to_string(config.neighbors[i].size()) +
                              " neighbors, expected " + std::to_string(n_i));
        for (std::size_t j : config.neighbors[i]) {
            if (j >= config.num_cameras)
                throw ConfigError("config: camera " + std::to_string(i) +
                                  " lists invalid neighbor " + std::to_string(j));
            if (j == i)
                throw ConfigError("config: camera " + std::to_string(i) + " lists itself");
        }
    }
    if (config.scales.empty()) throw ConfigError("config: at least one scale required");
    for (std::size_t s = 0; s < config.scales.size(); ++s) {
        const ScaleConfig& sc = config.scales[s];
        if (sc.spatial() == 0)
            throw ConfigError("config: scale " + std::to_string(s) + " has zero spatial size");
        if (sc.projection_dim && *sc.projection_dim == 0)
            throw ConfigError("config: scale " + std::to_string(s) + " has zero projection dim");
    }
    if (config.heads == 0 || config.channels == 0)
        throw ConfigError("config: heads and channels must be positive");
    if (config.channels % config.heads != 0)
        throw ConfigError("config: heads (" + std::to_string(config.heads) +
                          ") must divide channels (" + std::to_string(config.channels) + ")");
}

RigConfig preset(const std::string& name) {
    RigConfig config;
    if (name == "LR") {
        config = ring6(std::vector<ScaleConfig>(5, {11, 20, std::nullopt}));
    } else if (name == "MR") {
        std::vector<ScaleConfig> scales(4, {22, 40, 880});
        scales.push_back({11, 20, std::nullopt});
        config = ring6(std::move(scales));
    } else if (name == "HR") {
        std::vector<ScaleConfig> scales{{44, 80, 1024}};
        for (int i = 0; i < 3; ++i) scales.push_back({22, 40, 880});
        scales.push_back({11, 20, std::nullopt});
        config = ring6(std::move(scales));
    } else if (name == "DDAD-LR") {
        config = ring6(std::vector<ScaleConfig>(5, {12, 40, std::nullopt}));
    } else if (name == "DDAD-MR") {
        config = ring6(std::vector<ScaleConfig>(5, {24, 40, 960}));
    } else {
        throw ConfigError("unknown preset '" + name +
                          "' (expected LR, MR, HR, DDAD-LR or DDAD-MR)");
    }
    validate(config);
    return config;
}

RigConfig config_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        // nlohmann reports a byte offset; convert to a line number.
        std::size_t line = 1;
        for (std::size_t i = 0; i < e.byte && i < text.size(); ++i)
            if (text[i] == '\n') ++line;
        throw ConfigError("config parse error at line " + std::to_string(line) + ": " + e.what());
    }
    try {
        RigConfig config;
        config.num_cameras = j.at("num_cameras").get<std::size_t>();
        config.neighbors = j.at("neighbors").get<std::vector<std::vector<std::size_t>>>();
        for (const auto& js : j.at("scales")) {
            ScaleConfig sc;
            sc.height = js.at("height").get<std::size_t>();
            sc.width = js.at("width").get<std::size_t>();
            if (js.contains("k") && !js.at("k").is_null())
                sc.projection_dim = js.at("k").get<std::size_t>();
            config.scales.push_back(sc);
        }
        config.heads = j.value("heads", std::size_t{8});
        config.channels = j.value("channels", std::size_t{64});
        config.temporal_frames = j.value("temporal_frames", std::size_t{0});
        config.seed = j.value("seed", std::uint64_t{1});
        config.use_norm = j.value("use_norm", true);
        config.literal_sqrt_c = j.value("literal_sqrt_c", false);
        config.share_kv_projections = j.value("share_kv_projections", false);
        validate(config);
        return config;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config error: ") + e.what());
    }
}

std::string config_to_json(const RigConfig& config) {
    nlohmann::ordered_json j;
    j["num_cameras"] = config.num_cameras;
    j["neighbors"] = config.neighbors;
    j["scales"] = nlohmann::ordered_json::array();
    for (const ScaleConfig& sc : config.scales) {
        nlohmann::ordered_json js;
        js["height"] = sc.height;
        js["width"] = sc.width;
        if (sc.projection_dim)
            js["k"] = *sc.projection_dim;
        else
            js["k"] = nullptr;
        j["scales"].push_back(js);
    }
    j["heads"] = config.heads;
    j["channels"] = config.channels;
    j["temporal_frames"] = config.temporal_frames;
    j["seed"] = config.seed;
    j["use_norm"] = config.use_norm;
    j["literal_sqrt_c"] = config.literal_sqrt_c;
    j["share_kv_projections"] = config.share_kv_projections;
    return j.dump(2) + "\n";
}

RigConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open config file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return config_from_json(buf.str());
}

void FeatureSet::insert(FeatureMap map) {
    maps_[{map.view, map.scale, map.time_offset}] = std::move(map.data);
}

bool FeatureSet::contains(std::size_t view, std::size_t scale, int time_offset) const {
    return maps_.count({view, scale, time_offset}) > 0;
}

const Matrix& FeatureSet::at(std::size_t view, std::size_t scale, int time_offset) const {
    auto it = maps_.find({view, scale, time_offset});
    if (it == maps_.end())
        throw InputError("missing feature map " + key_str(view, scale, time_offset));
    return it->second;
}

Matrix& FeatureSet::at(std::size_t view, std::size_t scale, int time_offset) {
    auto it = maps_.find({view, scale, time_offset});
    if (it == maps_.end())
        throw InputError("missing feature map " + key_str(view, scale, time_offset));
    return it->second;
}

FeatureSet random_features(const RigConfig& config, std::uint64_t seed, double scale) {
    FeatureSet set;
    for (std::size_t v = 0; v < config.num_cameras; ++v) {
        for (std::size_t s = 0; s < config.scales.size(); ++s) {
            const std::size_t n_s = config.scales[s].spatial();
            for (std::size_t t = 0; t <= config.temporal_frames; ++t) {
                const std::uint64_t stream = mix_seed(seed, v, s, t);
                set.insert({v, s, -static_cast<int>(t),
                            seeded_init(n_s, config.channels, stream, scale)});
            }
        }
    }
    return set;
}

Matrix neighbor_stack(const FeatureSet& features, std::size_t view, std::size_t scale_idx,
                      const RigConfig& config, int time_offset) {
    std::vector<Matrix> parts;
    parts.reserve(config.neighbors[view].size());
    for (std::size_t neighbor : config.neighbors[view])
        parts.push_back(features.at(neighbor, scale_idx, time_offset));
    return concat_rows(parts);
}

Matrix temporal_stack(const FeatureSet& features, std::size_t view, std::size_t scale_idx,
                      const RigConfig& config) {
    std::vector<Matrix> parts;
    parts.reserve(config.neighbors[view].size() + config.temporal_frames);
    for (std::size_t neighbor : config.neighbors[view])
        parts.push_back(features.at(neighbor, scale_idx, 0));
    for (std::size_t t = 1; t <= config.temporal_frames; ++t)
        parts.push_back(features.at(view, scale_idx, -static_cast<int>(t)));
    return concat_rows(parts);
}

}  // namespace ega
