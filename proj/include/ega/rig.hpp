#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "ega/matrix.hpp"

namespace ega {

// One level of the feature pyramid. projection_dim absent means keys and
// values attend at full stacked length at this scale.
struct ScaleConfig {
    std::size_t height = 0;
    std::size_t width = 0;
    std::optional<std::size_t> projection_dim;

    std::size_t spatial() const { return height * width; }
};

// Camera rig topology plus the attention hyperparameters that depend on it.
// Plain value type; immutable by convention once validated.
struct RigConfig {
    std::size_t num_cameras = 0;
    std::vector<std::vector<std::size_t>> neighbors;  // per camera, fixed order
    std::vector<ScaleConfig> scales;
    std::size_t heads = 8;
    std::size_t channels = 64;
    std::size_t temporal_frames = 0;
    std::uint64_t seed = 1;
    bool use_norm = true;
    // Scale attention logits by 1/sqrt(c) instead of 1/sqrt(c/Z); used for
    // single-head parity checks against the unheaded formulation.
    bool literal_sqrt_c = false;
    bool share_kv_projections = false;

    std::size_t neighbor_count() const { return neighbors.empty() ? 0 : neighbors[0].size(); }
    // Stacked key/value length at a scale: (n_i + n_t) * n_s.
    std::size_t reference_len(std::size_t scale_idx) const {
        return (neighbor_count() + temporal_frames) * scales[scale_idx].spatial();
    }
};

// Throws ConfigError if invariants are violated (neighbor indices, equal
// neighbor counts, heads dividing channels, positive scale dims).
void validate(const RigConfig& config);

// Named rig configurations: LR, MR, HR, DDAD-LR, DDAD-MR. Six-camera ring with
// neighbors (i-1 mod 6, i+1 mod 6), 8 heads, 64 channels. Unknown name
// throws ConfigError.
RigConfig preset(const std::string& name);

// Loads a JSON config file. Parse failures throw ConfigError naming the
// line; semantic failures go through validate().
RigConfig load_config(const std::string& path);
std::string config_to_json(const RigConfig& config);
RigConfig config_from_json(const std::string& text);

// One camera view's flattened feature grid at one scale and time offset
// (0 = current frame, -1 = previous, ...).
struct FeatureMap {
    std::size_t view = 0;
    std::size_t scale = 0;
    int time_offset = 0;
    Matrix data;  // spatial() x channels
};

// Keyed collection of FeatureMaps for a rig.
class FeatureSet {
public:
    void insert(FeatureMap map);
    bool contains(std::size_t view, std::size_t scale, int time_offset = 0) const;
    // Throws InputError naming the missing (view, scale, time).
    const Matrix& at(std::size_t view, std::size_t scale, int time_offset = 0) const;
    Matrix& at(std::size_t view, std::size_t scale, int time_offset = 0);
    std::size_t size() const { return maps_.size(); }

private:
    std::map<std::tuple<std::size_t, std::size_t, int>, Matrix> maps_;
};

// Seeds a complete feature set for the config: every view and scale at the
// current frame plus temporal_frames past frames per view.
FeatureSet random_features(const RigConfig& config, std::uint64_t seed, double scale = 1.0);

// Concatenated neighbor features of `view` at one scale and time, in the
// config's fixed neighbor order. Shape (n_i * n_s) x c.
Matrix neighbor_stack(const FeatureSet& features, std::size_t view, std::size_t scale_idx,
                      const RigConfig& config, int time_offset = 0);

// Neighbors at the current frame followed by the view's own features at
// t-1, t-2, ..., t-n_t. Shape ((n_i + n_t) * n_s) x c. With n_t = 0 this
// is exactly neighbor_stack.
Matrix temporal_stack(const FeatureSet& features, std::size_t view, std::size_t scale_idx,
                      const RigConfig& config);

}  // namespace ega
