#pragma once

#include <cstdint>
#include <optional>
#include <tuple>
#include <utility>
#include <vector>

#include "ega/matrix.hpp"
#include "ega/rig.hpp"

namespace ega {

inline constexpr double kLayerNormEps = 1e-5;

// Learnable matrices for one (view, scale). p_k/p_v are present iff the
// scale has a projection dim; their column count must equal the stacked
// reference length (n_i + n_t) * n_s they were built for. Parameters for
// temporal and non-temporal configs are distinct objects, never resized.
struct EgaParams {
    Matrix w_q, w_k, w_v;  // c x c
    Matrix w_o;            // c x c, mixes concatenated heads
    std::optional<Matrix> p_k, p_v;  // k_s x L
    Matrix query_gain, query_bias;   // 1 x c
    Matrix ref_gain, ref_bias;       // 1 x c
};

struct AttentionOptions {
    std::size_t heads = 1;
    bool use_norm = true;
    bool literal_sqrt_c = false;  // scale logits by 1/sqrt(c) instead of 1/sqrt(c/Z)
    bool keep_weights = false;    // retain per-head attention maps in the output

    static AttentionOptions from(const RigConfig& config, bool keep_weights = false) {
        return {config.heads, config.use_norm, config.literal_sqrt_c, keep_weights};
    }
};

struct AttentionOutput {
    Matrix refined;                // n_s x c
    std::vector<Matrix> weights;   // per head, n_s x k_s (or n_s x L), rows sum to 1
};

// Row-wise layer norm over channels: gain * (x - mean) / sqrt(var + eps) + bias.
// gain and bias are 1 x c.
Matrix layer_norm(const Matrix& x, const Matrix& gain, const Matrix& bias,
                  double eps = kLayerNormEps);

// Q = F W_q, K = H W_k, V = H W_v.
std::tuple<Matrix, Matrix, Matrix> project_qkv(const Matrix& query_feat, const Matrix& reference,
                                               const EgaParams& params);

// K~ = P_k K, V~ = P_v V. Throws ConfigError when the params carry no
// projections, ShapeError when the stacked length disagrees.
std::pair<Matrix, Matrix> reduce_kv(const Matrix& k, const Matrix& v, const EgaParams& params);

// softmax(Q K^T / sqrt(scale_dim)) V, one head.
Matrix guided_attention(const Matrix& q, const Matrix& k, const Matrix& v,
                        std::size_t scale_dim);

// Full block: pre-norm on query and reference, QKV projection, optional
// key/value reduction, multi-head guided attention, head mixing through
// w_o, residual connection back to the raw query features.
AttentionOutput ega_block(const Matrix& query_feat, const Matrix& reference,
                          const EgaParams& params, const AttentionOptions& options);

// Seeded parameters for one (view, scale). Weight matrices are uniform in
// +-1/sqrt(c), projections in +-1/sqrt(L), gains start at 1 and biases at 0.
EgaParams init_ega_params(std::size_t channels, std::optional<std::size_t> projection_dim,
                          std::size_t reference_len, std::uint64_t seed);

// Parameters for every (view, scale) of a rig.
class RigParams {
public:
    RigParams() = default;
    RigParams(std::size_t views, std::size_t scales);

    EgaParams& at(std::size_t view, std::size_t scale);
    const EgaParams& at(std::size_t view, std::size_t scale) const;
    std::size_t views() const { return views_; }
    std::size_t scales() const { return scales_; }
    std::size_t parameter_count() const;

private:
    std::size_t views_ = 0;
    std::size_t scales_ = 0;
    std::vector<EgaParams> blocks_;
};

// Per-(view, scale) parameters derived from the config's seed mix. With
// config.share_kv_projections, every view at a scale carries identical
// copies of that scale's P_k/P_v.
RigParams init_rig_params(const RigConfig& config, std::uint64_t seed);

// Applies ega_block to every (view, scale): the reference stack is
// temporal_stack when the config has past frames, neighbor_stack otherwise.
// Returns refined current-frame maps. Per-view outputs are independent.
FeatureSet forward_rig(const FeatureSet& features, const RigParams& params,
                       const RigConfig& config);

}  // namespace ega
