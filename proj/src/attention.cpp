#include "ega/attention.hpp"

#include <cmath>
#include <string>

#include "ega/errors.hpp"

namespace ega {

namespace {

void check_square(const Matrix& w, std::size_t c, const char* name) {
    if (w.rows() != c || w.cols() != c)
        throw ShapeError(std::string(name) + " must be " + std::to_string(c) + "x" +
                         std::to_string(c) + ", got " + w.shape_str());
}

// One head: returns the attention map alongside the weighted sum.
std::pair<Matrix, Matrix> attention_with_weights(const Matrix& q, const Matrix& k,
                                                 const Matrix& v, std::size_t scale_dim) {
    if (q.cols() != k.cols())
        throw ShapeError("guided_attention: query width " + q.shape_str() +
                         " does not match key width " + k.shape_str());
    if (k.rows() != v.rows())
        throw ShapeError("guided_attention: key rows " + k.shape_str() +
                         " do not match value rows " + v.shape_str());
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(scale_dim));
    Matrix weights = softmax_rows(scaled(matmul(q, transpose(k)), inv_sqrt));
    Matrix out = matmul(weights, v);
    return {std::move(weights), std::move(out)};
}

}  // namespace

Matrix layer_norm(const Matrix& x, const Matrix& gain, const Matrix& bias, double eps) {
    const std::size_t c = x.cols();
    if (gain.rows() != 1 || gain.cols() != c || bias.rows() != 1 || bias.cols() != c)
        throw ShapeError("layer_norm: gain/bias must be 1x" + std::to_string(c) + ", got " +
                         gain.shape_str() + " and " + bias.shape_str());
    Matrix out(x.rows(), c);
    for (std::size_t i = 0; i < x.rows(); ++i) {
        const double* in_row = x.row(i);
        double* out_row = out.row(i);
        double mean = 0.0;
        for (std::size_t j = 0; j < c; ++j) mean += in_row[j];
        mean /= static_cast<double>(c);
        double var = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            const double d = in_row[j] - mean;
            var += d * d;
        }
        var /= static_cast<double>(c);
        const double inv_std = 1.0 / std::sqrt(var + eps);
        for (std::size_t j = 0; j < c; ++j)
            out_row[j] = gain(0, j) * ((in_row[j] - mean) * inv_std) + bias(0, j);
    }
    return out;
}

std::tuple<Matrix, Matrix, Matrix> project_qkv(const Matrix& query_feat, const Matrix& reference,
                                               const EgaParams& params) {
    const std::size_t c = query_feat.cols();
    if (reference.cols() != c)
        throw ShapeError("project_qkv: reference " + reference.shape_str() +
                         " does not match query width " + query_feat.shape_str());
    check_square(params.w_q, c, "W_q");
    check_square(params.w_k, c, "W_k");
    check_square(params.w_v, c, "W_v");
    return {matmul(query_feat, params.w_q), matmul(reference, params.w_k),
            matmul(reference, params.w_v)};
}

std::pair<Matrix, Matrix> reduce_kv(const Matrix& k, const Matrix& v, const EgaParams& params) {
    if (!params.p_k || !params.p_v)
        throw ConfigError("reduce_kv: params carry no key/value projections");
    if (params.p_k->cols() != k.rows())
        throw ShapeError("reduce_kv: P_k " + params.p_k->shape_str() +
                         " does not match stacked keys " + k.shape_str());
    if (params.p_v->cols() != v.rows())
        throw ShapeError("reduce_kv: P_v " + params.p_v->shape_str() +
                         " does not match stacked values " + v.shape_str());
    return {matmul(*params.p_k, k), matmul(*params.p_v, v)};
}

Matrix guided_attention(const Matrix& q, const Matrix& k, const Matrix& v,
                        std::size_t scale_dim) {
    return attention_with_weights(q, k, v, scale_dim).second;
}

AttentionOutput ega_block(const Matrix& query_feat, const Matrix& reference,
                          const EgaParams& params, const AttentionOptions& options) {
    const std::size_t c = query_feat.cols();
    const std::size_t z = options.heads;
    if (z == 0 || c % z != 0)
        throw ConfigError("ega_block: " + std::to_string(z) + " heads do not divide " +
                          std::to_string(c) + " channels");
    check_square(params.w_o, c, "W_o");

    Matrix nq = options.use_norm ? layer_norm(query_feat, params.query_gain, params.query_bias)
                                 : query_feat;
    Matrix nr = options.use_norm ? layer_norm(reference, params.ref_gain, params.ref_bias)
                                 : reference;

    auto [q, k, v] = project_qkv(nq, nr, params);
    if (params.p_k) {
        auto [rk, rv] = reduce_kv(k, v, params);
        k = std::move(rk);
        v = std::move(rv);
    }

    const std::size_t head_width = c / z;
    const std::size_t scale_dim = options.literal_sqrt_c ? c : head_width;
    AttentionOutput result;
    std::vector<Matrix> head_outputs;
    head_outputs.reserve(z);
    for (std::size_t h = 0; h < z; ++h) {
        const std::size_t begin = h * head_width;
        const std::size_t end = begin + head_width;
        auto [weights, out] = attention_with_weights(
            slice_cols(q, begin, end), slice_cols(k, begin, end), slice_cols(v, begin, end),
            scale_dim);
        head_outputs.push_back(std::move(out));
        if (options.keep_weights) result.weights.push_back(std::move(weights));
    }
    result.refined = add(matmul(concat_cols(head_outputs), params.w_o), query_feat);
    return result;
}

EgaParams init_ega_params(std::size_t channels, std::optional<std::size_t> projection_dim,
                          std::size_t reference_len, std::uint64_t seed) {
    EgaParams params;
    const double w_scale = 1.0 / std::sqrt(static_cast<double>(channels));
    params.w_q = seeded_init(channels, channels, mix_seed(seed, 0), w_scale);
    params.w_k = seeded_init(channels, channels, mix_seed(seed, 1), w_scale);
    params.w_v = seeded_init(channels, channels, mix_seed(seed, 2), w_scale);
    params.w_o = seeded_init(channels, channels, mix_seed(seed, 3), w_scale);
    if (projection_dim) {
        const double p_scale = 1.0 / std::sqrt(static_cast<double>(reference_len));
        params.p_k = seeded_init(*projection_dim, reference_len, mix_seed(seed, 4), p_scale);
        params.p_v = seeded_init(*projection_dim, reference_len, mix_seed(seed, 5), p_scale);
    }
    params.query_gain = Matrix(1, channels, 1.0);
    params.query_bias = Matrix(1, channels, 0.0);
    params.ref_gain = Matrix(1, channels, 1.0);
    params.ref_bias = Matrix(1, channels, 0.0);
    return params;
}

RigParams::RigParams(std::size_t views, std::size_t scales)
    : views_(views), scales_(scales), blocks_(views * scales) {}

EgaParams& RigParams::at(std::size_t view, std::size_t scale) {
    return blocks_[view * scales_ + scale];
}

const EgaParams& RigParams::at(std::size_t view, std::size_t scale) const {
    return blocks_[view * scales_ + scale];
}

std::size_t RigParams::parameter_count() const {
    std::size_t count = 0;
    for (const EgaParams& p : blocks_) {
        count += p.w_q.size() + p.w_k.size() + p.w_v.size() + p.w_o.size();
        count += p.query_gain.size() + p.query_bias.size() + p.ref_gain.size() +
                 p.ref_bias.size();
        if (p.p_k) count += p.p_k->size() + p.p_v->size();
    }
    return count;
}

RigParams init_rig_params(const RigConfig& config, std::uint64_t seed) {
    validate(config);
    RigParams params(config.num_cameras, config.scales.size());
    for (std::size_t v = 0; v < config.num_cameras; ++v) {
        for (std::size_t s = 0; s < config.scales.size(); ++s) {
            EgaParams block = init_ega_params(config.channels, config.scales[s].projection_dim,
                                              config.reference_len(s), mix_seed(seed, v + 1, s));
            if (config.share_kv_projections && config.scales[s].projection_dim) {
                // Shared P across views: re-derive from a view-independent stream.
                const std::uint64_t shared = mix_seed(seed, 0, s);
                const double p_scale =
                    1.0 / std::sqrt(static_cast<double>(config.reference_len(s)));
                block.p_k = seeded_init(*config.scales[s].projection_dim,
                                        config.reference_len(s), mix_seed(shared, 4), p_scale);
                block.p_v = seeded_init(*config.scales[s].projection_dim,
                                        config.reference_len(s), mix_seed(shared, 5), p_scale);
            }
            params.at(v, s) = std::move(block);
        }
    }
    return params;
}

FeatureSet forward_rig(const FeatureSet& features, const RigParams& params,
                       const RigConfig& config) {
    validate(config);
    FeatureSet refined;
    for (std::size_t v = 0; v < config.num_cameras; ++v) {
        for (std::size_t s = 0; s < config.scales.size(); ++s) {
            const Matrix& query = features.at(v, s, 0);
            Matrix reference = config.temporal_frames > 0
                                   ? temporal_stack(features, v, s, config)
                                   : neighbor_stack(features, v, s, config);
            AttentionOutput out =
                ega_block(query, reference, params.at(v, s), AttentionOptions::from(config));
            refined.insert({v, s, 0, std::move(out.refined)});
        }
    }
    return refined;
}

}  // namespace ega
