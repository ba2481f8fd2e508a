#pragma once

// Brute-force reference implementations used as test oracles. Everything
// here works on nested std::vector with explicit scalar loops and stays
// independent of the library's tensor path.

#include <cmath>
#include <cstddef>
#include <vector>

#include "ega/attention.hpp"
#include "ega/matrix.hpp"

namespace oracle {

using Grid = std::vector<std::vector<double>>;

inline Grid to_grid(const ega::Matrix& m) {
    Grid g(m.rows(), std::vector<double>(m.cols()));
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) g[i][j] = m(i, j);
    return g;
}

inline ega::Matrix to_matrix(const Grid& g) {
    ega::Matrix m(g.size(), g.empty() ? 0 : g[0].size());
    for (std::size_t i = 0; i < g.size(); ++i)
        for (std::size_t j = 0; j < g[i].size(); ++j) m(i, j) = g[i][j];
    return m;
}

inline Grid matmul(const Grid& a, const Grid& b) {
    const std::size_t m = a.size(), k = b.size(), n = b[0].size();
    Grid out(m, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t p = 0; p < k; ++p) out[i][j] += a[i][p] * b[p][j];
    return out;
}

// Unshifted softmax; only safe at small magnitudes, which is what the
// comparison tests feed it.
inline std::vector<double> naive_softmax(const std::vector<double>& row) {
    std::vector<double> out(row.size());
    double denom = 0.0;
    for (std::size_t j = 0; j < row.size(); ++j) {
        out[j] = std::exp(row[j]);
        denom += out[j];
    }
    for (double& v : out) v /= denom;
    return out;
}

inline std::vector<double> shifted_softmax(const std::vector<double>& row) {
    double row_max = row[0];
    for (double v : row) row_max = std::max(row_max, v);
    std::vector<double> out(row.size());
    double denom = 0.0;
    for (std::size_t j = 0; j < row.size(); ++j) {
        out[j] = std::exp(row[j] - row_max);
        denom += out[j];
    }
    for (double& v : out) v /= denom;
    return out;
}

inline Grid layer_norm(const Grid& x, const std::vector<double>& gain,
                       const std::vector<double>& bias, double eps) {
    const std::size_t c = gain.size();
    Grid out(x.size(), std::vector<double>(c));
    for (std::size_t i = 0; i < x.size(); ++i) {
        double mean = 0.0;
        for (std::size_t j = 0; j < c; ++j) mean += x[i][j];
        mean /= static_cast<double>(c);
        double var = 0.0;
        for (std::size_t j = 0; j < c; ++j) var += (x[i][j] - mean) * (x[i][j] - mean);
        var /= static_cast<double>(c);
        const double inv_std = 1.0 / std::sqrt(var + eps);
        for (std::size_t j = 0; j < c; ++j)
            out[i][j] = gain[j] * ((x[i][j] - mean) * inv_std) + bias[j];
    }
    return out;
}

inline std::vector<double> first_row(const ega::Matrix& m) {
    std::vector<double> row(m.cols());
    for (std::size_t j = 0; j < m.cols(); ++j) row[j] = m(0, j);
    return row;
}

// Per-query-row reference for the whole block: norm, projections,
// optional key/value reduction, per-head scaled dot-product attention,
// head mixing and the residual.
inline ega::Matrix ega_block_reference(const ega::Matrix& query, const ega::Matrix& reference,
                                       const ega::EgaParams& params,
                                       const ega::AttentionOptions& options) {
    const std::size_t n_s = query.rows();
    const std::size_t c = query.cols();
    const double eps = ega::kLayerNormEps;

    Grid nq = to_grid(query);
    Grid nr = to_grid(reference);
    if (options.use_norm) {
        nq = layer_norm(nq, first_row(params.query_gain), first_row(params.query_bias), eps);
        nr = layer_norm(nr, first_row(params.ref_gain), first_row(params.ref_bias), eps);
    }

    Grid q = matmul(nq, to_grid(params.w_q));
    Grid k = matmul(nr, to_grid(params.w_k));
    Grid v = matmul(nr, to_grid(params.w_v));
    if (params.p_k) {
        k = matmul(to_grid(*params.p_k), k);
        v = matmul(to_grid(*params.p_v), v);
    }

    const std::size_t z = options.heads;
    const std::size_t head_width = c / z;
    const double denom =
        std::sqrt(static_cast<double>(options.literal_sqrt_c ? c : head_width));
    const std::size_t kv_rows = k.size();

    Grid mixed_input(n_s, std::vector<double>(c, 0.0));
    for (std::size_t h = 0; h < z; ++h) {
        const std::size_t base = h * head_width;
        for (std::size_t i = 0; i < n_s; ++i) {
            std::vector<double> scores(kv_rows, 0.0);
            for (std::size_t r = 0; r < kv_rows; ++r) {
                for (std::size_t d = 0; d < head_width; ++d)
                    scores[r] += q[i][base + d] * k[r][base + d];
                scores[r] /= denom;
            }
            const std::vector<double> weights = shifted_softmax(scores);
            for (std::size_t d = 0; d < head_width; ++d) {
                double acc = 0.0;
                for (std::size_t r = 0; r < kv_rows; ++r) acc += weights[r] * v[r][base + d];
                mixed_input[i][base + d] = acc;
            }
        }
    }

    Grid out = matmul(mixed_input, to_grid(params.w_o));
    for (std::size_t i = 0; i < n_s; ++i)
        for (std::size_t j = 0; j < c; ++j) out[i][j] += query(i, j);
    return to_matrix(out);
}

}  // namespace oracle
