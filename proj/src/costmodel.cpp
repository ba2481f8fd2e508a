#include "ega/costmodel.hpp"

#include <algorithm>
#include <cmath>

#include "ega/attention.hpp"
#include "ega/errors.hpp"

namespace ega {

StageFlops& StageFlops::operator+=(const StageFlops& other) {
    qkv += other.qkv;
    reduce += other.reduce;
    attnmap += other.attnmap;
    softmax += other.softmax;
    weighted_sum += other.weighted_sum;
    headmix += other.headmix;
    return *this;
}

std::uint64_t stage_by_name(const StageFlops& flops, const std::string& stage) {
    if (stage == "qkv") return flops.qkv;
    if (stage == "reduce") return flops.reduce;
    if (stage == "attnmap") return flops.attnmap;
    if (stage == "softmax") return flops.softmax;
    if (stage == "weighted_sum") return flops.weighted_sum;
    if (stage == "headmix") return flops.headmix;
    if (stage == "total") return flops.total();
    throw UsageError("unknown cost stage '" + stage + "'");
}

StageFlops ega_stage_flops(const AttentionDims& dims) {
    const std::uint64_t n_s = dims.spatial;
    const std::uint64_t c = dims.channels;
    const std::uint64_t z = dims.heads;
    const std::uint64_t len = dims.reference_len;
    const std::uint64_t rows = dims.projection_dim ? *dims.projection_dim : len;
    StageFlops flops;
    flops.qkv = 2 * c * c * (n_s + 2 * len);
    flops.reduce = dims.projection_dim ? 4 * (*dims.projection_dim) * len * c : 0;
    flops.attnmap = 2 * n_s * rows * c;
    flops.softmax = 5 * z * n_s * rows;
    flops.weighted_sum = 2 * n_s * rows * c;
    flops.headmix = 2 * n_s * c * c;
    return flops;
}

std::uint64_t ega_activation_elements(const AttentionDims& dims) {
    const std::uint64_t n_s = dims.spatial;
    const std::uint64_t c = dims.channels;
    const std::uint64_t len = dims.reference_len;
    const std::uint64_t rows = dims.projection_dim ? *dims.projection_dim : len;
    // Buffers common to both moments: query, normed query, Q, reference,
    // normed reference.
    const std::uint64_t base = 3 * n_s * c + 2 * len * c;
    // Reduction moment: full-length K and V next to their projections.
    const std::uint64_t reduce_moment =
        dims.projection_dim ? base + 2 * len * c + 2 * rows * c : 0;
    // Attention moment: reduced K and V, one head's map, head accumulator.
    const std::uint64_t attn_moment = base + 2 * rows * c + n_s * rows + n_s * c;
    return std::max(reduce_moment, attn_moment);
}

namespace {

CostReport finalize(std::vector<CostEntry> entries) {
    CostReport report;
    for (CostEntry& entry : entries) {
        report.flops += entry.flops;
        report.peak_activation_elements =
            std::max(report.peak_activation_elements, entry.activation_elements);
    }
    report.flops_total = report.flops.total();
    report.breakdown = std::move(entries);
    return report;
}

}  // namespace

CostReport cost_ega(const RigConfig& config) {
    validate(config);
    std::vector<CostEntry> entries;
    for (std::size_t v = 0; v < config.num_cameras; ++v) {
        for (std::size_t s = 0; s < config.scales.size(); ++s) {
            AttentionDims dims{config.scales[s].spatial(), config.channels, config.heads,
                               config.reference_len(s), config.scales[s].projection_dim};
            entries.push_back({static_cast<int>(v), s, ega_stage_flops(dims),
                               ega_activation_elements(dims)});
        }
    }
    return finalize(std::move(entries));
}

CostReport cost_joint_selfattn(const RigConfig& config) {
    validate(config);
    std::vector<CostEntry> entries;
    for (std::size_t s = 0; s < config.scales.size(); ++s) {
        const std::size_t joint_len = config.num_cameras * config.scales[s].spatial();
        AttentionDims dims{joint_len, config.channels, config.heads, joint_len, std::nullopt};
        entries.push_back(
            {-1, s, ega_stage_flops(dims), ega_activation_elements(dims)});
    }
    return finalize(std::move(entries));
}

std::uint64_t measured_flops(const AttentionDims& dims, std::uint64_t seed) {
    const Matrix query = seeded_init(dims.spatial, dims.channels, mix_seed(seed, 1), 1.0);
    const Matrix reference =
        seeded_init(dims.reference_len, dims.channels, mix_seed(seed, 2), 1.0);
    const EgaParams params = init_ega_params(dims.channels, dims.projection_dim,
                                             dims.reference_len, mix_seed(seed, 3));
    const AttentionOptions options{dims.heads, true, false, false};
    FlopCounter counter;
    {
        ScopedFlopCounter guard(counter);
        ega_block(query, reference, params, options);
    }
    return counter.total();
}

std::uint64_t measured_rig_flops(const RigConfig& config, std::uint64_t seed) {
    const FeatureSet features = random_features(config, mix_seed(seed, 1));
    const RigParams params = init_rig_params(config, mix_seed(seed, 2));
    FlopCounter counter;
    {
        ScopedFlopCounter guard(counter);
        forward_rig(features, params, config);
    }
    return counter.total();
}

SweepVar sweep_var_from_name(const std::string& name) {
    if (name == "ns") return SweepVar::SpatialSize;
    if (name == "ni") return SweepVar::NeighborCount;
    if (name == "nt") return SweepVar::TemporalFrames;
    if (name == "ks") return SweepVar::ProjectionDim;
    throw UsageError("unknown sweep variable '" + name + "' (expected ns, ni, nt or ks)");
}

std::string sweep_var_name(SweepVar var) {
    switch (var) {
        case SweepVar::SpatialSize: return "ns";
        case SweepVar::NeighborCount: return "ni";
        case SweepVar::TemporalFrames: return "nt";
        case SweepVar::ProjectionDim: return "ks";
    }
    return "ns";
}

namespace {

// Least-squares polynomial fit on a shifted/scaled abscissa.
std::vector<double> polyfit(const std::vector<double>& xs, const std::vector<double>& ys,
                            int degree) {
    const std::size_t n = xs.size();
    double x_mean = 0.0;
    for (double x : xs) x_mean += x;
    x_mean /= static_cast<double>(n);
    double x_span = 0.0;
    for (double x : xs) x_span = std::max(x_span, std::abs(x - x_mean));
    if (x_span == 0.0) x_span = 1.0;

    const int terms = degree + 1;
    std::vector<double> ata(terms * terms, 0.0);
    std::vector<double> atb(terms, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double t = (xs[i] - x_mean) / x_span;
        double basis[3] = {1.0, t, t * t};
        for (int r = 0; r < terms; ++r) {
            for (int col = 0; col < terms; ++col) ata[r * terms + col] += basis[r] * basis[col];
            atb[r] += basis[r] * ys[i];
        }
    }
    // Gaussian elimination with partial pivoting on the tiny normal system.
    for (int col = 0; col < terms; ++col) {
        int pivot = col;
        for (int r = col + 1; r < terms; ++r)
            if (std::abs(ata[r * terms + col]) > std::abs(ata[pivot * terms + col])) pivot = r;
        for (int j = 0; j < terms; ++j) std::swap(ata[col * terms + j], ata[pivot * terms + j]);
        std::swap(atb[col], atb[pivot]);
        const double diag = ata[col * terms + col];
        for (int r = 0; r < terms; ++r) {
            if (r == col || diag == 0.0) continue;
            const double factor = ata[r * terms + col] / diag;
            for (int j = 0; j < terms; ++j) ata[r * terms + j] -= factor * ata[col * terms + j];
            atb[r] -= factor * atb[col];
        }
    }
    std::vector<double> coeffs(terms, 0.0);
    for (int r = 0; r < terms; ++r) {
        const double diag = ata[r * terms + r];
        coeffs[r] = diag != 0.0 ? atb[r] / diag : 0.0;
    }
    // Stash normalization so evaluation can reuse it.
    coeffs.push_back(x_mean);
    coeffs.push_back(x_span);
    return coeffs;
}

double poly_eval(const std::vector<double>& coeffs, double x) {
    const double x_mean = coeffs[coeffs.size() - 2];
    const double x_span = coeffs[coeffs.size() - 1];
    const double t = (x - x_mean) / x_span;
    double value = 0.0;
    double basis = 1.0;
    for (std::size_t i = 0; i + 2 < coeffs.size(); ++i) {
        value += coeffs[i] * basis;
        basis *= t;
    }
    return value;
}

double fit_residual(const std::vector<double>& xs, const std::vector<double>& ys, int degree) {
    const std::vector<double> coeffs = polyfit(xs, ys, degree);
    double worst = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double predicted = poly_eval(coeffs, xs[i]);
        worst = std::max(worst, std::abs(predicted - ys[i]) / std::max(1.0, std::abs(ys[i])));
    }
    return worst;
}

}  // namespace

int fitted_degree(const std::vector<double>& xs, const std::vector<double>& ys,
                  double tolerance, double* residual_out) {
    if (xs.size() != ys.size() || xs.size() < 3)
        throw UsageError("fitted_degree: need at least 3 points");
    for (int degree : {1, 2}) {
        const double residual = fit_residual(xs, ys, degree);
        if (residual < tolerance) {
            if (residual_out) *residual_out = residual;
            return degree;
        }
    }
    if (residual_out) *residual_out = fit_residual(xs, ys, 2);
    return -1;
}

SweepResult scaling_curve(const RigConfig& base, SweepVar var,
                          const std::vector<std::size_t>& values) {
    if (values.size() < 3) throw UsageError("scaling_curve: need at least 3 sweep points");
    validate(base);
    const ScaleConfig scale0 = base.scales.front();
    // Neighbor sweeps hold the camera count fixed across points (one more
    // than the largest requested n_i); only the per-camera fan-out varies.
    const std::size_t sweep_cameras =
        *std::max_element(values.begin(), values.end()) + 1;

    SweepResult result;
    result.var = var;
    for (std::size_t value : values) {
        RigConfig config = base;
        config.scales = {scale0};
        switch (var) {
            case SweepVar::SpatialSize:
                config.scales[0] = {1, value, scale0.projection_dim};
                break;
            case SweepVar::ProjectionDim:
                config.scales[0].projection_dim = value;
                break;
            case SweepVar::TemporalFrames:
                config.temporal_frames = value;
                break;
            case SweepVar::NeighborCount: {
                config.num_cameras = sweep_cameras;
                config.neighbors.assign(sweep_cameras, {});
                for (std::size_t i = 0; i < sweep_cameras; ++i)
                    for (std::size_t d = 1; d <= value; ++d)
                        config.neighbors[i].push_back((i + d) % sweep_cameras);
                break;
            }
        }
        result.points.push_back({value, cost_ega(config)});
    }

    std::vector<double> xs;
    xs.reserve(values.size());
    for (std::size_t v : values) xs.push_back(static_cast<double>(v));
    const std::vector<std::string> stages = {"qkv",     "reduce",       "attnmap",
                                             "softmax", "weighted_sum", "headmix", "total"};
    for (const std::string& stage : stages) {
        std::vector<double> ys;
        ys.reserve(result.points.size());
        for (const SweepPoint& point : result.points)
            ys.push_back(static_cast<double>(stage_by_name(point.report.flops, stage)));
        double residual = 0.0;
        const int degree = fitted_degree(xs, ys, 1e-9, &residual);
        result.degrees.emplace_back(stage, degree);
        result.residuals.emplace_back(stage, residual);
    }
    return result;
}

int SweepResult::degree_of(const std::string& stage) const {
    for (const auto& [name, degree] : degrees)
        if (name == stage) return degree;
    throw UsageError("degree_of: unknown stage '" + stage + "'");
}

}  // namespace ega
