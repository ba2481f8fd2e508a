#include "ega/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <utility>

#include "ega/attention.hpp"
#include "ega/errors.hpp"
#include "ega/tape.hpp"

namespace ega {

Matrix finite_diff(const std::function<double(const Matrix&)>& f, const Matrix& at,
                   double eps) {
    if (eps <= 0.0) throw UsageError("finite_diff: eps must be positive");
    Matrix grads(at.rows(), at.cols());
    Matrix probe = at;
    for (std::size_t i = 0; i < at.size(); ++i) {
        const double original = probe.data()[i];
        probe.data()[i] = original + eps;
        const double up = f(probe);
        probe.data()[i] = original - eps;
        const double down = f(probe);
        probe.data()[i] = original;
        grads.data()[i] = (up - down) / (2.0 * eps);
    }
    return grads;
}

double relative_error(double analytic, double numeric) {
    return std::abs(analytic - numeric) /
           std::max({1.0, std::abs(analytic), std::abs(numeric)});
}

namespace {

struct ParamSlot {
    std::string name;
    Matrix EgaParams::*member = nullptr;
    std::optional<Matrix> EgaParams::*optional_member = nullptr;
};

const ParamSlot kSlots[] = {
    {"w_q", &EgaParams::w_q, nullptr},
    {"w_k", &EgaParams::w_k, nullptr},
    {"w_v", &EgaParams::w_v, nullptr},
    {"w_o", &EgaParams::w_o, nullptr},
    {"p_k", nullptr, &EgaParams::p_k},
    {"p_v", nullptr, &EgaParams::p_v},
    {"query_gain", &EgaParams::query_gain, nullptr},
    {"query_bias", &EgaParams::query_bias, nullptr},
    {"ref_gain", &EgaParams::ref_gain, nullptr},
    {"ref_bias", &EgaParams::ref_bias, nullptr},
};

// projection_dim == 0 means the unprojected path.
EgaParams random_params(std::size_t channels, std::size_t projection_dim,
                        std::size_t reference_len, std::uint64_t seed) {
    EgaParams p;
    p.w_q = seeded_init(channels, channels, mix_seed(seed, 10), 1.0);
    p.w_k = seeded_init(channels, channels, mix_seed(seed, 11), 1.0);
    p.w_v = seeded_init(channels, channels, mix_seed(seed, 12), 1.0);
    p.w_o = seeded_init(channels, channels, mix_seed(seed, 13), 1.0);
    if (projection_dim != 0) {
        p.p_k = seeded_init(projection_dim, reference_len, mix_seed(seed, 14), 1.0);
        p.p_v = seeded_init(projection_dim, reference_len, mix_seed(seed, 15), 1.0);
    }
    p.query_gain = seeded_init(1, channels, mix_seed(seed, 16), 1.0);
    p.query_bias = seeded_init(1, channels, mix_seed(seed, 17), 1.0);
    p.ref_gain = seeded_init(1, channels, mix_seed(seed, 18), 1.0);
    p.ref_bias = seeded_init(1, channels, mix_seed(seed, 19), 1.0);
    return p;
}

const Matrix* slot_value(const EgaParams& params, const ParamSlot& slot) {
    if (slot.member) return &(params.*slot.member);
    const std::optional<Matrix>& opt = params.*slot.optional_member;
    return opt ? &*opt : nullptr;
}

void slot_assign(EgaParams& params, const ParamSlot& slot, Matrix value) {
    if (slot.member)
        params.*slot.member = std::move(value);
    else
        params.*slot.optional_member = std::move(value);
}

}  // namespace

GradCheckReport gradcheck_ega_block(const GradCheckCase& check, double eps) {
    const std::size_t n_s = check.spatial;
    const std::size_t c = check.channels;
    const std::size_t ref_len = (check.neighbor_count + check.temporal_frames) * n_s;
    const std::size_t k_s = check.projected ? std::max<std::size_t>(1, ref_len / 2) : 0;

    const Matrix query = seeded_init(n_s, c, mix_seed(check.seed, 1), 1.0);
    const Matrix reference = seeded_init(ref_len, c, mix_seed(check.seed, 2), 1.0);
    const Matrix target = seeded_init(n_s, c, mix_seed(check.seed, 3), 1.0);
    const EgaParams params = random_params(c, k_s, ref_len, check.seed);
    const AttentionOptions options{check.heads, check.use_norm, check.literal_sqrt_c, false};

    const auto loss_of = [&](const EgaParams& p) {
        const Matrix out = ega_block(query, reference, p, options).refined;
        double total = 0.0;
        for (std::size_t i = 0; i < out.size(); ++i) {
            const double d = out.data()[i] - target.data()[i];
            total += d * d;
        }
        return total;
    };

    Tape tape;
    const Tape::NodeId query_id = tape.leaf(query);
    const Tape::NodeId reference_id = tape.leaf(reference);
    const TapedEgaParams taped = record_params(tape, params);
    const Tape::NodeId out = ega_block_tape(tape, query_id, reference_id, taped, options);
    tape.backward(tape.sum_squared_diff(out, target));

    const auto leaf_of = [&](const std::string& name) -> Tape::NodeId {
        if (name == "w_q") return taped.w_q;
        if (name == "w_k") return taped.w_k;
        if (name == "w_v") return taped.w_v;
        if (name == "w_o") return taped.w_o;
        if (name == "p_k") return *taped.p_k;
        if (name == "p_v") return *taped.p_v;
        if (name == "query_gain") return taped.query_gain;
        if (name == "query_bias") return taped.query_bias;
        if (name == "ref_gain") return taped.ref_gain;
        return name == "ref_bias" ? taped.ref_bias : taped.query_bias;
    };

    GradCheckReport report;
    for (const ParamSlot& slot : kSlots) {
        const Matrix* current = slot_value(params, slot);
        if (current == nullptr) continue;  // unprojected case has no P

        const Matrix numeric = finite_diff(
            [&](const Matrix& candidate) {
                EgaParams perturbed = params;
                slot_assign(perturbed, slot, candidate);
                return loss_of(perturbed);
            },
            *current, eps);
        const Matrix& analytic = tape.grad(leaf_of(slot.name));

        GradCheckEntry entry;
        entry.param = slot.name;
        entry.count = numeric.size();
        double total = 0.0;
        for (std::size_t i = 0; i < numeric.size(); ++i) {
            const double rel = relative_error(analytic.data()[i], numeric.data()[i]);
            entry.max_rel_err = std::max(entry.max_rel_err, rel);
            total += rel;
        }
        entry.mean_rel_err = entry.count ? total / static_cast<double>(entry.count) : 0.0;
        report.max_rel_err = std::max(report.max_rel_err, entry.max_rel_err);
        report.entries.push_back(std::move(entry));
    }
    return report;
}

}  // namespace ega
