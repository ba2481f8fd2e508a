#include <doctest.h>

#include <cmath>
#include <random>

#include "ega/attention.hpp"
#include "ega/errors.hpp"
#include "ega/gradcheck.hpp"
#include "ega/matrix.hpp"
#include "ega/rig.hpp"
#include "ega/tape.hpp"

using ega::Matrix;
using ega::Tape;

namespace {

// Finite-difference check of one tape op: grads of each input leaf against
// central differences through the same forward composition.
void check_leaf_grad(const Matrix& analytic, const std::function<double(const Matrix&)>& f,
                     const Matrix& at, double tol = 1e-7) {
    const Matrix numeric = ega::finite_diff(f, at);
    REQUIRE(analytic.same_shape(numeric));
    for (std::size_t i = 0; i < numeric.size(); ++i)
        CHECK(ega::relative_error(analytic.data()[i], numeric.data()[i]) < tol);
}

}  // namespace

TEST_SUITE_BEGIN("tape");

TEST_CASE("finite_diff of x squared at 3 is 6") {
    const Matrix at(1, 1, 3.0);
    const Matrix grad = ega::finite_diff(
        [](const Matrix& x) { return x(0, 0) * x(0, 0); }, at);
    CHECK(std::abs(grad(0, 0) - 6.0) < 1e-8);
}

TEST_CASE("softmax row Jacobian matches diag(p) - p p^T") {
    const Matrix x = ega::seeded_init(1, 5, 7, 1.0);
    const Matrix p = ega::softmax_rows(x);
    for (std::size_t out_idx = 0; out_idx < 5; ++out_idx) {
        const Matrix row = ega::finite_diff(
            [out_idx](const Matrix& probe) {
                return ega::softmax_rows(probe)(0, out_idx);
            },
            x);
        for (std::size_t j = 0; j < 5; ++j) {
            const double analytic =
                p(0, out_idx) * ((j == out_idx ? 1.0 : 0.0) - p(0, j));
            CHECK(std::abs(row(0, j) - analytic) < 1e-7);
        }
    }
}

TEST_CASE("linear layer gradient is F^T 1") {
    Tape tape;
    const Matrix f = ega::seeded_init(5, 3, 11, 1.0);
    const Matrix w = ega::seeded_init(3, 4, 12, 1.0);
    const Tape::NodeId f_id = tape.leaf(f);
    const Tape::NodeId w_id = tape.leaf(w);
    tape.backward(tape.sum(tape.matmul(f_id, w_id)));
    const Matrix& dw = tape.grad(w_id);
    for (std::size_t i = 0; i < 3; ++i) {
        double column_sum = 0.0;
        for (std::size_t r = 0; r < 5; ++r) column_sum += f(r, i);
        for (std::size_t j = 0; j < 4; ++j)
            CHECK(dw(i, j) == doctest::Approx(column_sum).epsilon(1e-12));
    }
}

TEST_CASE("parameters off the loss path get exact zero gradients") {
    Tape tape;
    const Tape::NodeId used = tape.leaf(ega::seeded_init(2, 2, 13, 1.0));
    const Tape::NodeId unused = tape.leaf(ega::seeded_init(4, 6, 14, 1.0));
    tape.backward(tape.sum(used));
    const Matrix& grad = tape.grad(unused);
    CHECK(grad.rows() == 4);
    CHECK(grad.cols() == 6);
    for (double v : grad.data()) CHECK(v == 0.0);
}

TEST_CASE("backward rejects non-scalar roots") {
    Tape tape;
    const Tape::NodeId leaf = tape.leaf(ega::seeded_init(2, 3, 15, 1.0));
    CHECK_THROWS_AS(tape.backward(leaf), ega::UsageError);
}

TEST_CASE("grad before backward is a usage error") {
    Tape tape;
    const Tape::NodeId leaf = tape.leaf(ega::seeded_init(2, 2, 16, 1.0));
    CHECK_THROWS_AS(tape.grad(leaf), ega::UsageError);
}

TEST_CASE("matmul backward matches finite differences") {
    const Matrix a = ega::seeded_init(4, 3, 17, 1.0);
    const Matrix b = ega::seeded_init(3, 5, 18, 1.0);
    const Matrix target = ega::seeded_init(4, 5, 19, 1.0);
    Tape tape;
    const Tape::NodeId a_id = tape.leaf(a);
    const Tape::NodeId b_id = tape.leaf(b);
    tape.backward(tape.sum_squared_diff(tape.matmul(a_id, b_id), target));

    const auto loss_a = [&](const Matrix& probe) {
        const Matrix out = ega::matmul(probe, b);
        double total = 0.0;
        for (std::size_t i = 0; i < out.size(); ++i) {
            const double d = out.data()[i] - target.data()[i];
            total += d * d;
        }
        return total;
    };
    check_leaf_grad(tape.grad(a_id), loss_a, a);
}

TEST_CASE("fused attention-weights backward matches finite differences") {
    const Matrix q = ega::seeded_init(3, 4, 21, 1.0);
    const Matrix k = ega::seeded_init(6, 4, 22, 1.0);
    const Matrix target = ega::seeded_init(3, 6, 23, 1.0);
    Tape tape;
    const Tape::NodeId q_id = tape.leaf(q);
    const Tape::NodeId k_id = tape.leaf(k);
    tape.backward(tape.sum_squared_diff(tape.attention_weights(q_id, k_id, 4), target));

    const auto forward = [&](const Matrix& qm, const Matrix& km) {
        const double inv = 1.0 / std::sqrt(4.0);
        return ega::softmax_rows(ega::scaled(ega::matmul(qm, ega::transpose(km)), inv));
    };
    const auto loss_of = [&](const Matrix& p) {
        double total = 0.0;
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double d = p.data()[i] - target.data()[i];
            total += d * d;
        }
        return total;
    };
    check_leaf_grad(tape.grad(q_id),
                    [&](const Matrix& probe) { return loss_of(forward(probe, k)); }, q);
    check_leaf_grad(tape.grad(k_id),
                    [&](const Matrix& probe) { return loss_of(forward(q, probe)); }, k);
}

TEST_CASE("layer_norm backward matches finite differences") {
    const Matrix x = ega::seeded_init(4, 6, 29, 1.0);
    const Matrix gain = ega::seeded_init(1, 6, 30, 1.0);
    const Matrix bias = ega::seeded_init(1, 6, 31, 1.0);
    const Matrix target = ega::seeded_init(4, 6, 32, 1.0);
    Tape tape;
    const Tape::NodeId x_id = tape.leaf(x);
    const Tape::NodeId g_id = tape.leaf(gain);
    const Tape::NodeId b_id = tape.leaf(bias);
    tape.backward(tape.sum_squared_diff(tape.layer_norm(x_id, g_id, b_id), target));

    const auto loss_of = [&](const Matrix& xm, const Matrix& gm, const Matrix& bm) {
        const Matrix out = ega::layer_norm(xm, gm, bm);
        double total = 0.0;
        for (std::size_t i = 0; i < out.size(); ++i) {
            const double d = out.data()[i] - target.data()[i];
            total += d * d;
        }
        return total;
    };
    check_leaf_grad(tape.grad(x_id),
                    [&](const Matrix& probe) { return loss_of(probe, gain, bias); }, x);
    check_leaf_grad(tape.grad(g_id),
                    [&](const Matrix& probe) { return loss_of(x, probe, bias); }, gain);
    check_leaf_grad(tape.grad(b_id),
                    [&](const Matrix& probe) { return loss_of(x, gain, probe); }, bias);
}

TEST_CASE("concat and slice backward route gradients to the right rows and columns") {
    const Matrix a = ega::seeded_init(2, 4, 33, 1.0);
    const Matrix b = ega::seeded_init(3, 4, 34, 1.0);
    const Matrix target = ega::seeded_init(5, 2, 35, 1.0);
    Tape tape;
    const Tape::NodeId a_id = tape.leaf(a);
    const Tape::NodeId b_id = tape.leaf(b);
    const Tape::NodeId stacked = tape.concat_rows({a_id, b_id});
    const Tape::NodeId sliced = tape.slice_cols(stacked, 1, 3);
    tape.backward(tape.sum_squared_diff(sliced, target));

    const auto loss_of = [&](const Matrix& am, const Matrix& bm) {
        const Matrix out = ega::slice_cols(ega::concat_rows({am, bm}), 1, 3);
        double total = 0.0;
        for (std::size_t i = 0; i < out.size(); ++i) {
            const double d = out.data()[i] - target.data()[i];
            total += d * d;
        }
        return total;
    };
    check_leaf_grad(tape.grad(a_id),
                    [&](const Matrix& probe) { return loss_of(probe, b); }, a);
    check_leaf_grad(tape.grad(b_id),
                    [&](const Matrix& probe) { return loss_of(a, probe); }, b);
}

TEST_CASE("taped ega_block forward is bit-identical to the plain forward") {
    std::mt19937_64 rng(37);
    for (int trial = 0; trial < 6; ++trial) {
        const std::size_t n_s = 2 + rng() % 6, c = 8;
        const std::size_t n_i = 1 + rng() % 3;
        const std::size_t len = n_i * n_s;
        const bool projected = trial % 2 == 0;
        const std::optional<std::size_t> k_s =
            projected ? std::optional<std::size_t>(1 + rng() % len) : std::nullopt;
        ega::EgaParams params = ega::init_ega_params(c, k_s, len, rng());
        const Matrix query = ega::seeded_init(n_s, c, rng(), 1.0);
        const Matrix reference = ega::seeded_init(len, c, rng(), 1.0);
        const ega::AttentionOptions options{2, true, false, false};

        const Matrix plain = ega::ega_block(query, reference, params, options).refined;
        Tape tape;
        const Tape::NodeId out = ega_block_tape(tape, tape.leaf(query), tape.leaf(reference),
                                                record_params(tape, params), options);
        CHECK(tape.value(out).data() == plain.data());
    }
}

TEST_CASE("ega_block gradients beat 1e-5 against central differences") {
    // One projected and one unprojected spot check; the acceptance suite
    // runs the full 4-configuration x 10-seed grid.
    for (const bool projected : {false, true}) {
        ega::GradCheckCase check;
        check.spatial = 4;
        check.channels = 8;
        check.heads = 2;
        check.temporal_frames = projected ? 1 : 0;
        check.projected = projected;
        check.seed = projected ? 1001 : 1002;
        const ega::GradCheckReport report = ega::gradcheck_ega_block(check);
        CHECK(report.entries.size() == (projected ? 10 : 8));
        CHECK(report.max_rel_err < 1e-5);
    }
}

TEST_CASE("residual gradient is the exact identity when attention weights are zero") {
    const std::size_t n_s = 4, c = 8, len = 8;
    ega::EgaParams params = ega::init_ega_params(c, std::nullopt, len, 41);
    params.w_q = Matrix(c, c);
    params.w_k = Matrix(c, c);
    params.w_v = Matrix(c, c);  // w_o stays random
    const Matrix query = ega::seeded_init(n_s, c, 42, 1.0);
    const Matrix reference = ega::seeded_init(len, c, 43, 1.0);
    const Matrix target = ega::seeded_init(n_s, c, 44, 1.0);

    Tape tape;
    const Tape::NodeId query_id = tape.leaf(query);
    const ega::TapedEgaParams taped = record_params(tape, params);
    const Tape::NodeId out =
        ega_block_tape(tape, query_id, tape.leaf(reference), taped, {2, true, false, false});
    tape.backward(tape.sum_squared_diff(out, target));

    // With a zero attention branch, d(loss)/d(query) is exactly 2(query - target).
    const Matrix expected = ega::scaled(ega::sub(query, target), 2.0);
    CHECK(ega::max_abs_diff(tape.grad(query_id), expected) == 0.0);
    // The norm parameters feed a dead branch and hold exact zeros.
    for (double v : tape.grad(taped.query_gain).data()) CHECK(v == 0.0);
    for (double v : tape.grad(taped.ref_gain).data()) CHECK(v == 0.0);
}

TEST_CASE("no gradient reaches non-neighbor views on a four-camera ring") {
    ega::RigConfig config;
    config.num_cameras = 4;
    config.neighbors = {{3, 1}, {0, 2}, {1, 3}, {2, 0}};
    config.scales = {{2, 3, std::nullopt}};
    config.heads = 2;
    config.channels = 8;
    ega::validate(config);
    const ega::FeatureSet features = ega::random_features(config, 45);
    const ega::RigParams params = ega::init_rig_params(config, 46);
    ega::RigTape rig = record_rig(features, params, config);

    rig.tape.backward(rig.tape.sum(rig.outputs[0][0]));
    // View 2 is across the ring from view 0.
    for (double v : rig.tape.grad(rig.features.at({2, 0, 0})).data()) CHECK(v == 0.0);
    // Own and neighbor features carry signal.
    double own = 0.0, neighbor = 0.0;
    for (double v : rig.tape.grad(rig.features.at({0, 0, 0})).data()) own += std::abs(v);
    for (double v : rig.tape.grad(rig.features.at({1, 0, 0})).data()) neighbor += std::abs(v);
    CHECK(own > 0.0);
    CHECK(neighbor > 0.0);

    // A second sweep from another view reuses the same tape.
    rig.tape.backward(rig.tape.sum(rig.outputs[2][0]));
    for (double v : rig.tape.grad(rig.features.at({0, 0, 0})).data()) CHECK(v == 0.0);
}

TEST_SUITE_END();
