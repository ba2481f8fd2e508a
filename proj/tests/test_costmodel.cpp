#include <doctest.h>

#include <cmath>

#include "ega/costmodel.hpp"
#include "ega/errors.hpp"
#include "ega/rig.hpp"

using ega::AttentionDims;
using ega::CostReport;
using ega::RigConfig;

TEST_SUITE_BEGIN("costmodel");

TEST_CASE("LR attention-map stage per view and scale") {
    const RigConfig config = ega::preset("LR");  // c = 64
    const ega::StageFlops flops = ega::ega_stage_flops(
        {220, config.channels, config.heads, 440, std::nullopt});
    CHECK(flops.attnmap == 12390400ull);  // 2 * 220 * 440 * 64
    CHECK(flops.weighted_sum == 12390400ull);
}

TEST_CASE("attention-map cost is exactly linear in the neighbor count") {
    const AttentionDims base{220, 64, 8, 2 * 220, std::nullopt};
    const AttentionDims doubled{220, 64, 8, 4 * 220, std::nullopt};
    CHECK(ega::ega_stage_flops(doubled).attnmap == 2 * ega::ega_stage_flops(base).attnmap);
}

TEST_CASE("projected attention-map cost is exactly linear in n_s") {
    const AttentionDims base{300, 64, 8, 600, 128};
    const AttentionDims doubled{600, 64, 8, 1200, 128};
    CHECK(ega::ega_stage_flops(doubled).attnmap == 2 * ega::ega_stage_flops(base).attnmap);
}

TEST_CASE("the LR report breaks down into 30 view-scale entries") {
    const CostReport report = ega::cost_ega(ega::preset("LR"));
    CHECK(report.breakdown.size() == 30);  // 6 views x 5 scales
}

TEST_CASE("report totals equal the sum of their parts") {
    for (const char* name : {"LR", "MR", "HR", "DDAD-LR", "DDAD-MR"}) {
        const CostReport report = ega::cost_ega(ega::preset(name));
        CHECK(report.flops_total == report.flops.total());
        ega::StageFlops accumulated;
        std::uint64_t largest = 0;
        for (const ega::CostEntry& entry : report.breakdown) {
            accumulated += entry.flops;
            largest = std::max(largest, entry.activation_elements);
        }
        CHECK(accumulated.total() == report.flops_total);
        CHECK(report.peak_activation_elements == largest);
    }
}

TEST_CASE("joint comparator uses sequence length 1320 on the LR geometry") {
    const RigConfig config = ega::preset("LR");
    const CostReport joint = ega::cost_joint_selfattn(config);
    REQUIRE(joint.breakdown.size() == 5);
    for (const ega::CostEntry& entry : joint.breakdown) {
        CHECK(entry.view == -1);
        // attnmap = 2 * 1320^2 * 64 pins the joint sequence length.
        CHECK(entry.flops.attnmap == 2ull * 1320 * 1320 * 64);
    }
}

TEST_CASE("joint versus guided attention-map ratio is exactly 3 on LR") {
    const RigConfig config = ega::preset("LR");
    const CostReport ega_report = ega::cost_ega(config);
    const CostReport joint = ega::cost_joint_selfattn(config);
    const double ratio = static_cast<double>(joint.flops.attnmap) /
                         static_cast<double>(ega_report.flops.attnmap);
    CHECK(std::abs(ratio - 3.0) < 1e-12);
}

TEST_CASE("single-view joint self-attention equals guided attention with a self reference") {
    // N = 1 joint degenerates to one view attending to itself, i.e. the
    // guided pipeline with reference length n_s.
    const AttentionDims self_dims{220, 64, 8, 220, std::nullopt};
    RigConfig single;
    single.num_cameras = 1;
    single.neighbors = {{}};
    single.scales = {{11, 20, std::nullopt}};
    single.heads = 8;
    single.channels = 64;
    const CostReport joint = ega::cost_joint_selfattn(single);
    const ega::StageFlops expected = ega::ega_stage_flops(self_dims);
    CHECK(joint.flops.qkv == expected.qkv);
    CHECK(joint.flops.attnmap == expected.attnmap);
    CHECK(joint.flops.softmax == expected.softmax);
    CHECK(joint.flops.weighted_sum == expected.weighted_sum);
    CHECK(joint.flops.headmix == expected.headmix);
}

TEST_CASE("counting oracle: measured block flops equal the closed form exactly") {
    const AttentionDims cases[] = {
        {6, 8, 1, 12, std::nullopt},
        {6, 8, 1, 12, 5},
        {10, 16, 8, 30, std::nullopt},
        {10, 16, 8, 30, 14},
        {7, 8, 2, 21, 9},  // n_t = 1 shape: (2 + 1) * 7
    };
    for (const AttentionDims& dims : cases)
        CHECK(ega::measured_flops(dims) == ega::ega_stage_flops(dims).total());
}

TEST_CASE("counting oracle: measured rig flops equal the report exactly") {
    RigConfig small;
    small.num_cameras = 3;
    small.neighbors = {{2, 1}, {0, 2}, {1, 0}};
    small.scales = {{2, 5, std::nullopt}, {1, 4, 6}};
    small.heads = 2;
    small.channels = 8;
    ega::validate(small);
    CHECK(ega::measured_rig_flops(small) == ega::cost_ega(small).flops_total);

    small.temporal_frames = 1;
    CHECK(ega::measured_rig_flops(small) == ega::cost_ega(small).flops_total);

    RigConfig lr = ega::preset("LR");
    lr.channels = 16;
    CHECK(ega::measured_rig_flops(lr) == ega::cost_ega(lr).flops_total);
}

TEST_CASE("scaling curves recover the expected polynomial degrees") {
    RigConfig projected = ega::preset("MR");  // first scale carries k_s = 880
    const ega::SweepResult ns_projected =
        ega::scaling_curve(projected, ega::SweepVar::SpatialSize, {200, 400, 600, 800, 1000});
    CHECK(ns_projected.degree_of("attnmap") == 1);
    CHECK(ns_projected.degree_of("total") == 1);

    RigConfig unprojected = ega::preset("LR");
    const ega::SweepResult ns_unprojected =
        ega::scaling_curve(unprojected, ega::SweepVar::SpatialSize, {200, 400, 600, 800, 1000});
    CHECK(ns_unprojected.degree_of("attnmap") == 2);
    CHECK(ns_unprojected.degree_of("qkv") == 1);

    const ega::SweepResult ni =
        ega::scaling_curve(unprojected, ega::SweepVar::NeighborCount, {1, 2, 3, 4, 5});
    CHECK(ni.degree_of("attnmap") == 1);

    const ega::SweepResult nt =
        ega::scaling_curve(unprojected, ega::SweepVar::TemporalFrames, {0, 1, 2, 3});
    CHECK(nt.degree_of("attnmap") == 1);
}

TEST_CASE("fit residuals on exact polynomials are tiny") {
    const ega::SweepResult sweep = ega::scaling_curve(
        ega::preset("MR"), ega::SweepVar::SpatialSize, {100, 300, 500, 700});
    for (const auto& [stage, residual] : sweep.residuals) {
        (void)stage;
        CHECK(residual < 1e-9);
    }
}

TEST_CASE("fitted_degree classifies lines and parabolas") {
    const std::vector<double> xs = {1, 2, 3, 4, 5};
    double residual = 1.0;
    CHECK(ega::fitted_degree(xs, {3, 5, 7, 9, 11}, 1e-9, &residual) == 1);
    CHECK(residual < 1e-12);
    CHECK(ega::fitted_degree(xs, {1, 4, 9, 16, 25}, 1e-9, &residual) == 2);
    CHECK(ega::fitted_degree(xs, {5, 5, 5, 5, 5}, 1e-9) == 1);  // constant is a flat line
    CHECK_THROWS_AS(ega::fitted_degree({1, 2}, {1, 2}, 1e-9), ega::UsageError);
}

TEST_CASE("temporal stacking on LR costs strictly less than twice the base") {
    RigConfig base = ega::preset("LR");
    RigConfig temporal = base;
    temporal.temporal_frames = 1;
    const std::uint64_t base_flops = ega::cost_ega(base).flops_total;
    const std::uint64_t temporal_flops = ega::cost_ega(temporal).flops_total;
    CHECK(temporal_flops > base_flops);
    CHECK(temporal_flops < 2 * base_flops);
}

TEST_CASE("sweep demands at least three points") {
    CHECK_THROWS_AS(
        ega::scaling_curve(ega::preset("LR"), ega::SweepVar::SpatialSize, {100, 200}),
        ega::UsageError);
}

TEST_CASE("peak activation accounting reports the largest instance") {
    const RigConfig hr = ega::preset("HR");
    const CostReport report = ega::cost_ega(hr);
    const std::uint64_t top = ega::ega_activation_elements(
        {3520, hr.channels, hr.heads, 7040, 1024});
    CHECK(report.peak_activation_elements == top);
}

TEST_SUITE_END();
