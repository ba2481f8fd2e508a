#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ega/rig.hpp"

namespace ega {

// Closed-form FLOP accounting for the guided-attention pipeline. Fixed
// conventions, chosen so an instrumented run of the real pipeline matches
// these counts exactly:
//   - one multiply-add costs 2 FLOPs (matmul of m x k by k x n = 2mkn),
//   - softmax costs 5 FLOPs per element (max pass, subtract, exp, sum
//     pass, divide),
//   - transposes, slices, norms and elementwise ops are free.
// Per (view, scale) with reference length L = (n_i + n_t) n_s and
// attended rows R = k_s (projected) or L (unprojected):
//   qkv          = 2 c^2 (n_s + 2L)
//   reduce       = 4 k_s L c           (projected only)
//   attnmap      = 2 n_s R c
//   softmax      = 5 Z n_s R           (per-head maps, Z of them)
//   weighted_sum = 2 n_s R c
//   headmix      = 2 n_s c^2
struct StageFlops {
    std::uint64_t qkv = 0;
    std::uint64_t reduce = 0;
    std::uint64_t attnmap = 0;
    std::uint64_t softmax = 0;
    std::uint64_t weighted_sum = 0;
    std::uint64_t headmix = 0;

    std::uint64_t total() const {
        return qkv + reduce + attnmap + softmax + weighted_sum + headmix;
    }
    StageFlops& operator+=(const StageFlops& other);
};

inline const char* const kStageNames[] = {"qkv",     "reduce",       "attnmap",
                                          "softmax", "weighted_sum", "headmix"};
std::uint64_t stage_by_name(const StageFlops& flops, const std::string& stage);

// Shape of one attention instance, decoupled from rig semantics so that
// degenerate comparisons (joint self-attention, self-neighbor) stay
// expressible.
struct AttentionDims {
    std::size_t spatial = 0;        // n_s
    std::size_t channels = 0;       // c
    std::size_t heads = 1;          // Z
    std::size_t reference_len = 0;  // L
    std::optional<std::size_t> projection_dim;  // k_s
};

StageFlops ega_stage_flops(const AttentionDims& dims);

// Activation elements (weights excluded) live at the busiest moment of one
// block: the larger of the reduction moment (full-length K/V plus their
// projections) and the attention moment (one head's map plus the head
// output accumulator).
std::uint64_t ega_activation_elements(const AttentionDims& dims);

struct CostEntry {
    int view = 0;  // -1 marks the joint all-views comparator
    std::size_t scale = 0;
    StageFlops flops;
    std::uint64_t activation_elements = 0;
};

struct CostReport {
    StageFlops flops;
    std::uint64_t flops_total = 0;  // always equals flops.total()
    std::uint64_t peak_activation_elements = 0;
    std::vector<CostEntry> breakdown;
};

// Guided attention over every (view, scale) of the rig.
CostReport cost_ega(const RigConfig& config);

// SurroundDepth-style comparator: all N views concatenated into one
// sequence of length N n_s attending to itself, once per scale.
CostReport cost_joint_selfattn(const RigConfig& config);

// Runs the real attention pipeline at the given dims on seeded inputs and
// reports the FLOPs seen by the tensor_core counter. The dual route for
// the closed forms above; equality is exact.
std::uint64_t measured_flops(const AttentionDims& dims, std::uint64_t seed = 1);
std::uint64_t measured_rig_flops(const RigConfig& config, std::uint64_t seed = 1);

enum class SweepVar { SpatialSize, NeighborCount, TemporalFrames, ProjectionDim };

SweepVar sweep_var_from_name(const std::string& name);  // ns | ni | nt | ks
std::string sweep_var_name(SweepVar var);

struct SweepPoint {
    std::size_t value = 0;
    CostReport report;
};

// Cost curve over a single-scale template derived from the base config
// (first scale's geometry and projection, base adjacency and head count),
// plus a per-stage polynomial-degree diagnostic: the smallest degree in
// {1, 2} whose least-squares fit has max relative residual below 1e-9,
// or -1 when neither fits.
struct SweepResult {
    SweepVar var = SweepVar::SpatialSize;
    std::vector<SweepPoint> points;
    std::vector<std::pair<std::string, int>> degrees;       // stage name -> degree
    std::vector<std::pair<std::string, double>> residuals;  // stage name -> fit residual

    int degree_of(const std::string& stage) const;
};

// Requires at least 3 sweep points.
SweepResult scaling_curve(const RigConfig& base, SweepVar var,
                          const std::vector<std::size_t>& values);

// Least-squares polynomial fit diagnostic used by scaling_curve; exposed
// for tests. Returns the degree as described above and writes the chosen
// fit's max relative residual.
int fitted_degree(const std::vector<double>& xs, const std::vector<double>& ys,
                  double tolerance, double* residual_out = nullptr);

}  // namespace ega
