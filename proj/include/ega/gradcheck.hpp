#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ega/matrix.hpp"

namespace ega {

// Central differences (f(x+e) - f(x-e)) / 2e, one evaluation pair per
// element of `at`.
Matrix finite_diff(const std::function<double(const Matrix&)>& f, const Matrix& at,
                   double eps = 1e-5);

// |a - n| / max(1, |a|, |n|); robust near zero.
double relative_error(double analytic, double numeric);

// One small synthetic instance for checking ega_block gradients against
// finite differences. Inputs and parameters are drawn uniform in [-1, 1]
// from the seed; the loss is the squared distance to a random target.
struct GradCheckCase {
    std::size_t spatial = 4;          // n_s
    std::size_t channels = 8;         // c
    std::size_t heads = 2;            // Z
    std::size_t neighbor_count = 2;   // n_i
    std::size_t temporal_frames = 0;  // n_t
    bool projected = false;           // when true, k_s = max(1, L/2)
    bool use_norm = true;
    bool literal_sqrt_c = false;
    std::uint64_t seed = 1;
};

struct GradCheckEntry {
    std::string param;
    double max_rel_err = 0.0;
    double mean_rel_err = 0.0;
    std::size_t count = 0;
};

struct GradCheckReport {
    std::vector<GradCheckEntry> entries;
    double max_rel_err = 0.0;

    bool passed(double tolerance) const { return max_rel_err < tolerance; }
};

// Analytic (tape) gradients of every parameter matrix of one ega_block
// versus central finite differences through the plain forward path.
GradCheckReport gradcheck_ega_block(const GradCheckCase& check, double eps = 1e-5);

}  // namespace ega
