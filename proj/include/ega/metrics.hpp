#pragma once

#include <cstddef>
#include <vector>

#include "ega/losses.hpp"

namespace ega {

// Floor applied to predicted depth inside the log metric only.
inline constexpr double kMinPredDepth = 1e-3;

struct EvalReport {
    double abs_rel = 0.0;
    double sq_rel = 0.0;
    double rmse = 0.0;
    double rmse_log = 0.0;
    double delta1 = 0.0;  // fraction with max(p/g, g/p) < 1.25
    double delta2 = 0.0;  // ... < 1.25^2
    double delta3 = 0.0;  // ... < 1.25^3
    std::size_t pixel_count = 0;
};

// pred * median(gt) / median(pred), medians over pixels valid in both
// maps. EvalError when there is no valid overlap or a median is zero.
DepthMap median_scale(const DepthMap& pred, const DepthMap& gt);

// Standard depth metrics over pixels with gt in (0, max_depth]. Deltas use
// strict inequality.
EvalReport evaluate(const DepthMap& pred, const DepthMap& gt, double max_depth);

// Unweighted mean of per-camera reports; pixel counts are summed.
EvalReport average(const std::vector<EvalReport>& reports);

}  // namespace ega
