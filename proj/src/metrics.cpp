#include "ega/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "ega/errors.hpp"

namespace ega {

namespace {

double median(std::vector<double> values) {
    const std::size_t n = values.size();
    std::sort(values.begin(), values.end());
    return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace

DepthMap median_scale(const DepthMap& pred, const DepthMap& gt) {
    if (pred.height != gt.height || pred.width != gt.width)
        throw ShapeError("median_scale: shapes differ");
    std::vector<double> pred_valid, gt_valid;
    for (std::size_t i = 0; i < pred.values.size(); ++i) {
        if (pred.values[i] > 0.0 && gt.values[i] > 0.0) {
            pred_valid.push_back(pred.values[i]);
            gt_valid.push_back(gt.values[i]);
        }
    }
    if (pred_valid.empty())
        throw EvalError("median_scale: no overlapping valid pixels");
    const double pred_median = median(std::move(pred_valid));
    const double gt_median = median(std::move(gt_valid));
    if (pred_median <= 0.0 || gt_median <= 0.0)
        throw EvalError("median_scale: nonpositive median");
    DepthMap scaled = pred;
    const double ratio = gt_median / pred_median;
    for (double& v : scaled.values) v *= ratio;
    return scaled;
}

EvalReport evaluate(const DepthMap& pred, const DepthMap& gt, double max_depth) {
    if (pred.height != gt.height || pred.width != gt.width)
        throw ShapeError("evaluate: shapes differ");
    EvalReport report;
    double sq_err = 0.0, log_err = 0.0;
    std::size_t d1 = 0, d2 = 0, d3 = 0;
    for (std::size_t i = 0; i < gt.values.size(); ++i) {
        const double g = gt.values[i];
        if (g <= 0.0 || g > max_depth) continue;
        const double p = pred.values[i];
        const double diff = p - g;
        report.abs_rel += std::abs(diff) / g;
        report.sq_rel += diff * diff / g;
        sq_err += diff * diff;
        const double lp = std::log(std::max(p, kMinPredDepth));
        const double ld = lp - std::log(g);
        log_err += ld * ld;
        const double ratio = std::max(p / g, g / p);
        if (ratio < 1.25) ++d1;
        if (ratio < 1.25 * 1.25) ++d2;
        if (ratio < 1.25 * 1.25 * 1.25) ++d3;
        ++report.pixel_count;
    }
    if (report.pixel_count == 0)
        throw EvalError("evaluate: no valid pixels within (0, max_depth]");
    const double n = static_cast<double>(report.pixel_count);
    report.abs_rel /= n;
    report.sq_rel /= n;
    report.rmse = std::sqrt(sq_err / n);
    report.rmse_log = std::sqrt(log_err / n);
    report.delta1 = static_cast<double>(d1) / n;
    report.delta2 = static_cast<double>(d2) / n;
    report.delta3 = static_cast<double>(d3) / n;
    return report;
}

EvalReport average(const std::vector<EvalReport>& reports) {
    if (reports.empty()) throw UsageError("average: empty report list");
    EvalReport mean;
    for (const EvalReport& r : reports) {
        mean.abs_rel += r.abs_rel;
        mean.sq_rel += r.sq_rel;
        mean.rmse += r.rmse;
        mean.rmse_log += r.rmse_log;
        mean.delta1 += r.delta1;
        mean.delta2 += r.delta2;
        mean.delta3 += r.delta3;
        mean.pixel_count += r.pixel_count;
    }
    const double n = static_cast<double>(reports.size());
    mean.abs_rel /= n;
    mean.sq_rel /= n;
    mean.rmse /= n;
    mean.rmse_log /= n;
    mean.delta1 /= n;
    mean.delta2 /= n;
    mean.delta3 /= n;
    return mean;
}

}  // namespace ega
