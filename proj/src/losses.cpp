#include "ega/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "ega/errors.hpp"

namespace ega {

namespace {

void check_image_shapes(const ImagePlane& a, const ImagePlane& b, const char* op) {
    if (a.height != b.height || a.width != b.width || a.channels != b.channels)
        throw ShapeError(std::string(op) + ": image shapes differ (" + std::to_string(a.height) +
                         "x" + std::to_string(a.width) + "x" + std::to_string(a.channels) +
                         " vs " + std::to_string(b.height) + "x" + std::to_string(b.width) + "x" +
                         std::to_string(b.channels) + ")");
}

// Symmetric reflection: -1 -> 0, n -> n-1. Window radius is 1, so one
// step past the border is the most that can occur.
std::size_t mirror(long idx, std::size_t n) {
    if (idx < 0) return static_cast<std::size_t>(-idx - 1);
    if (idx >= static_cast<long>(n)) return static_cast<std::size_t>(2 * static_cast<long>(n) - idx - 1);
    return static_cast<std::size_t>(idx);
}

}  // namespace

ImagePlane constant_image(std::size_t height, std::size_t width, std::size_t channels,
                          double value) {
    return {height, width, channels, std::vector<double>(height * width * channels, value)};
}

Matrix ssim(const ImagePlane& a, const ImagePlane& b) {
    check_image_shapes(a, b, "ssim");
    const long h = static_cast<long>(a.height);
    const long w = static_cast<long>(a.width);
    Matrix map(a.height, a.width);
    for (long y = 0; y < h; ++y) {
        for (long x = 0; x < w; ++x) {
            double acc = 0.0;
            for (std::size_t ch = 0; ch < a.channels; ++ch) {
                double mu_a = 0.0, mu_b = 0.0, aa = 0.0, bb = 0.0, ab = 0.0;
                for (long dy = -1; dy <= 1; ++dy) {
                    for (long dx = -1; dx <= 1; ++dx) {
                        const std::size_t yy = mirror(y + dy, a.height);
                        const std::size_t xx = mirror(x + dx, a.width);
                        const double va = a.at(yy, xx, ch);
                        const double vb = b.at(yy, xx, ch);
                        mu_a += va;
                        mu_b += vb;
                        aa += va * va;
                        bb += vb * vb;
                        ab += va * vb;
                    }
                }
                mu_a /= 9.0;
                mu_b /= 9.0;
                const double var_a = aa / 9.0 - mu_a * mu_a;
                const double var_b = bb / 9.0 - mu_b * mu_b;
                const double cov = ab / 9.0 - mu_a * mu_b;
                const double value = ((2.0 * mu_a * mu_b + kSsimC1) * (2.0 * cov + kSsimC2)) /
                                     ((mu_a * mu_a + mu_b * mu_b + kSsimC1) *
                                      (var_a + var_b + kSsimC2));
                acc += std::clamp(value, -1.0, 1.0);
            }
            map(static_cast<std::size_t>(y), static_cast<std::size_t>(x)) =
                acc / static_cast<double>(a.channels);
        }
    }
    return map;
}

PhotometricResult photometric_loss(const ImagePlane& target,
                                   const std::vector<ImagePlane>& synthesized) {
    if (synthesized.empty())
        throw UsageError("photometric_loss: at least one synthesized candidate required");
    for (const ImagePlane& candidate : synthesized)
        check_image_shapes(target, candidate, "photometric_loss");

    PhotometricResult result;
    result.per_pixel = Matrix(target.height, target.width,
                              std::numeric_limits<double>::infinity());
    for (const ImagePlane& candidate : synthesized) {
        const Matrix similarity = ssim(target, candidate);
        for (std::size_t y = 0; y < target.height; ++y) {
            for (std::size_t x = 0; x < target.width; ++x) {
                double l1 = 0.0;
                for (std::size_t ch = 0; ch < target.channels; ++ch)
                    l1 += std::abs(target.at(y, x, ch) - candidate.at(y, x, ch));
                l1 /= static_cast<double>(target.channels);
                const double value = kPhotometricAlpha / 2.0 * (1.0 - similarity(y, x)) +
                                     (1.0 - kPhotometricAlpha) * l1;
                result.per_pixel(y, x) = std::min(result.per_pixel(y, x), value);
            }
        }
    }
    result.mean = sum(result.per_pixel) / static_cast<double>(target.pixel_count());
    return result;
}

double smoothness_loss(const DepthMap& depth, const ImagePlane& image) {
    if (depth.height != image.height || depth.width != image.width)
        throw ShapeError("smoothness_loss: depth " + std::to_string(depth.height) + "x" +
                         std::to_string(depth.width) + " vs image " +
                         std::to_string(image.height) + "x" + std::to_string(image.width));

    // Mean-normalized disparity over valid pixels.
    double disparity_sum = 0.0;
    std::size_t valid_count = 0;
    for (std::size_t i = 0; i < depth.values.size(); ++i) {
        if (depth.values[i] > 0.0) {
            disparity_sum += 1.0 / depth.values[i];
            ++valid_count;
        }
    }
    if (valid_count == 0)
        throw UsageError("smoothness_loss: depth map has no valid pixels");
    const double mean_disparity = disparity_sum / static_cast<double>(valid_count);

    const auto normalized = [&](std::size_t y, std::size_t x) {
        return (1.0 / depth.at(y, x)) / mean_disparity;
    };
    const auto image_mean = [&](std::size_t y, std::size_t x) {
        double acc = 0.0;
        for (std::size_t ch = 0; ch < image.channels; ++ch) acc += image.at(y, x, ch);
        return acc / static_cast<double>(image.channels);
    };

    double total_x = 0.0, total_y = 0.0;
    std::size_t count_x = 0, count_y = 0;
    for (std::size_t y = 0; y < depth.height; ++y) {
        for (std::size_t x = 0; x + 1 < depth.width; ++x) {
            if (!depth.valid(y, x) || !depth.valid(y, x + 1)) continue;
            const double d_grad = std::abs(normalized(y, x + 1) - normalized(y, x));
            const double i_grad = std::abs(image_mean(y, x + 1) - image_mean(y, x));
            total_x += d_grad * std::exp(-i_grad);
            ++count_x;
        }
    }
    for (std::size_t y = 0; y + 1 < depth.height; ++y) {
        for (std::size_t x = 0; x < depth.width; ++x) {
            if (!depth.valid(y, x) || !depth.valid(y + 1, x)) continue;
            const double d_grad = std::abs(normalized(y + 1, x) - normalized(y, x));
            const double i_grad = std::abs(image_mean(y + 1, x) - image_mean(y, x));
            total_y += d_grad * std::exp(-i_grad);
            ++count_y;
        }
    }
    const double mean_x = count_x ? total_x / static_cast<double>(count_x) : 0.0;
    const double mean_y = count_y ? total_y / static_cast<double>(count_y) : 0.0;
    return mean_x + mean_y;
}

double total_loss(double photometric, double smoothness) {
    if (!std::isfinite(photometric) || !std::isfinite(smoothness))
        throw UsageError("total_loss: inputs must be finite");
    return photometric + kSmoothnessWeight * smoothness;
}

}  // namespace ega
