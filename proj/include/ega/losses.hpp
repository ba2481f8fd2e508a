#pragma once

#include <cstddef>
#include <vector>

#include "ega/matrix.hpp"

namespace ega {

inline constexpr double kPhotometricAlpha = 0.85;
inline constexpr double kSmoothnessWeight = 0.001;  // lambda in the total loss
inline constexpr double kSsimC1 = 0.01 * 0.01;      // on [0,1] intensities
inline constexpr double kSsimC2 = 0.03 * 0.03;

// Dense RGB (or single-channel) image with values in [0,1], row-major,
// channel-interleaved.
struct ImagePlane {
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t channels = 0;
    std::vector<double> values;

    double at(std::size_t y, std::size_t x, std::size_t ch) const {
        return values[(y * width + x) * channels + ch];
    }
    double& at(std::size_t y, std::size_t x, std::size_t ch) {
        return values[(y * width + x) * channels + ch];
    }
    std::size_t pixel_count() const { return height * width; }
};

ImagePlane constant_image(std::size_t height, std::size_t width, std::size_t channels,
                          double value);

// Dense per-pixel depth. Values <= 0 mark invalid pixels.
struct DepthMap {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<double> values;

    double at(std::size_t y, std::size_t x) const { return values[y * width + x]; }
    double& at(std::size_t y, std::size_t x) { return values[y * width + x]; }
    bool valid(std::size_t y, std::size_t x) const { return at(y, x) > 0.0; }
};

// Per-pixel structural similarity over a 3x3 uniform window with mirrored
// (symmetric) padding, averaged across channels. Map values lie in [-1,1];
// identical inputs give exactly 1.
Matrix ssim(const ImagePlane& a, const ImagePlane& b);

struct PhotometricResult {
    double mean = 0.0;
    Matrix per_pixel;  // height x width
};

// Per pixel, the minimum over synthesized candidates of
// alpha/2 (1 - SSIM) + (1 - alpha) L1; the scalar is the mean over pixels.
PhotometricResult photometric_loss(const ImagePlane& target,
                                   const std::vector<ImagePlane>& synthesized);

// Edge-aware smoothness of mean-normalized disparity (1/depth divided by
// its mean over valid pixels): forward differences of the disparity are
// downweighted by exp(-|gradient|) of the channel-averaged image.
double smoothness_loss(const DepthMap& depth, const ImagePlane& image);

// L_p + lambda L_s with lambda = 0.001.
double total_loss(double photometric, double smoothness);

}  // namespace ega
