#pragma once

#include <stdexcept>
#include <string>

namespace ega {

// Shape mismatch between operands; the message names both shapes.
struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Invalid or inconsistent rig/attention configuration.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Required input (feature map, frame, file) is missing or malformed.
struct InputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// API misuse: empty candidate list, non-scalar backward root, and similar.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Depth evaluation cannot proceed (no valid pixels, degenerate medians).
struct EvalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace ega
