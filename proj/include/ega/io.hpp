#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ega/attention.hpp"
#include "ega/losses.hpp"
#include "ega/matrix.hpp"
#include "ega/rig.hpp"

namespace ega {

// --- Raster files -----------------------------------------------------
//
// Plain-text raster: a one-line header `EGA-RASTER <height> <width>
// <channels>` followed by height lines of width*channels whitespace-
// separated values (channel-interleaved). Depth maps use channels = 1.
// Values print with 17 significant digits, so write/read round-trips are
// exact.

ImagePlane load_image(const std::string& path);
void save_image(const std::string& path, const ImagePlane& image);
DepthMap load_depth(const std::string& path);
void save_depth(const std::string& path, const DepthMap& depth);

// --- Parameter snapshots ----------------------------------------------
//
// Binary archive of shape-tagged named matrices:
//   magic "EGAPARMS" | u32 version (1) | u64 entry count, then per entry
//   u32 name length | name bytes | u64 rows | u64 cols | rows*cols f64,
// all integers and floats little-endian.

using NamedMatrices = std::vector<std::pair<std::string, Matrix>>;

void save_matrices(const std::string& path, const NamedMatrices& matrices);
NamedMatrices load_matrices(const std::string& path);

// Rig parameters under names v<view>.s<scale>.<w_q|w_k|w_v|w_o|p_k|p_v|
// query_gain|query_bias|ref_gain|ref_bias>.
void save_rig_params(const std::string& path, const RigParams& params);
RigParams load_rig_params(const std::string& path, const RigConfig& config);

// FNV-1a 64-bit content digest, hex-encoded. Used in run manifests.
std::string file_digest(const std::string& path);

}  // namespace ega
