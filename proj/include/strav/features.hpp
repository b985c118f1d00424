#pragma once

#include <functional>
#include <vector>

#include "strav/core.hpp"

namespace strav {

//==============================================================================
// Deterministic feature encoder.
//
// Eight fixed channels per pixel — {luma, R, G, B, |d/dx luma|, |d/dy luma|,
// 3x3 box-blurred luma, 3x3 local std of luma} — computed at three pyramid
// levels (level l has dims H/2^l x W/2^l, block-mean downsampled). Every
// channel is multiplied by (1 - mask) at that level's conservatively
// downsampled mask, so hole pixels carry exactly zero features and can never
// leak into similarity scores.
//==============================================================================

constexpr int kFeatureChannels = 8;

struct FeatureMap {
  int channels = 0, h = 0, w = 0;
  PixelBuffer data;  // planar: channel-major

  FeatureMap() = default;
  FeatureMap(int c, int height, int width) : channels(c), h(height), w(width) {
    data.assign(static_cast<std::size_t>(c) * height * width, 0.0f);
  }
  float at(int c, int y, int x) const {
    return data[(static_cast<std::size_t>(c) * h + y) * w + x];
  }
  float& at(int c, int y, int x) {
    return data[(static_cast<std::size_t>(c) * h + y) * w + x];
  }
  const float* plane(int c) const {
    return data.data() + static_cast<std::size_t>(c) * h * w;
  }
};

struct FeaturePyramid {
  std::vector<FeatureMap> levels;       // levels[0] is full input resolution
  std::vector<Mask> level_masks;        // conservative mask per level

  const FeatureMap& lowest() const { return levels.back(); }
  const Mask& lowest_mask() const { return level_masks.back(); }
  // Spatial shrink factor of the lowest level relative to level 0.
  int lowest_factor() const { return 1 << (static_cast<int>(levels.size()) - 1); }
};

// Input dims must be divisible by 2^(levels-1). levels defaults to 3.
FeaturePyramid encode(const Frame& frame, const Mask& mask, int levels = 3);

// Swappable encoder contract used by the attention stages.
using Encoder = std::function<FeaturePyramid(const Frame&, const Mask&, int)>;

}  // namespace strav
