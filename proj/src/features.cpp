#include "strav/features.hpp"

#include <algorithm>
#include <cmath>

#include "strav/pyramid.hpp"

namespace strav {

namespace {

FeatureMap encode_level(const Frame& f, const Mask& m) {
  const int h = f.height(), w = f.width();
  FeatureMap out(kFeatureChannels, h, w);

  // Luma plane first; four channels derive from it.
  std::vector<float> lum(static_cast<std::size_t>(h) * w);
  for (int y = 0; y < h; ++y) {
    const float* src = f.row(y);
    for (int x = 0; x < w; ++x)
      lum[static_cast<std::size_t>(y) * w + x] =
          luma(src[x * 3], src[x * 3 + 1], src[x * 3 + 2]);
  }
  auto L = [&](int y, int x) {
    y = std::clamp(y, 0, h - 1);
    x = std::clamp(x, 0, w - 1);
    return lum[static_cast<std::size_t>(y) * w + x];
  };

  for (int y = 0; y < h; ++y) {
    const float* src = f.row(y);
    for (int x = 0; x < w; ++x) {
      const float l = L(y, x);
      out.at(0, y, x) = l;
      out.at(1, y, x) = src[x * 3 + 0];
      out.at(2, y, x) = src[x * 3 + 1];
      out.at(3, y, x) = src[x * 3 + 2];
      out.at(4, y, x) = 0.5f * std::abs(L(y, x + 1) - L(y, x - 1));
      out.at(5, y, x) = 0.5f * std::abs(L(y + 1, x) - L(y - 1, x));

      float sum = 0.0f, sum2 = 0.0f;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const float v = L(y + dy, x + dx);
          sum += v;
          sum2 += v * v;
        }
      const float mean = sum / 9.0f;
      out.at(6, y, x) = mean;
      out.at(7, y, x) = std::sqrt(std::max(0.0f, sum2 / 9.0f - mean * mean));
    }
  }

  // Hole pixels carry exactly zero features.
  for (int c = 0; c < kFeatureChannels; ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        if (m.at(y, x) > 0.0f) out.at(c, y, x) = 0.0f;

  return out;
}

}  // namespace

FeaturePyramid encode(const Frame& frame, const Mask& mask, int levels) {
  if (levels < 1) throw DimensionMismatch("encode: levels must be >= 1");
  if (!mask.same_shape(frame)) throw DimensionMismatch("encode: frame/mask mismatch");
  const int div = 1 << (levels - 1);
  if (frame.height() % div != 0 || frame.width() % div != 0)
    throw DimensionMismatch("encode: dims not divisible by 2^(levels-1)");

  FeaturePyramid pyr;
  // Zero hole content up front so the result never depends on whatever
  // garbage the hole region carries.
  Frame cur = elementwise_mul(frame, invert(mask));
  Mask cur_mask = mask;
  for (int l = 0; l < levels; ++l) {
    if (l > 0) {
      cur = downsample(cur, 2);
      cur_mask = downsample_mask(cur_mask, 2);
    }
    pyr.levels.push_back(encode_level(cur, cur_mask));
    pyr.level_masks.push_back(cur_mask);
  }
  return pyr;
}

}  // namespace strav
