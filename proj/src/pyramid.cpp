#include "strav/pyramid.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace strav {

namespace {

void check_divisible(int h, int w, int s, const char* who) {
  if (s <= 0) throw DimensionMismatch(std::string(who) + ": scale must be positive");
  if (h % s != 0 || w % s != 0)
    throw DimensionMismatch(std::string(who) + ": dims not divisible by scale");
}

}  // namespace

Frame downsample(const Frame& f, int s) {
  check_divisible(f.height(), f.width(), s, "downsample");
  if (s == 1) return f;
  const int oh = f.height() / s, ow = f.width() / s;
  Frame out(oh, ow);
  const float inv = 1.0f / static_cast<float>(s * s);
  for (int oy = 0; oy < oh; ++oy) {
    float* dst = out.row(oy);
    for (int ox = 0; ox < ow; ++ox) {
      float acc[3] = {0, 0, 0};
      for (int dy = 0; dy < s; ++dy) {
        const float* src = f.row(oy * s + dy) + ox * s * 3;
        for (int dx = 0; dx < s; ++dx)
          for (int c = 0; c < 3; ++c) acc[c] += src[dx * 3 + c];
      }
      for (int c = 0; c < 3; ++c) dst[ox * 3 + c] = acc[c] * inv;
    }
  }
  return out;
}

Mask downsample_mask(const Mask& m, int s) {
  check_divisible(m.height(), m.width(), s, "downsample_mask");
  if (s == 1) return m;
  const int oh = m.height() / s, ow = m.width() / s;
  Mask out(oh, ow);
  for (int oy = 0; oy < oh; ++oy) {
    float* dst = out.row(oy);
    for (int ox = 0; ox < ow; ++ox) {
      float any = 0.0f;
      for (int dy = 0; dy < s && any == 0.0f; ++dy) {
        const float* src = m.row(oy * s + dy) + ox * s;
        for (int dx = 0; dx < s; ++dx)
          if (src[dx] > 0.0f) {
            any = 1.0f;
            break;
          }
      }
      dst[ox] = any;
    }
  }
  return out;
}

Mask downsample_visibility(const Mask& v, int s) {
  check_divisible(v.height(), v.width(), s, "downsample_visibility");
  if (s == 1) return v;
  const int oh = v.height() / s, ow = v.width() / s;
  Mask out(oh, ow);
  for (int oy = 0; oy < oh; ++oy) {
    float* dst = out.row(oy);
    for (int ox = 0; ox < ow; ++ox) {
      float all = 1.0f;
      for (int dy = 0; dy < s && all == 1.0f; ++dy) {
        const float* src = v.row(oy * s + dy) + ox * s;
        for (int dx = 0; dx < s; ++dx)
          if (src[dx] <= 0.0f) {
            all = 0.0f;
            break;
          }
      }
      dst[ox] = all;
    }
  }
  return out;
}

Frame upsample(const Frame& f, int s) {
  if (s <= 0) throw DimensionMismatch("upsample: scale must be positive");
  if (s == 1) return f;
  const int sh = f.height(), sw = f.width();
  const int oh = sh * s, ow = sw * s;
  Frame out(oh, ow);

  // Precompute the horizontal taps once; they repeat every output row.
  std::vector<int> x0s(ow), x1s(ow);
  std::vector<float> fxs(ow);
  for (int ox = 0; ox < ow; ++ox) {
    float sx = (ox + 0.5f) / s - 0.5f;
    sx = std::clamp(sx, 0.0f, static_cast<float>(sw - 1));
    const int x0 = static_cast<int>(sx);
    x0s[ox] = x0;
    x1s[ox] = std::min(x0 + 1, sw - 1);
    fxs[ox] = sx - x0;
  }

  for (int oy = 0; oy < oh; ++oy) {
    float sy = (oy + 0.5f) / s - 0.5f;
    sy = std::clamp(sy, 0.0f, static_cast<float>(sh - 1));
    const int y0 = static_cast<int>(sy);
    const int y1 = std::min(y0 + 1, sh - 1);
    const float fy = sy - y0;
    const float* r0 = f.row(y0);
    const float* r1 = f.row(y1);
    float* dst = out.row(oy);
    for (int ox = 0; ox < ow; ++ox) {
      const int x0 = x0s[ox] * 3, x1 = x1s[ox] * 3;
      const float fx = fxs[ox];
      for (int c = 0; c < 3; ++c) {
        const float top = r0[x0 + c] + fx * (r0[x1 + c] - r0[x0 + c]);
        const float bot = r1[x0 + c] + fx * (r1[x1 + c] - r1[x0 + c]);
        dst[ox * 3 + c] = top + fy * (bot - top);
      }
    }
  }
  return out;
}

Mask upsample_mask_nearest(const Mask& m, int s) {
  if (s <= 0) throw DimensionMismatch("upsample_mask_nearest: scale must be positive");
  if (s == 1) return m;
  Mask out(m.height() * s, m.width() * s);
  for (int y = 0; y < out.height(); ++y) {
    const float* src = m.row(y / s);
    float* dst = out.row(y);
    for (int x = 0; x < out.width(); ++x) dst[x] = src[x / s];
  }
  return out;
}

Frame upsample_nearest(const Frame& f, int s) {
  if (s <= 0) throw DimensionMismatch("upsample_nearest: scale must be positive");
  if (s == 1) return f;
  Frame out(f.height() * s, f.width() * s);
  for (int y = 0; y < out.height(); ++y) {
    const float* src = f.row(y / s);
    float* dst = out.row(y);
    for (int x = 0; x < out.width(); ++x)
      for (int c = 0; c < 3; ++c) dst[x * 3 + c] = src[(x / s) * 3 + c];
  }
  return out;
}

ResidualDecomposition decompose(const Frame& f, int s) {
  check_divisible(f.height(), f.width(), s, "decompose");
  ResidualDecomposition d;
  d.scale = s;
  d.low = downsample(f, s);
  const Frame up = upsample(d.low, s);
  d.residual = Frame(f.height(), f.width());
  for (std::size_t i = 0; i < d.residual.data().size(); ++i)
    d.residual.data()[i] = f.data()[i] - up.data()[i];
  return d;
}

Frame reconstruct(const ResidualDecomposition& d) {
  Frame up = upsample(d.low, d.scale);
  if (!up.same_shape(d.residual))
    throw DimensionMismatch("reconstruct: residual/low scale mismatch");
  for (std::size_t i = 0; i < up.data().size(); ++i)
    up.data()[i] += d.residual.data()[i];
  return up;
}

//------------------------------------------------------------------------------
// Push-pull diffusion
//------------------------------------------------------------------------------

namespace {

struct PushLevel {
  int h, w;
  std::vector<float> val;  // 3 channels interleaved
  std::vector<float> wgt;
};

}  // namespace

Frame push_pull_fill(const Frame& f, const Mask& unknown) {
  if (!unknown.same_shape(f)) throw DimensionMismatch("push_pull_fill: shape mismatch");

  std::vector<PushLevel> levels;
  {
    PushLevel l0;
    l0.h = f.height();
    l0.w = f.width();
    l0.val.assign(f.data().begin(), f.data().end());
    l0.wgt.resize(static_cast<std::size_t>(l0.h) * l0.w);
    for (int y = 0; y < l0.h; ++y)
      for (int x = 0; x < l0.w; ++x)
        l0.wgt[static_cast<std::size_t>(y) * l0.w + x] =
            unknown.at(y, x) > 0.0f ? 0.0f : 1.0f;
    // Unknown content must not bleed into the averages.
    for (int y = 0; y < l0.h; ++y)
      for (int x = 0; x < l0.w; ++x)
        if (unknown.at(y, x) > 0.0f)
          for (int c = 0; c < 3; ++c)
            l0.val[(static_cast<std::size_t>(y) * l0.w + x) * 3 + c] = 0.0f;
    levels.push_back(std::move(l0));
  }

  // Push: occupancy-weighted 2x reduction until a single cell remains.
  while (levels.back().h > 1 || levels.back().w > 1) {
    const PushLevel& fine = levels.back();
    PushLevel coarse;
    coarse.h = (fine.h + 1) / 2;
    coarse.w = (fine.w + 1) / 2;
    coarse.val.assign(static_cast<std::size_t>(coarse.h) * coarse.w * 3, 0.0f);
    coarse.wgt.assign(static_cast<std::size_t>(coarse.h) * coarse.w, 0.0f);
    for (int y = 0; y < coarse.h; ++y)
      for (int x = 0; x < coarse.w; ++x) {
        float acc[3] = {0, 0, 0};
        float wsum = 0.0f;
        for (int dy = 0; dy < 2; ++dy)
          for (int dx = 0; dx < 2; ++dx) {
            const int sy = 2 * y + dy, sx = 2 * x + dx;
            if (sy >= fine.h || sx >= fine.w) continue;
            const float wv = fine.wgt[static_cast<std::size_t>(sy) * fine.w + sx];
            if (wv <= 0.0f) continue;
            wsum += wv;
            for (int c = 0; c < 3; ++c)
              acc[c] += wv * fine.val[(static_cast<std::size_t>(sy) * fine.w + sx) * 3 + c];
          }
        const std::size_t idx = static_cast<std::size_t>(y) * coarse.w + x;
        if (wsum > 0.0f) {
          for (int c = 0; c < 3; ++c)
            coarse.val[idx * 3 + c] = acc[c] / wsum;
          coarse.wgt[idx] = std::min(1.0f, wsum);
        }
      }
    levels.push_back(std::move(coarse));
  }

  // A frame with no known pixel at all settles on neutral gray.
  if (levels.back().wgt[0] <= 0.0f) {
    levels.back().val = {0.5f, 0.5f, 0.5f};
    levels.back().wgt[0] = 1.0f;
  }

  // Pull: blend each level toward the bilinear upsample of the coarser one,
  // proportioned by how much occupancy it is missing.
  for (int l = static_cast<int>(levels.size()) - 2; l >= 0; --l) {
    PushLevel& fine = levels[l];
    const PushLevel& coarse = levels[l + 1];
    for (int y = 0; y < fine.h; ++y)
      for (int x = 0; x < fine.w; ++x) {
        const std::size_t idx = static_cast<std::size_t>(y) * fine.w + x;
        const float wv = fine.wgt[idx];
        if (wv >= 1.0f) continue;
        float sx = (x + 0.5f) / 2.0f - 0.5f;
        float sy = (y + 0.5f) / 2.0f - 0.5f;
        sx = std::clamp(sx, 0.0f, static_cast<float>(coarse.w - 1));
        sy = std::clamp(sy, 0.0f, static_cast<float>(coarse.h - 1));
        const int x0 = static_cast<int>(sx), y0 = static_cast<int>(sy);
        const int x1 = std::min(x0 + 1, coarse.w - 1), y1 = std::min(y0 + 1, coarse.h - 1);
        const float fx = sx - x0, fy = sy - y0;
        for (int c = 0; c < 3; ++c) {
          auto cval = [&](int yy, int xx) {
            return coarse.val[(static_cast<std::size_t>(yy) * coarse.w + xx) * 3 + c];
          };
          const float top = cval(y0, x0) + fx * (cval(y0, x1) - cval(y0, x0));
          const float bot = cval(y1, x0) + fx * (cval(y1, x1) - cval(y1, x0));
          const float up = top + fy * (bot - top);
          fine.val[idx * 3 + c] = wv * fine.val[idx * 3 + c] + (1.0f - wv) * up;
        }
        fine.wgt[idx] = 1.0f;
      }
  }

  Frame out(f.height(), f.width());
  for (int y = 0; y < out.height(); ++y) {
    float* dst = out.row(y);
    const float* src = f.row(y);
    for (int x = 0; x < out.width(); ++x) {
      const bool known = unknown.at(y, x) <= 0.0f;
      for (int c = 0; c < 3; ++c)
        dst[x * 3 + c] = known
                             ? src[x * 3 + c]
                             : levels[0].val[(static_cast<std::size_t>(y) * out.width() + x) * 3 + c];
    }
  }
  return out;
}

}  // namespace strav
