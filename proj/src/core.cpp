#include "strav/core.hpp"

#include <algorithm>
#include <cmath>

namespace strav {

namespace memtrack {

namespace {
std::atomic<std::size_t> g_live{0};
std::atomic<std::size_t> g_peak{0};
}  // namespace

std::size_t live_bytes() { return g_live.load(std::memory_order_relaxed); }
std::size_t peak_bytes() { return g_peak.load(std::memory_order_relaxed); }

void reset_peak() { g_peak.store(g_live.load(std::memory_order_relaxed)); }

namespace detail {

void add(std::size_t n) {
  const std::size_t live = g_live.fetch_add(n, std::memory_order_relaxed) + n;
  // Racy max update is fine: callers only need a stable upper bound once the
  // workload has quiesced, and tests read it single-threaded.
  std::size_t peak = g_peak.load(std::memory_order_relaxed);
  while (live > peak &&
         !g_peak.compare_exchange_weak(peak, live, std::memory_order_relaxed)) {
  }
}

void sub(std::size_t n) { g_live.fetch_sub(n, std::memory_order_relaxed); }

}  // namespace detail

}  // namespace memtrack

Frame Frame::constant(int height, int width, float r, float g, float b) {
  Frame f(height, width);
  for (int y = 0; y < height; ++y) {
    float* p = f.row(y);
    for (int x = 0; x < width; ++x) {
      p[x * 3 + 0] = r;
      p[x * 3 + 1] = g;
      p[x * 3 + 2] = b;
    }
  }
  return f;
}

bool Frame::is_finite() const {
  for (float v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

bool Mask::is_binary() const {
  for (float v : data_)
    if (v != 0.0f && v != 1.0f) return false;
  return true;
}

std::size_t Mask::count_nonzero() const {
  std::size_t n = 0;
  for (float v : data_)
    if (v > 0.0f) ++n;
  return n;
}

PaddedInput pad_to_multiple(const Frame& frame, const Mask& mask, int multiple) {
  if (multiple <= 0) throw DimensionMismatch("pad_to_multiple: multiple must be positive");
  if (!mask.same_shape(frame))
    throw DimensionMismatch("pad_to_multiple: frame/mask shape mismatch");

  const int h = frame.height(), w = frame.width();
  const int ph = ((h + multiple - 1) / multiple) * multiple;
  const int pw = ((w + multiple - 1) / multiple) * multiple;

  PaddedInput out;
  out.record = PadRecord{0, ph - h, 0, pw - w};
  out.frame = Frame(ph, pw);
  out.mask = Mask(ph, pw, 0.0f);

  for (int y = 0; y < ph; ++y) {
    const int sy = y < h ? y : h - 1;
    const float* src = frame.row(sy);
    const float* srcm = mask.row(sy);
    float* dst = out.frame.row(y);
    float* dstm = out.mask.row(y);
    for (int x = 0; x < pw; ++x) {
      const int sx = x < w ? x : w - 1;
      dst[x * 3 + 0] = src[sx * 3 + 0];
      dst[x * 3 + 1] = src[sx * 3 + 1];
      dst[x * 3 + 2] = src[sx * 3 + 2];
      // Replicated border pixels are known content, never hole.
      dstm[x] = (y < h && x < w) ? srcm[sx] : 0.0f;
    }
  }
  return out;
}

Frame unpad(const Frame& frame, const PadRecord& rec) {
  const int h = frame.height() - rec.top - rec.bottom;
  const int w = frame.width() - rec.left - rec.right;
  if (h <= 0 || w <= 0) throw DimensionMismatch("unpad: record larger than frame");
  Frame out(h, w);
  for (int y = 0; y < h; ++y) {
    const float* src = frame.row(y + rec.top);
    float* dst = out.row(y);
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) dst[x * 3 + c] = src[(x + rec.left) * 3 + c];
  }
  return out;
}

Mask unpad(const Mask& mask, const PadRecord& rec) {
  const int h = mask.height() - rec.top - rec.bottom;
  const int w = mask.width() - rec.left - rec.right;
  if (h <= 0 || w <= 0) throw DimensionMismatch("unpad: record larger than mask");
  Mask out(h, w);
  for (int y = 0; y < h; ++y) {
    const float* src = mask.row(y + rec.top);
    float* dst = out.row(y);
    for (int x = 0; x < w; ++x) dst[x] = src[x + rec.left];
  }
  return out;
}

Frame elementwise_mul(const Frame& f, const Mask& m) {
  if (!m.same_shape(f)) throw DimensionMismatch("elementwise_mul: shape mismatch");
  Frame out(f.height(), f.width());
  for (int y = 0; y < f.height(); ++y) {
    const float* src = f.row(y);
    const float* w = m.row(y);
    float* dst = out.row(y);
    for (int x = 0; x < f.width(); ++x)
      for (int c = 0; c < 3; ++c) dst[x * 3 + c] = src[x * 3 + c] * w[x];
  }
  return out;
}

Mask elementwise_mul(const Mask& a, const Mask& b) {
  if (!a.same_shape(b)) throw DimensionMismatch("elementwise_mul: shape mismatch");
  Mask out(a.height(), a.width());
  for (std::size_t i = 0; i < out.data().size(); ++i)
    out.data()[i] = a.data()[i] * b.data()[i];
  return out;
}

Mask invert(const Mask& m) {
  Mask out(m.height(), m.width());
  for (std::size_t i = 0; i < out.data().size(); ++i)
    out.data()[i] = 1.0f - m.data()[i];
  return out;
}

Mask binarize(const Mask& m, float threshold) {
  Mask out(m.height(), m.width());
  for (std::size_t i = 0; i < out.data().size(); ++i)
    out.data()[i] = m.data()[i] > threshold ? 1.0f : 0.0f;
  return out;
}

Mask dilate(const Mask& m, int radius) {
  if (radius <= 0) return m;
  const int h = m.height(), w = m.width();
  // Separable box dilation: horizontal max then vertical max.
  Mask mid(h, w);
  for (int y = 0; y < h; ++y) {
    const float* src = m.row(y);
    float* dst = mid.row(y);
    for (int x = 0; x < w; ++x) {
      float v = 0.0f;
      const int x0 = std::max(0, x - radius), x1 = std::min(w - 1, x + radius);
      for (int xx = x0; xx <= x1 && v == 0.0f; ++xx)
        if (src[xx] > 0.0f) v = 1.0f;
      dst[x] = v;
    }
  }
  Mask out(h, w);
  for (int y = 0; y < h; ++y) {
    float* dst = out.row(y);
    const int y0 = std::max(0, y - radius), y1 = std::min(h - 1, y + radius);
    for (int x = 0; x < w; ++x) {
      float v = 0.0f;
      for (int yy = y0; yy <= y1 && v == 0.0f; ++yy)
        if (mid.at(yy, x) > 0.0f) v = 1.0f;
      dst[x] = v;
    }
  }
  return out;
}

}  // namespace strav
