#include "strav/spatial_agg.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

namespace strav {

Frame blend_for_refine(const Frame& filled, const Frame& original,
                       const Mask& hole) {
  if (!filled.same_shape(original) || !hole.same_shape(filled))
    throw DimensionMismatch("blend_for_refine: shape mismatch");
  Frame out(filled.height(), filled.width());
  for (int y = 0; y < out.height(); ++y) {
    const float* fa = filled.row(y);
    const float* fb = original.row(y);
    const float* m = hole.row(y);
    float* dst = out.row(y);
    for (int x = 0; x < out.width(); ++x) {
      const float* src = m[x] > 0.0f ? fa : fb;
      dst[x * 3 + 0] = src[x * 3 + 0];
      dst[x * 3 + 1] = src[x * 3 + 1];
      dst[x * 3 + 2] = src[x * 3 + 2];
    }
  }
  return out;
}

namespace {

struct TileGrid {
  int patch, grid_w, grid_h, w, h;
  int x0(int tile) const { return (tile % grid_w) * patch; }
  int y0(int tile) const { return (tile / grid_w) * patch; }
  int tw(int tile) const { return std::min(patch, w - x0(tile)); }
  int th(int tile) const { return std::min(patch, h - y0(tile)); }
};

// Mean feature vector over the tile's pixels.
std::vector<double> pool_tile(const FeatureMap& f, const TileGrid& g, int tile) {
  std::vector<double> v(f.channels, 0.0);
  const int x0 = g.x0(tile), y0 = g.y0(tile);
  const int tw = g.tw(tile), th = g.th(tile);
  for (int c = 0; c < f.channels; ++c)
    for (int y = 0; y < th; ++y)
      for (int x = 0; x < tw; ++x) v[c] += f.at(c, y0 + y, x0 + x);
  for (double& d : v) d /= static_cast<double>(tw * th);
  return v;
}

// Mean feature vector over the known (non-leftover) pixels of the tile's
// 3x3-cell neighborhood; all-zero when that surround is fully unknown.
std::vector<double> pool_surround(const FeatureMap& f, const Mask& leftover,
                                  const TileGrid& g, int tile) {
  std::vector<double> v(f.channels, 0.0);
  const int tx = tile % g.grid_w, ty = tile / g.grid_w;
  const int x0 = std::max(0, (tx - 1) * g.patch);
  const int y0 = std::max(0, (ty - 1) * g.patch);
  const int x1 = std::min(g.w, (tx + 2) * g.patch);
  const int y1 = std::min(g.h, (ty + 2) * g.patch);
  std::size_t n = 0;
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) {
      if (leftover.at(y, x) > 0.0f) continue;
      for (int c = 0; c < f.channels; ++c) v[c] += f.at(c, y, x);
      ++n;
    }
  if (n > 0)
    for (double& d : v) d /= static_cast<double>(n);
  return v;
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na <= 0.0 || nb <= 0.0) return 0.0;
  return dot / std::sqrt(na * nb);
}

}  // namespace

SpatialAttention spatial_attention(const Frame& frame, const Mask& leftover,
                                   int patch, double tau_s,
                                   const Encoder& encoder) {
  if (!leftover.same_shape(frame))
    throw DimensionMismatch("spatial_attention: frame/leftover mismatch");
  if (patch < 2) throw std::invalid_argument("spatial_attention: patch too small");
  if (tau_s <= 0.0)
    throw std::invalid_argument("spatial_attention: tau_s must be positive");

  const int h = frame.height(), w = frame.width();
  TileGrid g{patch, (w + patch - 1) / patch, (h + patch - 1) / patch, w, h};

  SpatialAttention att;
  att.patch = patch;
  att.grid_w = g.grid_w;
  att.grid_h = g.grid_h;

  for (int tile = 0; tile < g.grid_w * g.grid_h; ++tile) {
    bool any = false;
    const int x0 = g.x0(tile), y0 = g.y0(tile);
    for (int y = 0; y < g.th(tile) && !any; ++y)
      for (int x = 0; x < g.tw(tile); ++x)
        if (leftover.at(y0 + y, x0 + x) > 0.0f) {
          any = true;
          break;
        }
    if (any)
      att.hole_patches.push_back(tile);
    else if (g.tw(tile) == patch && g.th(tile) == patch)
      att.context_patches.push_back(tile);
  }

  if (att.hole_patches.empty()) return att;  // nothing to score
  if (att.context_patches.empty())
    throw SpatialContextUnavailable("spatial_attention: no leftover-free patch");

  // Features with leftover as the mask: unknown pixels contribute nothing.
  const FeaturePyramid pyr = encoder ? encoder(frame, leftover, 1)
                                     : encode(frame, leftover, 1);
  const FeatureMap& feat = pyr.levels[0];

  std::vector<std::vector<double>> context_pool;
  context_pool.reserve(att.context_patches.size());
  for (int tile : att.context_patches) context_pool.push_back(pool_tile(feat, g, tile));

  att.scores.resize(att.hole_patches.size());
  for (std::size_t j = 0; j < att.hole_patches.size(); ++j) {
    const std::vector<double> query =
        pool_surround(feat, leftover, g, att.hole_patches[j]);
    std::vector<double> sim(context_pool.size());
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < context_pool.size(); ++i) {
      sim[i] = cosine(query, context_pool[i]);
      best = std::max(best, sim[i]);
    }
    double denom = 0.0;
    for (double& s : sim) {
      s = std::exp((s - best) / tau_s);
      denom += s;
    }
    att.scores[j].resize(sim.size());
    for (std::size_t i = 0; i < sim.size(); ++i)
      att.scores[j][i] = static_cast<float>(sim[i] / denom);
  }
  return att;
}

Frame spatial_transfer(const Frame& frame, const Mask& leftover,
                       const SpatialAttention& att, int feather_px) {
  if (!leftover.same_shape(frame))
    throw DimensionMismatch("spatial_transfer: frame/leftover mismatch");
  if (feather_px < 0) throw std::invalid_argument("spatial_transfer: bad feather");

  const int h = frame.height(), w = frame.width();
  TileGrid g{att.patch, att.grid_w, att.grid_h, w, h};
  Frame out = frame;
  if (att.hole_patches.empty() || att.scores.empty()) return out;

  // Blend ramp: leftover pixels take the replacement fully; known pixels
  // within feather_px of the leftover region take a linearly decaying share.
  std::vector<int> dist(static_cast<std::size_t>(h) * w, -1);
  std::deque<std::pair<int, int>> queue;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (leftover.at(y, x) > 0.0f) {
        dist[static_cast<std::size_t>(y) * w + x] = 0;
        queue.emplace_back(y, x);
      }
  while (!queue.empty()) {
    const auto [y, x] = queue.front();
    queue.pop_front();
    const int d = dist[static_cast<std::size_t>(y) * w + x];
    if (d >= feather_px) continue;
    const int ny[4] = {y - 1, y + 1, y, y};
    const int nx[4] = {x, x, x - 1, x + 1};
    for (int k = 0; k < 4; ++k) {
      if (ny[k] < 0 || ny[k] >= h || nx[k] < 0 || nx[k] >= w) continue;
      int& dn = dist[static_cast<std::size_t>(ny[k]) * w + nx[k]];
      if (dn < 0) {
        dn = d + 1;
        queue.emplace_back(ny[k], nx[k]);
      }
    }
  }

  std::vector<float> rep(static_cast<std::size_t>(att.patch) * att.patch * 3);
  for (std::size_t j = 0; j < att.hole_patches.size(); ++j) {
    const int tile = att.hole_patches[j];
    const int x0 = g.x0(tile), y0 = g.y0(tile);
    const int tw = g.tw(tile), th = g.th(tile);

    // Replacement content for this tile: the score-weighted context blend.
    std::fill(rep.begin(), rep.end(), 0.0f);
    for (std::size_t i = 0; i < att.context_patches.size(); ++i) {
      const float s = att.scores[j][i];
      if (s <= 0.0f) continue;
      const int cx0 = g.x0(att.context_patches[i]);
      const int cy0 = g.y0(att.context_patches[i]);
      for (int y = 0; y < th; ++y)
        for (int x = 0; x < tw; ++x)
          for (int c = 0; c < 3; ++c)
            rep[(static_cast<std::size_t>(y) * att.patch + x) * 3 + c] +=
                s * frame.at(cy0 + y, cx0 + x, c);
    }

    for (int y = 0; y < th; ++y)
      for (int x = 0; x < tw; ++x) {
        const int py = y0 + y, px = x0 + x;
        const int d = dist[static_cast<std::size_t>(py) * w + px];
        float alpha;
        if (d == 0)
          alpha = 1.0f;
        else if (feather_px > 0 && d > 0 && d <= feather_px)
          alpha = 1.0f - static_cast<float>(d) / (feather_px + 1);
        else
          continue;
        const float* rv = &rep[(static_cast<std::size_t>(y) * att.patch + x) * 3];
        for (int c = 0; c < 3; ++c)
          out.at(py, px, c) = alpha * rv[c] + (1.0f - alpha) * frame.at(py, px, c);
      }
  }
  return out;
}

}  // namespace strav
