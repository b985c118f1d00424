#include "strav/residual_agg.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <variant>

#include "strav/pyramid.hpp"

namespace strav {

AffineTransform rescale_affine(const AffineTransform& t, int s) {
  AffineTransform r = t;
  r.tx *= static_cast<double>(s);
  r.ty *= static_cast<double>(s);
  return r;
}

FlowField rescale_flow(const FlowField& f, int s) {
  FlowField out(f.h * s, f.w * s);
  for (int y = 0; y < out.h; ++y) {
    double sy = (y + 0.5) / s - 0.5;
    sy = std::clamp(sy, 0.0, static_cast<double>(f.h - 1));
    const int y0 = static_cast<int>(sy);
    const int y1 = std::min(y0 + 1, f.h - 1);
    const double fy = sy - y0;
    for (int x = 0; x < out.w; ++x) {
      double sx = (x + 0.5) / s - 0.5;
      sx = std::clamp(sx, 0.0, static_cast<double>(f.w - 1));
      const int x0 = static_cast<int>(sx);
      const int x1 = std::min(x0 + 1, f.w - 1);
      const double fx = sx - x0;
      const double u = (1 - fy) * ((1 - fx) * f.ux(y0, x0) + fx * f.ux(y0, x1)) +
                       fy * ((1 - fx) * f.ux(y1, x0) + fx * f.ux(y1, x1));
      const double v = (1 - fy) * ((1 - fx) * f.vy(y0, x0) + fx * f.vy(y0, x1)) +
                       fy * ((1 - fx) * f.vy(y1, x0) + fx * f.vy(y1, x1));
      out.ux(y, x) = static_cast<float>(u * s);
      out.vy(y, x) = static_cast<float>(v * s);
    }
  }
  return out;
}

Warp rescale_warp(const Warp& w, int s) {
  if (const auto* a = std::get_if<AffineTransform>(&w)) return rescale_affine(*a, s);
  return rescale_flow(std::get<FlowField>(w), s);
}

namespace {

bool in_bounds(double x, double y, int w, int h) {
  return x >= 0.0 && y >= 0.0 && x <= w - 1.0 && y <= h - 1.0;
}

float sample_frame(const Frame& f, double sy, double sx, int c) {
  const int x0 = static_cast<int>(std::floor(sx));
  const int y0 = static_cast<int>(std::floor(sy));
  const int x1 = std::min(x0 + 1, f.width() - 1);
  const int y1 = std::min(y0 + 1, f.height() - 1);
  const double fx = sx - x0, fy = sy - y0;
  return static_cast<float>(
      (1 - fy) * ((1 - fx) * f.at(y0, x0, c) + fx * f.at(y0, x1, c)) +
      fy * ((1 - fx) * f.at(y1, x0, c) + fx * f.at(y1, x1, c)));
}

float sample_mask(const Mask& m, double sy, double sx) {
  const int x0 = static_cast<int>(std::floor(sx));
  const int y0 = static_cast<int>(std::floor(sy));
  const int x1 = std::min(x0 + 1, m.width() - 1);
  const int y1 = std::min(y0 + 1, m.height() - 1);
  const double fx = sx - x0, fy = sy - y0;
  return static_cast<float>(
      (1 - fy) * ((1 - fx) * m.at(y0, x0) + fx * m.at(y0, x1)) +
      fy * ((1 - fx) * m.at(y1, x0) + fx * m.at(y1, x1)));
}

// Marks every full-res pixel whose residual value is influenced by hole
// content: the residual subtracts the bilinear upsample of the block means,
// so a pixel is tainted when any low-res cell in its upsample support
// contains a hole pixel.
Mask residual_taint(const Mask& donor_hole, int s) {
  const int H = donor_hole.height(), W = donor_hole.width();
  const Mask cells = downsample_mask(donor_hole, s);  // any hole -> 1
  const int ch = cells.height(), cw = cells.width();
  Mask out(H, W, 0.0f);
  for (int y = 0; y < H; ++y) {
    double sy = (y + 0.5) / s - 0.5;
    sy = std::clamp(sy, 0.0, static_cast<double>(ch - 1));
    const int y0 = static_cast<int>(sy);
    const int y1 = std::min(y0 + 1, ch - 1);
    for (int x = 0; x < W; ++x) {
      double sx = (x + 0.5) / s - 0.5;
      sx = std::clamp(sx, 0.0, static_cast<double>(cw - 1));
      const int x0 = static_cast<int>(sx);
      const int x1 = std::min(x0 + 1, cw - 1);
      if (cells.at(y0, x0) > 0.0f || cells.at(y0, x1) > 0.0f ||
          cells.at(y1, x0) > 0.0f || cells.at(y1, x1) > 0.0f)
        out.at(y, x) = 1.0f;
    }
  }
  return out;
}

// Adds one donor's weighted residual samples into `out` over the zone.
// The warp passed here is already at full resolution; `donor_hole`, when
// present, is the taint mask from residual_taint.
void accumulate_donor(Frame& out, const Mask& zone, const Frame& residual,
                      const Mask* donor_hole, const Warp& warp,
                      const Mask& weights, int weight_factor) {
  if (!zone.same_shape(out))
    throw DimensionMismatch("residual zone does not match frame");
  if (weights.height() * weight_factor != out.height() ||
      weights.width() * weight_factor != out.width())
    throw DimensionMismatch("weight map does not cover the frame");
  const auto* aff = std::get_if<AffineTransform>(&warp);
  const auto* flow = std::get_if<FlowField>(&warp);
  if (flow && (flow->h != out.height() || flow->w != out.width()))
    throw DimensionMismatch("flow field does not match frame");
  for (int y = 0; y < out.height(); ++y) {
    for (int x = 0; x < out.width(); ++x) {
      if (zone.at(y, x) <= 0.0f) continue;
      const float wgt = weights.at(y / weight_factor, x / weight_factor);
      if (wgt <= 0.0f) continue;
      double sx, sy;
      if (aff) {
        sx = aff->a11 * x + aff->a12 * y + aff->tx;
        sy = aff->a21 * x + aff->a22 * y + aff->ty;
      } else {
        sx = x + flow->ux(y, x);
        sy = y + flow->vy(y, x);
      }
      if (!in_bounds(sx, sy, residual.width(), residual.height())) continue;
      if (donor_hole && sample_mask(*donor_hole, sy, sx) > 0.0f) continue;
      for (int c = 0; c < 3; ++c)
        out.at(y, x, c) += wgt * sample_frame(residual, sy, sx, c);
    }
  }
}

}  // namespace

Frame temporal_residual_aggregate(const Frame& base, const Mask& temporal_zone,
                                  const std::vector<ResidualDonor>& donors,
                                  int scale, int weight_factor) {
  Frame out = base;
  for (const ResidualDonor& d : donors) {
    if (!d.residual || !d.weights)
      throw std::invalid_argument("residual donor missing buffers");
    if (!d.residual->same_shape(base))
      throw DimensionMismatch("donor residual does not match frame");
    const Warp full = rescale_warp(d.warp, scale);
    if (d.mask && d.mask->count_nonzero() > 0) {
      const Mask taint = residual_taint(*d.mask, scale);
      accumulate_donor(out, temporal_zone, *d.residual, &taint, full,
                       *d.weights, weight_factor);
    } else {
      accumulate_donor(out, temporal_zone, *d.residual, nullptr, full,
                       *d.weights, weight_factor);
    }
  }
  return out;
}

Frame spatial_residual_aggregate(const Frame& base, const Mask& leftover_zone,
                                 const Frame& target_residual,
                                 const SpatialAttention& att, int scale) {
  if (!leftover_zone.same_shape(base) || !target_residual.same_shape(base))
    throw DimensionMismatch("spatial residual inputs disagree");
  const int pf = att.patch * scale;
  const int w = base.width(), h = base.height();
  if (att.grid_w != (w + pf - 1) / pf || att.grid_h != (h + pf - 1) / pf)
    throw DimensionMismatch("attention grid does not tile the frame");
  Frame out = base;
  std::vector<float> rep;
  for (std::size_t j = 0; j < att.hole_patches.size(); ++j) {
    const int tile = att.hole_patches[j];
    const int x0 = (tile % att.grid_w) * pf;
    const int y0 = (tile / att.grid_w) * pf;
    const int tw = std::min(pf, w - x0);
    const int th = std::min(pf, h - y0);
    bool any = false;
    for (int y = 0; y < th && !any; ++y)
      for (int x = 0; x < tw; ++x)
        if (leftover_zone.at(y0 + y, x0 + x) > 0.0f) { any = true; break; }
    if (!any) continue;
    // Weighted blend of the context patches' residual detail.
    rep.assign(static_cast<std::size_t>(th) * tw * 3, 0.0f);
    for (std::size_t i = 0; i < att.context_patches.size(); ++i) {
      const float s = att.scores[j][i];
      if (s <= 0.0f) continue;
      const int ct = att.context_patches[i];
      const int cx0 = (ct % att.grid_w) * pf;
      const int cy0 = (ct / att.grid_w) * pf;
      for (int y = 0; y < th; ++y)
        for (int x = 0; x < tw; ++x)
          for (int c = 0; c < 3; ++c)
            rep[(static_cast<std::size_t>(y) * tw + x) * 3 + c] +=
                s * target_residual.at(cy0 + y, cx0 + x, c);
    }
    for (int y = 0; y < th; ++y)
      for (int x = 0; x < tw; ++x) {
        if (leftover_zone.at(y0 + y, x0 + x) <= 0.0f) continue;
        for (int c = 0; c < 3; ++c)
          out.at(y0 + y, x0 + x, c) +=
              rep[(static_cast<std::size_t>(y) * tw + x) * 3 + c];
      }
  }
  return out;
}

HighResAssembly assemble(const Frame& x_raw, const Mask& mask_raw,
                         const Frame& y_low, const Mask& leftover_low,
                         const TemporalAttention& attention,
                         const std::vector<AlignedReference>& aligned,
                         const SpatialAttention& spatial,
                         const DonorLoader& donors, const AssembleConfig& cfg) {
  const int s = cfg.scale;
  const int H = x_raw.height(), W = x_raw.width();
  if (H != y_low.height() * s || W != y_low.width() * s)
    throw DimensionMismatch("low-res result does not match full resolution");
  if (!mask_raw.same_shape(x_raw) || !leftover_low.same_shape(y_low))
    throw DimensionMismatch("mask dimensions disagree");

  HighResAssembly as;

  // Base: smooth upsample of the refined low-res frame inside the hole,
  // untouched input pixels outside it.
  const Frame up = upsample(y_low, s);
  as.base = x_raw;
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x)
      if (mask_raw.at(y, x) > 0.0f)
        for (int c = 0; c < 3; ++c) as.base.at(y, x, c) = up.at(y, x, c);

  // Zones: each hole pixel belongs to exactly one of the two. A hole pixel's
  // low-res cell is always a hole cell, so the cell is either covered by
  // references (temporal) or marked leftover; the upsampled indicators split
  // the full-res hole along that line.
  const Mask covered_low =
      upsample_mask_nearest(binarize(attention.c_visible,
                                     static_cast<float>(cfg.visible_threshold)),
                            attention.factor);
  if (!covered_low.same_shape(y_low))
    throw DimensionMismatch("coverage map does not match low resolution");
  const Mask covered_full = upsample_mask_nearest(covered_low, s);
  const Mask leftover_full = upsample_mask_nearest(leftover_low, s);
  as.temporal_zone = Mask(H, W, 0.0f);
  as.leftover_zone = Mask(H, W, 0.0f);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      if (mask_raw.at(y, x) <= 0.0f) continue;
      if (leftover_full.at(y, x) > 0.0f)
        as.leftover_zone.at(y, x) = 1.0f;
      else if (covered_full.at(y, x) > 0.0f)
        as.temporal_zone.at(y, x) = 1.0f;
      else
        as.leftover_zone.at(y, x) = 1.0f;  // uncovered and unmarked: leftover
    }

  as.result = as.base;

  if (cfg.temporal_residuals && !attention.ref_slots.empty() &&
      as.temporal_zone.count_nonzero() > 0) {
    // Group attention entries by source frame so each donor is loaded and
    // decomposed exactly once, then freed (one full-res donor in memory at a
    // time).
    std::map<int, std::vector<int>> by_source;
    for (std::size_t k = 0; k < attention.ref_slots.size(); ++k) {
      const int slot = attention.ref_slots[k];
      by_source[aligned[static_cast<std::size_t>(slot)].source_index].push_back(
          static_cast<int>(k));
    }
    const int weight_factor = attention.factor * s;
    for (const auto& [source, entries] : by_source) {
      const RefFrameData data = donors(source);
      if (!data.frame.same_shape(x_raw))
        throw DimensionMismatch("donor frame does not match full resolution");
      const ResidualDecomposition dec = decompose(data.frame, s);
      const bool holey = data.mask.count_nonzero() > 0;
      const Mask taint = holey ? residual_taint(data.mask, s) : Mask();
      for (int k : entries) {
        const int slot = attention.ref_slots[static_cast<std::size_t>(k)];
        const Warp full =
            rescale_warp(aligned[static_cast<std::size_t>(slot)].warp, s);
        accumulate_donor(as.result, as.temporal_zone, dec.residual,
                         holey ? &taint : nullptr, full,
                         attention.weights[static_cast<std::size_t>(k)],
                         weight_factor);
      }
    }
  }

  if (cfg.spatial_residuals && !spatial.hole_patches.empty() &&
      as.leftover_zone.count_nonzero() > 0) {
    // Borrow detail from the frame as assembled so far: context patches are
    // real content (or temporally filled by now), so their residual carries
    // plausible texture for the leftover region.
    const ResidualDecomposition dec = decompose(as.result, s);
    as.result = spatial_residual_aggregate(as.result, as.leftover_zone,
                                           dec.residual, spatial, s);
  }

  // The pipeline contract: pixels outside the hole are the input, bit for bit.
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x)
      if (mask_raw.at(y, x) <= 0.0f)
        for (int c = 0; c < 3; ++c) as.result.at(y, x, c) = x_raw.at(y, x, c);

  return as;
}

}  // namespace strav
