#include "strav/temporal_agg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "strav/pyramid.hpp"

namespace strav {

VisibilityMaps visibility(const Mask& target_mask, const AlignedReference& ref) {
  if (!target_mask.same_shape(ref.frame))
    throw DimensionMismatch("visibility: target/reference shape mismatch");
  const int h = target_mask.height(), w = target_mask.width();
  VisibilityMaps out{Mask(h, w), Mask(h, w)};
  for (int y = 0; y < h; ++y) {
    const float* tm = target_mask.row(y);
    const float* rm = ref.mask.row(y);
    const float* rv = ref.validity.row(y);
    float* match = out.match.row(y);
    float* donate = out.donate.row(y);
    for (int x = 0; x < w; ++x) {
      const float d = (rm[x] <= 0.0f && rv[x] > 0.0f) ? 1.0f : 0.0f;
      donate[x] = d;
      match[x] = (tm[x] <= 0.0f) ? d : 0.0f;
    }
  }
  return out;
}

double similarity(const FeatureMap& f_target, const FeatureMap& f_ref,
                  const Mask& v_match) {
  if (f_target.h != f_ref.h || f_target.w != f_ref.w ||
      f_target.channels != f_ref.channels)
    throw DimensionMismatch("similarity: feature shape mismatch");
  if (v_match.height() != f_target.h || v_match.width() != f_target.w)
    throw DimensionMismatch("similarity: visibility shape mismatch");

  double acc = 0.0;
  std::size_t n = 0;
  for (int y = 0; y < f_target.h; ++y)
    for (int x = 0; x < f_target.w; ++x) {
      if (v_match.at(y, x) <= 0.0f) continue;
      double dot = 0.0, na = 0.0, nb = 0.0;
      for (int c = 0; c < f_target.channels; ++c) {
        const double a = f_target.at(c, y, x);
        const double b = f_ref.at(c, y, x);
        dot += a * b;
        na += a * a;
        nb += b * b;
      }
      if (na > 0.0 && nb > 0.0) acc += dot / std::sqrt(na * nb);
      ++n;
    }
  if (n == 0)
    throw std::invalid_argument("similarity: empty visibility (exclude this ref)");
  return acc / static_cast<double>(n);
}

std::vector<Mask> masked_softmax(const std::vector<double>& scores,
                                 const std::vector<Mask>& v_donate, double tau) {
  if (scores.size() != v_donate.size())
    throw DimensionMismatch("masked_softmax: score/visibility count mismatch");
  if (tau <= 0.0) throw std::invalid_argument("masked_softmax: tau must be positive");
  const int n = static_cast<int>(scores.size());
  std::vector<Mask> weights;
  if (n == 0) return weights;

  const int h = v_donate[0].height(), w = v_donate[0].width();
  for (const Mask& m : v_donate)
    if (m.height() != h || m.width() != w)
      throw DimensionMismatch("masked_softmax: visibility shape mismatch");

  weights.reserve(n);
  for (int i = 0; i < n; ++i) weights.emplace_back(h, w, 0.0f);

  std::vector<double> e(n);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      // Stabilized softmax over the references able to donate at this pixel.
      double best = -std::numeric_limits<double>::infinity();
      for (int i = 0; i < n; ++i)
        if (v_donate[i].at(y, x) > 0.0f) best = std::max(best, scores[i]);
      if (best == -std::numeric_limits<double>::infinity()) continue;
      double denom = 0.0;
      for (int i = 0; i < n; ++i) {
        if (v_donate[i].at(y, x) > 0.0f) {
          e[i] = std::exp((scores[i] - best) / tau);
          denom += e[i];
        } else {
          e[i] = 0.0;
        }
      }
      for (int i = 0; i < n; ++i)
        if (e[i] > 0.0) weights[i].at(y, x) = static_cast<float>(e[i] / denom);
    }
  return weights;
}

Mask coverage(const std::vector<Mask>& weights) {
  if (weights.empty()) throw std::invalid_argument("coverage: no weight maps");
  Mask out(weights[0].height(), weights[0].width(), 0.0f);
  for (const Mask& wm : weights) {
    if (!wm.same_shape(out)) throw DimensionMismatch("coverage: shape mismatch");
    for (std::size_t i = 0; i < out.data().size(); ++i) out.data()[i] += wm.data()[i];
  }
  for (float& v : out.data()) v = std::clamp(v, 0.0f, 1.0f);
  return out;
}

FeatureMap attention_transfer(const std::vector<const FeatureMap*>& ref_features,
                              const std::vector<Mask>& weights, int factor) {
  if (ref_features.size() != weights.size() || ref_features.empty())
    throw DimensionMismatch("attention_transfer: ref/weight count mismatch");
  const FeatureMap& first = *ref_features[0];
  FeatureMap out(first.channels, first.h, first.w);
  for (std::size_t i = 0; i < ref_features.size(); ++i) {
    const FeatureMap& f = *ref_features[i];
    const Mask& wm = weights[i];
    if (f.h != first.h || f.w != first.w || f.channels != first.channels)
      throw DimensionMismatch("attention_transfer: feature shape mismatch");
    if (wm.height() * factor != f.h || wm.width() * factor != f.w)
      throw DimensionMismatch("attention_transfer: weight/feature scale mismatch");
    for (int c = 0; c < f.channels; ++c)
      for (int y = 0; y < f.h; ++y)
        for (int x = 0; x < f.w; ++x) {
          const float s = wm.at(y / factor, x / factor);
          if (s > 0.0f) out.at(c, y, x) += s * f.at(c, y, x);
        }
  }
  return out;
}

Frame pixel_transfer(const std::vector<const Frame*>& refs,
                     const std::vector<Mask>& weights, int factor) {
  if (refs.size() != weights.size() || refs.empty())
    throw DimensionMismatch("pixel_transfer: ref/weight count mismatch");
  const Frame& first = *refs[0];
  Frame out(first.height(), first.width());
  for (std::size_t i = 0; i < refs.size(); ++i) {
    const Frame& f = *refs[i];
    const Mask& wm = weights[i];
    if (!f.same_shape(first))
      throw DimensionMismatch("pixel_transfer: frame shape mismatch");
    if (wm.height() * factor != f.height() || wm.width() * factor != f.width())
      throw DimensionMismatch("pixel_transfer: weight/frame scale mismatch");
    for (int y = 0; y < f.height(); ++y) {
      const float* src = f.row(y);
      const float* wrow = wm.row(y / factor);
      float* dst = out.row(y);
      for (int x = 0; x < f.width(); ++x) {
        const float s = wrow[x / factor];
        if (s > 0.0f)
          for (int c = 0; c < 3; ++c) dst[x * 3 + c] += s * src[x * 3 + c];
      }
    }
  }
  return out;
}

//------------------------------------------------------------------------------
// Full temporal stage
//------------------------------------------------------------------------------

TemporalResult temporal_inpaint(const Frame& target, const Mask& target_mask,
                                const std::vector<AlignedReference>& refs,
                                const TemporalConfig& cfg) {
  if (refs.empty()) throw NoUsableReference("temporal_inpaint: no aligned references");
  if (!target_mask.same_shape(target))
    throw DimensionMismatch("temporal_inpaint: target/mask mismatch");

  const Encoder enc = cfg.encoder ? cfg.encoder
                                  : Encoder([](const Frame& f, const Mask& m, int l) {
                                      return encode(f, m, l);
                                    });

  const FeaturePyramid f_target = enc(target, target_mask, cfg.pyramid_levels);
  const int factor = f_target.lowest_factor();
  const int lh = f_target.lowest().h, lw = f_target.lowest().w;

  TemporalAttention att;
  att.temperature = cfg.tau;
  att.factor = factor;

  // Per-reference similarity over match-visible pixels at the lowest level.
  std::vector<Mask> donate_low;
  for (std::size_t i = 0; i < refs.size(); ++i) {
    const AlignedReference& ar = refs[i];
    if (!ar.frame.same_shape(target))
      throw DimensionMismatch("temporal_inpaint: reference resolution mismatch");

    const VisibilityMaps vis = visibility(target_mask, ar);
    const Mask match_low = downsample_visibility(vis.match, factor);
    if (match_low.count_nonzero() == 0) continue;  // similarity undefined

    Mask donor_hole = invert(vis.donate);  // holes U invalid, as one mask
    const FeaturePyramid f_ref = enc(ar.frame, donor_hole, cfg.pyramid_levels);

    att.ref_slots.push_back(static_cast<int>(i));
    att.similarities.push_back(
        similarity(f_target.lowest(), f_ref.lowest(), match_low));
    donate_low.push_back(downsample_visibility(vis.donate, factor));
  }

  TemporalResult res;
  if (att.ref_slots.empty()) {
    // References exist but none overlaps the target's visible content; the
    // whole hole is leftover.
    att.c_visible = Mask(lh, lw, 0.0f);
    res.leftover = binarize(target_mask, 0.0f);
    res.y = push_pull_fill(target, res.leftover);
    res.attention = std::move(att);
    return res;
  }

  att.weights = masked_softmax(att.similarities, donate_low, cfg.tau);
  att.visibility = std::move(donate_low);
  att.c_visible = coverage(att.weights);

  // Fill hole pixels with the weighted reference blend wherever coverage
  // clears the threshold.
  std::vector<const Frame*> ref_frames;
  ref_frames.reserve(att.ref_slots.size());
  for (int slot : att.ref_slots) ref_frames.push_back(&refs[slot].frame);
  const Frame transfer = pixel_transfer(ref_frames, att.weights, factor);

  const int h = target.height(), w = target.width();
  res.y = target;
  res.leftover = Mask(h, w, 0.0f);
  for (int y = 0; y < h; ++y) {
    const float* tm = target_mask.row(y);
    const float* cvis = att.c_visible.row(y / factor);
    const float* tr = transfer.row(y);
    float* dst = res.y.row(y);
    float* lo = res.leftover.row(y);
    for (int x = 0; x < w; ++x) {
      if (tm[x] <= 0.0f) continue;  // non-hole pixels stay bit-identical
      if (cvis[x / factor] > cfg.visible_threshold) {
        for (int c = 0; c < 3; ++c) dst[x * 3 + c] = tr[x * 3 + c];
      } else {
        lo[x] = 1.0f;
      }
    }
  }
  res.y = push_pull_fill(res.y, res.leftover);
  res.attention = std::move(att);
  return res;
}

}  // namespace strav
