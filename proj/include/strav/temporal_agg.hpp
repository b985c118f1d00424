#pragma once

#include <vector>

#include "strav/alignment.hpp"
#include "strav/core.hpp"
#include "strav/features.hpp"

namespace strav {

//==============================================================================
// Temporal aggregation: attention over aligned references.
//
// Per reference, a scalar similarity to the target is computed over jointly
// visible pixels; per pixel, the similarities of the references able to
// donate there are soft-maxed into transfer weights. Weight maps live at the
// lowest feature-pyramid level and are nearest-upsampled wherever finer
// resolutions need them.
//==============================================================================

struct VisibilityMaps {
  Mask match;   // target non-hole AND reference non-hole AND valid
  Mask donate;  // reference non-hole AND valid
};

// At the aligned reference's resolution (the target grid).
VisibilityMaps visibility(const Mask& target_mask, const AlignedReference& ref);

// Mean cosine similarity of per-pixel L2-normalized feature vectors over
// pixels where v_match is 1. Zero-norm vectors count as zero similarity.
// Result lies in [-1, 1]. Throws std::invalid_argument when v_match is empty
// (callers must exclude such references instead).
double similarity(const FeatureMap& f_target, const FeatureMap& f_ref,
                  const Mask& v_match);

// Per-pixel softmax of per-reference scalar scores, restricted to references
// whose donate map is 1 at the pixel. Returns one weight map per reference;
// weights at a pixel sum to 1 where any reference donates, and are exactly 0
// elsewhere (and wherever that reference cannot donate).
std::vector<Mask> masked_softmax(const std::vector<double>& scores,
                                 const std::vector<Mask>& v_donate, double tau);

// Sum of per-reference weights clamped to [0, 1]: where any aligned content
// is available.
Mask coverage(const std::vector<Mask>& weights);

// Weighted per-pixel blend of reference feature maps. Weight maps are
// nearest-upsampled by `factor` to the feature resolution.
FeatureMap attention_transfer(const std::vector<const FeatureMap*>& ref_features,
                              const std::vector<Mask>& weights, int factor);

// Same blend on RGB frames.
Frame pixel_transfer(const std::vector<const Frame*>& refs,
                     const std::vector<Mask>& weights, int factor);

struct TemporalAttention {
  std::vector<int> ref_slots;      // indices into the aligned-reference list
  std::vector<double> similarities;
  std::vector<Mask> visibility;    // per-ref donate maps (lowest level)
  std::vector<Mask> weights;       // per-ref weight maps (lowest level)
  Mask c_visible;                  // coverage at the lowest level
  double temperature = 0.5;
  int factor = 4;                  // lowest level -> target resolution
};

struct TemporalResult {
  Frame y;          // target with hole pixels filled where possible
  Mask leftover;    // hole pixels no reference could donate to
  TemporalAttention attention;
};

struct TemporalConfig {
  double tau = 0.5;
  double visible_threshold = 1e-3;
  int pyramid_levels = 3;
  Encoder encoder;  // defaults to encode()
};

// Full temporal stage. Non-hole pixels of the result are bit-identical to
// the target; leftover pixels are pre-filled by push-pull diffusion.
TemporalResult temporal_inpaint(const Frame& target, const Mask& target_mask,
                                const std::vector<AlignedReference>& refs,
                                const TemporalConfig& cfg);

}  // namespace strav
