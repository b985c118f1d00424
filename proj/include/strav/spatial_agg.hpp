#pragma once

#include <vector>

#include "strav/core.hpp"
#include "strav/features.hpp"

namespace strav {

//==============================================================================
// Spatial aggregation: patch attention inside one frame.
//
// The frame is tiled into non-overlapping patch x patch cells. Cells touching
// the leftover region are "hole patches"; cells with zero leftover overlap
// are "context patches". Each hole patch scores every context patch by the
// cosine similarity of pooled encoder features (the hole patch is represented
// by its known surround: the non-leftover pixels of its 3x3-cell
// neighborhood, falling back to a zero query if that surround is fully
// unknown). Scores are soft-maxed at temperature tau_s and the winning blend
// of context content is written into the leftover pixels.
//==============================================================================

struct SpatialAttention {
  int patch = 8;
  int grid_w = 0, grid_h = 0;
  std::vector<int> hole_patches;     // flat tile indices (y * grid_w + x)
  std::vector<int> context_patches;
  // scores[j][i]: weight of context patch i for hole patch j; rows sum to 1.
  std::vector<std::vector<float>> scores;
};

// Composition used between the stages: filled content inside the original
// hole, original pixels outside it.
Frame blend_for_refine(const Frame& filled, const Frame& original,
                       const Mask& hole);

// Throws SpatialContextUnavailable when no patch is leftover-free.
// Edge tiles narrower than `patch` can be hole patches but are excluded from
// the context set so every donor patch has full size.
SpatialAttention spatial_attention(const Frame& frame, const Mask& leftover,
                                   int patch, double tau_s,
                                   const Encoder& encoder = {});

// Writes each hole patch's weighted context blend into its leftover pixels.
// Seams are hidden by a `feather_px`-pixel linear ramp that may also touch
// non-leftover pixels of hole patches within that distance of the leftover
// region (the only writable halo; pass 0 for hard-edged output). Pixels
// elsewhere are bit-identical to the input.
Frame spatial_transfer(const Frame& frame, const Mask& leftover,
                       const SpatialAttention& att, int feather_px = 2);

}  // namespace strav
