#pragma once

#include <functional>
#include <variant>
#include <vector>

#include "strav/core.hpp"

namespace strav {

//==============================================================================
// Reference alignment.
//
// Sampling convention is backward throughout: a warp tells each *target*
// pixel where to sample in the *reference*. For an affine transform the
// sample position of target pixel (x, y) is
//
//   (a11*x + a12*y + tx,  a21*x + a22*y + ty)
//
// and for a flow field it is (x + u(x,y), y + v(x,y)). A reference whose
// content is the target's content viewed d pixels to the right is therefore
// aligned by tx = -d.
//==============================================================================

struct AffineTransform {
  float a11 = 1.0f, a12 = 0.0f, tx = 0.0f;
  float a21 = 0.0f, a22 = 1.0f, ty = 0.0f;

  static AffineTransform identity() { return {}; }
  static AffineTransform translation(float dx, float dy) {
    return {1.0f, 0.0f, dx, 0.0f, 1.0f, dy};
  }

  void apply(float x, float y, float* ox, float* oy) const {
    *ox = a11 * x + a12 * y + tx;
    *oy = a21 * x + a22 * y + ty;
  }

  float det() const { return a11 * a22 - a12 * a21; }

  // this ∘ other: apply `other` first, then this.
  AffineTransform compose(const AffineTransform& other) const;
  AffineTransform inverse() const;
};

struct FlowField {
  int h = 0, w = 0;
  PixelBuffer u, v;  // per-pixel displacement in pixels

  FlowField() = default;
  FlowField(int height, int width) : h(height), w(width) {
    u.assign(static_cast<std::size_t>(height) * width, 0.0f);
    v.assign(static_cast<std::size_t>(height) * width, 0.0f);
  }
  float& ux(int y, int x) { return u[static_cast<std::size_t>(y) * w + x]; }
  float& vy(int y, int x) { return v[static_cast<std::size_t>(y) * w + x]; }
  float ux(int y, int x) const { return u[static_cast<std::size_t>(y) * w + x]; }
  float vy(int y, int x) const { return v[static_cast<std::size_t>(y) * w + x]; }
};

using Warp = std::variant<AffineTransform, FlowField>;

enum class AlignBranch { affine, flow };

// A reference resampled onto the target's pixel grid.
struct AlignedReference {
  Frame frame;      // warped reference content
  Mask mask;        // 1 at warped holes and out-of-bounds samples (unusable)
  Mask validity;    // 1 where the sample position landed inside the reference
  int source_index = -1;
  AlignBranch branch = AlignBranch::affine;
  Warp warp;        // the alignment that produced this (needed to rescale it)
};

//==============================================================================
// Estimators
//==============================================================================

// Global affine registration of `ref` onto `target` by coarse-to-fine
// inverse-compositional minimization of the robustified L1 difference over
// jointly visible pixels (3 levels, <=50 iterations per level, stopping when
// the parameter step norm falls below 1e-4). The returned transform never
// fits worse than identity on the masked-L1 objective, and its linear part
// keeps det in [0.25, 4].
//
// Throws AlignmentUnavailable when fewer than 1% of pixels are jointly
// visible (both masks 0).
AffineTransform estimate_affine(const Frame& target, const Mask& target_mask,
                                const Frame& ref, const Mask& ref_mask);

// Dense pyramidal Lucas-Kanade flow (7x7 window, 3 warp iterations per
// level). Regions without usable texture keep the flow propagated from the
// coarser level (zero at the coarsest), so flat inputs yield zero flow.
FlowField estimate_flow(const Frame& target, const Frame& ref, int levels);

//==============================================================================
// Warps
//==============================================================================

// Resample a reference with an affine transform. Out-of-bounds samples get
// validity 0 and mask 1; in-bounds mask samples are thresholded at > 0.5.
AlignedReference warp_affine(const Frame& ref, const Mask& ref_mask,
                             const AffineTransform& t);

// Same contract with a per-pixel flow field (sample at p + flow(p)).
AlignedReference warp_flow(const Frame& ref, const Mask& ref_mask,
                           const FlowField& flow);

//==============================================================================
// Joint alignment
//==============================================================================

struct ReferenceInput {
  const Frame* frame = nullptr;
  const Mask* mask = nullptr;
  int source_index = 0;       // position in the sequence (for bookkeeping)
  int temporal_distance = 0;  // |source - target| in frames
};

using AffineEstimator = std::function<AffineTransform(
    const Frame&, const Mask&, const Frame&, const Mask&)>;
using FlowEstimator =
    std::function<FlowField(const Frame&, const Frame&, int)>;

struct JointAlignConfig {
  int flow_radius = 2;   // flow branch only for refs this close in time
  int flow_levels = 3;
  bool use_affine = true;
  bool use_flow = true;
  int workers = 1;       // deterministic: results are slotted by index
  // Swappable estimators; defaults are the classical ones above.
  AffineEstimator affine_estimator;
  FlowEstimator flow_estimator;
};

// Aligns every reference with the affine branch (references that fail the
// overlap precondition are dropped) and additionally with the flow branch for
// references within flow_radius frames. Output order: all affine alignments
// in input order, then all flow alignments in input order. Throws
// NoUsableReference when nothing aligns.
std::vector<AlignedReference> joint_align(const Frame& target,
                                          const Mask& target_mask,
                                          const std::vector<ReferenceInput>& refs,
                                          const JointAlignConfig& cfg);

// Mean absolute luma difference over jointly usable pixels (target non-hole,
// aligned reference non-hole and valid). Returns +inf when nothing overlaps.
double masked_l1_residual(const Frame& target, const Mask& target_mask,
                          const AlignedReference& aligned);

}  // namespace strav
