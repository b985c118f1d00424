#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "strav/alignment.hpp"
#include "strav/core.hpp"

namespace strav {

//==============================================================================
// Procedural test sequences with exact ground truth.
//
// A sequence is a continuous scene (a closed-form color function of real 2D
// coordinates) observed through a per-frame motion model. Frame t's ground
// truth samples the scene at motion_t(pixel); the input frame is the ground
// truth with the hole region zeroed. Because the scene is a pure function of
// seeded parameters, the same spec generates bit-identical output every time,
// and the per-frame motions are reported exactly for alignment oracles.
//==============================================================================

enum class TextureKind { checker, two_texture, pink_noise, gradient };
enum class MotionKind { static_scene, pan, affine_drift, local_warp };
enum class MaskShape { rect, ellipse, blob };

struct SynthSpec {
  TextureKind texture = TextureKind::pink_noise;
  MotionKind motion = MotionKind::static_scene;

  // pan: scene offset advances by (pan_vx, pan_vy) px per frame.
  double pan_vx = 0.0, pan_vy = 0.0;
  // affine_drift: per-frame transform applied cumulatively about the center.
  AffineTransform drift = AffineTransform::identity();
  // local_warp: smooth displacement field scaled by t * warp_amplitude px.
  double warp_amplitude = 0.0;

  MaskShape mask_shape = MaskShape::rect;
  // Mask geometry as fractions of the high-res frame (center and size);
  // jittered a few percent by the seed.
  double mask_cx = 0.5, mask_cy = 0.5;
  double mask_w = 0.05, mask_h = 0.15;
  // Mask offset advances by (mask_vx, mask_vy) px per frame.
  double mask_vx = 0.0, mask_vy = 0.0;

  int frames = 5;               // up to 20
  int low_width = 512, low_height = 512;
  int scale = 4;                // high res = scale x low res
  std::uint32_t seed = 0;

  int high_width() const { return low_width * scale; }
  int high_height() const { return low_height * scale; }
};

struct SynthSequence {
  std::vector<Frame> frames;  // ground truth with hole zeroed
  std::vector<Mask> masks;    // 1 = hole; never touches the outer border
  std::vector<Frame> gt;      // clean ground truth
  // Per-frame pixel->scene transform (exact for static/pan/affine_drift;
  // identity placeholders for local_warp, which has no affine form).
  std::vector<AffineTransform> true_transforms;
};

SynthSequence generate(const SynthSpec& spec);

// The true warp aligning reference frame r onto target frame t under the
// spec's motion (target pixel -> reference sample position):
// inverse(transform[r]) ∘ transform[t].
AffineTransform true_alignment(const SynthSequence& seq, int target, int ref);

// Named specs used across the test and acceptance suites:
// "static", "pan", "local-deform", "two-texture", "no-coverage".
std::vector<std::pair<std::string, SynthSpec>> standard_suites();

SynthSpec suite_by_name(const std::string& name);

}  // namespace strav
