#pragma once

#include <functional>
#include <vector>

#include "strav/alignment.hpp"
#include "strav/core.hpp"
#include "strav/features.hpp"

namespace strav {

//==============================================================================
// Evaluation loss suite.
//
// Diagnostic losses over a short clip (no gradients). Convention used by
// every masked L1 here: sum of absolute differences over the active region's
// channel samples, divided by (3 * active pixel count) — i.e. the mean
// absolute error per channel sample inside the region — then averaged over
// the N frames. Weight maps in [0,1] generalize this to a weighted mean.
// An empty region contributes zero.
//==============================================================================

struct LossWeights {
  double align = 5.0;
  double visible = 10.0;
  double leftover = 20.0;
  double non_hole = 6.0;
  double perceptual = 0.01;
  double style = 24.0;
  double reconstruction = 1.2;
  double adversarial = 0.001;
};

// One clip: inputs with their hole masks, the inpainted outputs, and ground
// truth. All frames share dimensions; N = x.size().
struct SequenceSample {
  std::vector<Frame> x;
  std::vector<Mask> m;
  std::vector<Frame> y;
  std::vector<Frame> gt;

  int frames() const { return static_cast<int>(x.size()); }
  void validate() const;  // throws DimensionMismatch / invalid_argument
};

// Maps a frame to a stack of feature maps (finest first). The default runs
// the deterministic encoder with an all-visible mask.
using FeatureExtractor = std::function<std::vector<FeatureMap>(const Frame&)>;
FeatureExtractor default_feature_extractor(int levels = 3);

// Scores how realistic a frame looks. The default returns the global mean
// luma — a deterministic stand-in with the right shape.
using Critic = std::function<double(const Frame&)>;
Critic default_critic();

// Inpainting output inside the hole, input pixels outside it.
Frame y_comb(const Frame& y, const Frame& x, const Mask& m);

// Channel correlation of a feature map, normalized by (C*H*W). Row-major
// C x C, symmetric.
std::vector<double> gram(const FeatureMap& f);

// Alignment quality: warped references vs. the input frame over the jointly
// visible region (target non-hole, warped sample usable). refs[t] lists the
// aligned references of frame t. All regions empty -> 0 (with a warning).
double l_align(const SequenceSample& s,
               const std::vector<std::vector<AlignedReference>>& refs);

// Error inside the hole where references covered it. c_visible[t] is the
// coverage map at frame resolution; values in [0,1] act as weights.
double l_hole_visible(const SequenceSample& s,
                      const std::vector<Mask>& c_visible);

// Error inside the hole where nothing covered it. leftover[t] already equals
// hole AND NOT covered.
double l_hole_leftover(const SequenceSample& s,
                       const std::vector<Mask>& leftover);

// Error outside the hole.
double l_non_hole(const SequenceSample& s);

// Feature-space error between y_comb and ground truth, averaged over the
// extractor's P levels.
double l_perceptual(const SequenceSample& s, const FeatureExtractor& phi);

// Gram-matrix error between y_comb and ground truth (mean absolute entry
// difference), averaged over levels.
double l_style(const SequenceSample& s, const FeatureExtractor& phi);

// Two-term reconstruction error between the frame lists: the masked L1 inside
// each leftover region plus the masked L1 outside it (together spanning the
// frame), each normalized by its own region, averaged over frames.
double l_rec(const std::vector<Frame>& x_tilde, const std::vector<Frame>& x,
             const std::vector<Mask>& leftover);

// Negated mean critic score.
double l_adv(const std::vector<Frame>& x_tilde, const Critic& critic);

struct LossBreakdown {
  double align = 0, visible = 0, leftover = 0, non_hole = 0;
  double perceptual = 0, style = 0, reconstruction = 0, adversarial = 0;
};

double total(const LossBreakdown& l, const LossWeights& w);

// Convenience wrapper computing every component. x_tilde is the pre-refine
// composite fed to the reconstruction and adversarial terms.
LossBreakdown compute_losses(const SequenceSample& s,
                             const std::vector<std::vector<AlignedReference>>& refs,
                             const std::vector<Mask>& c_visible,
                             const std::vector<Mask>& leftover,
                             const std::vector<Frame>& x_tilde,
                             const FeatureExtractor& phi = default_feature_extractor(),
                             const Critic& critic = default_critic());

}  // namespace strav
