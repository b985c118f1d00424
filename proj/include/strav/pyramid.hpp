#pragma once

#include "strav/core.hpp"

namespace strav {

//==============================================================================
// Resolution changes and the residual decomposition.
//
// The whole engine leans on one exact identity:
//
//   f == upsample(downsample(f, s), s) + residual(f, s)
//
// downsample is the mean over non-overlapping s x s blocks; upsample is
// bilinear with half-pixel centers (output pixel x samples source coordinate
// (x + 0.5)/s - 0.5, clamped). The residual is defined as the difference, so
// the identity holds to float round-off by construction.
//==============================================================================

// Block-mean downsample by integer factor s. Dims must be divisible by s.
Frame downsample(const Frame& f, int s);

// Conservative mask downsample: a low-res pixel is hole (1) when any pixel of
// its s x s block is hole. Keeps "known" strictly trustworthy across scales.
Mask downsample_mask(const Mask& m, int s);

// Conservative visibility downsample: 1 only when the whole block is visible.
// (Complement of downsample_mask applied to the complement.)
Mask downsample_visibility(const Mask& v, int s);

// Bilinear upsample by integer factor s, half-pixel centers, edge clamp.
Frame upsample(const Frame& f, int s);

// Nearest-neighbor upsample: each source pixel becomes an s x s block.
Mask upsample_mask_nearest(const Mask& m, int s);
Frame upsample_nearest(const Frame& f, int s);

struct ResidualDecomposition {
  Frame low;       // H/s x W/s block means
  Frame residual;  // f - upsample(low, s); values in roughly [-1, 1]
  int scale = 1;
};

// Splits a frame into its low-frequency base and the detail residual.
ResidualDecomposition decompose(const Frame& f, int s);

// Exact inverse of decompose.
Frame reconstruct(const ResidualDecomposition& d);

// Coarse-to-fine diffusion fill: pixels where `unknown` is 1 are replaced by
// a pull-push average of known content; known pixels pass through untouched.
Frame push_pull_fill(const Frame& f, const Mask& unknown);

}  // namespace strav
