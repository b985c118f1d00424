#pragma once

#include <functional>
#include <vector>

#include "strav/alignment.hpp"
#include "strav/core.hpp"
#include "strav/spatial_agg.hpp"
#include "strav/temporal_agg.hpp"

namespace strav {

//==============================================================================
// Full-resolution residual aggregation.
//
// The low-res stage decides *what* fills each hole pixel; this stage brings
// the detail back. Alignments estimated at low res are rescaled — affine
// translations multiply by s with the linear part unchanged, flow fields are
// bilinearly upsampled with values multiplied by s — never re-estimated. The
// rescaled warp samples each donor's full-res residual, and the same
// attention weights (nearest-upsampled) blend those samples on top of the
// bilinear base. Leftover regions instead borrow the residuals of their
// spatial donor patches.
//==============================================================================

AffineTransform rescale_affine(const AffineTransform& t, int s);
FlowField rescale_flow(const FlowField& f, int s);
Warp rescale_warp(const Warp& w, int s);

struct ResidualDonor {
  const Frame* residual = nullptr;  // full-res residual of the source frame
  const Mask* mask = nullptr;       // optional full-res hole mask of the source
  Warp warp;                        // low-res alignment; rescaled internally
  const Mask* weights = nullptr;    // attention weight map (lowest level)
};

// result(p) = base(p) + sum_r w_r(p) * residual_r(rescaled warp_r(p)) for
// p in temporal_zone; other pixels pass through. Out-of-bounds samples
// contribute zero, as do samples whose residual value is influenced by the
// donor's hole (the hole block plus its upsample support ring, where the
// detail layer of an unknown region is meaningless). weight_factor is the
// nearest-upsample factor from the weight maps to full resolution.
Frame temporal_residual_aggregate(const Frame& base, const Mask& temporal_zone,
                                  const std::vector<ResidualDonor>& donors,
                                  int scale, int weight_factor);

// Adds, for each hole patch, the score-weighted residual blend of its context
// patches (patch size patch*s at full res), into leftover_zone pixels only.
Frame spatial_residual_aggregate(const Frame& base, const Mask& leftover_zone,
                                 const Frame& target_residual,
                                 const SpatialAttention& att, int scale);

//==============================================================================
// Assembly
//==============================================================================

struct RefFrameData {
  Frame frame;  // full-res source content
  Mask mask;    // full-res hole mask
};

// Streams donor frames so only one full-res reference lives in memory at a
// time (decomposed, consumed, freed).
using DonorLoader = std::function<RefFrameData(int source_index)>;

struct AssembleConfig {
  int scale = 4;
  int patch = 8;
  double visible_threshold = 1e-3;
  bool temporal_residuals = true;
  bool spatial_residuals = true;
};

struct HighResAssembly {
  Frame result;        // final full-res frame
  Frame base;          // bilinear-upsampled low-res fill inside the hole
  Mask temporal_zone;  // hole pixels fed by aligned references
  Mask leftover_zone;  // hole pixels fed by spatial donors
};

// x_raw/mask_raw: full-res input (dims = low dims * scale). y_low: refined
// low-res result. leftover_low: the temporal stage's leftover at low res.
// aligned: the alignment set the attention was built over (for warps and
// source indices). The final frame equals x_raw bit-exactly outside the hole.
HighResAssembly assemble(const Frame& x_raw, const Mask& mask_raw,
                         const Frame& y_low, const Mask& leftover_low,
                         const TemporalAttention& attention,
                         const std::vector<AlignedReference>& aligned,
                         const SpatialAttention& spatial,
                         const DonorLoader& donors, const AssembleConfig& cfg);

}  // namespace strav
