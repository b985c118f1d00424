#pragma once

#include <string>
#include <vector>

#include "strav/core.hpp"

namespace strav {

//==============================================================================
// Quality metrics on float RGB frames in [0,1].
//
// psnr: 10*log10(1 / MSE) over all pixels and channels, capped at 99 dB for
//       identical inputs.
// ssim: computed on luma with an 11x11 Gaussian window (sigma 1.5),
//       C1 = 0.01^2, C2 = 0.03^2; mean over window positions that fit fully
//       inside the image (no padding).
// l1:   mean absolute difference over all pixels and channels.
//==============================================================================

double metric_psnr(const Frame& a, const Frame& b);
double metric_ssim(const Frame& a, const Frame& b);
double metric_l1(const Frame& a, const Frame& b);

struct FrameMetrics {
  double l1 = 0.0;
  double psnr = 0.0;
  double ssim = 0.0;
};

FrameMetrics frame_metrics(const Frame& a, const Frame& b);

// Metrics restricted to region pixels (value > 0): l1/psnr average only those
// pixels; ssim averages the per-window values whose centers lie in the region
// (windows may extend outside it). Throws std::invalid_argument when the
// region is empty or, for ssim, no full window is centered in it.
FrameMetrics region_metrics(const Frame& a, const Frame& b, const Mask& region);

struct MetricReport {
  std::vector<std::string> labels;     // typically file stems
  std::vector<FrameMetrics> frames;
  FrameMetrics mean;
};

MetricReport make_report(std::vector<std::string> labels,
                         std::vector<FrameMetrics> frames);

// CSV with header "frame,l1,psnr,ssim", one row per frame, then a final row
// labeled "mean". Six decimal places throughout.
std::string to_csv(const MetricReport& report);

}  // namespace strav
