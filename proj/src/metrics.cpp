#include "strav/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>

namespace strav {

namespace {

constexpr int kWin = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

void check_pair(const Frame& a, const Frame& b, const char* who) {
  if (!a.same_shape(b)) throw DimensionMismatch(std::string(who) + ": shape mismatch");
}

std::vector<double> gaussian_kernel() {
  std::vector<double> k(kWin);
  const int r = kWin / 2;
  double sum = 0.0;
  for (int i = 0; i < kWin; ++i) {
    const double d = i - r;
    k[i] = std::exp(-(d * d) / (2.0 * kSigma * kSigma));
    sum += k[i];
  }
  for (double& v : k) v /= sum;
  return k;
}

std::vector<double> luma_plane(const Frame& f) {
  std::vector<double> out(static_cast<std::size_t>(f.height()) * f.width());
  for (int y = 0; y < f.height(); ++y) {
    const float* src = f.row(y);
    for (int x = 0; x < f.width(); ++x)
      out[static_cast<std::size_t>(y) * f.width() + x] =
          luma(src[x * 3], src[x * 3 + 1], src[x * 3 + 2]);
  }
  return out;
}

// Separable Gaussian filter, valid region only: output is (h-10) x (w-10).
std::vector<double> filter_valid(const std::vector<double>& img, int h, int w,
                                 const std::vector<double>& k) {
  const int r = kWin / 2;
  const int vw = w - 2 * r;
  const int vh = h - 2 * r;
  std::vector<double> horiz(static_cast<std::size_t>(h) * vw);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < vw; ++x) {
      double acc = 0.0;
      for (int i = 0; i < kWin; ++i) acc += k[i] * img[static_cast<std::size_t>(y) * w + x + i];
      horiz[static_cast<std::size_t>(y) * vw + x] = acc;
    }
  std::vector<double> out(static_cast<std::size_t>(vh) * vw);
  for (int y = 0; y < vh; ++y)
    for (int x = 0; x < vw; ++x) {
      double acc = 0.0;
      for (int i = 0; i < kWin; ++i) acc += k[i] * horiz[static_cast<std::size_t>(y + i) * vw + x];
      out[static_cast<std::size_t>(y) * vw + x] = acc;
    }
  return out;
}

// Per-window SSIM values over the valid grid; empty when the image is smaller
// than the window.
std::vector<double> ssim_map(const Frame& a, const Frame& b, int* out_vw, int* out_vh) {
  const int h = a.height(), w = a.width();
  *out_vw = w - (kWin - 1);
  *out_vh = h - (kWin - 1);
  if (*out_vw <= 0 || *out_vh <= 0) return {};

  const auto k = gaussian_kernel();
  const auto la = luma_plane(a);
  const auto lb = luma_plane(b);

  const std::size_t n = la.size();
  std::vector<double> aa(n), bb(n), ab(n);
  for (std::size_t i = 0; i < n; ++i) {
    aa[i] = la[i] * la[i];
    bb[i] = lb[i] * lb[i];
    ab[i] = la[i] * lb[i];
  }

  const auto mu_a = filter_valid(la, h, w, k);
  const auto mu_b = filter_valid(lb, h, w, k);
  const auto s_aa = filter_valid(aa, h, w, k);
  const auto s_bb = filter_valid(bb, h, w, k);
  const auto s_ab = filter_valid(ab, h, w, k);

  std::vector<double> map(mu_a.size());
  for (std::size_t i = 0; i < map.size(); ++i) {
    const double ma = mu_a[i], mb = mu_b[i];
    const double va = s_aa[i] - ma * ma;
    const double vb = s_bb[i] - mb * mb;
    const double cov = s_ab[i] - ma * mb;
    map[i] = ((2.0 * ma * mb + kC1) * (2.0 * cov + kC2)) /
             ((ma * ma + mb * mb + kC1) * (va + vb + kC2));
  }
  return map;
}

double psnr_from_mse(double mse) {
  if (mse <= 0.0) return 99.0;
  return std::min(99.0, 10.0 * std::log10(1.0 / mse));
}

}  // namespace

double metric_psnr(const Frame& a, const Frame& b) {
  check_pair(a, b, "metric_psnr");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.data().size(); ++i) {
    const double d = static_cast<double>(a.data()[i]) - b.data()[i];
    acc += d * d;
  }
  return psnr_from_mse(acc / static_cast<double>(a.data().size()));
}

double metric_ssim(const Frame& a, const Frame& b) {
  check_pair(a, b, "metric_ssim");
  int vw = 0, vh = 0;
  const auto map = ssim_map(a, b, &vw, &vh);
  if (map.empty())
    throw DimensionMismatch("metric_ssim: image smaller than 11x11 window");
  double acc = std::accumulate(map.begin(), map.end(), 0.0);
  return acc / static_cast<double>(map.size());
}

double metric_l1(const Frame& a, const Frame& b) {
  check_pair(a, b, "metric_l1");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.data().size(); ++i)
    acc += std::abs(static_cast<double>(a.data()[i]) - b.data()[i]);
  return acc / static_cast<double>(a.data().size());
}

FrameMetrics frame_metrics(const Frame& a, const Frame& b) {
  return FrameMetrics{metric_l1(a, b), metric_psnr(a, b), metric_ssim(a, b)};
}

FrameMetrics region_metrics(const Frame& a, const Frame& b, const Mask& region) {
  check_pair(a, b, "region_metrics");
  if (!region.same_shape(a))
    throw DimensionMismatch("region_metrics: region shape mismatch");
  if (region.count_nonzero() == 0)
    throw std::invalid_argument("region_metrics: empty region");

  double l1 = 0.0, mse = 0.0;
  std::size_t n = 0;
  for (int y = 0; y < a.height(); ++y) {
    const float* ra = a.row(y);
    const float* rb = b.row(y);
    const float* rr = region.row(y);
    for (int x = 0; x < a.width(); ++x) {
      if (rr[x] <= 0.0f) continue;
      for (int c = 0; c < 3; ++c) {
        const double d = static_cast<double>(ra[x * 3 + c]) - rb[x * 3 + c];
        l1 += std::abs(d);
        mse += d * d;
      }
      ++n;
    }
  }
  FrameMetrics m;
  m.l1 = l1 / static_cast<double>(n * 3);
  m.psnr = psnr_from_mse(mse / static_cast<double>(n * 3));

  int vw = 0, vh = 0;
  const auto map = ssim_map(a, b, &vw, &vh);
  if (map.empty())
    throw std::invalid_argument("region_metrics: image smaller than ssim window");
  const int r = kWin / 2;
  double acc = 0.0;
  std::size_t cnt = 0;
  for (int y = 0; y < vh; ++y)
    for (int x = 0; x < vw; ++x)
      if (region.at(y + r, x + r) > 0.0f) {
        acc += map[static_cast<std::size_t>(y) * vw + x];
        ++cnt;
      }
  if (cnt == 0)
    throw std::invalid_argument("region_metrics: no ssim window centered in region");
  m.ssim = acc / static_cast<double>(cnt);
  return m;
}

MetricReport make_report(std::vector<std::string> labels,
                         std::vector<FrameMetrics> frames) {
  if (labels.size() != frames.size())
    throw std::invalid_argument("make_report: label/metric count mismatch");
  MetricReport rep;
  rep.labels = std::move(labels);
  rep.frames = std::move(frames);
  for (const FrameMetrics& f : rep.frames) {
    rep.mean.l1 += f.l1;
    rep.mean.psnr += f.psnr;
    rep.mean.ssim += f.ssim;
  }
  if (!rep.frames.empty()) {
    const double n = static_cast<double>(rep.frames.size());
    rep.mean.l1 /= n;
    rep.mean.psnr /= n;
    rep.mean.ssim /= n;
  }
  return rep;
}

std::string to_csv(const MetricReport& report) {
  std::string out = "frame,l1,psnr,ssim\n";
  char line[160];
  for (std::size_t i = 0; i < report.frames.size(); ++i) {
    const FrameMetrics& f = report.frames[i];
    std::snprintf(line, sizeof(line), "%s,%.6f,%.6f,%.6f\n",
                  report.labels[i].c_str(), f.l1, f.psnr, f.ssim);
    out += line;
  }
  std::snprintf(line, sizeof(line), "mean,%.6f,%.6f,%.6f\n", report.mean.l1,
                report.mean.psnr, report.mean.ssim);
  out += line;
  return out;
}

}  // namespace strav
