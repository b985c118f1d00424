#include "strav/alignment.hpp"

#include "strav/pyramid.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <optional>
#include <thread>

namespace strav {

namespace {

//------------------------------------------------------------------------------
// Small dense helpers
//------------------------------------------------------------------------------

// Solve A x = b for a symmetric 6x6 system by Gaussian elimination with
// partial pivoting. Returns false when the system is effectively singular.
bool solve6(double a[6][6], double b[6], double x[6]) {
  int idx[6] = {0, 1, 2, 3, 4, 5};
  for (int col = 0; col < 6; ++col) {
    int piv = col;
    for (int r = col + 1; r < 6; ++r)
      if (std::abs(a[idx[r]][col]) > std::abs(a[idx[piv]][col])) piv = r;
    std::swap(idx[col], idx[piv]);
    const double p = a[idx[col]][col];
    if (std::abs(p) < 1e-12) return false;
    for (int r = col + 1; r < 6; ++r) {
      const double f = a[idx[r]][col] / p;
      if (f == 0.0) continue;
      for (int c = col; c < 6; ++c) a[idx[r]][c] -= f * a[idx[col]][c];
      b[idx[r]] -= f * b[idx[col]];
    }
  }
  for (int col = 5; col >= 0; --col) {
    double acc = b[idx[col]];
    for (int c = col + 1; c < 6; ++c) acc -= a[idx[col]][c] * x[c];
    x[col] = acc / a[idx[col]][col];
  }
  return true;
}

//------------------------------------------------------------------------------
// Luma planes and pyramids (registration runs on luma)
//------------------------------------------------------------------------------

struct Plane {
  int h = 0, w = 0;
  PixelBuffer v;
  Plane() = default;
  Plane(int height, int width) : h(height), w(width) {
    v.assign(static_cast<std::size_t>(height) * width, 0.0f);
  }
  float at(int y, int x) const { return v[static_cast<std::size_t>(y) * w + x]; }
  float& at(int y, int x) { return v[static_cast<std::size_t>(y) * w + x]; }
};

Plane luma_plane(const Frame& f) {
  Plane p(f.height(), f.width());
  for (int y = 0; y < f.height(); ++y) {
    const float* src = f.row(y);
    for (int x = 0; x < f.width(); ++x)
      p.at(y, x) = luma(src[x * 3], src[x * 3 + 1], src[x * 3 + 2]);
  }
  return p;
}

Plane mask_plane(const Mask& m) {
  Plane p(m.height(), m.width());
  for (int y = 0; y < m.height(); ++y)
    for (int x = 0; x < m.width(); ++x) p.at(y, x) = m.at(y, x);
  return p;
}

// 2x block mean; odd trailing row/col are dropped (registration only).
Plane halve(const Plane& p) {
  Plane out(p.h / 2, p.w / 2);
  for (int y = 0; y < out.h; ++y)
    for (int x = 0; x < out.w; ++x)
      out.at(y, x) = 0.25f * (p.at(2 * y, 2 * x) + p.at(2 * y, 2 * x + 1) +
                              p.at(2 * y + 1, 2 * x) + p.at(2 * y + 1, 2 * x + 1));
  return out;
}

// Conservative: any hole in the 2x2 block poisons the coarse pixel.
Plane halve_mask(const Plane& p) {
  Plane out(p.h / 2, p.w / 2);
  for (int y = 0; y < out.h; ++y)
    for (int x = 0; x < out.w; ++x)
      out.at(y, x) = (p.at(2 * y, 2 * x) > 0.0f || p.at(2 * y, 2 * x + 1) > 0.0f ||
                      p.at(2 * y + 1, 2 * x) > 0.0f || p.at(2 * y + 1, 2 * x + 1) > 0.0f)
                         ? 1.0f
                         : 0.0f;
  return out;
}

inline bool in_bounds(float x, float y, int w, int h) {
  return x >= 0.0f && y >= 0.0f && x <= static_cast<float>(w - 1) &&
         y <= static_cast<float>(h - 1);
}

inline float sample_bilinear(const Plane& p, float x, float y) {
  const int x0 = static_cast<int>(x);
  const int y0 = static_cast<int>(y);
  const int x1 = std::min(x0 + 1, p.w - 1);
  const int y1 = std::min(y0 + 1, p.h - 1);
  const float fx = x - x0, fy = y - y0;
  const float top = p.at(y0, x0) + fx * (p.at(y0, x1) - p.at(y0, x0));
  const float bot = p.at(y1, x0) + fx * (p.at(y1, x1) - p.at(y1, x0));
  return top + fy * (bot - top);
}

//------------------------------------------------------------------------------
// Inverse-compositional affine registration
//------------------------------------------------------------------------------

constexpr int kAffineLevels = 3;
constexpr int kAffineMaxIters = 50;
constexpr double kStepStop = 1e-4;
constexpr double kCharbonnier = 1e-2;
constexpr float kDetMin = 0.25f;
constexpr float kDetMax = 4.0f;

struct RegLevel {
  Plane img_t, img_r;   // target / reference luma
  Plane mask_t, mask_r; // holes
};

// Mean |target - warped ref| luma over jointly usable pixels at one level.
double level_residual(const RegLevel& lv, const AffineTransform& t) {
  double acc = 0.0;
  std::size_t n = 0;
  for (int y = 0; y < lv.img_t.h; ++y)
    for (int x = 0; x < lv.img_t.w; ++x) {
      if (lv.mask_t.at(y, x) > 0.0f) continue;
      float sx, sy;
      t.apply(static_cast<float>(x), static_cast<float>(y), &sx, &sy);
      if (!in_bounds(sx, sy, lv.img_r.w, lv.img_r.h)) continue;
      if (sample_bilinear(lv.mask_r, sx, sy) > 0.5f) continue;
      acc += std::abs(lv.img_t.at(y, x) - sample_bilinear(lv.img_r, sx, sy));
      ++n;
    }
  if (n == 0) return std::numeric_limits<double>::infinity();
  return acc / static_cast<double>(n);
}

AffineTransform refine_level(const RegLevel& lv, AffineTransform t) {
  const int h = lv.img_t.h, w = lv.img_t.w;

  // Template gradients, fixed across iterations (inverse-compositional).
  Plane gx(h, w), gy(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const int xm = std::max(x - 1, 0), xp = std::min(x + 1, w - 1);
      const int ym = std::max(y - 1, 0), yp = std::min(y + 1, h - 1);
      gx.at(y, x) = 0.5f * (lv.img_t.at(y, xp) - lv.img_t.at(y, xm));
      gy.at(y, x) = 0.5f * (lv.img_t.at(yp, x) - lv.img_t.at(ym, x));
    }

  for (int iter = 0; iter < kAffineMaxIters; ++iter) {
    double hmat[6][6] = {};
    double bvec[6] = {};
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        if (lv.mask_t.at(y, x) > 0.0f) continue;
        float sx, sy;
        t.apply(static_cast<float>(x), static_cast<float>(y), &sx, &sy);
        if (!in_bounds(sx, sy, lv.img_r.w, lv.img_r.h)) continue;
        if (sample_bilinear(lv.mask_r, sx, sy) > 0.5f) continue;

        const double r = static_cast<double>(sample_bilinear(lv.img_r, sx, sy)) -
                         lv.img_t.at(y, x);
        // IRLS weight for robust L1.
        const double wgt = 1.0 / std::sqrt(r * r + kCharbonnier * kCharbonnier);
        const double tx = gx.at(y, x), ty = gy.at(y, x);
        const double j[6] = {tx * x, tx * y, tx, ty * x, ty * y, ty};
        for (int a = 0; a < 6; ++a) {
          bvec[a] += wgt * j[a] * r;
          for (int b = a; b < 6; ++b) hmat[a][b] += wgt * j[a] * j[b];
        }
      }
    for (int a = 1; a < 6; ++a)
      for (int b = 0; b < a; ++b) hmat[a][b] = hmat[b][a];

    double dp[6];
    if (!solve6(hmat, bvec, dp)) break;

    // Incremental warp on the template; current warp composes with its inverse.
    AffineTransform inc{1.0f + static_cast<float>(dp[0]), static_cast<float>(dp[1]),
                        static_cast<float>(dp[2]), static_cast<float>(dp[3]),
                        1.0f + static_cast<float>(dp[4]), static_cast<float>(dp[5])};
    const float inc_det = inc.det();
    if (std::abs(inc_det) < 1e-6f) break;
    AffineTransform next = t.compose(inc.inverse());
    if (next.det() < kDetMin || next.det() > kDetMax) break;
    t = next;

    double step = 0.0;
    for (double d : dp) step += d * d;
    if (std::sqrt(step) < kStepStop) break;
  }
  return t;
}

//------------------------------------------------------------------------------
// Dense pyramidal Lucas-Kanade
//------------------------------------------------------------------------------

constexpr int kFlowWindow = 7;
constexpr int kFlowIters = 3;
constexpr double kMinEigen = 1e-7;

// Clipped box sum over a (2r+1)^2 window, separable passes.
Plane box_sum(const Plane& p, int r) {
  Plane horiz(p.h, p.w), out(p.h, p.w);
  for (int y = 0; y < p.h; ++y)
    for (int x = 0; x < p.w; ++x) {
      float acc = 0.0f;
      const int x0 = std::max(x - r, 0), x1 = std::min(x + r, p.w - 1);
      for (int i = x0; i <= x1; ++i) acc += p.at(y, i);
      horiz.at(y, x) = acc;
    }
  for (int y = 0; y < p.h; ++y)
    for (int x = 0; x < p.w; ++x) {
      float acc = 0.0f;
      const int y0 = std::max(y - r, 0), y1 = std::min(y + r, p.h - 1);
      for (int i = y0; i <= y1; ++i) acc += horiz.at(i, x);
      out.at(y, x) = acc;
    }
  return out;
}

struct FlowLevelState {
  Plane u, v;
};

void flow_level(const Plane& tgt, const Plane& ref, FlowLevelState& st) {
  const int h = tgt.h, w = tgt.w;
  const int r = kFlowWindow / 2;

  Plane ix(h, w), iy(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const int xm = std::max(x - 1, 0), xp = std::min(x + 1, w - 1);
      const int ym = std::max(y - 1, 0), yp = std::min(y + 1, h - 1);
      ix.at(y, x) = 0.5f * (tgt.at(y, xp) - tgt.at(y, xm));
      iy.at(y, x) = 0.5f * (tgt.at(yp, x) - tgt.at(ym, x));
    }

  // Structure tensor entries are iteration-invariant.
  Plane ixx(h, w), ixy(h, w), iyy(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const float a = ix.at(y, x), b = iy.at(y, x);
      ixx.at(y, x) = a * a;
      ixy.at(y, x) = a * b;
      iyy.at(y, x) = b * b;
    }
  const Plane g_xx = box_sum(ixx, r);
  const Plane g_xy = box_sum(ixy, r);
  const Plane g_yy = box_sum(iyy, r);

  Plane bx(h, w), by(h, w);
  for (int iter = 0; iter < kFlowIters; ++iter) {
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const float sx = x + st.u.at(y, x);
        const float sy = y + st.v.at(y, x);
        if (!in_bounds(sx, sy, w, h)) {
          bx.at(y, x) = 0.0f;
          by.at(y, x) = 0.0f;
          continue;
        }
        const float it = sample_bilinear(ref, sx, sy) - tgt.at(y, x);
        bx.at(y, x) = ix.at(y, x) * it;
        by.at(y, x) = iy.at(y, x) * it;
      }
    const Plane sbx = box_sum(bx, r);
    const Plane sby = box_sum(by, r);

    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const double a = g_xx.at(y, x), b = g_xy.at(y, x), c = g_yy.at(y, x);
        const double tr = a + c;
        const double det = a * c - b * b;
        const double disc = std::sqrt(std::max(0.0, tr * tr / 4.0 - det));
        const double min_eig = tr / 2.0 - disc;
        // Textureless window: keep the flow inherited from the coarser level.
        if (min_eig < kMinEigen || det <= 0.0) continue;
        const double rx = -sbx.at(y, x), ry = -sby.at(y, x);
        const double du = (c * rx - b * ry) / det;
        const double dv = (a * ry - b * rx) / det;
        st.u.at(y, x) += static_cast<float>(du);
        st.v.at(y, x) += static_cast<float>(dv);
      }
  }
}

Plane upsample_flow_component(const Plane& coarse, int fh, int fw) {
  Plane out(fh, fw);
  for (int y = 0; y < fh; ++y)
    for (int x = 0; x < fw; ++x) {
      float sx = (x + 0.5f) / 2.0f - 0.5f;
      float sy = (y + 0.5f) / 2.0f - 0.5f;
      sx = std::clamp(sx, 0.0f, static_cast<float>(coarse.w - 1));
      sy = std::clamp(sy, 0.0f, static_cast<float>(coarse.h - 1));
      out.at(y, x) = 2.0f * sample_bilinear(coarse, sx, sy);
    }
  return out;
}

//------------------------------------------------------------------------------
// Shared warp core
//------------------------------------------------------------------------------

template <typename SamplePos>
AlignedReference warp_common(const Frame& ref, const Mask& ref_mask,
                             SamplePos&& pos) {
  if (!ref_mask.same_shape(ref)) throw DimensionMismatch("warp: frame/mask mismatch");
  const int h = ref.height(), w = ref.width();
  AlignedReference out;
  out.frame = Frame(h, w);
  out.mask = Mask(h, w, 1.0f);
  out.validity = Mask(h, w, 0.0f);

  for (int y = 0; y < h; ++y) {
    float* dst = out.frame.row(y);
    float* dmask = out.mask.row(y);
    float* dval = out.validity.row(y);
    for (int x = 0; x < w; ++x) {
      float sx, sy;
      pos(x, y, &sx, &sy);
      if (!in_bounds(sx, sy, w, h)) continue;  // mask stays 1, validity 0
      const int x0 = static_cast<int>(sx);
      const int y0 = static_cast<int>(sy);
      const int x1 = std::min(x0 + 1, w - 1);
      const int y1 = std::min(y0 + 1, h - 1);
      const float fx = sx - x0, fy = sy - y0;

      for (int c = 0; c < 3; ++c) {
        const float top = ref.at(y0, x0, c) + fx * (ref.at(y0, x1, c) - ref.at(y0, x0, c));
        const float bot = ref.at(y1, x0, c) + fx * (ref.at(y1, x1, c) - ref.at(y1, x0, c));
        dst[x * 3 + c] = top + fy * (bot - top);
      }
      const float mtop =
          ref_mask.at(y0, x0) + fx * (ref_mask.at(y0, x1) - ref_mask.at(y0, x0));
      const float mbot =
          ref_mask.at(y1, x0) + fx * (ref_mask.at(y1, x1) - ref_mask.at(y1, x0));
      const float mval = mtop + fy * (mbot - mtop);
      dmask[x] = mval > 0.5f ? 1.0f : 0.0f;
      dval[x] = 1.0f;
    }
  }
  return out;
}

}  // namespace

//------------------------------------------------------------------------------
// AffineTransform
//------------------------------------------------------------------------------

AffineTransform AffineTransform::compose(const AffineTransform& o) const {
  AffineTransform r;
  r.a11 = a11 * o.a11 + a12 * o.a21;
  r.a12 = a11 * o.a12 + a12 * o.a22;
  r.a21 = a21 * o.a11 + a22 * o.a21;
  r.a22 = a21 * o.a12 + a22 * o.a22;
  r.tx = a11 * o.tx + a12 * o.ty + tx;
  r.ty = a21 * o.tx + a22 * o.ty + ty;
  return r;
}

AffineTransform AffineTransform::inverse() const {
  const float d = det();
  if (std::abs(d) < 1e-12f)
    throw std::invalid_argument("AffineTransform::inverse: singular");
  AffineTransform r;
  r.a11 = a22 / d;
  r.a12 = -a12 / d;
  r.a21 = -a21 / d;
  r.a22 = a11 / d;
  r.tx = -(r.a11 * tx + r.a12 * ty);
  r.ty = -(r.a21 * tx + r.a22 * ty);
  return r;
}

//------------------------------------------------------------------------------
// Estimators
//------------------------------------------------------------------------------

AffineTransform estimate_affine(const Frame& target, const Mask& target_mask,
                                const Frame& ref, const Mask& ref_mask) {
  if (!target.same_shape(ref))
    throw DimensionMismatch("estimate_affine: target/ref shape mismatch");
  if (!target_mask.same_shape(target) || !ref_mask.same_shape(ref))
    throw DimensionMismatch("estimate_affine: mask shape mismatch");

  // Joint visibility gate: both masks known on at least 1% of the frame.
  std::size_t joint = 0;
  for (int y = 0; y < target.height(); ++y)
    for (int x = 0; x < target.width(); ++x)
      if (target_mask.at(y, x) <= 0.0f && ref_mask.at(y, x) <= 0.0f) ++joint;
  const std::size_t total =
      static_cast<std::size_t>(target.height()) * target.width();
  if (joint * 100 < total)
    throw AlignmentUnavailable("estimate_affine: <1% jointly visible pixels");

  std::vector<RegLevel> levels;
  levels.push_back(RegLevel{luma_plane(target), luma_plane(ref),
                            mask_plane(target_mask), mask_plane(ref_mask)});
  for (int l = 1; l < kAffineLevels; ++l) {
    const RegLevel& prev = levels.back();
    if (prev.img_t.h < 16 || prev.img_t.w < 16) break;
    levels.push_back(RegLevel{halve(prev.img_t), halve(prev.img_r),
                              halve_mask(prev.mask_t), halve_mask(prev.mask_r)});
  }

  AffineTransform t;  // identity
  for (int l = static_cast<int>(levels.size()) - 1; l >= 0; --l) {
    t = refine_level(levels[l], t);
    if (l > 0) {
      t.tx *= 2.0f;
      t.ty *= 2.0f;
    }
  }

  // Never return something that fits worse than not aligning at all.
  const double res_t = level_residual(levels[0], t);
  const double res_id = level_residual(levels[0], AffineTransform::identity());
  if (!(res_t <= res_id)) return AffineTransform::identity();
  return t;
}

FlowField estimate_flow(const Frame& target, const Frame& ref, int levels) {
  if (!target.same_shape(ref))
    throw DimensionMismatch("estimate_flow: target/ref shape mismatch");
  if (levels < 1) throw DimensionMismatch("estimate_flow: levels must be >= 1");

  std::vector<Plane> pyr_t, pyr_r;
  pyr_t.push_back(luma_plane(target));
  pyr_r.push_back(luma_plane(ref));
  for (int l = 1; l < levels; ++l) {
    if (pyr_t.back().h < 2 * kFlowWindow || pyr_t.back().w < 2 * kFlowWindow) break;
    pyr_t.push_back(halve(pyr_t.back()));
    pyr_r.push_back(halve(pyr_r.back()));
  }

  FlowLevelState st;
  st.u = Plane(pyr_t.back().h, pyr_t.back().w);
  st.v = Plane(pyr_t.back().h, pyr_t.back().w);
  for (int l = static_cast<int>(pyr_t.size()) - 1; l >= 0; --l) {
    if (st.u.h != pyr_t[l].h || st.u.w != pyr_t[l].w) {
      st.u = upsample_flow_component(st.u, pyr_t[l].h, pyr_t[l].w);
      st.v = upsample_flow_component(st.v, pyr_t[l].h, pyr_t[l].w);
    }
    flow_level(pyr_t[l], pyr_r[l], st);
  }

  FlowField out(target.height(), target.width());
  const float ulim = static_cast<float>(target.width());
  const float vlim = static_cast<float>(target.height());
  for (int y = 0; y < out.h; ++y)
    for (int x = 0; x < out.w; ++x) {
      out.ux(y, x) = std::clamp(st.u.at(y, x), -ulim, ulim);
      out.vy(y, x) = std::clamp(st.v.at(y, x), -vlim, vlim);
    }
  return out;
}

//------------------------------------------------------------------------------
// Warps
//------------------------------------------------------------------------------

AlignedReference warp_affine(const Frame& ref, const Mask& ref_mask,
                             const AffineTransform& t) {
  AlignedReference out = warp_common(
      ref, ref_mask, [&t](int x, int y, float* sx, float* sy) {
        t.apply(static_cast<float>(x), static_cast<float>(y), sx, sy);
      });
  out.branch = AlignBranch::affine;
  out.warp = t;
  return out;
}

AlignedReference warp_flow(const Frame& ref, const Mask& ref_mask,
                           const FlowField& flow) {
  if (flow.h != ref.height() || flow.w != ref.width())
    throw DimensionMismatch("warp_flow: flow/frame shape mismatch");
  AlignedReference out = warp_common(
      ref, ref_mask, [&flow](int x, int y, float* sx, float* sy) {
        *sx = static_cast<float>(x) + flow.ux(y, x);
        *sy = static_cast<float>(y) + flow.vy(y, x);
      });
  out.branch = AlignBranch::flow;
  out.warp = flow;
  return out;
}

//------------------------------------------------------------------------------
// Joint alignment
//------------------------------------------------------------------------------

double masked_l1_residual(const Frame& target, const Mask& target_mask,
                          const AlignedReference& aligned) {
  double acc = 0.0;
  std::size_t n = 0;
  for (int y = 0; y < target.height(); ++y)
    for (int x = 0; x < target.width(); ++x) {
      if (target_mask.at(y, x) > 0.0f) continue;
      if (aligned.mask.at(y, x) > 0.0f || aligned.validity.at(y, x) <= 0.0f) continue;
      const float* t = target.row(y) + x * 3;
      const float* r = aligned.frame.row(y) + x * 3;
      acc += std::abs(luma(t[0], t[1], t[2]) - luma(r[0], r[1], r[2]));
      ++n;
    }
  if (n == 0) return std::numeric_limits<double>::infinity();
  return acc / static_cast<double>(n);
}

namespace {

// Runs fn(i) for i in [0, n) on `workers` threads; fn writes only to slot i,
// so scheduling never affects the result.
void parallel_over(int n, int workers, const std::function<void(int)>& fn) {
  if (workers <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
  };
  std::vector<std::thread> pool;
  const int count = std::min(workers, n);
  pool.reserve(count);
  for (int i = 0; i < count; ++i) pool.emplace_back(worker);
  for (std::thread& th : pool) th.join();
}

void diffuse_flow(FlowField& f, const Mask& unknown) {
  // With no trustworthy pixel left the only neutral flow is zero: the image
  // fill's no-source fallback (mid gray) would read back as a spurious
  // half-pixel shift.
  if (unknown.count_nonzero() ==
      static_cast<std::size_t>(unknown.height()) * unknown.width()) {
    std::fill(f.u.begin(), f.u.end(), 0.0f);
    std::fill(f.v.begin(), f.v.end(), 0.0f);
    return;
  }
  Frame packed(f.h, f.w);
  for (int y = 0; y < f.h; ++y)
    for (int x = 0; x < f.w; ++x) {
      packed.at(y, x, 0) = f.ux(y, x);
      packed.at(y, x, 1) = f.vy(y, x);
    }
  const Frame filled = push_pull_fill(packed, unknown);
  for (int y = 0; y < f.h; ++y)
    for (int x = 0; x < f.w; ++x)
      if (unknown.at(y, x) > 0.0f) {
        f.ux(y, x) = filled.at(y, x, 0);
        f.vy(y, x) = filled.at(y, x, 1);
      }
}

}  // namespace

std::vector<AlignedReference> joint_align(const Frame& target,
                                          const Mask& target_mask,
                                          const std::vector<ReferenceInput>& refs,
                                          const JointAlignConfig& cfg) {
  if (refs.empty()) throw NoUsableReference("joint_align: no references given");

  const AffineEstimator est_affine =
      cfg.affine_estimator ? cfg.affine_estimator
                           : AffineEstimator(
                                 [](const Frame& t, const Mask& tm, const Frame& r,
                                    const Mask& rm) { return estimate_affine(t, tm, r, rm); });
  const FlowEstimator est_flow =
      cfg.flow_estimator
          ? cfg.flow_estimator
          : FlowEstimator([](const Frame& t, const Frame& r, int levels) {
              return estimate_flow(t, r, levels);
            });

  const int n = static_cast<int>(refs.size());
  std::vector<std::optional<AlignedReference>> affine_slots(n);
  std::vector<std::optional<AlignedReference>> flow_slots(n);

  if (cfg.use_affine) {
    parallel_over(n, cfg.workers, [&](int i) {
      const ReferenceInput& ri = refs[i];
      try {
        const AffineTransform t =
            est_affine(target, target_mask, *ri.frame, *ri.mask);
        AlignedReference ar = warp_affine(*ri.frame, *ri.mask, t);
        ar.source_index = ri.source_index;
        affine_slots[i] = std::move(ar);
      } catch (const AlignmentUnavailable&) {
        // Reference contributes nothing through the affine branch.
      }
    });
  }

  if (cfg.use_flow) {
    // Hole pixels are zeroed-out content. Measured over them, flow locks onto
    // the hole blobs themselves (they match at zero displacement when masks
    // overlap across frames) instead of the scene, and the pyramid smears
    // that bias several windows outward. Estimate flow on diffusion-prefilled
    // copies so every window sees plausible scene content, then replace the
    // flow wherever either side's prefilled content could have influenced it
    // with values diffused in from the surrounding field. Donation still
    // warps the raw reference and its mask. Contamination reach: window
    // radius plus warp drag plus upsample bleed, all scaled by the coarsest
    // pyramid factor. 8 per-level pixels covers the worst case for motion
    // the estimator can lock onto at all.
    const int reach = 8 * (1 << (cfg.flow_levels - 1));
    Mask target_unknown;
    Frame flow_target = target;
    if (target_mask.count_nonzero() > 0) {
      target_unknown = dilate(target_mask, reach);
      flow_target = push_pull_fill(target, target_mask);
    }
    parallel_over(n, cfg.workers, [&](int i) {
      const ReferenceInput& ri = refs[i];
      if (ri.temporal_distance > cfg.flow_radius) return;
      Frame ref_filled;
      const Frame* ref_for_flow = ri.frame;
      Mask unknown = target_unknown;
      if (ri.mask->count_nonzero() > 0) {
        ref_filled = push_pull_fill(*ri.frame, *ri.mask);
        ref_for_flow = &ref_filled;
        const Mask ref_reach = dilate(*ri.mask, reach);
        if (unknown.empty()) {
          unknown = ref_reach;
        } else {
          for (std::size_t k = 0; k < unknown.data().size(); ++k)
            unknown.data()[k] = std::max(unknown.data()[k], ref_reach.data()[k]);
        }
      }
      FlowField f = est_flow(flow_target, *ref_for_flow, cfg.flow_levels);
      if (!unknown.empty()) diffuse_flow(f, unknown);
      AlignedReference ar = warp_flow(*ri.frame, *ri.mask, f);
      ar.source_index = ri.source_index;
      flow_slots[i] = std::move(ar);
    });
  }

  std::vector<AlignedReference> out;
  for (auto& slot : affine_slots)
    if (slot) out.push_back(std::move(*slot));
  for (auto& slot : flow_slots)
    if (slot) out.push_back(std::move(*slot));
  if (out.empty()) throw NoUsableReference("joint_align: every reference failed");
  return out;
}

}  // namespace strav
