#include "strav/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace strav {

namespace {

constexpr double kTwoPi = 6.283185307179586;

// mt19937 output scaled by hand so draws are identical on every platform
// (distribution classes are implementation-defined).
struct Rng {
  std::mt19937 gen;
  explicit Rng(std::uint32_t seed) : gen(seed) {}
  double uniform() { return gen() * (1.0 / 4294967296.0); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
};

struct Color {
  double r, g, b;
};

//------------------------------------------------------------------------------
// Continuous scenes
//------------------------------------------------------------------------------

struct SineComponent {
  double kx, ky, phase, amp;
};

struct Scene {
  TextureKind kind;
  int width, height, scale;

  // checker / two_texture
  double cell = 16.0;
  Color check_a{0.8, 0.8, 0.8}, check_b{0.2, 0.2, 0.2};

  // pink_noise: shared sinusoid bank mixed into three fields.
  std::vector<SineComponent> bank;
  double mix[3][10] = {};

  Color at(double x, double y) const;
};

double checker_value(double x, double y, double cell) {
  const long long cx = static_cast<long long>(std::floor(x / cell));
  const long long cy = static_cast<long long>(std::floor(y / cell));
  return ((cx ^ cy) & 1) ? 1.0 : 0.0;
}

Color Scene::at(double x, double y) const {
  switch (kind) {
    case TextureKind::checker: {
      const double v = checker_value(x, y, cell);
      return {check_a.r + v * (check_b.r - check_a.r),
              check_a.g + v * (check_b.g - check_a.g),
              check_a.b + v * (check_b.b - check_a.b)};
    }
    case TextureKind::two_texture: {
      if (x < width * 0.5) {
        // Fine red-tinted checker whose full period equals the detail scale,
        // so block averaging flattens it completely and all detail lives in
        // the residual.
        const double v = checker_value(x, y, cell);
        return {0.35 + 0.45 * v, 0.12 + 0.10 * v, 0.10 + 0.08 * v};
      }
      // Smooth green ramp.
      const double fx = std::clamp(x / width, 0.0, 1.0);
      const double fy = std::clamp(y / height, 0.0, 1.0);
      return {0.10 + 0.10 * fy, 0.45 + 0.25 * fx, 0.18 + 0.12 * (1.0 - fy)};
    }
    case TextureKind::pink_noise: {
      double f[3] = {0.0, 0.0, 0.0};
      for (std::size_t k = 0; k < bank.size(); ++k) {
        const SineComponent& s = bank[k];
        const double v = s.amp * std::sin(s.kx * x + s.ky * y + s.phase);
        f[0] += mix[0][k] * v;
        f[1] += mix[1][k] * v;
        f[2] += mix[2][k] * v;
      }
      return {std::clamp(0.5 + f[0], 0.0, 1.0), std::clamp(0.5 + f[1], 0.0, 1.0),
              std::clamp(0.5 + f[2], 0.0, 1.0)};
    }
    case TextureKind::gradient: {
      const double fx = std::clamp(x / width, 0.0, 1.0);
      const double fy = std::clamp(y / height, 0.0, 1.0);
      return {0.25 + 0.5 * fx, 0.25 + 0.5 * fy, 0.65 - 0.2 * fx - 0.15 * fy};
    }
  }
  return {0.0, 0.0, 0.0};
}

Scene make_scene(const SynthSpec& spec, Rng& rng) {
  Scene sc;
  sc.kind = spec.texture;
  sc.width = spec.high_width();
  sc.height = spec.high_height();
  sc.scale = spec.scale;

  switch (spec.texture) {
    case TextureKind::checker: {
      sc.cell = 4.0 * spec.scale * rng.uniform(0.9, 1.3);
      const double base = rng.uniform(0.55, 0.8);
      sc.check_a = {base, base * rng.uniform(0.7, 1.0), base * rng.uniform(0.5, 0.9)};
      const double dark = rng.uniform(0.1, 0.3);
      sc.check_b = {dark * rng.uniform(0.5, 1.0), dark, dark * rng.uniform(0.7, 1.0)};
      break;
    }
    case TextureKind::two_texture:
      // Cells of s/2 pixels: the full checker period equals the detail
      // scale, so every s x s block averages to the same flat color and the
      // texture lives entirely in the residual.
      sc.cell = std::max(1.0, spec.scale / 2.0);
      break;
    case TextureKind::pink_noise: {
      const double mind = std::min(sc.width, sc.height);
      // Six structural waves (long wavelengths that survive downsampling)
      // plus four detail waves short enough to live mostly in the residual.
      const int n_struct = 6, n_detail = 4;
      for (int k = 0; k < n_struct; ++k) {
        const double t = n_struct == 1 ? 0.0 : static_cast<double>(k) / (n_struct - 1);
        const double lambda =
            (mind / 2.0) * std::pow((16.0 * spec.scale) / (mind / 2.0), t);
        const double theta = rng.uniform(0.0, kTwoPi);
        const double freq = kTwoPi / (lambda * rng.uniform(0.85, 1.15));
        sc.bank.push_back(SineComponent{freq * std::cos(theta), freq * std::sin(theta),
                                        rng.uniform(0.0, kTwoPi),
                                        0.28 / n_struct * (1.0 - 0.4 * t)});
      }
      for (int k = 0; k < n_detail; ++k) {
        const double lambda = rng.uniform(2.5, 8.0) * spec.scale;
        const double theta = rng.uniform(0.0, kTwoPi);
        const double freq = kTwoPi / lambda;
        sc.bank.push_back(SineComponent{freq * std::cos(theta), freq * std::sin(theta),
                                        rng.uniform(0.0, kTwoPi), 0.10 / n_detail});
      }
      for (int j = 0; j < 3; ++j)
        for (std::size_t k = 0; k < sc.bank.size(); ++k)
          sc.mix[j][k] = rng.uniform(0.6, 1.4) * (rng.uniform() < 0.15 ? -1.0 : 1.0);
      break;
    }
    case TextureKind::gradient:
      break;
  }
  return sc;
}

//------------------------------------------------------------------------------
// Motion models
//------------------------------------------------------------------------------

struct WarpParams {
  double amp = 0.0;
  double lu1, pu1, lu2, pu2;  // u-component wave params
  double lv1, pv1, lv2, pv2;  // v-component wave params
};

struct Motion {
  MotionKind kind;
  double vx = 0.0, vy = 0.0;
  std::vector<AffineTransform> per_frame;  // cumulative pixel-coord transforms
  WarpParams warp;

  void scene_coord(double x, double y, int t, double* sx, double* sy) const {
    switch (kind) {
      case MotionKind::static_scene:
        *sx = x;
        *sy = y;
        return;
      case MotionKind::pan:
        *sx = x + t * vx;
        *sy = y + t * vy;
        return;
      case MotionKind::affine_drift: {
        float ox, oy;
        per_frame[t].apply(static_cast<float>(x), static_cast<float>(y), &ox, &oy);
        *sx = ox;
        *sy = oy;
        return;
      }
      case MotionKind::local_warp: {
        const double u = std::sin(kTwoPi * y / warp.lu1 + warp.pu1) *
                         std::cos(kTwoPi * x / warp.lu2 + warp.pu2);
        const double v = std::cos(kTwoPi * x / warp.lv1 + warp.pv1) *
                         std::sin(kTwoPi * y / warp.lv2 + warp.pv2);
        *sx = x + t * warp.amp * u;
        *sy = y + t * warp.amp * v;
        return;
      }
    }
  }
};

Motion make_motion(const SynthSpec& spec, Rng& rng) {
  Motion m;
  m.kind = spec.motion;
  m.vx = spec.pan_vx;
  m.vy = spec.pan_vy;

  const double w = spec.high_width(), h = spec.high_height();
  if (spec.motion == MotionKind::affine_drift) {
    // spec.drift acts in centered coordinates; conjugate into pixel coords.
    const AffineTransform to_center =
        AffineTransform::translation(static_cast<float>(-w / 2), static_cast<float>(-h / 2));
    const AffineTransform from_center =
        AffineTransform::translation(static_cast<float>(w / 2), static_cast<float>(h / 2));
    const AffineTransform step = from_center.compose(spec.drift).compose(to_center);
    AffineTransform cur = AffineTransform::identity();
    for (int t = 0; t < spec.frames; ++t) {
      m.per_frame.push_back(cur);
      cur = step.compose(cur);
    }
  } else if (spec.motion == MotionKind::local_warp) {
    m.warp.amp = spec.warp_amplitude;
    m.warp.lu1 = h * rng.uniform(0.5, 0.8);
    m.warp.pu1 = rng.uniform(0.0, kTwoPi);
    m.warp.lu2 = w * rng.uniform(0.5, 0.8);
    m.warp.pu2 = rng.uniform(0.0, kTwoPi);
    m.warp.lv1 = w * rng.uniform(0.5, 0.8);
    m.warp.pv1 = rng.uniform(0.0, kTwoPi);
    m.warp.lv2 = h * rng.uniform(0.5, 0.8);
    m.warp.pv2 = rng.uniform(0.0, kTwoPi);
  }
  return m;
}

//------------------------------------------------------------------------------
// Masks
//------------------------------------------------------------------------------

struct Ellipse {
  double cx, cy, rx, ry;
};

struct MaskModel {
  MaskShape shape;
  double cx, cy;          // base center, high-res px
  double rx, ry;          // half extents
  double vx, vy;          // px per frame
  std::vector<Ellipse> blobs;  // offsets relative to center (blob shape)
};

MaskModel make_mask_model(const SynthSpec& spec, Rng& rng) {
  MaskModel mm;
  mm.shape = spec.mask_shape;
  const double w = spec.high_width(), h = spec.high_height();
  const double jx = rng.uniform(0.95, 1.05), jy = rng.uniform(0.95, 1.05);
  mm.cx = spec.mask_cx * w + rng.uniform(-0.01, 0.01) * w;
  mm.cy = spec.mask_cy * h + rng.uniform(-0.01, 0.01) * h;
  mm.rx = std::max(1.0, spec.mask_w * w * 0.5 * jx);
  mm.ry = std::max(1.0, spec.mask_h * h * 0.5 * jy);
  mm.vx = spec.mask_vx;
  mm.vy = spec.mask_vy;
  if (spec.mask_shape == MaskShape::blob) {
    for (int i = 0; i < 3; ++i)
      mm.blobs.push_back(Ellipse{rng.uniform(-0.6, 0.6) * mm.rx,
                                 rng.uniform(-0.6, 0.6) * mm.ry,
                                 mm.rx * rng.uniform(0.45, 0.8),
                                 mm.ry * rng.uniform(0.45, 0.8)});
  }
  return mm;
}

bool inside_mask(const MaskModel& mm, double x, double y, int t) {
  const double cx = mm.cx + t * mm.vx;
  const double cy = mm.cy + t * mm.vy;
  switch (mm.shape) {
    case MaskShape::rect:
      return std::abs(x - cx) <= mm.rx && std::abs(y - cy) <= mm.ry;
    case MaskShape::ellipse: {
      const double dx = (x - cx) / mm.rx, dy = (y - cy) / mm.ry;
      return dx * dx + dy * dy <= 1.0;
    }
    case MaskShape::blob:
      for (const Ellipse& e : mm.blobs) {
        const double dx = (x - (cx + e.cx)) / e.rx;
        const double dy = (y - (cy + e.cy)) / e.ry;
        if (dx * dx + dy * dy <= 1.0) return true;
      }
      return false;
  }
  return false;
}

}  // namespace

//------------------------------------------------------------------------------
// Generation
//------------------------------------------------------------------------------

SynthSequence generate(const SynthSpec& spec) {
  if (spec.frames < 1 || spec.frames > 20)
    throw std::invalid_argument("generate: frames must be in [1, 20]");
  if (spec.low_width < 4 || spec.low_height < 4)
    throw std::invalid_argument("generate: resolution too small");
  if (spec.scale < 1) throw std::invalid_argument("generate: scale must be >= 1");

  Rng rng(spec.seed);
  const Scene scene = make_scene(spec, rng);
  const Motion motion = make_motion(spec, rng);
  const MaskModel mask_model = make_mask_model(spec, rng);

  const int w = spec.high_width(), h = spec.high_height();
  // Masks stay clear of the border at the generated resolution and keep at
  // least a 4-pixel clear ring at low resolution too.
  const int margin = std::max(4, 4 * spec.scale);

  SynthSequence seq;
  for (int t = 0; t < spec.frames; ++t) {
    Frame gt(h, w);
    Mask mask(h, w, 0.0f);
    for (int y = 0; y < h; ++y) {
      float* grow = gt.row(y);
      float* mrow = mask.row(y);
      for (int x = 0; x < w; ++x) {
        double sx = x, sy = y;
        motion.scene_coord(x, y, t, &sx, &sy);
        const Color c = scene.at(sx, sy);
        grow[x * 3 + 0] = static_cast<float>(c.r);
        grow[x * 3 + 1] = static_cast<float>(c.g);
        grow[x * 3 + 2] = static_cast<float>(c.b);
        if (x >= margin && x < w - margin && y >= margin && y < h - margin &&
            inside_mask(mask_model, x, y, t))
          mrow[x] = 1.0f;
      }
    }
    Frame frame = gt;
    for (int y = 0; y < h; ++y) {
      float* frow = frame.row(y);
      const float* mrow = mask.row(y);
      for (int x = 0; x < w; ++x)
        if (mrow[x] > 0.0f) {
          frow[x * 3 + 0] = 0.0f;
          frow[x * 3 + 1] = 0.0f;
          frow[x * 3 + 2] = 0.0f;
        }
    }

    switch (spec.motion) {
      case MotionKind::static_scene:
        seq.true_transforms.push_back(AffineTransform::identity());
        break;
      case MotionKind::pan:
        seq.true_transforms.push_back(AffineTransform::translation(
            static_cast<float>(t * spec.pan_vx), static_cast<float>(t * spec.pan_vy)));
        break;
      case MotionKind::affine_drift:
        seq.true_transforms.push_back(motion.per_frame[t]);
        break;
      case MotionKind::local_warp:
        seq.true_transforms.push_back(AffineTransform::identity());
        break;
    }

    seq.gt.push_back(std::move(gt));
    seq.masks.push_back(std::move(mask));
    seq.frames.push_back(std::move(frame));
  }
  return seq;
}

AffineTransform true_alignment(const SynthSequence& seq, int target, int ref) {
  return seq.true_transforms[ref].inverse().compose(seq.true_transforms[target]);
}

std::vector<std::pair<std::string, SynthSpec>> standard_suites() {
  std::vector<std::pair<std::string, SynthSpec>> suites;

  {
    SynthSpec s;  // static scene, drifting mask: holes disclosed over time
    s.texture = TextureKind::pink_noise;
    s.motion = MotionKind::static_scene;
    s.mask_shape = MaskShape::rect;
    s.mask_cx = 0.45;
    s.mask_cy = 0.5;
    s.mask_w = 0.02;
    s.mask_h = 0.12;
    s.mask_vx = 16.0;
    suites.emplace_back("static", s);
  }
  {
    SynthSpec s;  // panning scene, fixed mask: classic temporal disclosure
    s.texture = TextureKind::pink_noise;
    s.motion = MotionKind::pan;
    s.pan_vx = 8.0;
    s.mask_shape = MaskShape::rect;
    // Full temporal coverage must survive coarse-cell quantization of the
    // visibility maps: at the default working scale (4) and attention factor
    // (4) the distance-4 reference displaces the hole by exactly two 16-px
    // cells, so the hole (with jitter) has to stay within 16 px to land in
    // at most two cells. 0.007 * 2048 * 1.05 ~= 15 px.
    s.mask_w = 0.007;
    s.mask_h = 0.15;
    suites.emplace_back("pan", s);
  }
  {
    SynthSpec s;  // smooth non-rigid deformation: flow territory
    s.texture = TextureKind::pink_noise;
    s.motion = MotionKind::local_warp;
    s.warp_amplitude = 1.5;
    s.mask_shape = MaskShape::rect;
    s.mask_w = 0.03;
    s.mask_h = 0.08;
    suites.emplace_back("local-deform", s);
  }
  {
    SynthSpec s;  // two distinct textures, undisclosed hole: spatial territory
    s.texture = TextureKind::two_texture;
    s.motion = MotionKind::static_scene;
    s.mask_shape = MaskShape::blob;
    s.mask_cx = 0.25;
    s.mask_cy = 0.5;
    s.mask_w = 0.05;
    s.mask_h = 0.08;
    suites.emplace_back("two-texture", s);
  }
  {
    SynthSpec s;  // nothing ever discloses the hole
    s.texture = TextureKind::pink_noise;
    s.motion = MotionKind::static_scene;
    s.mask_shape = MaskShape::ellipse;
    s.mask_w = 0.04;
    s.mask_h = 0.10;
    suites.emplace_back("no-coverage", s);
  }
  return suites;
}

SynthSpec suite_by_name(const std::string& name) {
  for (auto& [suite_name, spec] : standard_suites())
    if (suite_name == name) return spec;
  throw std::invalid_argument("unknown suite: " + name);
}

}  // namespace strav
