#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "helpers.hpp"
#include "strav/pyramid.hpp"
#include "strav/residual_agg.hpp"

using namespace strav;
using namespace testutil;

namespace {

// Scalar bilinear lookup with edge clamping, in double.
double bilerp(const Frame& f, double sy, double sx, int c) {
  const int x0 = static_cast<int>(std::floor(sx));
  const int y0 = static_cast<int>(std::floor(sy));
  const int x1 = std::min(x0 + 1, f.width() - 1);
  const int y1 = std::min(y0 + 1, f.height() - 1);
  const double fx = sx - x0, fy = sy - y0;
  return (1 - fy) * ((1 - fx) * f.at(y0, x0, c) + fx * f.at(y0, x1, c)) +
         fy * ((1 - fx) * f.at(y1, x0, c) + fx * f.at(y1, x1, c));
}

// A full-res pixel's residual is corrupted when any low-res cell in its
// bilinear upsample support holds a hole pixel. Cell support of pixel q along
// one axis: floor((q+0.5)/s - 0.5) clamped, and its +1 neighbor.
bool taint_oracle(const Mask& donor_hole, int s, double sy, double sx) {
  const int ch = donor_hole.height() / s, cw = donor_hole.width() / s;
  auto cell_has_hole = [&](int cy, int cx) {
    for (int y = cy * s; y < (cy + 1) * s; ++y)
      for (int x = cx * s; x < (cx + 1) * s; ++x)
        if (donor_hole.at(y, x) > 0.0f) return true;
    return false;
  };
  auto support = [&](double pos, int cells, int out[2]) {
    double sc = (pos + 0.5) / s - 0.5;
    sc = std::clamp(sc, 0.0, static_cast<double>(cells - 1));
    out[0] = static_cast<int>(sc);
    out[1] = std::min(out[0] + 1, cells - 1);
    return sc - out[0];
  };
  // The sample point touches up to four pixels; a pixel is tainted when any
  // cell in its support has a hole, and the sample inherits taint from every
  // pixel with nonzero bilinear weight.
  const int px0 = static_cast<int>(std::floor(sx));
  const int py0 = static_cast<int>(std::floor(sy));
  const int px1 = std::min(px0 + 1, donor_hole.width() - 1);
  const int py1 = std::min(py0 + 1, donor_hole.height() - 1);
  const double fx = sx - px0, fy = sy - py0;
  const double wts[4] = {(1 - fy) * (1 - fx), (1 - fy) * fx, fy * (1 - fx),
                         fy * fx};
  const int pys[4] = {py0, py0, py1, py1};
  const int pxs[4] = {px0, px1, px0, px1};
  for (int k = 0; k < 4; ++k) {
    if (wts[k] <= 0.0) continue;
    int cy[2], cx[2];
    support(pys[k], ch, cy);
    support(pxs[k], cw, cx);
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b)
        if (cell_has_hole(cy[a], cx[b])) return true;
  }
  return false;
}

}  // namespace

TEST_CASE("affine rescaling scales translation only") {
  AffineTransform t;
  t.a11 = 1.05;
  t.a12 = -0.02;
  t.a21 = 0.01;
  t.a22 = 0.97;
  t.tx = 1.5;
  t.ty = -2.0;
  const AffineTransform r = rescale_affine(t, 4);
  CHECK(r.a11 == t.a11);
  CHECK(r.a12 == t.a12);
  CHECK(r.a21 == t.a21);
  CHECK(r.a22 == t.a22);
  CHECK(r.tx == doctest::Approx(6.0));
  CHECK(r.ty == doctest::Approx(-8.0));
}

TEST_CASE("flow rescaling upsamples the field and scales its values") {
  SUBCASE("constant flow stays constant") {
    FlowField f(4, 6);
    for (int y = 0; y < 4; ++y)
      for (int x = 0; x < 6; ++x) {
        f.ux(y, x) = 1.25f;
        f.vy(y, x) = -0.5f;
      }
    const FlowField r = rescale_flow(f, 2);
    CHECK(r.h == 8);
    CHECK(r.w == 12);
    for (int y = 0; y < r.h; ++y)
      for (int x = 0; x < r.w; ++x) {
        CHECK(r.ux(y, x) == doctest::Approx(2.5).epsilon(1e-6));
        CHECK(r.vy(y, x) == doctest::Approx(-1.0).epsilon(1e-6));
      }
  }
  SUBCASE("linear field matches the half-pixel-center interpolation") {
    FlowField f(3, 4);
    for (int y = 0; y < 3; ++y)
      for (int x = 0; x < 4; ++x) {
        f.ux(y, x) = 0.1f + 0.3f * x - 0.2f * y;
        f.vy(y, x) = -0.4f + 0.05f * x * y;
      }
    const int s = 2;
    const FlowField r = rescale_flow(f, s);
    for (int y = 0; y < r.h; ++y)
      for (int x = 0; x < r.w; ++x) {
        double sy = (y + 0.5) / s - 0.5, sx = (x + 0.5) / s - 0.5;
        sy = std::clamp(sy, 0.0, 2.0);
        sx = std::clamp(sx, 0.0, 3.0);
        const int y0 = static_cast<int>(sy), x0 = static_cast<int>(sx);
        const int y1 = std::min(y0 + 1, 2), x1 = std::min(x0 + 1, 3);
        const double fy = sy - y0, fx = sx - x0;
        const double u =
            (1 - fy) * ((1 - fx) * f.ux(y0, x0) + fx * f.ux(y0, x1)) +
            fy * ((1 - fx) * f.ux(y1, x0) + fx * f.ux(y1, x1));
        REQUIRE(r.ux(y, x) == doctest::Approx(u * s).epsilon(1e-6));
      }
  }
}

TEST_CASE("temporal residual aggregation matches the scalar oracle") {
  Rng rng(91);
  const int s = 2, lh = 8, lw = 8, H = lh * s, W = lw * s;
  for (int trial = 0; trial < 8; ++trial) {
    const Frame base = random_frame(H, W, rng);
    const Mask zone = random_mask(H, W, 0.5, rng);
    std::vector<Frame> residuals;
    std::vector<Mask> weightmaps;
    std::vector<AffineTransform> warps;
    for (int i = 0; i < 2; ++i) {
      Frame r = random_frame(H, W, rng);
      for (float& v : r.data()) v -= 0.5f;
      residuals.push_back(std::move(r));
      weightmaps.push_back(random_soft_mask(lh, lw, rng));
      std::uniform_real_distribution<double> off(-1.2, 1.2);
      warps.push_back(AffineTransform::translation(off(rng), off(rng)));
    }
    std::vector<ResidualDonor> donors;
    for (int i = 0; i < 2; ++i)
      donors.push_back({&residuals[i], nullptr, warps[i], &weightmaps[i]});

    const Frame got = temporal_residual_aggregate(base, zone, donors, s, s);

    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x)
        for (int c = 0; c < 3; ++c) {
          double expect = base.at(y, x, c);
          if (zone.at(y, x) > 0.0f) {
            for (int i = 0; i < 2; ++i) {
              const float wgt = weightmaps[i].at(y / s, x / s);
              if (wgt <= 0.0f) continue;
              const double sx = x + warps[i].tx * s;
              const double sy = y + warps[i].ty * s;
              if (sx < 0.0 || sy < 0.0 || sx > W - 1.0 || sy > H - 1.0) continue;
              expect += wgt * bilerp(residuals[i], sy, sx, c);
            }
          }
          REQUIRE(got.at(y, x, c) == doctest::Approx(expect).epsilon(1e-5));
        }
  }
}

TEST_CASE("out-of-bounds samples contribute nothing") {
  Rng rng(92);
  const Frame base = random_frame(8, 8, rng);
  const Frame residual = random_frame(8, 8, rng);
  const Mask weights(4, 4, 1.0f);
  std::vector<ResidualDonor> donors = {
      {&residual, nullptr, AffineTransform::translation(-20.0, 0.0), &weights}};
  const Frame got =
      temporal_residual_aggregate(base, Mask(8, 8, 1.0f), donors, 2, 2);
  CHECK(bit_equal(got, base));
}

TEST_CASE("donor hole taints its residual neighborhood") {
  Rng rng(93);
  const int s = 2, H = 16, W = 16;
  const Frame base = random_frame(H, W, rng);
  Frame residual = random_frame(H, W, rng);
  const Mask donor_hole = rect_mask(H, W, 6, 8, 3, 4);
  const Mask weights(H / s, W / s, 1.0f);

  std::uniform_real_distribution<double> off(-0.7, 0.7);
  const AffineTransform warp = AffineTransform::translation(off(rng), off(rng));
  std::vector<ResidualDonor> donors = {{&residual, &donor_hole, warp, &weights}};
  const Frame got =
      temporal_residual_aggregate(base, Mask(H, W, 1.0f), donors, s, s);

  int skipped = 0, contributed = 0;
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      const double sx = x + warp.tx * s, sy = y + warp.ty * s;
      if (sx < 0.0 || sy < 0.0 || sx > W - 1.0 || sy > H - 1.0) continue;
      const bool tainted = taint_oracle(donor_hole, s, sy, sx);
      for (int c = 0; c < 3; ++c) {
        const double expect =
            tainted ? base.at(y, x, c)
                    : base.at(y, x, c) + bilerp(residual, sy, sx, c);
        REQUIRE(got.at(y, x, c) == doctest::Approx(expect).epsilon(1e-5));
      }
      (tainted ? skipped : contributed) += 1;
    }
  // The case must exercise both sides of the gate.
  CHECK(skipped > 0);
  CHECK(contributed > 0);
}

TEST_CASE("donor validation failures throw") {
  Rng rng(94);
  const Frame base = random_frame(8, 8, rng);
  const Mask weights(4, 4, 1.0f);
  SUBCASE("missing buffers") {
    std::vector<ResidualDonor> donors = {
        {nullptr, nullptr, AffineTransform::identity(), &weights}};
    CHECK_THROWS_AS(
        temporal_residual_aggregate(base, Mask(8, 8, 1.0f), donors, 2, 2),
        std::invalid_argument);
  }
  SUBCASE("mismatched residual shape") {
    const Frame wrong = random_frame(8, 10, rng);
    std::vector<ResidualDonor> donors = {
        {&wrong, nullptr, AffineTransform::identity(), &weights}};
    CHECK_THROWS_AS(
        temporal_residual_aggregate(base, Mask(8, 8, 1.0f), donors, 2, 2),
        DimensionMismatch);
  }
}

TEST_CASE("spatial residual aggregation matches the scalar oracle") {
  Rng rng(95);
  const int scale = 2, patch = 4, pf = patch * scale;  // 8px tiles at full res
  const int H = 16, W = 16;                            // 2x2 tile grid
  const Frame base = random_frame(H, W, rng);
  Frame residual = random_frame(H, W, rng);
  for (float& v : residual.data()) v -= 0.5f;

  SpatialAttention att;
  att.patch = patch;
  att.grid_w = 2;
  att.grid_h = 2;
  att.hole_patches = {0};
  att.context_patches = {1, 2, 3};
  att.scores = {{0.5f, 0.3f, 0.2f}};

  Mask leftover(H, W);
  for (int k = 0; k < 12; ++k) {
    std::uniform_int_distribution<int> pos(0, pf - 1);
    leftover.at(pos(rng), pos(rng)) = 1.0f;
  }
  REQUIRE(leftover.count_nonzero() > 0);

  const Frame got =
      spatial_residual_aggregate(base, leftover, residual, att, scale);

  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x)
      for (int c = 0; c < 3; ++c) {
        double expect = base.at(y, x, c);
        if (leftover.at(y, x) > 0.0f) {
          // Pixel sits in hole tile 0; borrow from each context tile at the
          // same local offset.
          const int tiles[3][2] = {{0, 1}, {1, 0}, {1, 1}};  // (ty, tx)
          const float sc[3] = {0.5f, 0.3f, 0.2f};
          for (int i = 0; i < 3; ++i)
            expect += sc[i] * residual.at(tiles[i][0] * pf + y,
                                          tiles[i][1] * pf + x, c);
        }
        REQUIRE(got.at(y, x, c) == doctest::Approx(expect).epsilon(1e-5));
      }

  SUBCASE("grid mismatch throws") {
    SpatialAttention bad = att;
    bad.grid_w = 3;
    CHECK_THROWS_AS(spatial_residual_aggregate(base, leftover, residual, bad, scale),
                    DimensionMismatch);
  }
}

TEST_CASE("assembly reconstructs a perfectly donated frame") {
  Rng rng(96);
  const int s = 2, lh = 16, lw = 16, H = lh * s, W = lw * s;
  const Frame gt = random_frame(H, W, rng);
  const Mask mask = rect_mask(H, W, 8, 12, 6, 10);
  Frame x_raw = gt;
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x)
      if (mask.at(y, x) > 0)
        for (int c = 0; c < 3; ++c) x_raw.at(y, x, c) = 0.0f;

  // Low-res result equals the downsampled ground truth; one donor carries the
  // matching full-res detail under an identity alignment with weight one.
  const Frame y_low = downsample(gt, s);
  TemporalAttention att;
  att.ref_slots = {0};
  att.similarities = {1.0};
  att.weights = {Mask(lh, lw, 1.0f)};
  att.c_visible = Mask(lh, lw, 1.0f);
  att.factor = 1;

  std::vector<AlignedReference> aligned(1);
  aligned[0].warp = AffineTransform::identity();
  aligned[0].source_index = 0;

  AssembleConfig cfg;
  cfg.scale = s;
  int loads = 0;
  const DonorLoader loader = [&](int source) {
    ++loads;
    CHECK(source == 0);
    return RefFrameData{gt, Mask(H, W)};
  };

  const HighResAssembly as = assemble(x_raw, mask, y_low, Mask(lh, lw), att,
                                      aligned, SpatialAttention{}, loader, cfg);
  CHECK(loads == 1);
  CHECK(as.leftover_zone.count_nonzero() == 0);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x)
      for (int c = 0; c < 3; ++c) {
        if (mask.at(y, x) > 0) {
          CHECK(as.temporal_zone.at(y, x) == 1.0f);
          REQUIRE(as.result.at(y, x, c) ==
                  doctest::Approx(gt.at(y, x, c)).epsilon(1e-3));
        } else {
          REQUIRE(as.result.at(y, x, c) == x_raw.at(y, x, c));  // bit-exact
        }
      }
}

TEST_CASE("assembly splits the hole into temporal and leftover zones") {
  Rng rng(97);
  const int s = 2, lh = 4, lw = 4, H = 8, W = 8;
  const Frame x_raw = random_frame(H, W, rng);
  Mask mask(H, W);
  // Hole covering low cells (0,0), (1,1), (2,2).
  for (int k = 0; k < 3; ++k)
    for (int y = k * s; y < (k + 1) * s; ++y)
      for (int x = k * s; x < (k + 1) * s; ++x) mask.at(y, x) = 1.0f;

  TemporalAttention att;
  att.factor = 1;
  att.c_visible = Mask(lh, lw);
  att.c_visible.at(0, 0) = 1.0f;  // covered
  Mask leftover_low(lh, lw);
  leftover_low.at(1, 1) = 1.0f;  // explicitly leftover
  // Cell (2,2) is neither covered nor marked: it must land in leftover too.

  const Frame y_low = downsample(x_raw, s);
  AssembleConfig cfg;
  cfg.scale = s;
  const DonorLoader loader = [&](int) { return RefFrameData{x_raw, Mask(H, W)}; };
  const HighResAssembly as = assemble(x_raw, mask, y_low, leftover_low, att, {},
                                      SpatialAttention{}, loader, cfg);

  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      const int cell = y / s;  // diagonal blocks: cell index on both axes
      if (mask.at(y, x) <= 0.0f) {
        CHECK(as.temporal_zone.at(y, x) == 0.0f);
        CHECK(as.leftover_zone.at(y, x) == 0.0f);
        continue;
      }
      const bool temporal = (cell == 0 && x / s == 0);
      CHECK(as.temporal_zone.at(y, x) == (temporal ? 1.0f : 0.0f));
      CHECK(as.leftover_zone.at(y, x) == (temporal ? 0.0f : 1.0f));
    }
}

TEST_CASE("assembly without a hole returns the input untouched") {
  Rng rng(98);
  const Frame x_raw = random_frame(8, 8, rng);
  const Frame y_low = downsample(x_raw, 2);
  TemporalAttention att;
  att.factor = 1;
  att.c_visible = Mask(4, 4, 1.0f);
  AssembleConfig cfg;
  cfg.scale = 2;
  const DonorLoader loader = [&](int) { return RefFrameData{x_raw, Mask(8, 8)}; };
  const HighResAssembly as = assemble(x_raw, Mask(8, 8), y_low, Mask(4, 4), att,
                                      {}, SpatialAttention{}, loader, cfg);
  CHECK(bit_equal(as.result, x_raw));
  CHECK_THROWS_AS(assemble(x_raw, Mask(8, 8), downsample(x_raw, 4), Mask(2, 2),
                           att, {}, SpatialAttention{}, loader, cfg),
                  DimensionMismatch);
}
