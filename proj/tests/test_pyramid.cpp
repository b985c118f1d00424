#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "helpers.hpp"
#include "strav/pyramid.hpp"

using namespace strav;
using namespace testutil;

namespace {

// Scalar reference implementations, written independently of the library on
// purpose: plain loops, double accumulation.

Frame oracle_downsample(const Frame& f, int s) {
  Frame out(f.height() / s, f.width() / s);
  for (int y = 0; y < out.height(); ++y)
    for (int x = 0; x < out.width(); ++x)
      for (int c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (int dy = 0; dy < s; ++dy)
          for (int dx = 0; dx < s; ++dx) acc += f.at(y * s + dy, x * s + dx, c);
        out.at(y, x, c) = static_cast<float>(acc / (s * s));
      }
  return out;
}

Frame oracle_upsample(const Frame& f, int s) {
  Frame out(f.height() * s, f.width() * s);
  for (int y = 0; y < out.height(); ++y)
    for (int x = 0; x < out.width(); ++x) {
      double sy = (y + 0.5) / s - 0.5;
      double sx = (x + 0.5) / s - 0.5;
      sy = std::clamp(sy, 0.0, static_cast<double>(f.height() - 1));
      sx = std::clamp(sx, 0.0, static_cast<double>(f.width() - 1));
      const int y0 = static_cast<int>(sy), x0 = static_cast<int>(sx);
      const int y1 = std::min(y0 + 1, f.height() - 1);
      const int x1 = std::min(x0 + 1, f.width() - 1);
      const double fy = sy - y0, fx = sx - x0;
      for (int c = 0; c < 3; ++c) {
        const double top = f.at(y0, x0, c) * (1 - fx) + f.at(y0, x1, c) * fx;
        const double bot = f.at(y1, x0, c) * (1 - fx) + f.at(y1, x1, c) * fx;
        out.at(y, x, c) = static_cast<float>(top * (1 - fy) + bot * fy);
      }
    }
  return out;
}

}  // namespace

TEST_CASE("downsample equals the block-mean oracle") {
  Rng rng(101);
  for (int s : {2, 4}) {
    const Frame f = random_frame(8 * s, 6 * s, rng);
    CHECK(max_abs_diff(downsample(f, s), oracle_downsample(f, s)) <= 1e-6f);
  }
  CHECK_THROWS_AS(downsample(Frame(10, 10), 4), DimensionMismatch);
}

TEST_CASE("upsample equals the bilinear half-pixel oracle") {
  Rng rng(102);
  for (int s : {2, 4}) {
    const Frame f = random_frame(7, 5, rng);
    CHECK(max_abs_diff(upsample(f, s), oracle_upsample(f, s)) <= 1e-6f);
  }
}

TEST_CASE("residual identity holds to float precision") {
  Rng rng(103);
  for (int trial = 0; trial < 8; ++trial)
    for (int s : {2, 4, 8}) {
      const Frame f = random_frame(s * (3 + trial % 4), s * (2 + trial % 5), rng);
      const ResidualDecomposition d = decompose(f, s);
      CHECK(d.scale == s);
      const Frame up = upsample(d.low, s);
      float worst = 0.0f;
      for (std::size_t i = 0; i < f.data().size(); ++i)
        worst = std::max(worst, std::abs(up.data()[i] + d.residual.data()[i] -
                                         f.data()[i]));
      CHECK(worst <= 1e-6f);
      CHECK(max_abs_diff(reconstruct(d), f) <= 1e-6f);
    }
}

TEST_CASE("mask downsample is conservative in both directions") {
  Rng rng(104);
  const int s = 4;
  const Mask m = random_mask(4 * s, 3 * s, 0.1, rng);

  const Mask holes = downsample_mask(m, s);
  const Mask vis = downsample_visibility(invert(m), s);
  for (int y = 0; y < holes.height(); ++y)
    for (int x = 0; x < holes.width(); ++x) {
      bool any_hole = false;
      for (int dy = 0; dy < s; ++dy)
        for (int dx = 0; dx < s; ++dx)
          if (m.at(y * s + dy, x * s + dx) > 0.0f) any_hole = true;
      CHECK(holes.at(y, x) == (any_hole ? 1.0f : 0.0f));
      // A block is visible exactly when it contains no hole at all.
      CHECK(vis.at(y, x) == (any_hole ? 0.0f : 1.0f));
    }
}

TEST_CASE("nearest upsampling replicates blocks") {
  Rng rng(105);
  const Frame f = random_frame(3, 4, rng);
  const Frame up = upsample_nearest(f, 3);
  for (int y = 0; y < up.height(); ++y)
    for (int x = 0; x < up.width(); ++x)
      for (int c = 0; c < 3; ++c) CHECK(up.at(y, x, c) == f.at(y / 3, x / 3, c));

  const Mask m = random_mask(3, 4, 0.4, rng);
  const Mask upm = upsample_mask_nearest(m, 2);
  for (int y = 0; y < upm.height(); ++y)
    for (int x = 0; x < upm.width(); ++x) CHECK(upm.at(y, x) == m.at(y / 2, x / 2));
}

TEST_CASE("push_pull_fill keeps known pixels and fills unknowns smoothly") {
  Rng rng(106);
  Frame f = random_frame(16, 16, rng);
  const Mask unknown = rect_mask(16, 16, 4, 5, 6, 7);

  const Frame filled = push_pull_fill(f, unknown);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x)
      if (unknown.at(y, x) <= 0.0f)
        for (int c = 0; c < 3; ++c) CHECK(filled.at(y, x, c) == f.at(y, x, c));
  CHECK(filled.is_finite());

  // Filled values stay inside the known value range.
  float lo = 1.0f, hi = 0.0f;
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x)
      if (unknown.at(y, x) <= 0.0f)
        for (int c = 0; c < 3; ++c) {
          lo = std::min(lo, f.at(y, x, c));
          hi = std::max(hi, f.at(y, x, c));
        }
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x)
      if (unknown.at(y, x) > 0.0f)
        for (int c = 0; c < 3; ++c) {
          CHECK(filled.at(y, x, c) >= lo - 1e-4f);
          CHECK(filled.at(y, x, c) <= hi + 1e-4f);
        }
}

TEST_CASE("push_pull_fill reproduces a constant field exactly") {
  Frame f = Frame::constant(12, 10, 0.3f, 0.6f, 0.9f);
  Mask unknown = rect_mask(12, 10, 3, 3, 5, 4);
  // Garbage inside the unknown region must not leak through.
  for (int y = 3; y < 8; ++y)
    for (int x = 3; x < 7; ++x)
      for (int c = 0; c < 3; ++c) f.at(y, x, c) = 7.0f;

  const Frame filled = push_pull_fill(f, unknown);
  for (int y = 0; y < 12; ++y)
    for (int x = 0; x < 10; ++x) {
      CHECK(filled.at(y, x, 0) == doctest::Approx(0.3).epsilon(1e-4));
      CHECK(filled.at(y, x, 1) == doctest::Approx(0.6).epsilon(1e-4));
      CHECK(filled.at(y, x, 2) == doctest::Approx(0.9).epsilon(1e-4));
    }
}

TEST_CASE("push_pull_fill with nothing known settles on neutral gray") {
  Rng rng(107);
  const Frame f = random_frame(8, 8, rng);
  const Frame filled = push_pull_fill(f, Mask(8, 8, 1.0f));
  for (float v : filled.data()) CHECK(v == doctest::Approx(0.5).epsilon(1e-6));
}
