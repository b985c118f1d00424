#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "helpers.hpp"
#include "strav/alignment.hpp"
#include "strav/synthgen.hpp"

using namespace strav;
using namespace testutil;

namespace {

SynthSequence pan_sequence(double vx, double vy, int size = 64,
                           TextureKind tex = TextureKind::pink_noise) {
  SynthSpec spec;
  spec.texture = tex;
  spec.motion = MotionKind::pan;
  spec.pan_vx = vx;
  spec.pan_vy = vy;
  spec.low_width = size;
  spec.low_height = size;
  spec.scale = 1;
  spec.frames = 2;
  spec.seed = 77;
  spec.mask_w = 0.01;  // tiny hole so registration sees almost everything
  spec.mask_h = 0.01;
  return generate(spec);
}

double masked_l1(const Frame& a, const Mask& am, const Frame& b, const Mask& bm) {
  double acc = 0.0;
  long n = 0;
  for (int y = 0; y < a.height(); ++y)
    for (int x = 0; x < a.width(); ++x) {
      if (am.at(y, x) > 0 || bm.at(y, x) > 0) continue;
      for (int c = 0; c < 3; ++c)
        acc += std::abs(static_cast<double>(a.at(y, x, c)) - b.at(y, x, c));
      n += 3;
    }
  return n ? acc / n : 0.0;
}

}  // namespace

TEST_CASE("affine compose and inverse") {
  AffineTransform t{1.02f, 0.01f, 3.0f, -0.02f, 0.98f, -1.5f};
  const AffineTransform id = t.compose(t.inverse());
  CHECK(id.a11 == doctest::Approx(1.0).epsilon(1e-5));
  CHECK(id.a12 == doctest::Approx(0.0).epsilon(1e-5));
  CHECK(id.a21 == doctest::Approx(0.0).epsilon(1e-5));
  CHECK(id.a22 == doctest::Approx(1.0).epsilon(1e-5));
  CHECK(id.tx == doctest::Approx(0.0).epsilon(1e-4));
  CHECK(id.ty == doctest::Approx(0.0).epsilon(1e-4));

  float ox, oy;
  AffineTransform::translation(2.0f, -3.0f).apply(1.0f, 1.0f, &ox, &oy);
  CHECK(ox == 3.0f);
  CHECK(oy == -2.0f);
}

TEST_CASE("warp_affine identity copies bit-exactly") {
  Rng rng(61);
  const Frame f = random_frame(12, 12, rng);
  const Mask m = rect_mask(12, 12, 2, 2, 3, 3);
  const AlignedReference ar = warp_affine(f, m, AffineTransform::identity());
  CHECK(bit_equal(ar.frame, f));
  CHECK(bit_equal(ar.mask, m));
  CHECK(ar.validity.count_nonzero() == 12 * 12);
  CHECK(ar.branch == AlignBranch::affine);
}

TEST_CASE("warp_affine shifts content and invalidates out-of-bounds columns") {
  Rng rng(62);
  const Frame f = random_frame(8, 8, rng);
  // Sampling position x+2: the two rightmost columns fall outside.
  const AlignedReference ar = warp_affine(f, Mask(8, 8), AffineTransform::translation(2.0f, 0.0f));
  for (int y = 0; y < 8; ++y) {
    for (int x = 0; x < 6; ++x) {
      CHECK(ar.validity.at(y, x) == 1.0f);
      for (int c = 0; c < 3; ++c) CHECK(ar.frame.at(y, x, c) == f.at(y, x + 2, c));
    }
    for (int x = 6; x < 8; ++x) {
      CHECK(ar.validity.at(y, x) == 0.0f);
      CHECK(ar.mask.at(y, x) == 1.0f);  // unusable reads as hole
    }
  }
}

TEST_CASE("flow and affine warps agree bit-exactly on integer translations") {
  Rng rng(63);
  const Frame f = random_frame(10, 14, rng);
  const Mask m = random_mask(10, 14, 0.1, rng);
  FlowField flow(10, 14);
  for (int y = 0; y < 10; ++y)
    for (int x = 0; x < 14; ++x) {
      flow.ux(y, x) = -3.0f;
      flow.vy(y, x) = 2.0f;
    }
  const AlignedReference a = warp_affine(f, m, AffineTransform::translation(-3.0f, 2.0f));
  const AlignedReference b = warp_flow(f, m, flow);
  CHECK(bit_equal(a.frame, b.frame));
  CHECK(bit_equal(a.mask, b.mask));
  CHECK(bit_equal(a.validity, b.validity));
  CHECK(b.branch == AlignBranch::flow);
}

TEST_CASE("estimate_affine recovers translations up to 8 px within 0.25 px") {
  for (double shift : {1.0, 3.5, 6.0, 8.0}) {
    const SynthSequence seq = pan_sequence(shift, shift * 0.5);
    const AffineTransform truth = true_alignment(seq, 0, 1);
    const AffineTransform got =
        estimate_affine(seq.frames[0], seq.masks[0], seq.frames[1], seq.masks[1]);
    CHECK(std::abs(got.tx - truth.tx) <= 0.25);
    CHECK(std::abs(got.ty - truth.ty) <= 0.25);
  }
}

TEST_CASE("estimate_affine recovers a 5% scale within 1%") {
  SynthSpec spec;
  spec.texture = TextureKind::pink_noise;
  spec.motion = MotionKind::affine_drift;
  spec.drift = {1.05f, 0.0f, 0.0f, 0.0f, 1.05f, 0.0f};
  spec.low_width = 64;
  spec.low_height = 64;
  spec.scale = 1;
  spec.frames = 2;
  spec.seed = 5;
  spec.mask_w = 0.01;
  spec.mask_h = 0.01;
  const SynthSequence seq = generate(spec);

  const AffineTransform truth = true_alignment(seq, 0, 1);
  const AffineTransform got =
      estimate_affine(seq.frames[0], seq.masks[0], seq.frames[1], seq.masks[1]);
  CHECK(std::abs(got.a11 - truth.a11) <= 0.01 * std::abs(truth.a11));
  CHECK(std::abs(got.a22 - truth.a22) <= 0.01 * std::abs(truth.a22));
}

TEST_CASE("estimate_affine never fits worse than identity") {
  for (std::uint32_t seed : {1u, 2u, 3u}) {
    SynthSpec spec;
    spec.motion = MotionKind::pan;
    spec.pan_vx = 2.0 + seed;
    spec.low_width = 48;
    spec.low_height = 48;
    spec.scale = 1;
    spec.frames = 2;
    spec.seed = seed;
    const SynthSequence seq = generate(spec);
    const AffineTransform got =
        estimate_affine(seq.frames[0], seq.masks[0], seq.frames[1], seq.masks[1]);
    const AlignedReference warped = warp_affine(seq.frames[1], seq.masks[1], got);
    const double before = masked_l1(seq.frames[0], seq.masks[0], seq.frames[1], seq.masks[1]);
    const double after = masked_l1(seq.frames[0], seq.masks[0], warped.frame, warped.mask);
    CHECK(after <= before + 1e-9);
  }
}

TEST_CASE("estimate_affine throws without joint visibility") {
  Rng rng(64);
  const Frame f = random_frame(16, 16, rng);
  const Mask all(16, 16, 1.0f);
  CHECK_THROWS_AS(estimate_affine(f, all, f, Mask(16, 16)), AlignmentUnavailable);
}

TEST_CASE("estimate_flow is near zero for identical frames and exact zero on flats") {
  Rng rng(65);
  const Frame f = random_frame(32, 32, rng);
  const FlowField self = estimate_flow(f, f, 3);
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x) {
      CHECK(std::abs(self.ux(y, x)) < 0.1f);
      CHECK(std::abs(self.vy(y, x)) < 0.1f);
    }

  const Frame flat = Frame::constant(32, 32, 0.4f, 0.4f, 0.4f);
  const FlowField zero = estimate_flow(flat, flat, 3);
  for (std::size_t i = 0; i < zero.u.size(); ++i) {
    CHECK(zero.u[i] == 0.0f);
    CHECK(zero.v[i] == 0.0f);
  }
}

TEST_CASE("estimate_flow recovers a textured 2 px shift with median accuracy 0.5 px") {
  const SynthSequence seq = pan_sequence(2.0, 0.0);
  const AffineTransform truth = true_alignment(seq, 0, 1);
  const FlowField f = estimate_flow(seq.gt[0], seq.gt[1], 3);
  std::vector<float> u;
  for (int y = 4; y < f.h - 4; ++y)
    for (int x = 4; x < f.w - 4; ++x) u.push_back(f.ux(y, x));
  std::nth_element(u.begin(), u.begin() + u.size() / 2, u.end());
  CHECK(std::abs(u[u.size() / 2] - truth.tx) <= 0.5);
}

TEST_CASE("joint_align emits affine refs for all and flow refs within the radius") {
  Rng rng(66);
  const Frame target = random_frame(32, 32, rng);
  const Mask tmask = rect_mask(32, 32, 10, 10, 4, 4);
  std::vector<Frame> frames;
  std::vector<Mask> masks;
  for (int i = 0; i < 5; ++i) {
    frames.push_back(random_frame(32, 32, rng));
    masks.push_back(Mask(32, 32));
  }
  std::vector<ReferenceInput> refs;
  const int dist[5] = {1, 1, 2, 2, 3};
  for (int i = 0; i < 5; ++i)
    refs.push_back({&frames[i], &masks[i], i, dist[i]});

  JointAlignConfig cfg;
  const auto out = joint_align(target, tmask, refs, cfg);
  int affine = 0, flow = 0;
  for (const auto& ar : out)
    (ar.branch == AlignBranch::affine ? affine : flow) += 1;
  CHECK(affine == 5);
  CHECK(flow == 4);

  // Affine entries come first, in input order.
  for (int i = 0; i < 5; ++i) {
    CHECK(out[i].branch == AlignBranch::affine);
    CHECK(out[i].source_index == i);
  }

  CHECK_THROWS_AS(joint_align(target, tmask, {}, cfg), NoUsableReference);
}

TEST_CASE("joint_align is deterministic across worker counts") {
  SynthSpec spec;
  spec.motion = MotionKind::pan;
  spec.pan_vx = 2.0;
  spec.low_width = 48;
  spec.low_height = 48;
  spec.scale = 1;
  spec.frames = 4;
  spec.seed = 3;
  const SynthSequence seq = generate(spec);

  std::vector<ReferenceInput> refs;
  for (int r = 1; r < 4; ++r)
    refs.push_back({&seq.frames[r], &seq.masks[r], r, r});

  JointAlignConfig one;
  one.workers = 1;
  JointAlignConfig four;
  four.workers = 4;
  const auto a = joint_align(seq.frames[0], seq.masks[0], refs, one);
  const auto b = joint_align(seq.frames[0], seq.masks[0], refs, four);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(bit_equal(a[i].frame, b[i].frame));
    CHECK(bit_equal(a[i].mask, b[i].mask));
    CHECK(a[i].source_index == b[i].source_index);
  }
}

TEST_CASE("a single identical reference reproduces the target in both branches") {
  Rng rng(67);
  SynthSpec spec;
  spec.low_width = 32;
  spec.low_height = 32;
  spec.scale = 1;
  spec.frames = 1;
  spec.seed = 12;
  const SynthSequence seq = generate(spec);
  const Frame& f = seq.gt[0];

  std::vector<ReferenceInput> refs;
  const Mask none(32, 32);
  refs.push_back({&f, &none, 1, 1});
  JointAlignConfig cfg;
  const auto out = joint_align(f, Mask(32, 32), refs, cfg);
  REQUIRE(out.size() == 2);
  for (const auto& ar : out) CHECK(max_abs_diff(ar.frame, f) <= 1e-3f);
}
