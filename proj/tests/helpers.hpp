#pragma once

// Shared randomized-input builders for the test binaries. Every generator is
// seeded explicitly so failures reproduce.

#include <algorithm>
#include <cmath>
#include <random>

#include "strav/core.hpp"

namespace testutil {

using Rng = std::mt19937;

inline strav::Frame random_frame(int h, int w, Rng& rng) {
  std::uniform_real_distribution<float> d(0.0f, 1.0f);
  strav::Frame f(h, w);
  for (float& v : f.data()) v = d(rng);
  return f;
}

// Binary mask with roughly `density` fraction of hole pixels.
inline strav::Mask random_mask(int h, int w, double density, Rng& rng) {
  std::uniform_real_distribution<double> d(0.0, 1.0);
  strav::Mask m(h, w);
  for (float& v : m.data()) v = d(rng) < density ? 1.0f : 0.0f;
  return m;
}

// Values in [0,1], not necessarily binary.
inline strav::Mask random_soft_mask(int h, int w, Rng& rng) {
  std::uniform_real_distribution<float> d(0.0f, 1.0f);
  strav::Mask m(h, w);
  for (float& v : m.data()) v = d(rng);
  return m;
}

// Axis-aligned rectangular hole.
inline strav::Mask rect_mask(int h, int w, int y0, int x0, int hh, int ww) {
  strav::Mask m(h, w);
  for (int y = y0; y < y0 + hh; ++y)
    for (int x = x0; x < x0 + ww; ++x) m.at(y, x) = 1.0f;
  return m;
}

inline float max_abs_diff(const strav::Frame& a, const strav::Frame& b) {
  float worst = 0.0f;
  for (std::size_t i = 0; i < a.data().size(); ++i)
    worst = std::max(worst, std::abs(a.data()[i] - b.data()[i]));
  return worst;
}

inline float max_abs_diff(const strav::Mask& a, const strav::Mask& b) {
  float worst = 0.0f;
  for (std::size_t i = 0; i < a.data().size(); ++i)
    worst = std::max(worst, std::abs(a.data()[i] - b.data()[i]));
  return worst;
}

inline bool bit_equal(const strav::Frame& a, const strav::Frame& b) {
  return a.same_shape(b) && a.data() == b.data();
}

inline bool bit_equal(const strav::Mask& a, const strav::Mask& b) {
  return a.same_shape(b) && a.data() == b.data();
}

}  // namespace testutil
