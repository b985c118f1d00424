#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "strav/core.hpp"

namespace strav {

//==============================================================================
// Frame and mask files.
//
// Sequences are directories of zero-padded numbered files. Frames are binary
// PPM (P6, 8-bit RGB); masks are binary PGM (P5, 8-bit grayscale) where 255
// marks hole pixels. Float<->8-bit conversion rounds to nearest, so an 8-bit
// round trip is bit-exact.
//==============================================================================

Frame read_frame(const std::filesystem::path& file);
void write_frame(const std::filesystem::path& file, const Frame& f);

// Masks accept any nonzero gray as hole on read; writes emit 0/255.
Mask read_mask(const std::filesystem::path& file);
void write_mask(const std::filesystem::path& file, const Mask& m);

// Continuous grayscale PGM (values clamped to [0,1], rounded to bytes) —
// used for diagnostic maps such as coverage.
void write_gray(const std::filesystem::path& file, const Mask& m);

// Quantize a float frame to the 8-bit grid it would round-trip through on
// disk (clamp to [0,1], round to nearest of 255 steps).
Frame quantize8(const Frame& f);

inline int to_byte(float v) {
  const float c = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
  return static_cast<int>(c * 255.0f + 0.5f);
}

// Sorted list of regular files in `dir` with the given extension
// (e.g. ".ppm"); returns stems in ascending lexicographic order.
std::vector<std::string> list_stems(const std::filesystem::path& dir,
                                    const std::string& extension);

}  // namespace strav
