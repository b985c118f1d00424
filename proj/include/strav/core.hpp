#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace strav {

//==============================================================================
// Memory accounting
//
// Every image buffer in the library (frames, masks, feature maps, flow fields)
// allocates through TrackingAllocator so tests can assert the streaming memory
// contract of the pipeline: peak live image bytes stay bounded by a window of
// low-res frames plus a constant number of full-res frames.
//==============================================================================

namespace memtrack {

std::size_t live_bytes();
std::size_t peak_bytes();
void reset_peak();

namespace detail {
void add(std::size_t n);
void sub(std::size_t n);
}  // namespace detail

}  // namespace memtrack

template <typename T>
struct TrackingAllocator {
  using value_type = T;

  TrackingAllocator() noexcept = default;
  template <typename U>
  TrackingAllocator(const TrackingAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) {
    memtrack::detail::add(n * sizeof(T));
    return static_cast<T*>(::operator new(n * sizeof(T)));
  }
  void deallocate(T* p, std::size_t n) noexcept {
    memtrack::detail::sub(n * sizeof(T));
    ::operator delete(p);
  }
  bool operator==(const TrackingAllocator&) const noexcept { return true; }
  bool operator!=(const TrackingAllocator&) const noexcept { return false; }
};

using PixelBuffer = std::vector<float, TrackingAllocator<float>>;

//==============================================================================
// Errors
//==============================================================================

// Inputs whose shapes or values violate a documented precondition.
struct DimensionMismatch : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Registration could not run: too little jointly visible area.
struct AlignmentUnavailable : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Every candidate reference was dropped; the temporal stage has nothing to use.
struct NoUsableReference : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// The spatial stage found no fully-known patch to borrow from.
struct SpatialContextUnavailable : std::runtime_error {
  using std::runtime_error::runtime_error;
};

//==============================================================================
// Frame / Mask
//
// Frame: H x W x 3 interleaved RGB, float in nominal [0,1], row-major.
// Mask:  H x W, float, 1 = hole (unknown), 0 = known. Binary unless stated.
//==============================================================================

class Frame {
 public:
  Frame() = default;
  Frame(int height, int width) : h_(height), w_(width) {
    if (height <= 0 || width <= 0)
      throw DimensionMismatch("Frame: non-positive dimensions");
    data_.assign(static_cast<std::size_t>(height) * width * 3, 0.0f);
  }

  static Frame constant(int height, int width, float r, float g, float b);

  int height() const { return h_; }
  int width() const { return w_; }
  bool empty() const { return data_.empty(); }

  float at(int y, int x, int c) const {
    return data_[(static_cast<std::size_t>(y) * w_ + x) * 3 + c];
  }
  float& at(int y, int x, int c) {
    return data_[(static_cast<std::size_t>(y) * w_ + x) * 3 + c];
  }

  const float* row(int y) const { return data_.data() + static_cast<std::size_t>(y) * w_ * 3; }
  float* row(int y) { return data_.data() + static_cast<std::size_t>(y) * w_ * 3; }

  const PixelBuffer& data() const { return data_; }
  PixelBuffer& data() { return data_; }

  bool same_shape(const Frame& o) const { return h_ == o.h_ && w_ == o.w_; }
  bool is_finite() const;

 private:
  int h_ = 0, w_ = 0;
  PixelBuffer data_;
};

class Mask {
 public:
  Mask() = default;
  Mask(int height, int width, float fill = 0.0f) : h_(height), w_(width) {
    if (height <= 0 || width <= 0)
      throw DimensionMismatch("Mask: non-positive dimensions");
    data_.assign(static_cast<std::size_t>(height) * width, fill);
  }

  int height() const { return h_; }
  int width() const { return w_; }
  bool empty() const { return data_.empty(); }

  float at(int y, int x) const { return data_[static_cast<std::size_t>(y) * w_ + x]; }
  float& at(int y, int x) { return data_[static_cast<std::size_t>(y) * w_ + x]; }

  const float* row(int y) const { return data_.data() + static_cast<std::size_t>(y) * w_; }
  float* row(int y) { return data_.data() + static_cast<std::size_t>(y) * w_; }

  const PixelBuffer& data() const { return data_; }
  PixelBuffer& data() { return data_; }

  bool same_shape(const Mask& o) const { return h_ == o.h_ && w_ == o.w_; }
  bool same_shape(const Frame& o) const { return h_ == o.height() && w_ == o.width(); }

  // True when every value is exactly 0 or 1.
  bool is_binary() const;
  // Number of pixels with value > 0.
  std::size_t count_nonzero() const;

 private:
  int h_ = 0, w_ = 0;
  PixelBuffer data_;
};

//==============================================================================
// Padding
//==============================================================================

// Amount of replicated border added on each side by pad_to_multiple.
struct PadRecord {
  int top = 0, bottom = 0, left = 0, right = 0;
  bool any() const { return top || bottom || left || right; }
};

struct PaddedInput {
  Frame frame;
  Mask mask;
  PadRecord record;
};

// Grows both inputs to the smallest multiples of `multiple` >= their dims.
// New frame pixels replicate the nearest edge pixel; new mask pixels are 0
// (known), so padding never creates hole area. Padding is applied at the
// bottom/right only.
PaddedInput pad_to_multiple(const Frame& frame, const Mask& mask, int multiple);

Frame unpad(const Frame& frame, const PadRecord& rec);
Mask unpad(const Mask& mask, const PadRecord& rec);

//==============================================================================
// Elementwise helpers
//==============================================================================

// Per-pixel product; the mask multiplies all three channels.
Frame elementwise_mul(const Frame& f, const Mask& m);
Mask elementwise_mul(const Mask& a, const Mask& b);

// Rec.601 luma from linear RGB in [0,1].
inline float luma(float r, float g, float b) {
  return 0.299f * r + 0.587f * g + 0.114f * b;
}

// mask -> 1-mask
Mask invert(const Mask& m);

// Binarize at a strict threshold: value > threshold -> 1 else 0.
Mask binarize(const Mask& m, float threshold);

// Box (Chebyshev) dilation: output pixel is 1 when any input pixel within
// the (2*radius+1)^2 neighborhood is > 0. radius <= 0 returns a copy.
Mask dilate(const Mask& m, int radius);

}  // namespace strav
