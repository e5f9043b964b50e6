#pragma once

// RGB images. Image holds floats in [0,1] in planar CHW layout (the layout
// the convolution kernels consume); ImageU8 is the compact storage form used
// for on-disk files and the in-memory training cache.

#include <cstdint>
#include <vector>

namespace amdprog {

struct Image {
  int width = 0;
  int height = 0;
  std::vector<float> data;  // [3][height][width]

  Image() = default;
  Image(int w, int h, float fill = 0.0f)
      : width(w), height(h), data(static_cast<std::size_t>(3) * w * h, fill) {}

  float& at(int c, int y, int x) {
    return data[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
  float at(int c, int y, int x) const {
    return data[(static_cast<std::size_t>(c) * height + y) * width + x];
  }

  // Domain invariant for fundus inputs: at least 16 px on a side, all
  // pixels finite. Throws std::invalid_argument.
  void validate() const;
};

struct ImageU8 {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;  // [3][height][width]

  ImageU8() = default;
  ImageU8(int w, int h)
      : width(w), height(h), data(static_cast<std::size_t>(3) * w * h, 0) {}
};

// Round-to-nearest quantization to 8 bits.
ImageU8 quantize(const Image& img);

// x / 255 per channel.
Image to_float(const ImageU8& img);

}  // namespace amdprog
