#include "amdprog/image.hpp"

#include <cmath>
#include <stdexcept>

namespace amdprog {

void Image::validate() const {
  if (width < 16 || height < 16) {
    throw std::invalid_argument("image dimensions must be >= 16, got " +
                                std::to_string(width) + "x" +
                                std::to_string(height));
  }
  if (data.size() != static_cast<std::size_t>(3) * width * height) {
    throw std::invalid_argument("image buffer size does not match dimensions");
  }
  for (float v : data) {
    if (!std::isfinite(v)) {
      throw std::invalid_argument("image contains a non-finite pixel");
    }
  }
}

ImageU8 quantize(const Image& img) {
  ImageU8 out(img.width, img.height);
  for (std::size_t i = 0; i < img.data.size(); ++i) {
    float v = img.data[i];
    v = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
    out.data[i] = static_cast<std::uint8_t>(v * 255.0f + 0.5f);
  }
  return out;
}

Image to_float(const ImageU8& img) {
  Image out(img.width, img.height);
  for (std::size_t i = 0; i < img.data.size(); ++i) {
    out.data[i] = static_cast<float>(img.data[i]) * (1.0f / 255.0f);
  }
  return out;
}

}  // namespace amdprog
