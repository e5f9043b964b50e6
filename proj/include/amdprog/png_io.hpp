#pragma once

// 8-bit RGB PNG read/write on top of libpng. Grayscale, palette, 16-bit and
// alpha inputs are normalized to 8-bit RGB on read.

#include <filesystem>

#include "amdprog/image.hpp"

namespace amdprog {

ImageU8 read_png(const std::filesystem::path& path);
void write_png(const ImageU8& img, const std::filesystem::path& path);

}  // namespace amdprog
