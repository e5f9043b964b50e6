#pragma once

// Fundus preprocessing: locate the circular camera field and crop/resize
// to a square model input.

#include <optional>

#include "amdprog/image.hpp"

namespace amdprog {

struct FieldCircle {
  double center_x = 0.0;  // pixel coordinates (pixel centers at x + 0.5)
  double center_y = 0.0;
  double radius = 0.0;
};

// Thresholds luminance to a foreground mask, collects per-row and per-column
// extent boundary points, and least-squares fits a circle (Kasa fit).
// Returns nullopt when the mask covers under 10% of pixels, the fit residual
// RMS exceeds 3% of the fitted radius, or the fitted circle is degenerate
// (radius < 0.25 * min(width, height) or no overlap with the image).
std::optional<FieldCircle> detect_field_circle(const Image& img,
                                               double luminance_threshold = 0.05);

// Crops the circle's bounding square (black where it overhangs the image)
// and bilinearly resizes to out_size x out_size. Throws
// std::invalid_argument for a degenerate circle.
Image crop_resize(const Image& img, const FieldCircle& circle,
                  int out_size = 587);

}  // namespace amdprog
