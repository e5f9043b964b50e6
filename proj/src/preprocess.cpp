#include "amdprog/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace amdprog {

namespace {

struct Point {
  double x, y;
};

// Solves the 3x3 system M v = rhs in place. Returns false when singular.
bool solve3(double M[3][3], double rhs[3], double v[3]) {
  int perm[3] = {0, 1, 2};
  for (int col = 0; col < 3; ++col) {
    int pivot = col;
    for (int r = col + 1; r < 3; ++r) {
      if (std::abs(M[perm[r]][col]) > std::abs(M[perm[pivot]][col])) pivot = r;
    }
    std::swap(perm[col], perm[pivot]);
    const double p = M[perm[col]][col];
    if (std::abs(p) < 1e-12) return false;
    for (int r = col + 1; r < 3; ++r) {
      const double f = M[perm[r]][col] / p;
      for (int c = col; c < 3; ++c) M[perm[r]][c] -= f * M[perm[col]][c];
      rhs[perm[r]] -= f * rhs[perm[col]];
    }
  }
  for (int col = 2; col >= 0; --col) {
    double acc = rhs[perm[col]];
    for (int c = col + 1; c < 3; ++c) acc -= M[perm[col]][c] * v[c];
    v[col] = acc / M[perm[col]][col];
  }
  return true;
}

}  // namespace

std::optional<FieldCircle> detect_field_circle(const Image& img,
                                               double luminance_threshold) {
  img.validate();
  const int w = img.width, h = img.height;
  const std::size_t plane = static_cast<std::size_t>(w) * h;

  std::vector<char> mask(plane, 0);
  std::size_t fg = 0;
  for (std::size_t i = 0; i < plane; ++i) {
    const double lum = (static_cast<double>(img.data[i]) +
                        img.data[plane + i] + img.data[2 * plane + i]) /
                       3.0;
    if (lum > luminance_threshold) {
      mask[i] = 1;
      ++fg;
    }
  }
  if (fg < plane / 10) return std::nullopt;

  // Boundary points: first/last foreground pixel of each row and column,
  // taken at pixel centers.
  std::vector<Point> pts;
  for (int y = 0; y < h; ++y) {
    int lo = -1, hi = -1;
    for (int x = 0; x < w; ++x) {
      if (mask[static_cast<std::size_t>(y) * w + x]) {
        if (lo < 0) lo = x;
        hi = x;
      }
    }
    if (lo >= 0) {
      pts.push_back({lo + 0.5, y + 0.5});
      pts.push_back({hi + 0.5, y + 0.5});
    }
  }
  for (int x = 0; x < w; ++x) {
    int lo = -1, hi = -1;
    for (int y = 0; y < h; ++y) {
      if (mask[static_cast<std::size_t>(y) * w + x]) {
        if (lo < 0) lo = y;
        hi = y;
      }
    }
    if (lo >= 0) {
      pts.push_back({x + 0.5, lo + 0.5});
      pts.push_back({x + 0.5, hi + 0.5});
    }
  }
  if (pts.size() < 6) return std::nullopt;

  // Kasa fit: x^2 + y^2 = A x + B y + C.
  double M[3][3] = {{0, 0, 0}, {0, 0, 0}, {0, 0, 0}};
  double rhs[3] = {0, 0, 0};
  for (const Point& p : pts) {
    const double z = p.x * p.x + p.y * p.y;
    M[0][0] += p.x * p.x;
    M[0][1] += p.x * p.y;
    M[0][2] += p.x;
    M[1][1] += p.y * p.y;
    M[1][2] += p.y;
    M[2][2] += 1.0;
    rhs[0] += z * p.x;
    rhs[1] += z * p.y;
    rhs[2] += z;
  }
  M[1][0] = M[0][1];
  M[2][0] = M[0][2];
  M[2][1] = M[1][2];
  double v[3];
  if (!solve3(M, rhs, v)) return std::nullopt;

  FieldCircle c;
  c.center_x = v[0] / 2.0;
  c.center_y = v[1] / 2.0;
  const double r2 = v[2] + c.center_x * c.center_x + c.center_y * c.center_y;
  if (r2 <= 0.0) return std::nullopt;
  c.radius = std::sqrt(r2);

  double ss = 0.0;
  for (const Point& p : pts) {
    const double d = std::hypot(p.x - c.center_x, p.y - c.center_y) - c.radius;
    ss += d * d;
  }
  const double rms = std::sqrt(ss / static_cast<double>(pts.size()));
  if (rms > 0.03 * c.radius) return std::nullopt;

  if (c.radius < 0.25 * std::min(w, h)) return std::nullopt;
  const bool overlaps = c.center_x + c.radius > 0.0 &&
                        c.center_x - c.radius < static_cast<double>(w) &&
                        c.center_y + c.radius > 0.0 &&
                        c.center_y - c.radius < static_cast<double>(h);
  if (!overlaps) return std::nullopt;
  return c;
}

Image crop_resize(const Image& img, const FieldCircle& circle, int out_size) {
  img.validate();
  if (out_size < 1) throw std::invalid_argument("crop_resize: out_size < 1");
  if (!(circle.radius >= 0.25 * std::min(img.width, img.height))) {
    throw std::invalid_argument(
        "crop_resize: degenerate circle (radius " +
        std::to_string(circle.radius) + " below 0.25*min dimension)");
  }
  const double side = 2.0 * circle.radius;
  const double x0 = circle.center_x - circle.radius;
  const double y0 = circle.center_y - circle.radius;
  const double scale = side / static_cast<double>(out_size);

  Image out(out_size, out_size);
  for (int oy = 0; oy < out_size; ++oy) {
    // sample at pixel centers of the output grid mapped into source coords
    const double sy = y0 + (oy + 0.5) * scale;
    const double gy = sy - 0.5;
    const int y_lo = static_cast<int>(std::floor(gy));
    const double wy = gy - y_lo;
    for (int ox = 0; ox < out_size; ++ox) {
      const double sx = x0 + (ox + 0.5) * scale;
      const double gx = sx - 0.5;
      const int x_lo = static_cast<int>(std::floor(gx));
      const double wx = gx - x_lo;
      for (int c = 0; c < 3; ++c) {
        auto tap = [&](int y, int x) -> double {
          if (x < 0 || x >= img.width || y < 0 || y >= img.height) return 0.0;
          return img.at(c, y, x);
        };
        const double v =
            (1.0 - wy) * ((1.0 - wx) * tap(y_lo, x_lo) + wx * tap(y_lo, x_lo + 1)) +
            wy * ((1.0 - wx) * tap(y_lo + 1, x_lo) + wx * tap(y_lo + 1, x_lo + 1));
        out.at(c, oy, ox) = static_cast<float>(v);
      }
    }
  }
  return out;
}

}  // namespace amdprog
