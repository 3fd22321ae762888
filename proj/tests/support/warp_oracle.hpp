#pragma once

// Independent inverse of a warp: the a-grid is split into triangles, each
// mapped forward and rasterized in b, with barycentric interpolation of the
// source vertices. Shares nothing with Warp::invert beyond Warp::apply.

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "semcorr/semcorr.hpp"

namespace semcorr::testing {

inline std::vector<std::optional<Point2>> triangulated_inverse(const Warp& w, int size, int margin) {
  std::vector<std::optional<Point2>> inv(static_cast<std::size_t>(size) * size);
  for (int y = -margin; y < size + margin; ++y) {
    for (int x = -margin; x < size + margin; ++x) {
      const Point2 v[4] = {{double(x), double(y)}, {x + 1.0, double(y)}, {double(x), y + 1.0}, {x + 1.0, y + 1.0}};
      Point2 m[4];
      for (int i = 0; i < 4; ++i) m[i] = w.apply(v[i]);
      const int tris[2][3] = {{0, 1, 2}, {1, 3, 2}};
      for (const auto& t : tris) {
        const Point2 A = m[t[0]], B = m[t[1]], C = m[t[2]];
        const double den = (B.y - C.y) * (A.x - C.x) + (C.x - B.x) * (A.y - C.y);
        const int x0 = std::max(0, static_cast<int>(std::floor(std::min({A.x, B.x, C.x}))));
        const int x1 = std::min(size - 1, static_cast<int>(std::ceil(std::max({A.x, B.x, C.x}))));
        const int y0 = std::max(0, static_cast<int>(std::floor(std::min({A.y, B.y, C.y}))));
        const int y1 = std::min(size - 1, static_cast<int>(std::ceil(std::max({A.y, B.y, C.y}))));
        for (int qy = y0; qy <= y1; ++qy) {
          for (int qx = x0; qx <= x1; ++qx) {
            auto& slot = inv[static_cast<std::size_t>(qy) * size + qx];
            if (slot) continue;
            const double l1 = ((B.y - C.y) * (qx - C.x) + (C.x - B.x) * (qy - C.y)) / den;
            const double l2 = ((C.y - A.y) * (qx - C.x) + (A.x - C.x) * (qy - C.y)) / den;
            const double l3 = 1 - l1 - l2;
            if (l1 < -1e-12 || l2 < -1e-12 || l3 < -1e-12) continue;
            const Point2 a = v[t[0]], b = v[t[1]], c = v[t[2]];
            slot = Point2{l1 * a.x + l2 * b.x + l3 * c.x, l1 * a.y + l2 * b.y + l3 * c.y};
          }
        }
      }
    }
  }
  return inv;
}

// Bilinear reconstruction of a binary mask, zero outside the image.
inline double mask_coverage(const ObjectMask& m, Point2 p) {
  const int x0 = static_cast<int>(std::floor(p.x)), y0 = static_cast<int>(std::floor(p.y));
  const double fx = p.x - x0, fy = p.y - y0;
  auto at = [&](int x, int y) { return m.at(Pixel{x, y}) ? 1.0 : 0.0; };
  return (1 - fy) * ((1 - fx) * at(x0, y0) + fx * at(x0 + 1, y0)) + fy * ((1 - fx) * at(x0, y0 + 1) + fx * at(x0 + 1, y0 + 1));
}

// mask_a pushed through the warp and rasterized on b's pixel grid.
inline ObjectMask warp_mask(const ObjectMask& mask_a, const Warp& w) {
  const int size = mask_a.width;
  const auto inv = triangulated_inverse(w, size, size / 2);
  ObjectMask out(size, size, mask_a.label);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const auto& s = inv[static_cast<std::size_t>(y) * size + x];
      if (s && mask_coverage(mask_a, *s) >= 0.5) out.set(x, y);
    }
  }
  return out;
}

inline double iou(const ObjectMask& a, const ObjectMask& b) {
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.bits.size(); ++i) {
    inter += a.bits[i] && b.bits[i];
    uni += a.bits[i] || b.bits[i];
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace semcorr::testing
