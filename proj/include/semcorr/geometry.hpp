#pragma once

#include <cmath>

namespace semcorr {

// Integer pixel coordinate, zero-based, x = column.
struct Pixel {
  int x = 0;
  int y = 0;

  friend bool operator==(const Pixel&, const Pixel&) = default;
  // Row-major order: the library's canonical tie-break.
  friend bool operator<(const Pixel& a, const Pixel& b) {
    return a.y != b.y ? a.y < b.y : a.x < b.x;
  }
};

// Sub-pixel image coordinate.
struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point2&, const Point2&) = default;
};

inline Pixel round_to_pixel(Point2 p) {
  return {static_cast<int>(std::lround(p.x)), static_cast<int>(std::lround(p.y))};
}

inline Point2 to_point(Pixel p) { return {static_cast<double>(p.x), static_cast<double>(p.y)}; }

}  // namespace semcorr
