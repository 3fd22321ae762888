#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "semcorr/ops.hpp"

namespace semcorr {

enum class MaskSource { kFile, kSynthetic };

// Binary object mask, row-major, nonzero = foreground.
struct ObjectMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> bits;
  std::string label;
  MaskSource source = MaskSource::kSynthetic;

  ObjectMask() = default;
  ObjectMask(int w, int h, std::string lbl = {}, MaskSource src = MaskSource::kSynthetic)
      : width(w), height(h), bits(static_cast<std::size_t>(w) * h, 0), label(std::move(lbl)), source(src) {
    if (w < 1 || h < 1) throw ShapeError("mask dimensions must be >= 1");
  }

  bool contains(Pixel p) const { return p.x >= 0 && p.y >= 0 && p.x < width && p.y < height; }
  bool at(int x, int y) const { return bits[static_cast<std::size_t>(y) * width + x] != 0; }
  bool at(Pixel p) const { return contains(p) && at(p.x, p.y); }
  void set(int x, int y, bool v = true) { bits[static_cast<std::size_t>(y) * width + x] = v ? 1 : 0; }

  std::size_t area() const {
    return static_cast<std::size_t>(std::count_if(bits.begin(), bits.end(), [](std::uint8_t b) { return b != 0; }));
  }
  bool empty() const { return area() == 0; }

  friend bool operator==(const ObjectMask& a, const ObjectMask& b) {
    return a.width == b.width && a.height == b.height && a.bits == b.bits;
  }
};

namespace region_detail {

// 1-D squared distance transform by lower envelope of parabolas.
inline void edt_1d(const std::vector<double>& f, std::vector<double>& d, std::vector<int>& v,
                   std::vector<double>& z) {
  const int n = static_cast<int>(f.size());
  constexpr double inf = std::numeric_limits<double>::infinity();
  int k = -1;
  for (int q = 0; q < n; ++q) {
    if (f[q] == inf) continue;
    double s = 0;
    while (k >= 0) {
      const int p = v[k];
      s = ((f[q] + q * q) - (f[p] + p * p)) / (2.0 * (q - p));
      if (s > z[k]) break;
      --k;
    }
    ++k;
    v[k] = q;
    z[k] = k == 0 ? -inf : s;
    z[k + 1] = inf;
  }
  if (k < 0) {
    std::fill(d.begin(), d.end(), inf);
    return;
  }
  int j = 0;
  for (int q = 0; q < n; ++q) {
    while (z[j + 1] < q) ++j;
    const double dq = q - v[j];
    d[q] = dq * dq + f[v[j]];
  }
}

// Exact squared Euclidean distance from every pixel to the nearest
// foreground pixel (infinity when the mask is empty).
inline std::vector<double> squared_distance_to_foreground(const ObjectMask& m) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  const int w = m.width, h = m.height;
  std::vector<double> grid(static_cast<std::size_t>(w) * h);
  for (std::size_t i = 0; i < grid.size(); ++i) grid[i] = m.bits[i] ? 0.0 : inf;
  const int n = std::max(w, h);
  std::vector<double> f, d;
  std::vector<int> v(static_cast<std::size_t>(n));
  std::vector<double> z(static_cast<std::size_t>(n) + 1);
  f.resize(static_cast<std::size_t>(h));
  d.resize(static_cast<std::size_t>(h));
  for (int x = 0; x < w; ++x) {
    for (int y = 0; y < h; ++y) f[y] = grid[static_cast<std::size_t>(y) * w + x];
    edt_1d(f, d, v, z);
    for (int y = 0; y < h; ++y) grid[static_cast<std::size_t>(y) * w + x] = d[y];
  }
  f.resize(static_cast<std::size_t>(w));
  d.resize(static_cast<std::size_t>(w));
  for (int y = 0; y < h; ++y) {
    std::copy(grid.begin() + static_cast<std::ptrdiff_t>(y) * w,
              grid.begin() + static_cast<std::ptrdiff_t>(y + 1) * w, f.begin());
    edt_1d(f, d, v, z);
    std::copy(d.begin(), d.end(), grid.begin() + static_cast<std::ptrdiff_t>(y) * w);
  }
  return grid;
}

}  // namespace region_detail

// Morphological dilation by the Euclidean disk {d : |d| <= radius}.
inline ObjectMask dilate_mask(const ObjectMask& mask, int radius) {
  if (radius < 0) throw UsageError("dilate_mask: radius must be >= 0");
  if (radius > std::min(mask.width, mask.height)) {
    throw UsageError("dilate_mask: radius " + std::to_string(radius) + " exceeds min(H, W) = " +
                     std::to_string(std::min(mask.width, mask.height)));
  }
  if (radius == 0) return mask;
  const auto dist = region_detail::squared_distance_to_foreground(mask);
  ObjectMask out = mask;
  const double r2 = static_cast<double>(radius) * radius;
  for (std::size_t i = 0; i < dist.size(); ++i) out.bits[i] = dist[i] <= r2 ? 1 : 0;
  return out;
}

// Repo default for the boundary extension: 5% of the longer image side,
// rounded up.
inline int default_dilation_radius(int width, int height) {
  return static_cast<int>(std::ceil(0.05 * std::max(width, height)));
}

// Legal match locations: the pixels of a dilated mask in row-major order.
struct CandidateSet {
  std::vector<Pixel> points;
  int width = 0;
  int height = 0;
  int radius = 0;
  std::string label;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  bool contains(Pixel p) const { return std::binary_search(points.begin(), points.end(), p); }
};

inline CandidateSet candidate_set(const ObjectMask& mask, int radius) {
  const ObjectMask dilated = dilate_mask(mask, radius);
  CandidateSet set;
  set.width = mask.width;
  set.height = mask.height;
  set.radius = radius;
  set.label = mask.label;
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      if (dilated.at(x, y)) set.points.push_back({x, y});
    }
  }
  if (set.points.empty()) {
    throw DataError("candidate_set: dilated mask '" + mask.label + "' (" + std::to_string(mask.width) +
                    "x" + std::to_string(mask.height) + ", radius " + std::to_string(radius) +
                    ") has no foreground pixels");
  }
  return set;
}

// Every pixel of the image: the unrestricted search space.
inline CandidateSet full_image_candidates(int width, int height) {
  CandidateSet set;
  set.width = width;
  set.height = height;
  set.radius = -1;
  set.points.reserve(static_cast<std::size_t>(width) * height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) set.points.push_back({x, y});
  }
  return set;
}

// Drops candidates within `radius` (Euclidean) of `center`.
inline CandidateSet exclude_radius(const CandidateSet& set, Pixel center, double radius) {
  CandidateSet out = set;
  out.points.clear();
  const double r2 = radius * radius;
  for (const auto& p : set.points) {
    const double dx = p.x - center.x, dy = p.y - center.y;
    if (dx * dx + dy * dy > r2) out.points.push_back(p);
  }
  return out;
}

// Instance pairing: among masks with the requested label, the one with the
// largest area (first on ties). Returns nullopt when no mask carries the label.
inline std::optional<std::size_t> select_target_mask(const std::vector<ObjectMask>& masks,
                                                     const std::string& label) {
  std::optional<std::size_t> best;
  std::size_t best_area = 0;
  for (std::size_t i = 0; i < masks.size(); ++i) {
    if (masks[i].label != label) continue;
    const std::size_t a = masks[i].area();
    if (!best || a > best_area) {
      best = i;
      best_area = a;
    }
  }
  return best;
}

}  // namespace semcorr
