#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "semcorr/image_io.hpp"
#include "semcorr/region.hpp"
#include "semcorr/rng.hpp"

namespace semcorr {

enum class WarpFamily { kAffine, kAffineDeform };

// Ranges from which a pair's transformation is drawn.
struct WarpSpec {
  WarpFamily family = WarpFamily::kAffineDeform;
  double max_rotation_deg = 12.0;
  double min_scale = 0.92;
  double max_scale = 1.08;
  double min_tx = -4.0, max_tx = 4.0;
  double min_ty = -4.0, max_ty = 4.0;
  double deform_amplitude = 2.0;  // pixels, summed over all terms
  int deform_terms = 3;
  double intensity_jitter = 0.08;  // gain/offset spread applied to image_b's object

  static WarpSpec identity() {
    WarpSpec s;
    s.family = WarpFamily::kAffine;
    s.max_rotation_deg = 0;
    s.min_scale = s.max_scale = 1.0;
    s.min_tx = s.max_tx = s.min_ty = s.max_ty = 0.0;
    s.deform_amplitude = 0;
    s.intensity_jitter = 0;
    return s;
  }

  static WarpSpec translation(double dx, double dy) {
    WarpSpec s = identity();
    s.min_tx = s.max_tx = dx;
    s.min_ty = s.max_ty = dy;
    return s;
  }

  void validate(int image_size) const {
    if (min_scale <= 0 || max_scale < min_scale) throw UsageError("warp scale range is invalid");
    if (max_tx < min_tx || max_ty < min_ty) throw UsageError("warp translation range is invalid");
    if (max_rotation_deg < 0 || max_rotation_deg > 90) throw UsageError("warp rotation must lie in [0, 90] degrees");
    if (deform_amplitude < 0 || deform_amplitude > 0.15 * image_size) {
      throw UsageError("deformation amplitude must lie in [0, 15% of the image size]");
    }
    if (deform_terms < 0) throw UsageError("deformation term count must be >= 0");
    if (intensity_jitter < 0 || intensity_jitter > 0.5) throw UsageError("intensity jitter must lie in [0, 0.5]");
  }
};

// Concrete transformation from image_a to image_b coordinates:
//   W(p) = c + A (p - c) + t + D(p),  D(p) = sum_k a_k sin(k . p + phi_k)
struct Warp {
  std::array<double, 4> a{1, 0, 0, 1};  // row-major 2x2
  double cx = 0, cy = 0;
  double tx = 0, ty = 0;
  struct Term {
    double amp_x = 0, amp_y = 0, kx = 0, ky = 0, phase = 0;
  };
  std::vector<Term> terms;
  double gain = 1.0;  // photometric change of the object in image_b
  double offset = 0.0;

  Point2 apply(Point2 p) const {
    const double dx = p.x - cx, dy = p.y - cy;
    Point2 q{cx + a[0] * dx + a[1] * dy + tx, cy + a[2] * dx + a[3] * dy + ty};
    for (const auto& t : terms) {
      const double s = std::sin(t.kx * p.x + t.ky * p.y + t.phase);
      q.x += t.amp_x * s;
      q.y += t.amp_y * s;
    }
    return q;
  }

  std::array<double, 4> jacobian(Point2 p) const {
    auto j = a;
    for (const auto& t : terms) {
      const double c = std::cos(t.kx * p.x + t.ky * p.y + t.phase);
      j[0] += t.amp_x * c * t.kx;
      j[1] += t.amp_x * c * t.ky;
      j[2] += t.amp_y * c * t.kx;
      j[3] += t.amp_y * c * t.ky;
    }
    return j;
  }

  // Newton iteration from the affine inverse.
  Point2 invert(Point2 q) const {
    const double det = a[0] * a[3] - a[1] * a[2];
    const double rx = q.x - cx - tx, ry = q.y - cy - ty;
    Point2 p{cx + (a[3] * rx - a[1] * ry) / det, cy + (-a[2] * rx + a[0] * ry) / det};
    if (terms.empty()) return p;
    for (int it = 0; it < 50; ++it) {
      const Point2 w = apply(p);
      const double ex = w.x - q.x, ey = w.y - q.y;
      if (ex * ex + ey * ey < 1e-24) break;
      const auto j = jacobian(p);
      const double d = j[0] * j[3] - j[1] * j[2];
      p.x -= (j[3] * ex - j[1] * ey) / d;
      p.y -= (-j[2] * ex + j[0] * ey) / d;
    }
    return p;
  }

  // Jacobian determinant positive on a unit grid covering [-margin, size+margin)^2.
  bool invertible_on(int size, int margin = 8) const {
    for (int y = -margin; y < size + margin; ++y) {
      for (int x = -margin; x < size + margin; ++x) {
        const auto j = jacobian({static_cast<double>(x), static_cast<double>(y)});
        if (!(j[0] * j[3] - j[1] * j[2] > 0)) return false;
      }
    }
    return true;
  }
};

inline Warp sample_warp(const WarpSpec& spec, int image_size, Rng& rng) {
  spec.validate(image_size);
  constexpr double kPi = 3.14159265358979323846;
  for (int attempt = 0; attempt < 100; ++attempt) {
    Warp w;
    w.cx = w.cy = (image_size - 1) / 2.0;
    const double theta = rng.uniform(-spec.max_rotation_deg, spec.max_rotation_deg) * kPi / 180.0;
    const double s = rng.uniform(spec.min_scale, spec.max_scale);
    w.a = {s * std::cos(theta), -s * std::sin(theta), s * std::sin(theta), s * std::cos(theta)};
    w.tx = rng.uniform(spec.min_tx, spec.max_tx);
    w.ty = rng.uniform(spec.min_ty, spec.max_ty);
    if (spec.family == WarpFamily::kAffineDeform && spec.deform_amplitude > 0 && spec.deform_terms > 0) {
      const double per_term = spec.deform_amplitude / spec.deform_terms;
      for (int k = 0; k < spec.deform_terms; ++k) {
        Warp::Term t;
        // Wavelengths between 0.6 and 1.5 image sizes keep the field smooth.
        const double wavelength = rng.uniform(0.6, 1.5) * image_size;
        const double dir = rng.uniform(0, 2 * kPi);
        t.kx = 2 * kPi / wavelength * std::cos(dir);
        t.ky = 2 * kPi / wavelength * std::sin(dir);
        const double adir = rng.uniform(0, 2 * kPi);
        t.amp_x = per_term * std::cos(adir);
        t.amp_y = per_term * std::sin(adir);
        t.phase = rng.uniform(0, 2 * kPi);
        w.terms.push_back(t);
      }
    }
    w.gain = 1.0 + rng.uniform(-spec.intensity_jitter, spec.intensity_jitter);
    w.offset = rng.uniform(-spec.intensity_jitter, spec.intensity_jitter) * 0.5;
    if (w.invertible_on(image_size)) return w;
  }
  throw DataError("could not draw an invertible warp from the given ranges");
}

inline const std::vector<std::string>& shape_classes() {
  static const std::vector<std::string> k{"disk", "rectangle", "triangle", "ellipse"};
  return k;
}

// Base colour of each class's object texture; individual objects jitter
// around it.
inline std::array<double, 3> class_palette(const std::string& shape_class) {
  if (shape_class == "disk") return {0.75, 0.35, 0.30};
  if (shape_class == "rectangle") return {0.30, 0.68, 0.35};
  if (shape_class == "triangle") return {0.30, 0.40, 0.75};
  if (shape_class == "ellipse") return {0.72, 0.66, 0.28};
  throw UsageError("unknown shape class '" + shape_class + "'");
}

// Class-dependent silhouette in image_a coordinates.
struct Silhouette {
  std::string kind;
  double cx = 0, cy = 0, r = 1, angle = 0, aspect = 1;

  bool contains(Point2 p) const {
    const double dx = p.x - cx, dy = p.y - cy;
    const double c = std::cos(angle), s = std::sin(angle);
    const double u = c * dx + s * dy, v = -s * dx + c * dy;
    if (kind == "disk") return dx * dx + dy * dy <= r * r;
    if (kind == "rectangle") return std::abs(u) <= r * 1.05 && std::abs(v) <= r * aspect * 0.95;
    if (kind == "ellipse") return (u * u) / (r * r * 1.35) + (v * v) / (r * r * aspect * aspect * 0.75) <= 1.0;
    if (kind == "triangle") {
      // Equilateral triangle with circumradius 1.35 r: three half-planes.
      constexpr double kPi = 3.14159265358979323846;
      const double inr = 1.35 * r * 0.5;
      for (int k = 0; k < 3; ++k) {
        const double phi = k * 2 * kPi / 3;
        if (std::cos(phi) * u + std::sin(phi) * v > inr) return false;
      }
      return true;
    }
    throw UsageError("unknown shape class '" + kind + "'");
  }
};

// Smooth procedural colour field: a few oriented sinusoids per channel plus
// Gaussian spots.
struct Texture {
  struct Wave {
    double kx, ky, phase, amp;
  };
  struct Spot {
    double x, y, sigma;
    std::array<double, 3> color;
  };
  std::array<double, 3> base{};
  std::array<std::vector<Wave>, 3> waves;
  std::vector<Spot> spots;

  static Texture random(Rng& rng, int image_size, int n_waves, int n_spots, double min_wl, double max_wl,
                        double wave_amp, double spot_amp) {
    constexpr double kPi = 3.14159265358979323846;
    Texture t;
    for (int c = 0; c < 3; ++c) {
      t.base[static_cast<std::size_t>(c)] = rng.uniform(0.25, 0.75);
      for (int k = 0; k < n_waves; ++k) {
        const double wl = rng.uniform(min_wl, max_wl);
        const double dir = rng.uniform(0, 2 * kPi);
        t.waves[static_cast<std::size_t>(c)].push_back(
            {2 * kPi / wl * std::cos(dir), 2 * kPi / wl * std::sin(dir), rng.uniform(0, 2 * kPi), wave_amp});
      }
    }
    for (int k = 0; k < n_spots; ++k) {
      Spot s{rng.uniform(0, image_size), rng.uniform(0, image_size), rng.uniform(1.5, 3.5), {}};
      for (auto& v : s.color) v = rng.uniform(-spot_amp, spot_amp);
      t.spots.push_back(s);
    }
    return t;
  }

  std::array<double, 3> at(Point2 p) const {
    std::array<double, 3> out = base;
    for (std::size_t c = 0; c < 3; ++c) {
      for (const auto& w : waves[c]) out[c] += w.amp * std::sin(w.kx * p.x + w.ky * p.y + w.phase);
    }
    for (const auto& s : spots) {
      const double d2 = (p.x - s.x) * (p.x - s.x) + (p.y - s.y) * (p.y - s.y);
      if (d2 > 16 * s.sigma * s.sigma) continue;
      const double g = std::exp(-d2 / (2 * s.sigma * s.sigma));
      for (std::size_t c = 0; c < 3; ++c) out[c] += s.color[c] * g;
    }
    return out;
  }
};

struct Correspondence {
  int id = 0;
  Point2 a;
  Point2 b;

  friend bool operator==(const Correspondence&, const Correspondence&) = default;
};

struct CorrespondencePair {
  Tensor image_a, image_b;  // [1, 3, S, S], values on the 8-bit grid
  ObjectMask mask_a, mask_b;
  std::vector<Correspondence> keypoints;
  std::string label;
  Warp warp;
};

struct GenOptions {
  int keypoints = 10;
  int min_spacing = 6;     // between keypoints in image_a, pixels
  int interior_margin = 3; // keypoints keep this distance from the boundary
  int max_attempts = 10;
};

namespace dataset_detail {

inline float quantize(double v) {
  const double c = std::clamp(v, 0.0, 1.0);
  return static_cast<float>(std::lround(c * 255.0)) / 255.0f;
}

// Squared distance from each pixel to the nearest background pixel.
inline std::vector<double> interior_depth2(const ObjectMask& m) {
  ObjectMask bg(m.width, m.height);
  for (std::size_t i = 0; i < m.bits.size(); ++i) bg.bits[i] = m.bits[i] ? 0 : 1;
  if (bg.empty()) return std::vector<double>(m.bits.size(), 1e18);
  return region_detail::squared_distance_to_foreground(bg);
}

inline std::vector<double> gradient_energy(const Tensor& img) {
  const int h = img.dim(2), w = img.dim(3);
  std::vector<double> e(static_cast<std::size_t>(w) * h, 0.0);
  for (int y = 1; y + 1 < h; ++y) {
    for (int x = 1; x + 1 < w; ++x) {
      double acc = 0;
      for (int c = 0; c < img.dim(1); ++c) {
        auto v = [&](int dx, int dy) { return static_cast<double>(img.at(0, c, y + dy, x + dx)); };
        const double gx = v(1, -1) + 2 * v(1, 0) + v(1, 1) - v(-1, -1) - 2 * v(-1, 0) - v(-1, 1);
        const double gy = v(-1, 1) + 2 * v(0, 1) + v(1, 1) - v(-1, -1) - 2 * v(0, -1) - v(1, -1);
        acc += gx * gx + gy * gy;
      }
      e[static_cast<std::size_t>(y) * w + x] = acc;
    }
  }
  return e;
}

}  // namespace dataset_detail

// Renders one synthetic pair with exact ground truth. point_b = W(point_a)
// for every keypoint; keypoints sit on local gradient-energy maxima inside
// the object, away from its boundary in both images.
inline CorrespondencePair gen_pair(const std::string& shape_class, const WarpSpec& spec, int size,
                                   std::uint64_t seed, const GenOptions& opt = {}) {
  if (size < 16) throw UsageError("image size must be >= 16");
  if (opt.keypoints < 1) throw UsageError("keypoint count must be >= 1");
  spec.validate(size);
  Rng rng(seed);
  for (int attempt = 0; attempt < opt.max_attempts; ++attempt) {
    CorrespondencePair pair;
    pair.label = shape_class;
    Silhouette sil{shape_class, size / 2.0 + rng.uniform(-3, 3), size / 2.0 + rng.uniform(-3, 3),
                   size * rng.uniform(0.24, 0.3), rng.uniform(0, 3.14159265358979323846), rng.uniform(0.6, 0.85)};
    // Busy object texture over a smoother, lower-contrast background.
    Texture object = Texture::random(rng, size, 3, 10, 7.0, 20.0, 0.12, 0.45);
    const auto palette = class_palette(shape_class);
    for (std::size_t c = 0; c < 3; ++c) object.base[c] = palette[c] + rng.uniform(-0.08, 0.08);
    const Texture bg_a = Texture::random(rng, size, 2, 3, 16.0, 40.0, 0.08, 0.2);
    const Texture bg_b = Texture::random(rng, size, 2, 3, 16.0, 40.0, 0.08, 0.2);
    pair.warp = sample_warp(spec, size, rng);
    const Warp& w = pair.warp;

    pair.image_a = Tensor({1, 3, size, size});
    pair.image_b = Tensor({1, 3, size, size});
    pair.mask_a = ObjectMask(size, size, shape_class, MaskSource::kSynthetic);
    pair.mask_b = ObjectMask(size, size, shape_class, MaskSource::kSynthetic);
    for (int y = 0; y < size; ++y) {
      for (int x = 0; x < size; ++x) {
        const Point2 p{static_cast<double>(x), static_cast<double>(y)};
        const bool in_a = sil.contains(p);
        pair.mask_a.set(x, y, in_a);
        const auto ca = in_a ? object.at(p) : bg_a.at(p);
        const Point2 src = w.invert(p);
        const bool in_b = sil.contains(src);
        pair.mask_b.set(x, y, in_b);
        auto cb = in_b ? object.at(src) : bg_b.at(p);
        if (in_b) {
          for (auto& v : cb) v = w.gain * v + w.offset;
        }
        for (int c = 0; c < 3; ++c) {
          pair.image_a.at(0, c, y, x) = dataset_detail::quantize(ca[static_cast<std::size_t>(c)]);
          pair.image_b.at(0, c, y, x) = dataset_detail::quantize(cb[static_cast<std::size_t>(c)]);
        }
      }
    }

    // Candidate keypoints: 3x3 maxima of gradient energy in the eroded mask.
    const auto energy = dataset_detail::gradient_energy(pair.image_a);
    const auto depth_a = dataset_detail::interior_depth2(pair.mask_a);
    const auto depth_b = dataset_detail::interior_depth2(pair.mask_b);
    const double margin2 = static_cast<double>(opt.interior_margin) * opt.interior_margin;
    std::vector<Pixel> maxima;
    for (int y = 1; y + 1 < size; ++y) {
      for (int x = 1; x + 1 < size; ++x) {
        const std::size_t i = static_cast<std::size_t>(y) * size + x;
        if (depth_a[i] <= margin2 || energy[i] <= 0) continue;
        bool is_max = true;
        for (int dy = -1; dy <= 1 && is_max; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            if ((dx || dy) && energy[static_cast<std::size_t>(y + dy) * size + x + dx] > energy[i]) {
              is_max = false;
              break;
            }
          }
        }
        if (is_max) maxima.push_back({x, y});
      }
    }
    std::stable_sort(maxima.begin(), maxima.end(), [&](Pixel a, Pixel b) {
      return energy[static_cast<std::size_t>(a.y) * size + a.x] > energy[static_cast<std::size_t>(b.y) * size + b.x];
    });
    for (const Pixel& m : maxima) {
      if (static_cast<int>(pair.keypoints.size()) >= opt.keypoints) break;
      bool spaced = true;
      for (const auto& k : pair.keypoints) {
        const double dx = k.a.x - m.x, dy = k.a.y - m.y;
        if (dx * dx + dy * dy < static_cast<double>(opt.min_spacing) * opt.min_spacing) spaced = false;
      }
      if (!spaced) continue;
      const Point2 pa = to_point(m);
      const Point2 pb = w.apply(pa);
      if (pb.x < 0 || pb.y < 0 || pb.x > size - 1 || pb.y > size - 1) continue;
      const Pixel rb = round_to_pixel(pb);
      if (depth_b[static_cast<std::size_t>(rb.y) * size + rb.x] <= margin2) continue;
      pair.keypoints.push_back({static_cast<int>(pair.keypoints.size()), pa, pb});
    }
    if (!pair.keypoints.empty()) return pair;
  }
  throw DataError("gen_pair: no keypoint survived the warp after " + std::to_string(opt.max_attempts) + " attempts");
}

// Seeded train/validation partition. Both halves keep input order.
template <class T>
std::pair<std::vector<T>, std::vector<T>> split(const std::vector<T>& items, double train_fraction,
                                                std::uint64_t seed) {
  if (!(train_fraction > 0 && train_fraction < 1)) throw UsageError("split: fraction must lie in (0, 1)");
  if (items.size() < 2) throw DataError("split: need at least 2 items");
  std::vector<std::size_t> idx(items.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  Rng rng(seed);
  rng.shuffle(idx);
  auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(items.size())));
  n_train = std::clamp<std::size_t>(n_train, 1, items.size() - 1);
  std::vector<std::size_t> tr(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<std::size_t> va(idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
  std::sort(tr.begin(), tr.end());
  std::sort(va.begin(), va.end());
  std::pair<std::vector<T>, std::vector<T>> out;
  for (auto i : tr) out.first.push_back(items[i]);
  for (auto i : va) out.second.push_back(items[i]);
  return out;
}

// ---------------------------------------------------------------------------
// Files. Keypoints: one `id,x,y` line per point, zero-based pixel
// coordinates. Manifest: one pair per line,
//   image_a,image_b,kp_a,kp_b,mask_a,mask_b,class
// with paths relative to the manifest's directory; '#' lines are comments.

using KeypointList = std::vector<std::pair<int, Point2>>;

inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline void write_keypoints(const std::string& path, const KeypointList& kps) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot open " + path + " for writing");
  for (const auto& [id, p] : kps) os << id << ',' << format_double(p.x) << ',' << format_double(p.y) << '\n';
  if (!os) throw DataError("write failed for " + path);
}

inline KeypointList read_keypoints(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open keypoint file " + path);
  KeypointList out;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::array<std::string, 3> f;
    std::stringstream ss(line);
    int n = 0;
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (n < 3) f[static_cast<std::size_t>(n)] = item;
      ++n;
    }
    if (n != 3) {
      throw DataError(path + ":" + std::to_string(lineno) + ": expected 3 fields id,x,y, got " + std::to_string(n));
    }
    static const char* names[] = {"id", "x", "y"};
    int id = 0;
    double xy[2] = {0, 0};
    for (int k = 0; k < 3; ++k) {
      const auto& s = f[static_cast<std::size_t>(k)];
      const char* b = s.data();
      const char* e = s.data() + s.size();
      std::from_chars_result r = k == 0 ? std::from_chars(b, e, id) : std::from_chars(b, e, xy[k - 1]);
      if (r.ec != std::errc() || r.ptr != e || s.empty()) {
        throw DataError(path + ":" + std::to_string(lineno) + ": field '" + names[k] + "' is not a number: '" + s + "'");
      }
    }
    for (const auto& [other, p] : out) {
      if (other == id) throw DataError(path + ":" + std::to_string(lineno) + ": duplicate keypoint id " + std::to_string(id));
    }
    out.emplace_back(id, Point2{xy[0], xy[1]});
  }
  return out;
}

struct PairHalf {
  Tensor image;
  ObjectMask mask;
  KeypointList keypoints;
};

// Loads an image with its keypoints and mask, validating that keypoints lie
// within [0, w-1] x [0, h-1] and that the mask matches the image size.
inline PairHalf load_annotations(const std::string& image_path, const std::string& keypoint_path,
                                 const std::string& mask_path, const std::string& label = {}) {
  PairHalf half;
  half.image = load_image(image_path);
  const int w = half.image.dim(3), h = half.image.dim(2);
  half.mask = load_mask(mask_path, label);
  if (half.mask.width != w || half.mask.height != h) {
    throw DataError(mask_path + ": mask is " + std::to_string(half.mask.width) + "x" + std::to_string(half.mask.height) +
                    " but image " + image_path + " is " + std::to_string(w) + "x" + std::to_string(h));
  }
  half.keypoints = read_keypoints(keypoint_path);
  for (const auto& [id, p] : half.keypoints) {
    if (!(p.x >= 0 && p.y >= 0 && p.x <= w - 1 && p.y <= h - 1)) {
      throw DataError(keypoint_path + ": keypoint " + std::to_string(id) + " at (" + format_double(p.x) + "," +
                      format_double(p.y) + ") lies outside the " + std::to_string(w) + "x" + std::to_string(h) + " image");
    }
  }
  return half;
}

struct ManifestEntry {
  std::string image_a, image_b, kp_a, kp_b, mask_a, mask_b, label;
};

inline std::vector<ManifestEntry> read_manifest(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open manifest " + path);
  const auto dir = std::filesystem::path(path).parent_path();
  std::vector<ManifestEntry> out;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string item;
    while (std::getline(ss, item, ',')) f.push_back(item);
    if (f.size() != 7) {
      throw DataError(path + ":" + std::to_string(lineno) + ": expected 7 fields, got " + std::to_string(f.size()));
    }
    auto rel = [&](const std::string& s) { return (dir / s).string(); };
    out.push_back({rel(f[0]), rel(f[1]), rel(f[2]), rel(f[3]), rel(f[4]), rel(f[5]), f[6]});
  }
  return out;
}

// Correspondences are the ids present in both keypoint files, in image_a's
// file order.
inline CorrespondencePair load_pair(const ManifestEntry& e) {
  auto a = load_annotations(e.image_a, e.kp_a, e.mask_a, e.label);
  auto b = load_annotations(e.image_b, e.kp_b, e.mask_b, e.label);
  CorrespondencePair pair;
  pair.image_a = std::move(a.image);
  pair.image_b = std::move(b.image);
  pair.mask_a = std::move(a.mask);
  pair.mask_b = std::move(b.mask);
  pair.label = e.label;
  std::map<int, Point2> lookup(b.keypoints.begin(), b.keypoints.end());
  for (const auto& [id, p] : a.keypoints) {
    auto it = lookup.find(id);
    if (it != lookup.end()) pair.keypoints.push_back({id, p, it->second});
  }
  return pair;
}

// Writes the six files of one pair under `dir` using `stem` as the name
// prefix; returns the manifest line (paths relative to `dir`'s parent when
// `rel_prefix` is the directory's name).
inline std::string write_pair(const CorrespondencePair& pair, const std::filesystem::path& dir,
                              const std::string& stem, const std::string& rel_prefix) {
  const std::string ia = stem + "_a.png", ib = stem + "_b.png", ka = stem + "_a.kp", kb = stem + "_b.kp",
                    ma = stem + "_a_mask.png", mb = stem + "_b_mask.png";
  save_image((dir / ia).string(), pair.image_a);
  save_image((dir / ib).string(), pair.image_b);
  KeypointList la, lb;
  for (const auto& k : pair.keypoints) {
    la.emplace_back(k.id, k.a);
    lb.emplace_back(k.id, k.b);
  }
  write_keypoints((dir / ka).string(), la);
  write_keypoints((dir / kb).string(), lb);
  save_mask((dir / ma).string(), pair.mask_a);
  save_mask((dir / mb).string(), pair.mask_b);
  auto r = [&](const std::string& s) { return rel_prefix.empty() ? s : rel_prefix + "/" + s; };
  return r(ia) + "," + r(ib) + "," + r(ka) + "," + r(kb) + "," + r(ma) + "," + r(mb) + "," + pair.label;
}

}  // namespace semcorr
