#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "semcorr/backbone.hpp"

namespace semcorr {

// Dense per-pixel descriptors: a [1, C, H, W] tensor at image resolution.
// A default-constructed field is empty and acts as "no descriptor".
template <class T>
struct BasicDescriptorField {
  BasicTensor<T> data;

  BasicDescriptorField() = default;
  explicit BasicDescriptorField(BasicTensor<T> t) : data(std::move(t)) {
    require_rank(data.shape(), 4, "descriptor field");
    if (data.dim(0) != 1) throw ShapeError("descriptor field must have batch size 1");
  }

  bool empty() const { return data.empty(); }
  int channels() const { return empty() ? 0 : data.dim(1); }
  int height() const { return data.dim(2); }
  int width() const { return data.dim(3); }
  bool contains(Pixel p) const { return p.x >= 0 && p.y >= 0 && p.x < width() && p.y < height(); }

  T at(int c, int y, int x) const { return data.at(0, c, y, x); }

  std::vector<T> descriptor_at(Pixel p) const {
    if (!contains(p)) {
      throw ShapeError("descriptor_at: pixel (" + std::to_string(p.x) + "," + std::to_string(p.y) +
                       ") outside " + std::to_string(width()) + "x" + std::to_string(height()) +
                       " field");
    }
    std::vector<T> d(static_cast<std::size_t>(channels()));
    const std::size_t plane = static_cast<std::size_t>(height()) * width();
    const T* base = data.data().data() + static_cast<std::size_t>(p.y) * width() + p.x;
    for (int c = 0; c < channels(); ++c) d[static_cast<std::size_t>(c)] = base[c * plane];
    return d;
  }
};

using DescriptorField = BasicDescriptorField<float>;

template <class T>
std::vector<T> descriptor_at(const BasicDescriptorField<T>& field, Pixel p) {
  return field.descriptor_at(p);
}

struct HypercolumnOptions {
  // Zero-mean, unit-variance per channel over the image after concatenation.
  bool standardize = true;
};

// Rescales each channel to zero mean and unit variance over the image.
// Constant channels become all-zero.
template <class T>
void standardize_channels(BasicDescriptorField<T>& field) {
  const std::size_t plane = static_cast<std::size_t>(field.height()) * field.width();
  for (int c = 0; c < field.channels(); ++c) {
    T* p = &field.data.at(0, c, 0, 0);
    double mean = 0;
    for (std::size_t i = 0; i < plane; ++i) mean += p[i];
    mean /= static_cast<double>(plane);
    double var = 0;
    for (std::size_t i = 0; i < plane; ++i) var += (p[i] - mean) * (p[i] - mean);
    var /= static_cast<double>(plane);
    const double inv = var > 1e-12 ? 1.0 / std::sqrt(var) : 0.0;
    for (std::size_t i = 0; i < plane; ++i) p[i] = static_cast<T>((p[i] - mean) * inv);
  }
}

// Upsamples every layer of the stack to image_h x image_w (corner-aligned
// bilinear) and concatenates them in layer order.
template <class T>
BasicDescriptorField<T> extract_hypercolumns(const BasicFeatureStack<T>& stack, int image_h, int image_w,
                                             HypercolumnOptions options = {}) {
  if (stack.empty()) throw UsageError("extract_hypercolumns: empty feature stack");
  if (image_h < 1 || image_w < 1) throw UsageError("extract_hypercolumns: image size must be >= 1");
  int total = 0;
  for (const auto& m : stack.maps) {
    require_rank(m.shape(), 4, "feature map");
    if (m.dim(0) != 1) throw ShapeError("extract_hypercolumns: feature maps must have batch size 1");
    total += m.dim(1);
  }
  BasicTensor<T> out({1, total, image_h, image_w});
  int offset = 0;
  for (const auto& m : stack.maps) {
    const bool same = m.dim(2) == image_h && m.dim(3) == image_w;
    const BasicTensor<T> up =
        same ? m : bilinear_resize(BasicVar<T>::constant(m), image_h, image_w).value();
    std::copy(up.data().begin(), up.data().end(), &out.at(0, offset, 0, 0));
    offset += m.dim(1);
  }
  BasicDescriptorField<T> field(std::move(out));
  if (options.standardize) standardize_channels(field);
  return field;
}

// Channel concatenation, hypercolumn channels first. An empty `emb` means the
// embedding is disabled and `hc` is returned unchanged.
template <class T>
BasicDescriptorField<T> fuse(const BasicDescriptorField<T>& hc, const BasicDescriptorField<T>& emb) {
  if (hc.empty()) throw UsageError("fuse: empty hypercolumn field");
  if (emb.empty()) return hc;
  if (hc.height() != emb.height() || hc.width() != emb.width()) {
    throw ShapeError("fuse: spatial mismatch " + shape_string(hc.data.shape()) + " vs " +
                     shape_string(emb.data.shape()));
  }
  return BasicDescriptorField<T>(
      concat_channels<T>({BasicVar<T>::constant(hc.data), BasicVar<T>::constant(emb.data)}).value());
}

}  // namespace semcorr
