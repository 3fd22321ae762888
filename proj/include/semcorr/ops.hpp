#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "semcorr/autograd.hpp"
#include "semcorr/geometry.hpp"
#include "semcorr/parallel.hpp"

namespace semcorr {

namespace ops_detail {

inline int conv_out_extent(int in, int kernel, int stride, int padding) {
  const int span = in + 2 * padding - kernel;
  return span < 0 ? 0 : span / stride + 1;
}

// Output columns whose tap `k` lands inside [0, in).
inline void valid_range(int out, int in, int k, int stride, int padding, int& lo, int& hi) {
  // Need 0 <= o*stride + k - padding <= in - 1.
  const int a = padding - k;
  lo = a <= 0 ? 0 : (a + stride - 1) / stride;
  const int b = in - 1 + padding - k;
  hi = b < 0 ? -1 : std::min(out - 1, b / stride);
}

template <class T>
BasicTensor<T> conv2d_forward(const BasicTensor<T>& x, const BasicTensor<T>& w,
                              const BasicTensor<T>& b, int stride, int padding) {
  const int n_batch = x.dim(0), in_c = x.dim(1), in_h = x.dim(2), in_w = x.dim(3);
  const int out_c = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  const int out_h = conv_out_extent(in_h, kh, stride, padding);
  const int out_w = conv_out_extent(in_w, kw, stride, padding);
  BasicTensor<T> y({n_batch, out_c, out_h, out_w});
  const int planes = n_batch * out_c;
#pragma omp parallel for schedule(static) if (threads() > 1)
  for (int plane = 0; plane < planes; ++plane) {
    const int n = plane / out_c, o = plane % out_c;
    T* out = &y.at(n, o, 0, 0);
    std::fill(out, out + static_cast<std::size_t>(out_h) * out_w, b[o]);
    for (int c = 0; c < in_c; ++c) {
      const T* in = &x.at(n, c, 0, 0);
      for (int ky = 0; ky < kh; ++ky) {
        for (int kx = 0; kx < kw; ++kx) {
          const T wv = w.at(o, c, ky, kx);
          int lo, hi;
          valid_range(out_w, in_w, kx, stride, padding, lo, hi);
          for (int oy = 0; oy < out_h; ++oy) {
            const int iy = oy * stride + ky - padding;
            if (iy < 0 || iy >= in_h) continue;
            T* orow = out + static_cast<std::size_t>(oy) * out_w;
            const T* irow = in + static_cast<std::size_t>(iy) * in_w + kx - padding;
            if (stride == 1) {
              for (int ox = lo; ox <= hi; ++ox) orow[ox] += wv * irow[ox];
            } else {
              for (int ox = lo; ox <= hi; ++ox) orow[ox] += wv * irow[ox * stride];
            }
          }
        }
      }
    }
  }
  return y;
}

}  // namespace ops_detail

// Cross-correlation with square stride/padding. Weights are
// out_channels x in_channels x kh x kw, bias has out_channels entries.
template <class T>
BasicVar<T> conv2d(const BasicVar<T>& input, const BasicVar<T>& weights, const BasicVar<T>& bias,
                   int stride = 1, int padding = 0) {
  const auto& xs = input.shape();
  const auto& ws = weights.shape();
  require_rank(xs, 4, "conv2d input");
  require_rank(ws, 4, "conv2d weights");
  if (stride < 1 || padding < 0) throw UsageError("conv2d: stride must be >= 1, padding >= 0");
  if (ws[1] != xs[1]) {
    throw ShapeError("conv2d: weights " + shape_string(ws) + " expect " + std::to_string(ws[1]) +
                     " input channels but input " + shape_string(xs) + " has " +
                     std::to_string(xs[1]));
  }
  if (bias.value().size() != static_cast<std::size_t>(ws[0])) {
    throw ShapeError("conv2d: bias " + shape_string(bias.shape()) + " does not match weights " +
                     shape_string(ws));
  }
  if (ops_detail::conv_out_extent(xs[2], ws[2], stride, padding) < 1 ||
      ops_detail::conv_out_extent(xs[3], ws[3], stride, padding) < 1) {
    throw ShapeError("conv2d: kernel " + shape_string(ws) + " does not fit input " +
                     shape_string(xs) + " with padding " + std::to_string(padding));
  }
  auto y = ops_detail::conv2d_forward(input.value(), weights.value(), bias.value(), stride, padding);
  auto xr = input.record();
  auto wr = weights.record();
  auto br = bias.record();
  return make_op<T>("conv2d", std::move(y), {input, weights, bias},
                    [xr, wr, br, stride, padding](const BasicTensor<T>& dy) {
    const auto& x = xr->value;
    const auto& w = wr->value;
    const int n_batch = x.dim(0), in_c = x.dim(1), in_h = x.dim(2), in_w = x.dim(3);
    const int out_c = w.dim(0), kh = w.dim(2), kw = w.dim(3);
    const int out_h = dy.dim(2), out_w = dy.dim(3);
    if (xr->requires_grad) {
      auto& dx = xr->grad_buffer();
      const int planes = n_batch * in_c;
#pragma omp parallel for schedule(static) if (threads() > 1)
      for (int plane = 0; plane < planes; ++plane) {
        const int n = plane / in_c, c = plane % in_c;
        T* dxp = &dx.at(n, c, 0, 0);
        for (int o = 0; o < out_c; ++o) {
          const T* g = &dy.at(n, o, 0, 0);
          for (int ky = 0; ky < kh; ++ky) {
            for (int kx = 0; kx < kw; ++kx) {
              const T wv = w.at(o, c, ky, kx);
              int lo, hi;
              ops_detail::valid_range(out_w, in_w, kx, stride, padding, lo, hi);
              for (int oy = 0; oy < out_h; ++oy) {
                const int iy = oy * stride + ky - padding;
                if (iy < 0 || iy >= in_h) continue;
                const T* grow = g + static_cast<std::size_t>(oy) * out_w;
                T* drow = dxp + static_cast<std::size_t>(iy) * in_w + kx - padding;
                for (int ox = lo; ox <= hi; ++ox) drow[ox * stride] += wv * grow[ox];
              }
            }
          }
        }
      }
    }
    if (wr->requires_grad) {
      auto& dw = wr->grad_buffer();
#pragma omp parallel for schedule(static) if (threads() > 1)
      for (int o = 0; o < out_c; ++o) {
        for (int c = 0; c < in_c; ++c) {
          for (int ky = 0; ky < kh; ++ky) {
            for (int kx = 0; kx < kw; ++kx) {
              int lo, hi;
              ops_detail::valid_range(out_w, in_w, kx, stride, padding, lo, hi);
              T acc = 0;
              for (int n = 0; n < n_batch; ++n) {
                const T* g = &dy.at(n, o, 0, 0);
                const T* in = &x.at(n, c, 0, 0);
                for (int oy = 0; oy < out_h; ++oy) {
                  const int iy = oy * stride + ky - padding;
                  if (iy < 0 || iy >= in_h) continue;
                  const T* grow = g + static_cast<std::size_t>(oy) * out_w;
                  const T* irow = in + static_cast<std::size_t>(iy) * in_w + kx - padding;
                  for (int ox = lo; ox <= hi; ++ox) acc += grow[ox] * irow[ox * stride];
                }
              }
              dw.at(o, c, ky, kx) += acc;
            }
          }
        }
      }
    }
    if (br->requires_grad) {
      auto& db = br->grad_buffer();
      for (int o = 0; o < out_c; ++o) {
        T acc = 0;
        for (int n = 0; n < n_batch; ++n) {
          const T* g = &dy.at(n, o, 0, 0);
          for (int i = 0; i < out_h * out_w; ++i) acc += g[i];
        }
        db[o] += acc;
      }
    }
  });
}

template <class T>
BasicVar<T> relu(const BasicVar<T>& input) {
  BasicTensor<T> y = input.value();
  for (auto& v : y.data()) v = v > T{0} ? v : T{0};
  auto xr = input.record();
  return make_op<T>("relu", std::move(y), {input}, [xr](const BasicTensor<T>& dy) {
    auto& dx = xr->grad_buffer();
    for (std::size_t i = 0; i < dy.size(); ++i) {
      if (xr->value[i] > T{0}) dx[i] += dy[i];
    }
  });
}

// Max over each window; the first maximum in row-major window order wins.
template <class T>
BasicVar<T> maxpool2d(const BasicVar<T>& input, int window, int stride) {
  const auto& xs = input.shape();
  require_rank(xs, 4, "maxpool2d input");
  if (window < 1 || stride < 1) throw UsageError("maxpool2d: window and stride must be >= 1");
  if (window > xs[2] || window > xs[3]) {
    throw ShapeError("maxpool2d: window " + std::to_string(window) +
                     " larger than spatial extent of " + shape_string(xs));
  }
  const int n_batch = xs[0], ch = xs[1], in_h = xs[2], in_w = xs[3];
  const int out_h = (in_h - window) / stride + 1, out_w = (in_w - window) / stride + 1;
  BasicTensor<T> y({n_batch, ch, out_h, out_w});
  std::vector<std::size_t> arg(y.size());
  const auto& x = input.value();
  std::size_t k = 0;
  for (int n = 0; n < n_batch; ++n) {
    for (int c = 0; c < ch; ++c) {
      const std::size_t base = (static_cast<std::size_t>(n) * ch + c) * in_h * in_w;
      for (int oy = 0; oy < out_h; ++oy) {
        for (int ox = 0; ox < out_w; ++ox, ++k) {
          std::size_t best = base + static_cast<std::size_t>(oy * stride) * in_w + ox * stride;
          for (int dy = 0; dy < window; ++dy) {
            for (int dx = 0; dx < window; ++dx) {
              const std::size_t i =
                  base + static_cast<std::size_t>(oy * stride + dy) * in_w + ox * stride + dx;
              if (x[i] > x[best]) best = i;
            }
          }
          y[k] = x[best];
          arg[k] = best;
        }
      }
    }
  }
  auto xr = input.record();
  return make_op<T>("maxpool2d", std::move(y), {input},
                    [xr, arg = std::move(arg)](const BasicTensor<T>& dy) {
    auto& dx = xr->grad_buffer();
    for (std::size_t i = 0; i < dy.size(); ++i) dx[arg[i]] += dy[i];
  });
}

namespace ops_detail {

struct LerpTap {
  int i0 = 0;
  int i1 = 0;
  double frac = 0.0;
};

// Corner-aligned sampling: output index 0 maps to input 0 and the last output
// index maps to the last input. A 1-pixel input axis broadcasts.
inline std::vector<LerpTap> corner_aligned_taps(int in, int out) {
  std::vector<LerpTap> taps(static_cast<std::size_t>(out));
  for (int i = 0; i < out; ++i) {
    LerpTap t;
    if (in > 1 && out > 1) {
      const double src = static_cast<double>(i) * (in - 1) / (out - 1);
      t.i0 = std::min(static_cast<int>(std::floor(src)), in - 1);
      t.i1 = std::min(t.i0 + 1, in - 1);
      t.frac = src - t.i0;
    }
    taps[static_cast<std::size_t>(i)] = t;
  }
  return taps;
}

}  // namespace ops_detail

template <class T>
BasicVar<T> bilinear_resize(const BasicVar<T>& input, int target_h, int target_w) {
  const auto& xs = input.shape();
  require_rank(xs, 4, "bilinear_resize input");
  if (target_h < 1 || target_w < 1) throw UsageError("bilinear_resize: targets must be >= 1");
  const int n_batch = xs[0], ch = xs[1], in_h = xs[2], in_w = xs[3];
  auto ty = ops_detail::corner_aligned_taps(in_h, target_h);
  auto tx = ops_detail::corner_aligned_taps(in_w, target_w);
  BasicTensor<T> y({n_batch, ch, target_h, target_w});
  const auto& x = input.value();
  const int planes = n_batch * ch;
#pragma omp parallel for schedule(static) if (threads() > 1)
  for (int p = 0; p < planes; ++p) {
    const T* in = x.data().data() + static_cast<std::size_t>(p) * in_h * in_w;
    T* out = y.data().data() + static_cast<std::size_t>(p) * target_h * target_w;
    for (int oy = 0; oy < target_h; ++oy) {
      const auto& a = ty[static_cast<std::size_t>(oy)];
      const T fy = static_cast<T>(a.frac);
      const T* r0 = in + static_cast<std::size_t>(a.i0) * in_w;
      const T* r1 = in + static_cast<std::size_t>(a.i1) * in_w;
      for (int ox = 0; ox < target_w; ++ox) {
        const auto& b = tx[static_cast<std::size_t>(ox)];
        const T fx = static_cast<T>(b.frac);
        // Lerp form keeps constant fields exact.
        const T top = r0[b.i0] + fx * (r0[b.i1] - r0[b.i0]);
        const T bot = r1[b.i0] + fx * (r1[b.i1] - r1[b.i0]);
        out[static_cast<std::size_t>(oy) * target_w + ox] = top + fy * (bot - top);
      }
    }
  }
  auto xr = input.record();
  return make_op<T>("bilinear_resize", std::move(y), {input},
                    [xr, ty = std::move(ty), tx = std::move(tx), planes, in_h, in_w, target_h,
                     target_w](const BasicTensor<T>& dy) {
    auto& dx = xr->grad_buffer();
#pragma omp parallel for schedule(static) if (threads() > 1)
    for (int p = 0; p < planes; ++p) {
      T* d = dx.data().data() + static_cast<std::size_t>(p) * in_h * in_w;
      const T* g = dy.data().data() + static_cast<std::size_t>(p) * target_h * target_w;
      for (int oy = 0; oy < target_h; ++oy) {
        const auto& a = ty[static_cast<std::size_t>(oy)];
        const T fy = static_cast<T>(a.frac);
        T* r0 = d + static_cast<std::size_t>(a.i0) * in_w;
        T* r1 = d + static_cast<std::size_t>(a.i1) * in_w;
        for (int ox = 0; ox < target_w; ++ox) {
          const auto& b = tx[static_cast<std::size_t>(ox)];
          const T fx = static_cast<T>(b.frac);
          const T v = g[static_cast<std::size_t>(oy) * target_w + ox];
          const T top = v * (T{1} - fy), bot = v * fy;
          r0[b.i0] += top * (T{1} - fx);
          r0[b.i1] += top * fx;
          r1[b.i0] += bot * (T{1} - fx);
          r1[b.i1] += bot * fx;
        }
      }
    }
  });
}

// Channel concatenation in list order.
template <class T>
BasicVar<T> concat_channels(const std::vector<BasicVar<T>>& inputs) {
  if (inputs.empty()) throw UsageError("concat_channels: empty input list");
  const auto& s0 = inputs.front().shape();
  require_rank(s0, 4, "concat_channels input");
  int total = 0;
  for (const auto& in : inputs) {
    const auto& s = in.shape();
    require_rank(s, 4, "concat_channels input");
    if (s[0] != s0[0] || s[2] != s0[2] || s[3] != s0[3]) {
      throw ShapeError("concat_channels: " + shape_string(s) + " does not share batch/spatial dims with " +
                       shape_string(s0));
    }
    total += s[1];
  }
  const int n_batch = s0[0];
  const std::size_t plane = static_cast<std::size_t>(s0[2]) * s0[3];
  BasicTensor<T> y({n_batch, total, s0[2], s0[3]});
  std::vector<int> offsets;
  int off = 0;
  for (const auto& in : inputs) {
    offsets.push_back(off);
    const int c = in.shape()[1];
    for (int n = 0; n < n_batch; ++n) {
      const T* src = in.value().data().data() + static_cast<std::size_t>(n) * c * plane;
      std::copy(src, src + c * plane, &y.at(n, off, 0, 0));
    }
    off += c;
  }
  std::vector<std::shared_ptr<GradRecord<T>>> recs;
  for (const auto& in : inputs) recs.push_back(in.record());
  return make_op<T>("concat_channels", std::move(y), inputs,
                    [recs, offsets, n_batch, plane](const BasicTensor<T>& dy) {
    for (std::size_t k = 0; k < recs.size(); ++k) {
      if (!recs[k]->requires_grad) continue;
      auto& dx = recs[k]->grad_buffer();
      const int c = dx.dim(1);
      for (int n = 0; n < n_batch; ++n) {
        const T* src = &dy.at(n, offsets[k], 0, 0);
        T* dst = dx.data().data() + static_cast<std::size_t>(n) * c * plane;
        for (std::size_t i = 0; i < c * plane; ++i) dst[i] += src[i];
      }
    }
  });
}

template <class T>
BasicVar<T> add(const BasicVar<T>& a, const BasicVar<T>& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("add: " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  }
  BasicTensor<T> y = a.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += b.value()[i];
  auto ar = a.record(), br = b.record();
  return make_op<T>("add", std::move(y), {a, b}, [ar, br](const BasicTensor<T>& dy) {
    if (ar->requires_grad) ar->accumulate(dy);
    if (br->requires_grad) br->accumulate(dy);
  });
}

template <class T>
BasicVar<T> mul(const BasicVar<T>& a, const BasicVar<T>& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("mul: " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  }
  BasicTensor<T> y = a.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= b.value()[i];
  auto ar = a.record(), br = b.record();
  return make_op<T>("mul", std::move(y), {a, b}, [ar, br](const BasicTensor<T>& dy) {
    if (ar->requires_grad) {
      auto& d = ar->grad_buffer();
      for (std::size_t i = 0; i < dy.size(); ++i) d[i] += dy[i] * br->value[i];
    }
    if (br->requires_grad) {
      auto& d = br->grad_buffer();
      for (std::size_t i = 0; i < dy.size(); ++i) d[i] += dy[i] * ar->value[i];
    }
  });
}

template <class T>
BasicVar<T> scale(const BasicVar<T>& a, T s) {
  BasicTensor<T> y = a.value();
  for (auto& v : y.data()) v *= s;
  auto ar = a.record();
  return make_op<T>("scale", std::move(y), {a}, [ar, s](const BasicTensor<T>& dy) {
    auto& d = ar->grad_buffer();
    for (std::size_t i = 0; i < dy.size(); ++i) d[i] += s * dy[i];
  });
}

template <class T>
BasicVar<T> square(const BasicVar<T>& a) { return mul(a, a); }

template <class T>
BasicVar<T> sum(const BasicVar<T>& a) {
  double acc = 0;
  for (T v : a.value().data()) acc += v;
  auto ar = a.record();
  return make_op<T>("sum", BasicTensor<T>::scalar(static_cast<T>(acc)), {a},
                    [ar](const BasicTensor<T>& dy) {
    auto& d = ar->grad_buffer();
    for (auto& v : d.data()) v += dy[0];
  });
}

template <class T>
BasicVar<T> reshape(const BasicVar<T>& a, Shape shape) {
  auto y = a.value().reshaped(std::move(shape));
  auto ar = a.record();
  return make_op<T>("reshape", std::move(y), {a}, [ar](const BasicTensor<T>& dy) {
    auto& d = ar->grad_buffer();
    for (std::size_t i = 0; i < dy.size(); ++i) d[i] += dy[i];
  });
}

// [N, ...] -> [N, prod(rest)]
template <class T>
BasicVar<T> flatten(const BasicVar<T>& a) {
  const int n = a.shape()[0];
  return reshape(a, Shape{n, static_cast<int>(a.value().size() / static_cast<std::size_t>(n))});
}

// x: [N, F], w: [O, F], b: [O] -> [N, O]
template <class T>
BasicVar<T> linear(const BasicVar<T>& input, const BasicVar<T>& weights, const BasicVar<T>& bias) {
  const auto& xs = input.shape();
  const auto& ws = weights.shape();
  require_rank(xs, 2, "linear input");
  require_rank(ws, 2, "linear weights");
  if (xs[1] != ws[1] || bias.value().size() != static_cast<std::size_t>(ws[0])) {
    throw ShapeError("linear: input " + shape_string(xs) + " incompatible with weights " +
                     shape_string(ws) + " / bias " + shape_string(bias.shape()));
  }
  const int n_batch = xs[0], in_f = xs[1], out_f = ws[0];
  BasicTensor<T> y({n_batch, out_f});
  const auto& x = input.value();
  const auto& w = weights.value();
  for (int n = 0; n < n_batch; ++n) {
    const T* xr = x.data().data() + static_cast<std::size_t>(n) * in_f;
    for (int o = 0; o < out_f; ++o) {
      const T* wr = w.data().data() + static_cast<std::size_t>(o) * in_f;
      T acc = bias.value()[o];
      for (int f = 0; f < in_f; ++f) acc += wr[f] * xr[f];
      y[static_cast<std::size_t>(n) * out_f + o] = acc;
    }
  }
  auto xr = input.record(), wr = weights.record(), br = bias.record();
  return make_op<T>("linear", std::move(y), {input, weights, bias},
                    [xr, wr, br, n_batch, in_f, out_f](const BasicTensor<T>& dy) {
    if (xr->requires_grad) {
      auto& dx = xr->grad_buffer();
      for (int n = 0; n < n_batch; ++n) {
        for (int o = 0; o < out_f; ++o) {
          const T g = dy[static_cast<std::size_t>(n) * out_f + o];
          const T* w = wr->value.data().data() + static_cast<std::size_t>(o) * in_f;
          T* d = dx.data().data() + static_cast<std::size_t>(n) * in_f;
          for (int f = 0; f < in_f; ++f) d[f] += g * w[f];
        }
      }
    }
    if (wr->requires_grad) {
      auto& dw = wr->grad_buffer();
      for (int n = 0; n < n_batch; ++n) {
        const T* x = xr->value.data().data() + static_cast<std::size_t>(n) * in_f;
        for (int o = 0; o < out_f; ++o) {
          const T g = dy[static_cast<std::size_t>(n) * out_f + o];
          T* d = dw.data().data() + static_cast<std::size_t>(o) * in_f;
          for (int f = 0; f < in_f; ++f) d[f] += g * x[f];
        }
      }
    }
    if (br->requires_grad) {
      auto& db = br->grad_buffer();
      for (int n = 0; n < n_batch; ++n) {
        for (int o = 0; o < out_f; ++o) db[o] += dy[static_cast<std::size_t>(n) * out_f + o];
      }
    }
  });
}

template <class T>
BasicVar<T> sigmoid(const BasicVar<T>& a) {
  BasicTensor<T> y = a.value();
  for (auto& v : y.data()) v = T{1} / (T{1} + std::exp(-v));
  auto ar = a.record();
  auto yv = y;
  return make_op<T>("sigmoid", std::move(y), {a}, [ar, yv](const BasicTensor<T>& dy) {
    auto& d = ar->grad_buffer();
    for (std::size_t i = 0; i < dy.size(); ++i) d[i] += dy[i] * yv[i] * (T{1} - yv[i]);
  });
}

// [N, C, H, W] -> [N, C]
template <class T>
BasicVar<T> global_avg_pool(const BasicVar<T>& a) {
  const auto& s = a.shape();
  require_rank(s, 4, "global_avg_pool input");
  const int n_batch = s[0], ch = s[1];
  const std::size_t plane = static_cast<std::size_t>(s[2]) * s[3];
  BasicTensor<T> y({n_batch, ch});
  for (int n = 0; n < n_batch; ++n) {
    for (int c = 0; c < ch; ++c) {
      const T* p = &a.value().at(n, c, 0, 0);
      double acc = 0;
      for (std::size_t i = 0; i < plane; ++i) acc += p[i];
      y[static_cast<std::size_t>(n) * ch + c] = static_cast<T>(acc / static_cast<double>(plane));
    }
  }
  auto ar = a.record();
  return make_op<T>("global_avg_pool", std::move(y), {a},
                    [ar, n_batch, ch, plane](const BasicTensor<T>& dy) {
    auto& d = ar->grad_buffer();
    const T inv = T{1} / static_cast<T>(plane);
    for (int n = 0; n < n_batch; ++n) {
      for (int c = 0; c < ch; ++c) {
        const T g = dy[static_cast<std::size_t>(n) * ch + c] * inv;
        T* p = &d.at(n, c, 0, 0);
        for (std::size_t i = 0; i < plane; ++i) p[i] += g;
      }
    }
  });
}

// Scales every pixel's channel vector to unit L2 norm.
template <class T>
BasicVar<T> l2_normalize_channels(const BasicVar<T>& a) {
  const auto& s = a.shape();
  require_rank(s, 4, "l2_normalize_channels input");
  const int n_batch = s[0], ch = s[1];
  const std::size_t plane = static_cast<std::size_t>(s[2]) * s[3];
  BasicTensor<T> y(s);
  std::vector<T> norms(static_cast<std::size_t>(n_batch) * plane);
  const auto& x = a.value();
  for (int n = 0; n < n_batch; ++n) {
    const T* xb = x.data().data() + static_cast<std::size_t>(n) * ch * plane;
    T* yb = y.data().data() + static_cast<std::size_t>(n) * ch * plane;
    for (std::size_t i = 0; i < plane; ++i) {
      double ss = 0;
      for (int c = 0; c < ch; ++c) ss += static_cast<double>(xb[c * plane + i]) * xb[c * plane + i];
      const T norm = static_cast<T>(std::sqrt(ss + 1e-12));
      norms[static_cast<std::size_t>(n) * plane + i] = norm;
      for (int c = 0; c < ch; ++c) yb[c * plane + i] = xb[c * plane + i] / norm;
    }
  }
  auto ar = a.record();
  auto yv = y;
  return make_op<T>("l2_normalize_channels", std::move(y), {a},
                    [ar, yv, norms = std::move(norms), n_batch, ch, plane](const BasicTensor<T>& dy) {
    auto& d = ar->grad_buffer();
    for (int n = 0; n < n_batch; ++n) {
      const std::size_t base = static_cast<std::size_t>(n) * ch * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        T dot = 0;
        for (int c = 0; c < ch; ++c) dot += yv[base + c * plane + i] * dy[base + c * plane + i];
        const T inv = T{1} / norms[static_cast<std::size_t>(n) * plane + i];
        for (int c = 0; c < ch; ++c) {
          const std::size_t k = base + c * plane + i;
          d[k] += (dy[k] - yv[k] * dot) * inv;
        }
      }
    }
  });
}

// Picks per-pixel channel vectors from batch item 0: [1, C, H, W] -> [P, C].
template <class T>
BasicVar<T> gather_pixels(const BasicVar<T>& field, std::span<const Pixel> points) {
  const auto& s = field.shape();
  require_rank(s, 4, "gather_pixels input");
  const int ch = s[1], h = s[2], w = s[3];
  if (points.empty()) throw UsageError("gather_pixels: no points");
  std::vector<Pixel> pts(points.begin(), points.end());
  for (const auto& p : pts) {
    if (p.x < 0 || p.y < 0 || p.x >= w || p.y >= h) {
      throw ShapeError("gather_pixels: point (" + std::to_string(p.x) + "," + std::to_string(p.y) +
                       ") outside " + shape_string(s));
    }
  }
  const int np = static_cast<int>(pts.size());
  BasicTensor<T> y({np, ch});
  for (int i = 0; i < np; ++i) {
    for (int c = 0; c < ch; ++c) {
      y[static_cast<std::size_t>(i) * ch + c] = field.value().at(0, c, pts[i].y, pts[i].x);
    }
  }
  auto fr = field.record();
  return make_op<T>("gather_pixels", std::move(y), {field},
                    [fr, pts = std::move(pts), ch](const BasicTensor<T>& dy) {
    auto& d = fr->grad_buffer();
    for (std::size_t i = 0; i < pts.size(); ++i) {
      for (int c = 0; c < ch; ++c) d.at(0, c, pts[i].y, pts[i].x) += dy[i * ch + c];
    }
  });
}

}  // namespace semcorr
