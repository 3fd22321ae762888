#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "semcorr/checkpoint.hpp"
#include "semcorr/ops.hpp"
#include "semcorr/rng.hpp"

namespace semcorr {

// Uniform He initialisation: U(-sqrt(6 / fan_in), sqrt(6 / fan_in)).
template <class T>
BasicTensor<T> he_uniform(Shape shape, int fan_in, Rng& rng) {
  BasicTensor<T> t(std::move(shape));
  const double bound = std::sqrt(6.0 / fan_in);
  for (auto& v : t.data()) v = static_cast<T>(rng.uniform(-bound, bound));
  return t;
}

template <class T>
struct ConvLayer {
  BasicVar<T> weight;  // out x in x k x k
  BasicVar<T> bias;    // out
  int stride = 1;
  int padding = 0;

  static ConvLayer make(int in_c, int out_c, int kernel, int stride, int padding, Rng& rng) {
    ConvLayer l;
    l.weight = BasicVar<T>::parameter(
        he_uniform<T>({out_c, in_c, kernel, kernel}, in_c * kernel * kernel, rng));
    l.bias = BasicVar<T>::parameter(BasicTensor<T>({out_c}));
    l.stride = stride;
    l.padding = padding;
    return l;
  }

  BasicVar<T> operator()(const BasicVar<T>& x) const { return conv2d(x, weight, bias, stride, padding); }
};

template <class T>
struct DenseLayer {
  BasicVar<T> weight;  // out x in
  BasicVar<T> bias;    // out

  static DenseLayer make(int in_f, int out_f, Rng& rng) {
    DenseLayer l;
    l.weight = BasicVar<T>::parameter(he_uniform<T>({out_f, in_f}, in_f, rng));
    l.bias = BasicVar<T>::parameter(BasicTensor<T>({out_f}));
    return l;
  }

  BasicVar<T> operator()(const BasicVar<T>& x) const { return linear(x, weight, bias); }
};

// Copies a parameter list into constant leaves so inference builds no tape
// and never touches the parameters' gradient buffers.
template <class T>
BasicVar<T> frozen(const BasicVar<T>& p) {
  return BasicVar<T>::constant(p.value());
}

template <class T>
void store_params(Checkpoint& ck, const std::string& prefix, const std::vector<BasicVar<T>>& params) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    ck.tensors.emplace_back(prefix + std::to_string(i), params[i].value().template cast<float>());
  }
}

template <class T>
void load_params(const Checkpoint& ck, const std::string& prefix, std::vector<BasicVar<T>>& params) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Tensor& t = ck.tensor(prefix + std::to_string(i));
    if (t.shape() != params[i].shape()) {
      throw DataError("checkpoint tensor " + prefix + std::to_string(i) + " has shape " +
                      shape_string(t.shape()) + ", expected " + shape_string(params[i].shape()));
    }
    params[i].mutable_value() = t.template cast<T>();
  }
}

}  // namespace semcorr
