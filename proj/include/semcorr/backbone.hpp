#pragma once

#include <algorithm>
#include <array>
#include <set>
#include <string>
#include <vector>

#include "semcorr/layers.hpp"
#include "semcorr/losses.hpp"
#include "semcorr/optim.hpp"

namespace semcorr {

// Convolutional feature extractor. Layer i is conv -> ReLU, optionally
// followed by max pooling before layer i+1. Features are taken after the
// ReLU and before the pooling.
struct BackboneConfig {
  std::vector<int> channels{8, 16, 32};
  std::vector<int> kernels{3, 3, 3};
  std::vector<int> strides{1, 1, 1};
  std::vector<int> paddings{1, 1, 1};
  std::vector<int> pool_windows{2, 2, 0};  // 0 = no pooling after the layer
  std::vector<int> pool_strides{2, 2, 0};
  int input_size = 64;
  int input_channels = 3;

  static BackboneConfig desk() { return {}; }

  // AlexNet-shaped reference: five layers, 96/256/384/384/256 channels,
  // 227 x 227 input.
  static BackboneConfig reference() {
    BackboneConfig c;
    c.channels = {96, 256, 384, 384, 256};
    c.kernels = {11, 5, 3, 3, 3};
    c.strides = {4, 1, 1, 1, 1};
    c.paddings = {0, 2, 1, 1, 1};
    c.pool_windows = {3, 3, 0, 0, 0};
    c.pool_strides = {2, 2, 0, 0, 0};
    c.input_size = 227;
    return c;
  }

  int layers() const { return static_cast<int>(channels.size()); }

  // Fills per-layer defaults (kernel 3, stride 1, padding 1, pool 2/2 between
  // layers) for any list shorter than `channels`.
  void complete_defaults() {
    const auto n = channels.size();
    auto pad_to = [n](std::vector<int>& v, int fill) {
      if (v.size() < n) v.resize(n, fill);
    };
    pad_to(kernels, 3);
    pad_to(strides, 1);
    pad_to(paddings, 1);
    pad_to(pool_windows, 2);
    pad_to(pool_strides, 2);
  }

  // (channels, height, width) of every extracted map; throws if any spatial
  // extent drops below 1.
  std::vector<std::array<int, 3>> layer_shapes() const {
    const std::size_t n = channels.size();
    if (n < 2) throw UsageError("backbone needs at least 2 layers");
    if (kernels.size() != n || strides.size() != n || paddings.size() != n ||
        pool_windows.size() != n || pool_strides.size() != n) {
      throw UsageError("backbone config lists must all have " + std::to_string(n) + " entries");
    }
    std::vector<std::array<int, 3>> out;
    int side = input_size;
    for (std::size_t i = 0; i < n; ++i) {
      if (channels[i] < 1 || kernels[i] < 1 || strides[i] < 1 || paddings[i] < 0) {
        throw UsageError("backbone layer " + std::to_string(i) + " has invalid parameters");
      }
      side = ops_detail::conv_out_extent(side, kernels[i], strides[i], paddings[i]);
      if (side < 1) throw ShapeError("backbone layer " + std::to_string(i) + " collapses to zero size");
      out.push_back({channels[i], side, side});
      if (i + 1 < n && pool_windows[i] > 0) {
        if (pool_windows[i] > side) {
          throw ShapeError("backbone pooling after layer " + std::to_string(i) + " exceeds map size");
        }
        side = (side - pool_windows[i]) / pool_strides[i] + 1;
      }
    }
    return out;
  }
};

template <class T>
struct BasicFeatureStack {
  std::vector<BasicTensor<T>> maps;

  std::size_t size() const { return maps.size(); }
  bool empty() const { return maps.empty(); }
};

using FeatureStack = BasicFeatureStack<float>;

template <class T>
class BasicBackbone {
 public:
  BasicBackbone() = default;

  // He-uniform convolution weights, zero biases, and a linear classifier head
  // over the globally pooled last layer.
  static BasicBackbone init(const BackboneConfig& config, int num_classes, std::uint64_t seed) {
    config.layer_shapes();
    if (num_classes < 2) throw UsageError("backbone classifier head needs at least 2 classes");
    BasicBackbone b;
    b.config_ = config;
    b.num_classes_ = num_classes;
    Rng rng(seed);
    int in_c = config.input_channels;
    for (int i = 0; i < config.layers(); ++i) {
      b.convs_.push_back(ConvLayer<T>::make(in_c, config.channels[i], config.kernels[i],
                                            config.strides[i], config.paddings[i], rng));
      in_c = config.channels[i];
    }
    b.head_ = DenseLayer<T>::make(in_c, num_classes, rng);
    return b;
  }

  const BackboneConfig& config() const { return config_; }
  int num_classes() const { return num_classes_; }

  std::vector<BasicVar<T>> params() const {
    std::vector<BasicVar<T>> p;
    for (const auto& c : convs_) {
      p.push_back(c.weight);
      p.push_back(c.bias);
    }
    p.push_back(head_.weight);
    p.push_back(head_.bias);
    return p;
  }

  // Weights penalised by the L2 term of the classification loss.
  std::vector<BasicVar<T>> weight_params() const {
    std::vector<BasicVar<T>> p;
    for (const auto& c : convs_) p.push_back(c.weight);
    p.push_back(head_.weight);
    return p;
  }

  // Differentiable forward over a batch [N, C, S, S]; one map per layer.
  std::vector<BasicVar<T>> forward_layers(const BasicVar<T>& images, bool track = true) const {
    check_input(images.shape());
    std::vector<BasicVar<T>> maps;
    BasicVar<T> x = images;
    for (int i = 0; i < config_.layers(); ++i) {
      const auto& c = convs_[static_cast<std::size_t>(i)];
      BasicVar<T> w = track ? c.weight : frozen(c.weight);
      BasicVar<T> b = track ? c.bias : frozen(c.bias);
      x = relu(conv2d(x, w, b, c.stride, c.padding));
      maps.push_back(x);
      if (i + 1 < config_.layers() && config_.pool_windows[static_cast<std::size_t>(i)] > 0) {
        x = maxpool2d(x, config_.pool_windows[static_cast<std::size_t>(i)],
                      config_.pool_strides[static_cast<std::size_t>(i)]);
      }
    }
    return maps;
  }

  BasicVar<T> logits(const BasicVar<T>& last_map, bool track = true) const {
    auto pooled = global_avg_pool(last_map);
    if (track) return head_(pooled);
    return linear(pooled, frozen(head_.weight), frozen(head_.bias));
  }

  // Inference on one image [1, C, S, S]: every layer's post-activation map.
  BasicFeatureStack<T> forward(const BasicTensor<T>& image) const {
    auto maps = forward_layers(BasicVar<T>::constant(image), false);
    BasicFeatureStack<T> stack;
    for (auto& m : maps) stack.maps.push_back(m.value());
    return stack;
  }

  int predict(const BasicTensor<T>& image) const {
    auto maps = forward_layers(BasicVar<T>::constant(image), false);
    const auto z = logits(maps.back(), false).value();
    int best = 0;
    for (int k = 1; k < num_classes_; ++k) {
      if (z[static_cast<std::size_t>(k)] > z[static_cast<std::size_t>(best)]) best = k;
    }
    return best;
  }

  Checkpoint to_checkpoint() const {
    Checkpoint ck;
    ck.meta["kind"] = "backbone";
    ck.meta["channels"] = join_ints(config_.channels);
    ck.meta["kernels"] = join_ints(config_.kernels);
    ck.meta["strides"] = join_ints(config_.strides);
    ck.meta["paddings"] = join_ints(config_.paddings);
    ck.meta["pool_windows"] = join_ints(config_.pool_windows);
    ck.meta["pool_strides"] = join_ints(config_.pool_strides);
    ck.meta["input_size"] = std::to_string(config_.input_size);
    ck.meta["input_channels"] = std::to_string(config_.input_channels);
    ck.meta["num_classes"] = std::to_string(num_classes_);
    store_params(ck, "param.", params());
    return ck;
  }

  static BasicBackbone from_checkpoint(const Checkpoint& ck) {
    if (ck.meta_value("kind") != "backbone") throw DataError("checkpoint is not a backbone");
    BackboneConfig c;
    c.channels = parse_ints(ck.meta_value("channels"));
    c.kernels = parse_ints(ck.meta_value("kernels"));
    c.strides = parse_ints(ck.meta_value("strides"));
    c.paddings = parse_ints(ck.meta_value("paddings"));
    c.pool_windows = parse_ints(ck.meta_value("pool_windows"));
    c.pool_strides = parse_ints(ck.meta_value("pool_strides"));
    c.input_size = std::stoi(ck.meta_value("input_size"));
    c.input_channels = std::stoi(ck.meta_value("input_channels"));
    auto b = init(c, std::stoi(ck.meta_value("num_classes")), 0);
    auto p = b.params();
    load_params(ck, "param.", p);
    return b;
  }

 private:
  void check_input(const Shape& s) const {
    if (s.size() != 4 || s[1] != config_.input_channels || s[2] != config_.input_size ||
        s[3] != config_.input_size) {
      throw ShapeError("backbone expects [N," + std::to_string(config_.input_channels) + "," +
                       std::to_string(config_.input_size) + "," + std::to_string(config_.input_size) +
                       "] input, got " + shape_string(s));
    }
  }

  BackboneConfig config_;
  int num_classes_ = 0;
  std::vector<ConvLayer<T>> convs_;
  DenseLayer<T> head_;
};

using Backbone = BasicBackbone<float>;

struct LabeledImage {
  Tensor image;  // [1, C, S, S]
  int label = 0;
};

struct ClassifierTrainOptions {
  int epochs = 15;
  int batch_size = 16;
  double learning_rate = 5e-3;
  double reg_weight = 1e-4;
  std::uint64_t seed = 1;
};

struct ClassifierTrainResult {
  Backbone net;
  std::vector<double> epoch_loss;      // mean per-example loss
  std::vector<double> epoch_accuracy;  // training accuracy
};

namespace backbone_detail {

inline Tensor stack_images(const std::vector<LabeledImage>& data, const std::vector<std::size_t>& idx,
                           std::size_t begin, std::size_t end) {
  const auto& s = data[idx[begin]].image.shape();
  const std::size_t per = data[idx[begin]].image.size();
  Tensor batch({static_cast<int>(end - begin), s[1], s[2], s[3]});
  for (std::size_t i = begin; i < end; ++i) {
    const auto& img = data[idx[i]].image;
    if (img.shape() != s) throw ShapeError("classifier images must share one shape");
    std::copy(img.data().begin(), img.data().end(), batch.data().begin() + (i - begin) * per);
  }
  return batch;
}

}  // namespace backbone_detail

// Pretext classification training with the summed cross-entropy + L2 loss.
inline ClassifierTrainResult train_classifier(const std::vector<LabeledImage>& data,
                                              const BackboneConfig& config, int num_classes,
                                              const ClassifierTrainOptions& opt) {
  std::set<int> labels;
  for (const auto& d : data) {
    if (d.label < 0 || d.label >= num_classes) throw DataError("class label out of range");
    labels.insert(d.label);
  }
  if (labels.size() < 2) throw DataError("classifier training needs at least 2 distinct classes");
  ClassifierTrainResult result{Backbone::init(config, num_classes, opt.seed), {}, {}};
  AdamState<float> adam(AdamConfig{opt.learning_rate});
  Rng rng(opt.seed ^ 0xC1A55ULL);
  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  auto params = result.net.params();
  const auto reg_params = result.net.weight_params();
  for (int epoch = 0; epoch < opt.epochs; ++epoch) {
    rng.shuffle(order);
    double loss_sum = 0;
    int correct = 0;
    for (std::size_t b = 0; b < order.size(); b += static_cast<std::size_t>(opt.batch_size)) {
      const std::size_t e = std::min(order.size(), b + static_cast<std::size_t>(opt.batch_size));
      const int n = static_cast<int>(e - b);
      auto images = Var::constant(backbone_detail::stack_images(data, order, b, e));
      Tensor onehot({n, num_classes});
      for (int i = 0; i < n; ++i) onehot[static_cast<std::size_t>(i * num_classes + data[order[b + i]].label)] = 1.f;
      auto maps = result.net.forward_layers(images);
      auto z = result.net.logits(maps.back());
      auto loss = softmax_xent_l2(z, onehot, opt.reg_weight, reg_params);
      const double lv = loss.value().item();
      if (!std::isfinite(lv)) throw NumericError("non-finite classifier loss at epoch " + std::to_string(epoch));
      loss_sum += lv;
      for (int i = 0; i < n; ++i) {
        int best = 0;
        for (int k = 1; k < num_classes; ++k) {
          if (z.value()[static_cast<std::size_t>(i * num_classes + k)] >
              z.value()[static_cast<std::size_t>(i * num_classes + best)]) {
            best = k;
          }
        }
        correct += best == data[order[b + i]].label;
      }
      backward(loss);
      adam_step(params, adam);
    }
    result.epoch_loss.push_back(loss_sum / static_cast<double>(data.size()));
    result.epoch_accuracy.push_back(static_cast<double>(correct) / static_cast<double>(data.size()));
  }
  return result;
}

}  // namespace semcorr
