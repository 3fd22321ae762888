#pragma once

#include <functional>
#include <string>
#include <vector>

#include "semcorr/losses.hpp"
#include "semcorr/mining.hpp"
#include "semcorr/optim.hpp"

namespace semcorr {

// Dense embedding head: conv3x3 -> ReLU -> maxpool 2 -> (conv3x3 -> ReLU)*
// -> conv3x3 to `dim` channels -> bilinear upsample to the input size ->
// per-pixel L2 normalisation.
struct EmbeddingConfig {
  int dim = 16;
  std::vector<int> channels{16, 16};
  double margin = 1.0;
  int negatives = 4;
  double exclusion_radius = 2.0;
  MarginMode margin_mode = MarginMode::kSquaredDistance;
  int input_size = 64;
  int input_channels = 3;

  void validate() const {
    if (dim < 2) throw UsageError("embedding dim must be >= 2");
    if (channels.empty()) throw UsageError("embedding needs at least one hidden conv layer");
    for (int c : channels) {
      if (c < 1) throw UsageError("embedding channel counts must be >= 1");
    }
    if (!(margin > 0)) throw UsageError("embedding margin must be > 0");
    if (negatives < 1) throw UsageError("embedding negatives per positive must be >= 1");
    if (input_size < 4) throw UsageError("embedding input size must be >= 4");
  }
};

template <class T>
class BasicEmbedding {
 public:
  BasicEmbedding() = default;

  static BasicEmbedding init(const EmbeddingConfig& config, std::uint64_t seed) {
    config.validate();
    BasicEmbedding e;
    e.config_ = config;
    Rng rng(seed);
    int in_c = config.input_channels;
    for (int c : config.channels) {
      e.convs_.push_back(ConvLayer<T>::make(in_c, c, 3, 1, 1, rng));
      in_c = c;
    }
    e.convs_.push_back(ConvLayer<T>::make(in_c, config.dim, 3, 1, 1, rng));
    return e;
  }

  const EmbeddingConfig& config() const { return config_; }

  std::vector<BasicVar<T>> params() const {
    std::vector<BasicVar<T>> p;
    for (const auto& c : convs_) {
      p.push_back(c.weight);
      p.push_back(c.bias);
    }
    return p;
  }

  // [1, C, S, S] -> [1, dim, S, S], unit-norm per pixel.
  BasicVar<T> forward(const BasicVar<T>& image, bool track = true) const {
    const auto& s = image.shape();
    if (s.size() != 4 || s[0] != 1 || s[1] != config_.input_channels || s[2] != config_.input_size ||
        s[3] != config_.input_size) {
      throw ShapeError("embedding expects [1," + std::to_string(config_.input_channels) + "," +
                       std::to_string(config_.input_size) + "," + std::to_string(config_.input_size) +
                       "] input, got " + shape_string(s));
    }
    BasicVar<T> x = image;
    for (std::size_t i = 0; i < convs_.size(); ++i) {
      const auto& c = convs_[i];
      x = conv2d(x, track ? c.weight : frozen(c.weight), track ? c.bias : frozen(c.bias), c.stride, c.padding);
      if (i + 1 < convs_.size()) x = relu(x);
      if (i == 0) x = maxpool2d(x, 2, 2);
    }
    x = bilinear_resize(x, s[2], s[3]);
    return l2_normalize_channels(x);
  }

  BasicDescriptorField<T> embed(const BasicTensor<T>& image) const {
    return BasicDescriptorField<T>(forward(BasicVar<T>::constant(image), false).value());
  }

  Checkpoint to_checkpoint() const {
    Checkpoint ck;
    ck.meta["kind"] = "embedding";
    ck.meta["dim"] = std::to_string(config_.dim);
    ck.meta["channels"] = join_ints(config_.channels);
    ck.meta["margin"] = std::to_string(config_.margin);
    ck.meta["input_size"] = std::to_string(config_.input_size);
    ck.meta["input_channels"] = std::to_string(config_.input_channels);
    store_params(ck, "param.", params());
    return ck;
  }

  static BasicEmbedding from_checkpoint(const Checkpoint& ck) {
    if (ck.meta_value("kind") != "embedding") throw DataError("checkpoint is not an embedding");
    EmbeddingConfig c;
    c.dim = std::stoi(ck.meta_value("dim"));
    c.channels = parse_ints(ck.meta_value("channels"));
    c.margin = std::stod(ck.meta_value("margin"));
    c.input_size = std::stoi(ck.meta_value("input_size"));
    c.input_channels = std::stoi(ck.meta_value("input_channels"));
    auto e = init(c, 0);
    auto p = e.params();
    load_params(ck, "param.", p);
    return e;
  }

 private:
  EmbeddingConfig config_;
  std::vector<ConvLayer<T>> convs_;
};

using Embedding = BasicEmbedding<float>;

template <class T>
BasicDescriptorField<T> embed(const BasicTensor<T>& image, const BasicEmbedding<T>& weights) {
  return weights.embed(image);
}

// One training pair: query keypoints in image_a and their ground-truth
// pixels in image_b, plus image_b's object mask for negative mining.
struct EmbeddingPair {
  const Tensor* image_a = nullptr;
  const Tensor* image_b = nullptr;
  std::vector<Pixel> points_a;
  std::vector<Pixel> points_b;
  const ObjectMask* mask_b = nullptr;
};

struct EmbeddingTrainOptions {
  int epochs = 8;
  double learning_rate = 2e-3;
  int dilation_radius = -1;  // < 0: default_dilation_radius
  std::uint64_t seed = 1;
  std::function<void(std::string_view)> warn;
  // Observer for every mined negative: (pair index, true match, negative).
  std::function<void(std::size_t, Pixel, Pixel)> on_negative;
};

struct EmbeddingTrainResult {
  Embedding net;
  std::vector<double> epoch_loss;  // mean contrastive loss over pairs
  std::size_t skipped_pairs = 0;
};

// Contrastive training: positives are the ground-truth correspondences,
// negatives are mined inside image_b's dilated mask outside the exclusion
// radius of the true match. One Adam step per image pair.
inline EmbeddingTrainResult train_embedding(const std::vector<EmbeddingPair>& pairs,
                                            const EmbeddingConfig& config,
                                            const EmbeddingTrainOptions& opt) {
  config.validate();
  EmbeddingTrainResult result{Embedding::init(config, opt.seed), {}, 0};
  // Precompute candidate sets; unusable pairs are skipped once, up front.
  std::vector<std::size_t> usable;
  std::vector<CandidateSet> candidates(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& p = pairs[i];
    if (p.points_a.empty() || p.points_a.size() != p.points_b.size()) {
      throw DataError("embedding pair " + std::to_string(i) + " needs matching, non-empty keypoint lists");
    }
    if (!p.mask_b || p.mask_b->empty()) {
      ++result.skipped_pairs;
      if (opt.warn) opt.warn("embedding pair " + std::to_string(i) + " has an empty mask; skipped");
      continue;
    }
    const int r = opt.dilation_radius >= 0 ? opt.dilation_radius
                                           : default_dilation_radius(p.mask_b->width, p.mask_b->height);
    candidates[i] = candidate_set(*p.mask_b, r);
    usable.push_back(i);
  }
  AdamState<float> adam(AdamConfig{opt.learning_rate});
  Rng rng(opt.seed ^ 0xE3BEDULL);
  auto params = result.net.params();
  for (int epoch = 0; epoch < opt.epochs; ++epoch) {
    auto order = usable;
    rng.shuffle(order);
    double loss_sum = 0;
    for (std::size_t idx : order) {
      const auto& p = pairs[idx];
      auto fa = result.net.forward(Var::constant(*p.image_a));
      auto fb = result.net.forward(Var::constant(*p.image_b));
      const DescriptorField field_b(fb.value());
      const DescriptorField field_a(fa.value());
      std::vector<Pixel> rows_a = p.points_a;
      std::vector<Pixel> rows_b = p.points_b;
      std::vector<int> flags(p.points_a.size(), 1);
      for (std::size_t k = 0; k < p.points_a.size(); ++k) {
        const auto anchor = field_a.descriptor_at(p.points_a[k]);
        const auto legal = exclude_radius(candidates[idx], p.points_b[k], config.exclusion_radius);
        if (legal.empty()) continue;
        const auto negs = hard_negative_mine<float>(anchor, field_b, legal, config.margin, config.negatives, rng);
        for (const auto& q : negs) {
          if (opt.on_negative) opt.on_negative(idx, p.points_b[k], q);
          rows_a.push_back(p.points_a[k]);
          rows_b.push_back(q);
          flags.push_back(0);
        }
      }
      auto loss = contrastive_loss(gather_pixels<float>(fa, rows_a), gather_pixels<float>(fb, rows_b), flags,
                                   config.margin, config.margin_mode);
      const double lv = loss.value().item();
      if (!std::isfinite(lv)) throw NumericError("non-finite embedding loss at epoch " + std::to_string(epoch));
      loss_sum += lv;
      backward(loss);
      adam_step(params, adam);
    }
    result.epoch_loss.push_back(order.empty() ? 0.0 : loss_sum / static_cast<double>(order.size()));
  }
  return result;
}

}  // namespace semcorr
