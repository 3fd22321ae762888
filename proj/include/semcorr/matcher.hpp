#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "semcorr/losses.hpp"
#include "semcorr/mining.hpp"
#include "semcorr/optim.hpp"

namespace semcorr {

// The comparator is a 2-channel network: both feature patches enter as one
// stacked input. Layers: 1x1 conv -> ReLU -> conv (3x3, or 1x1 when the
// patch is narrower than 3) -> ReLU -> dense -> ReLU -> dense -> sigmoid.
struct ComparatorConfig {
  int patch_radius = 2;
  int conv1 = 16;
  int conv2 = 16;
  int hidden = 32;
  int batch_size = 64;  // must be even: half positives, half negatives
  double learning_rate = 1e-3;
  double hard_negative_fraction = 0.5;
  int hard_negative_pool = 8;
  double exclusion_radius = 2.0;

  int patch_side() const { return 2 * patch_radius + 1; }
  int conv2_kernel() const { return patch_side() >= 3 ? 3 : 1; }
  int conv2_side() const { return patch_side() - conv2_kernel() + 1; }

  void validate() const {
    if (patch_radius < 0) throw UsageError("comparator patch radius must be >= 0");
    if (conv1 < 1 || conv2 < 1 || hidden < 1) throw UsageError("comparator layer widths must be >= 1");
    if (batch_size < 2 || batch_size % 2 != 0) throw UsageError("comparator batch size must be even and >= 2");
    if (hard_negative_fraction < 0 || hard_negative_fraction > 1) {
      throw UsageError("hard negative fraction must lie in [0, 1]");
    }
    if (hard_negative_pool < 1) throw UsageError("hard negative pool must be >= 1");
  }
};

// Two (2r+1) x (2r+1) x C feature patches interleaved channel-wise into a
// [1, 2C, P, P] tensor: channel 2i is patch A's channel i, channel 2i+1 is
// patch B's channel i. Cells falling outside an image are zero.
template <class T>
struct BasicPairPatch {
  BasicTensor<T> data;
  int channels = 0;
  int radius = 0;

  int side() const { return 2 * radius + 1; }
  T a(int c, int y, int x) const { return data.at(0, 2 * c, y, x); }
  T b(int c, int y, int x) const { return data.at(0, 2 * c + 1, y, x); }
};

using PairPatch = BasicPairPatch<float>;

template <class T>
BasicPairPatch<T> pair_input(const BasicDescriptorField<T>& field_a, Pixel p,
                             const BasicDescriptorField<T>& field_b, Pixel q, int radius) {
  if (radius < 0) throw UsageError("pair_input: radius must be >= 0");
  if (field_a.channels() != field_b.channels()) {
    throw ShapeError("pair_input: fields have " + std::to_string(field_a.channels()) + " and " +
                     std::to_string(field_b.channels()) + " channels");
  }
  if (!field_a.contains(p) || !field_b.contains(q)) throw ShapeError("pair_input: point outside image");
  const int c_n = field_a.channels(), side = 2 * radius + 1;
  BasicPairPatch<T> patch{BasicTensor<T>({1, 2 * c_n, side, side}), c_n, radius};
  for (int dy = 0; dy < side; ++dy) {
    for (int dx = 0; dx < side; ++dx) {
      const int ay = p.y + dy - radius, ax = p.x + dx - radius;
      const int by = q.y + dy - radius, bx = q.x + dx - radius;
      const bool in_a = field_a.contains({ax, ay}), in_b = field_b.contains({bx, by});
      for (int c = 0; c < c_n; ++c) {
        if (in_a) patch.data.at(0, 2 * c, dy, dx) = field_a.at(c, ay, ax);
        if (in_b) patch.data.at(0, 2 * c + 1, dy, dx) = field_b.at(c, by, bx);
      }
    }
  }
  return patch;
}

template <class T>
class BasicComparator {
 public:
  BasicComparator() = default;

  // The output layer starts at zero, so an untrained comparator scores 0.5.
  static BasicComparator init(const ComparatorConfig& config, int descriptor_channels, std::uint64_t seed) {
    config.validate();
    if (descriptor_channels < 1) throw UsageError("comparator needs >= 1 descriptor channel");
    BasicComparator m;
    m.config_ = config;
    m.channels_ = descriptor_channels;
    Rng rng(seed);
    m.conv1_ = ConvLayer<T>::make(2 * descriptor_channels, config.conv1, 1, 1, 0, rng);
    m.conv2_ = ConvLayer<T>::make(config.conv1, config.conv2, config.conv2_kernel(), 1, 0, rng);
    const int flat = config.conv2 * config.conv2_side() * config.conv2_side();
    m.fc1_ = DenseLayer<T>::make(flat, config.hidden, rng);
    m.fc2_.weight = BasicVar<T>::parameter(BasicTensor<T>({1, config.hidden}));
    m.fc2_.bias = BasicVar<T>::parameter(BasicTensor<T>({1}));
    return m;
  }

  const ComparatorConfig& config() const { return config_; }
  int descriptor_channels() const { return channels_; }

  std::vector<BasicVar<T>> params() const {
    return {conv1_.weight, conv1_.bias, conv2_.weight, conv2_.bias,
            fc1_.weight,   fc1_.bias,   fc2_.weight,   fc2_.bias};
  }

  // [N, 2C, P, P] -> probabilities [N, 1].
  BasicVar<T> forward(const BasicVar<T>& batch, bool track = true) const {
    const auto& s = batch.shape();
    const int side = config_.patch_side();
    if (s.size() != 4 || s[1] != 2 * channels_ || s[2] != side || s[3] != side) {
      throw ShapeError("comparator expects [N," + std::to_string(2 * channels_) + "," + std::to_string(side) +
                       "," + std::to_string(side) + "] input, got " + shape_string(s));
    }
    auto p = [track](const BasicVar<T>& v) { return track ? v : frozen(v); };
    auto x = relu(conv2d(batch, p(conv1_.weight), p(conv1_.bias), 1, 0));
    x = relu(conv2d(x, p(conv2_.weight), p(conv2_.bias), 1, 0));
    x = relu(linear(flatten(x), p(fc1_.weight), p(fc1_.bias)));
    return sigmoid(linear(x, p(fc2_.weight), p(fc2_.bias)));
  }

  double score(const BasicPairPatch<T>& pair) const {
    if (pair.channels != channels_ || pair.radius != config_.patch_radius) {
      throw ShapeError("score: patch has " + std::to_string(pair.channels) + " channels / radius " +
                       std::to_string(pair.radius) + ", comparator expects " + std::to_string(channels_) +
                       " / " + std::to_string(config_.patch_radius));
    }
    return forward(BasicVar<T>::constant(pair.data), false).value().item();
  }

  Checkpoint to_checkpoint() const {
    Checkpoint ck;
    ck.meta["kind"] = "comparator";
    ck.meta["descriptor_channels"] = std::to_string(channels_);
    ck.meta["patch_radius"] = std::to_string(config_.patch_radius);
    ck.meta["conv1"] = std::to_string(config_.conv1);
    ck.meta["conv2"] = std::to_string(config_.conv2);
    ck.meta["hidden"] = std::to_string(config_.hidden);
    store_params(ck, "param.", params());
    return ck;
  }

  static BasicComparator from_checkpoint(const Checkpoint& ck) {
    if (ck.meta_value("kind") != "comparator") throw DataError("checkpoint is not a comparator");
    ComparatorConfig c;
    c.patch_radius = std::stoi(ck.meta_value("patch_radius"));
    c.conv1 = std::stoi(ck.meta_value("conv1"));
    c.conv2 = std::stoi(ck.meta_value("conv2"));
    c.hidden = std::stoi(ck.meta_value("hidden"));
    auto m = init(c, std::stoi(ck.meta_value("descriptor_channels")), 0);
    auto p = m.params();
    load_params(ck, "param.", p);
    return m;
  }

 private:
  ComparatorConfig config_;
  int channels_ = 0;
  ConvLayer<T> conv1_, conv2_;
  DenseLayer<T> fc1_, fc2_;
};

using Comparator = BasicComparator<float>;

template <class T>
double score(const BasicPairPatch<T>& pair, const BasicComparator<T>& weights) {
  return weights.score(pair);
}

// Evaluates the comparator for one query against many target pixels without
// materialising patches. The first layer is a 1x1 convolution, hence linear
// per cell: its A and B halves are projected once (the B half over the whole
// target field) and summed per candidate. Equal to score(pair_input(...)) up
// to float summation order.
class ComparatorScorer {
 public:
  ComparatorScorer(const Comparator& net, const DescriptorField& field_b) : net_(&net), field_b_(&field_b) {
    if (field_b.channels() != net.descriptor_channels()) {
      throw ShapeError("comparator expects " + std::to_string(net.descriptor_channels()) +
                       "-channel descriptors, target field has " + std::to_string(field_b.channels()));
    }
    const auto p = net.params();
    w1_ = p[0].value();
    b1_ = p[1].value();
    w2_ = p[2].value();
    b2_ = p[3].value();
    w3_ = p[4].value();
    b3_ = p[5].value();
    w4_ = p[6].value();
    b4_ = p[7].value();
    h1_ = net.config().conv1;
    const int c_n = field_b.channels();
    const std::size_t plane = static_cast<std::size_t>(field_b.height()) * field_b.width();
    proj_b_.assign(plane * static_cast<std::size_t>(h1_), 0.f);
    for (std::size_t i = 0; i < plane; ++i) {
      for (int o = 0; o < h1_; ++o) {
        float acc = 0;
        for (int c = 0; c < c_n; ++c) acc += w1_[static_cast<std::size_t>(o) * 2 * c_n + 2 * c + 1] *
                                             field_b.data[static_cast<std::size_t>(c) * plane + i];
        proj_b_[i * h1_ + o] = acc;
      }
    }
  }

  // Fixes the query side.
  void set_query(const DescriptorField& field_a, Pixel p) {
    if (field_a.channels() != net_->descriptor_channels()) {
      throw ShapeError("comparator expects " + std::to_string(net_->descriptor_channels()) +
                       "-channel descriptors, query field has " + std::to_string(field_a.channels()));
    }
    if (!field_a.contains(p)) throw ShapeError("query pixel outside image");
    const int r = net_->config().patch_radius, side = 2 * r + 1, c_n = field_a.channels();
    proj_a_.assign(static_cast<std::size_t>(side) * side * h1_, 0.f);
    for (int dy = 0; dy < side; ++dy) {
      for (int dx = 0; dx < side; ++dx) {
        const Pixel a{p.x + dx - r, p.y + dy - r};
        if (!field_a.contains(a)) continue;
        float* out = &proj_a_[(static_cast<std::size_t>(dy) * side + dx) * h1_];
        for (int o = 0; o < h1_; ++o) {
          float acc = 0;
          for (int c = 0; c < c_n; ++c) acc += w1_[static_cast<std::size_t>(o) * 2 * c_n + 2 * c] * field_a.at(c, a.y, a.x);
          out[o] = acc;
        }
      }
    }
  }

  double score_at(Pixel q) const {
    const auto& cfg = net_->config();
    const int r = cfg.patch_radius, side = 2 * r + 1, k2 = cfg.conv2_kernel(), side2 = cfg.conv2_side();
    const int h2 = cfg.conv2, hid = cfg.hidden;
    const int w = field_b_->width();
    // Layer 1, stored [channel][y][x].
    std::vector<float> l1(static_cast<std::size_t>(h1_) * side * side);
    for (int dy = 0; dy < side; ++dy) {
      for (int dx = 0; dx < side; ++dx) {
        const Pixel b{q.x + dx - r, q.y + dy - r};
        const bool in_b = field_b_->contains(b);
        const float* pa = &proj_a_[(static_cast<std::size_t>(dy) * side + dx) * h1_];
        const float* pb = in_b ? &proj_b_[(static_cast<std::size_t>(b.y) * w + b.x) * h1_] : nullptr;
        for (int o = 0; o < h1_; ++o) {
          const float v = b1_[o] + pa[o] + (pb ? pb[o] : 0.f);
          l1[(static_cast<std::size_t>(o) * side + dy) * side + dx] = v > 0 ? v : 0;
        }
      }
    }
    // Layer 2 via an im2col column per output position.
    const int col_len = h1_ * k2 * k2;
    std::vector<float> col(static_cast<std::size_t>(col_len));
    std::vector<float> l2(static_cast<std::size_t>(h2) * side2 * side2);
    for (int y = 0; y < side2; ++y) {
      for (int x = 0; x < side2; ++x) {
        std::size_t k = 0;
        for (int o = 0; o < h1_; ++o) {
          for (int ky = 0; ky < k2; ++ky) {
            for (int kx = 0; kx < k2; ++kx) col[k++] = l1[(static_cast<std::size_t>(o) * side + y + ky) * side + x + kx];
          }
        }
        for (int o2 = 0; o2 < h2; ++o2) {
          const float* wr = &w2_[static_cast<std::size_t>(o2) * col_len];
          float acc = b2_[o2];
          for (int i = 0; i < col_len; ++i) acc += wr[i] * col[i];
          l2[(static_cast<std::size_t>(o2) * side2 + y) * side2 + x] = acc > 0 ? acc : 0;
        }
      }
    }
    const std::size_t flat = l2.size();
    float out = b4_[0];
    for (int j = 0; j < hid; ++j) {
      const float* wr = &w3_[static_cast<std::size_t>(j) * flat];
      float acc = b3_[j];
      for (std::size_t i = 0; i < flat; ++i) acc += wr[i] * l2[i];
      if (acc > 0) out += w4_[j] * acc;
    }
    return 1.0 / (1.0 + std::exp(-static_cast<double>(out)));
  }

 private:
  const Comparator* net_;
  const DescriptorField* field_b_;
  Tensor w1_, b1_, w2_, b2_, w3_, b3_, w4_, b4_;
  int h1_ = 0;
  std::vector<float> proj_b_;  // [pixel][h1]
  std::vector<float> proj_a_;  // [cell][h1]
};

struct MatchResult {
  Pixel query;
  Pixel matched;
  double score = 0.0;
  std::size_t candidates_examined = 0;
  std::vector<double> score_table;  // per candidate, in candidate order; optional

  friend bool operator==(const MatchResult&, const MatchResult&) = default;
};

// Argmax over per-candidate scores; ties go to the smallest row-major pixel.
inline MatchResult select_best(Pixel query, const CandidateSet& candidates, std::vector<double> scores,
                               bool keep_table) {
  if (candidates.empty()) throw DataError("match: empty candidate set");
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (scores[i] > scores[best] ||
        (scores[i] == scores[best] && candidates.points[i] < candidates.points[best])) {
      best = i;
    }
  }
  MatchResult r{query, candidates.points[best], scores[best], candidates.size(), {}};
  if (keep_table) r.score_table = std::move(scores);
  return r;
}

// Scores every candidate with an arbitrary scorer and returns the argmax.
inline MatchResult match_keypoint_with(Pixel query, const CandidateSet& candidates,
                                       const std::function<double(Pixel)>& scorer, bool keep_table = false) {
  if (candidates.empty()) throw DataError("match_keypoint: empty candidate set");
  std::vector<double> scores(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) scores[i] = scorer(candidates.points[i]);
  return select_best(query, candidates, std::move(scores), keep_table);
}

// Matching with a prepared scorer (its target projection reused across
// queries). Candidate scoring is parallel; selection is sequential.
inline MatchResult match_keypoint(Pixel query, const DescriptorField& field_a, ComparatorScorer& scorer,
                                  const CandidateSet& candidates, bool keep_table = false) {
  if (candidates.empty()) throw DataError("match_keypoint: empty candidate set");
  scorer.set_query(field_a, query);
  std::vector<double> scores(candidates.size());
  const int n = static_cast<int>(candidates.size());
#pragma omp parallel for schedule(static) if (threads() > 1)
  for (int i = 0; i < n; ++i) scores[static_cast<std::size_t>(i)] = scorer.score_at(candidates.points[static_cast<std::size_t>(i)]);
  return select_best(query, candidates, std::move(scores), keep_table);
}

inline MatchResult match_keypoint(Pixel query, const DescriptorField& field_a, const DescriptorField& field_b,
                                  const CandidateSet& candidates, const Comparator& weights,
                                  bool keep_table = false) {
  ComparatorScorer scorer(weights, field_b);
  return match_keypoint(query, field_a, scorer, candidates, keep_table);
}

// Nearest neighbour in descriptor space. The reported score is 1 / (1 + d^2).
inline MatchResult nn_baseline_match(Pixel query, const DescriptorField& field_a, const DescriptorField& field_b,
                                     const CandidateSet& candidates) {
  if (candidates.empty()) throw DataError("nn_baseline_match: empty candidate set");
  if (field_a.channels() != field_b.channels()) throw ShapeError("nn_baseline_match: channel mismatch");
  const auto anchor = field_a.descriptor_at(query);
  std::size_t best = 0;
  double best_d2 = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const double d2 = squared_distance<float>(anchor, field_b, candidates.points[i]);
    if (d2 < best_d2 || (d2 == best_d2 && candidates.points[i] < candidates.points[best])) {
      best = i;
      best_d2 = d2;
    }
  }
  return {query, candidates.points[best], 1.0 / (1.0 + best_d2), candidates.size(), {}};
}

// Line-delimited match record:
//   query_x,query_y,match_x,match_y,score,candidates_examined
inline std::string format_match_record(const MatchResult& r) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%d,%d,%d,%d,%.9g,%zu", r.query.x, r.query.y, r.matched.x, r.matched.y,
                r.score, r.candidates_examined);
  return buf;
}

inline MatchResult parse_match_record(const std::string& line) {
  MatchResult r;
  std::istringstream is(line);
  std::string f[6];
  for (int i = 0; i < 6; ++i) {
    if (!std::getline(is, f[i], i < 5 ? ',' : '\n')) throw DataError("match record needs 6 fields: '" + line + "'");
  }
  try {
    r.query = {std::stoi(f[0]), std::stoi(f[1])};
    r.matched = {std::stoi(f[2]), std::stoi(f[3])};
    r.score = std::stod(f[4]);
    r.candidates_examined = static_cast<std::size_t>(std::stoull(f[5]));
  } catch (const std::exception&) {
    throw DataError("malformed match record: '" + line + "'");
  }
  return r;
}

// One image pair prepared for comparator training: descriptor fields, the
// ground-truth pixel correspondences, and image_b's candidate set.
struct ComparatorPairData {
  const DescriptorField* field_a = nullptr;
  const DescriptorField* field_b = nullptr;
  std::vector<Pixel> queries;
  std::vector<Pixel> targets;
  CandidateSet candidates;
};

struct ComparatorTrainOptions {
  int epochs = 30;
  std::uint64_t seed = 1;
};

struct ComparatorTrainResult {
  Comparator net;
  std::vector<double> epoch_loss;
  std::vector<double> train_accuracy;
  std::vector<double> val_accuracy;
  // (positives, negatives) of every optimisation batch, in order.
  std::vector<std::pair<int, int>> batch_composition;
};

namespace matcher_detail {

struct Sample {
  std::size_t pair = 0;
  Pixel query;
  Pixel target;
  float label = 0.f;
};

// A negative for keypoint k: with probability hard_fraction one of the
// descriptor-nearest legal candidates, otherwise any legal candidate.
inline Pixel draw_negative(const ComparatorPairData& d, std::size_t k, const ComparatorConfig& cfg, Rng& rng) {
  const auto legal = exclude_radius(d.candidates, d.targets[k], cfg.exclusion_radius);
  if (legal.empty()) throw DataError("no legal negative candidates around a ground-truth target");
  if (rng.uniform() < cfg.hard_negative_fraction) {
    const auto anchor = d.field_a->descriptor_at(d.queries[k]);
    const auto pool = hard_negative_mine<float>(anchor, *d.field_b, legal, std::numeric_limits<double>::infinity(),
                                                cfg.hard_negative_pool, rng);
    return pool[rng.index(pool.size())];
  }
  return legal.points[rng.index(legal.size())];
}

inline Tensor assemble(const std::vector<ComparatorPairData>& data, const std::vector<Sample>& samples,
                       std::size_t begin, std::size_t end, int radius) {
  const int c_n = data[samples[begin].pair].field_a->channels();
  const int side = 2 * radius + 1;
  Tensor batch({static_cast<int>(end - begin), 2 * c_n, side, side});
  const std::size_t per = static_cast<std::size_t>(2 * c_n) * side * side;
  for (std::size_t i = begin; i < end; ++i) {
    const auto& s = samples[i];
    const auto& d = data[s.pair];
    const auto patch = pair_input(*d.field_a, s.query, *d.field_b, s.target, radius);
    std::copy(patch.data.data().begin(), patch.data.data().end(), batch.data().begin() + (i - begin) * per);
  }
  return batch;
}

inline double accuracy(const Comparator& net, const std::vector<ComparatorPairData>& data,
                       const std::vector<Sample>& samples, int radius) {
  if (samples.empty()) return 0.0;
  std::size_t correct = 0;
  constexpr std::size_t chunk = 256;
  for (std::size_t b = 0; b < samples.size(); b += chunk) {
    const std::size_t e = std::min(samples.size(), b + chunk);
    const auto probs = net.forward(Var::constant(assemble(data, samples, b, e, radius)), false).value();
    for (std::size_t i = b; i < e; ++i) correct += (probs[i - b] >= 0.5f) == (samples[i].label == 1.f);
  }
  return static_cast<double>(correct) / static_cast<double>(samples.size());
}

inline void validate_dataset(const std::vector<ComparatorPairData>& data, int channels) {
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& d = data[i];
    if (!d.field_a || !d.field_b) throw DataError("comparator pair " + std::to_string(i) + " lacks descriptor fields");
    if (d.field_a->channels() != channels || d.field_b->channels() != channels) {
      throw ShapeError("comparator pair " + std::to_string(i) + " has inconsistent descriptor channels");
    }
    if (d.queries.size() != d.targets.size()) {
      throw DataError("comparator pair " + std::to_string(i) + " has mismatched keypoint lists");
    }
    if (d.candidates.size() < 2) {
      throw DataError("comparator pair " + std::to_string(i) + " has no candidate set to draw negatives from");
    }
  }
}

}  // namespace matcher_detail

// Supervised BCE training. Every batch holds exactly as many positives
// (query with its true correspondence) as negatives (query with a
// non-matching candidate from the target's candidate set).
inline ComparatorTrainResult train_comparator(const std::vector<ComparatorPairData>& train,
                                              const std::vector<ComparatorPairData>& validation,
                                              const ComparatorConfig& config, const ComparatorTrainOptions& opt) {
  using matcher_detail::Sample;
  config.validate();
  if (train.empty()) throw DataError("train_comparator: empty training set");
  const int channels = train.front().field_a ? train.front().field_a->channels() : 0;
  matcher_detail::validate_dataset(train, channels);
  matcher_detail::validate_dataset(validation, channels);
  ComparatorTrainResult result{Comparator::init(config, channels, opt.seed), {}, {}, {}, {}};
  Rng rng(opt.seed ^ 0xC0A9A7ULL);

  // Fixed validation samples, one positive and one negative per keypoint.
  std::vector<Sample> val_samples;
  {
    Rng vrng(opt.seed ^ 0x5A11DULL);
    for (std::size_t i = 0; i < validation.size(); ++i) {
      for (std::size_t k = 0; k < validation[i].queries.size(); ++k) {
        val_samples.push_back({i, validation[i].queries[k], validation[i].targets[k], 1.f});
        val_samples.push_back(
            {i, validation[i].queries[k], matcher_detail::draw_negative(validation[i], k, config, vrng), 0.f});
      }
    }
  }

  AdamState<float> adam(AdamConfig{config.learning_rate});
  auto params = result.net.params();
  const std::size_t half = static_cast<std::size_t>(config.batch_size / 2);
  for (int epoch = 0; epoch < opt.epochs; ++epoch) {
    std::vector<std::pair<Sample, Sample>> couples;
    for (std::size_t i = 0; i < train.size(); ++i) {
      for (std::size_t k = 0; k < train[i].queries.size(); ++k) {
        Sample pos{i, train[i].queries[k], train[i].targets[k], 1.f};
        Sample neg{i, train[i].queries[k], matcher_detail::draw_negative(train[i], k, config, rng), 0.f};
        couples.emplace_back(pos, neg);
      }
    }
    rng.shuffle(couples);
    double loss_sum = 0;
    std::size_t correct = 0, seen = 0;
    for (std::size_t b = 0; b < couples.size(); b += half) {
      const std::size_t e = std::min(couples.size(), b + half);
      std::vector<Sample> samples;
      for (std::size_t i = b; i < e; ++i) samples.push_back(couples[i].first);
      for (std::size_t i = b; i < e; ++i) samples.push_back(couples[i].second);
      std::vector<float> labels;
      int pos = 0, neg = 0;
      for (const auto& s : samples) {
        labels.push_back(s.label);
        (s.label == 1.f ? pos : neg)++;
      }
      result.batch_composition.emplace_back(pos, neg);
      auto probs = result.net.forward(Var::constant(matcher_detail::assemble(train, samples, 0, samples.size(),
                                                                             config.patch_radius)));
      auto loss = bce_loss(probs, labels);
      const double lv = loss.value().item();
      if (!std::isfinite(lv)) throw NumericError("non-finite comparator loss at epoch " + std::to_string(epoch));
      loss_sum += lv * static_cast<double>(samples.size());
      for (std::size_t i = 0; i < samples.size(); ++i) correct += (probs.value()[i] >= 0.5f) == (labels[i] == 1.f);
      seen += samples.size();
      backward(loss);
      adam_step(params, adam);
    }
    result.epoch_loss.push_back(seen ? loss_sum / static_cast<double>(seen) : 0.0);
    result.train_accuracy.push_back(seen ? static_cast<double>(correct) / static_cast<double>(seen) : 0.0);
    result.val_accuracy.push_back(matcher_detail::accuracy(result.net, validation, val_samples, config.patch_radius));
  }
  return result;
}

}  // namespace semcorr
