#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "semcorr/ops.hpp"

namespace semcorr {

// Classification loss: sum over examples (not the mean) of the softmax
// cross-entropy, plus an L2 penalty reg_weight * ||w||^2 over `params`.
template <class T>
BasicVar<T> softmax_xent_l2(const BasicVar<T>& logits, const BasicTensor<T>& labels,
                            double reg_weight, const std::vector<BasicVar<T>>& params) {
  const auto& s = logits.shape();
  require_rank(s, 2, "softmax_xent_l2 logits");
  if (labels.shape() != s) {
    throw ShapeError("softmax_xent_l2: labels " + shape_string(labels.shape()) +
                     " do not match logits " + shape_string(s));
  }
  const int n = s[0], c = s[1];
  if (c < 2) throw UsageError("softmax_xent_l2: need at least 2 classes");
  if (reg_weight < 0) throw UsageError("softmax_xent_l2: reg_weight must be >= 0");
  for (int i = 0; i < n; ++i) {
    int ones = 0;
    for (int k = 0; k < c; ++k) {
      const T y = labels[static_cast<std::size_t>(i) * c + k];
      if (y == T{1}) {
        ++ones;
      } else if (y != T{0}) {
        ones = -1;
        break;
      }
    }
    if (ones != 1) throw UsageError("softmax_xent_l2: label row " + std::to_string(i) + " is not one-hot");
  }
  BasicTensor<T> probs(s);
  double total = 0;
  for (int i = 0; i < n; ++i) {
    const T* z = logits.value().data().data() + static_cast<std::size_t>(i) * c;
    const double zmax = *std::max_element(z, z + c);
    double denom = 0;
    for (int k = 0; k < c; ++k) denom += std::exp(static_cast<double>(z[k]) - zmax);
    const double log_denom = std::log(denom) + zmax;
    for (int k = 0; k < c; ++k) {
      const std::size_t idx = static_cast<std::size_t>(i) * c + k;
      probs[idx] = static_cast<T>(std::exp(static_cast<double>(z[k]) - log_denom));
      if (labels[idx] == T{1}) total += log_denom - static_cast<double>(z[k]);
    }
  }
  double reg = 0;
  for (const auto& p : params) {
    for (T w : p.value().data()) reg += static_cast<double>(w) * w;
  }
  total += reg_weight * reg;
  std::vector<BasicVar<T>> inputs{logits};
  inputs.insert(inputs.end(), params.begin(), params.end());
  auto lr = logits.record();
  std::vector<std::shared_ptr<GradRecord<T>>> prs;
  for (const auto& p : params) prs.push_back(p.record());
  return make_op<T>("softmax_xent_l2", BasicTensor<T>::scalar(static_cast<T>(total)), inputs,
                    [lr, prs, probs = std::move(probs), labels, reg_weight](const BasicTensor<T>& dy) {
    const T g = dy[0];
    if (lr->requires_grad) {
      auto& d = lr->grad_buffer();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += g * (probs[i] - labels[i]);
    }
    for (const auto& pr : prs) {
      if (!pr->requires_grad) continue;
      auto& d = pr->grad_buffer();
      const T k = static_cast<T>(2.0 * reg_weight) * g;
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += k * pr->value[i];
    }
  });
}

enum class MarginMode {
  kSquaredDistance,  // max(0, m - d^2): margin on the squared distance
  kDistance,         // max(0, m - d)^2: the hinge-on-distance variant, for ablation
};

// Correspondence contrastive loss over N descriptor pairs:
//   1/(2N) * sum_i [ s_i d_i^2 + (1 - s_i) hinge_i ]
// feat_a, feat_b: [N, F]; flags: s_i in {0, 1}.
template <class T>
BasicVar<T> contrastive_loss(const BasicVar<T>& feat_a, const BasicVar<T>& feat_b,
                             const std::vector<int>& flags, double margin,
                             MarginMode mode = MarginMode::kSquaredDistance) {
  require_rank(feat_a.shape(), 2, "contrastive_loss feat_a");
  if (feat_a.shape() != feat_b.shape()) {
    throw ShapeError("contrastive_loss: feat_a " + shape_string(feat_a.shape()) +
                     " vs feat_b " + shape_string(feat_b.shape()));
  }
  const int n = feat_a.shape()[0], f = feat_a.shape()[1];
  if (flags.empty()) throw UsageError("contrastive_loss: empty batch");
  if (static_cast<int>(flags.size()) != n) {
    throw ShapeError("contrastive_loss: " + std::to_string(flags.size()) + " flags for " +
                     std::to_string(n) + " pairs");
  }
  if (!(margin > 0)) throw UsageError("contrastive_loss: margin must be > 0");
  // Per-pair dL/d(feat_a - feat_b) coefficient.
  std::vector<double> coef(static_cast<std::size_t>(n), 0.0);
  double total = 0;
  const double inv2n = 1.0 / (2.0 * n);
  for (int i = 0; i < n; ++i) {
    if (flags[i] != 0 && flags[i] != 1) throw UsageError("contrastive_loss: flags must be 0 or 1");
    double d2 = 0;
    for (int k = 0; k < f; ++k) {
      const double diff = static_cast<double>(feat_a.value()[static_cast<std::size_t>(i) * f + k]) -
                          feat_b.value()[static_cast<std::size_t>(i) * f + k];
      d2 += diff * diff;
    }
    if (flags[i] == 1) {
      total += d2;
      coef[i] = 2.0 * inv2n;
    } else if (mode == MarginMode::kSquaredDistance) {
      if (d2 < margin) {
        total += margin - d2;
        coef[i] = -2.0 * inv2n;
      }
    } else {
      const double d = std::sqrt(d2);
      if (d < margin) {
        total += (margin - d) * (margin - d);
        coef[i] = d > 0 ? -2.0 * (margin - d) / d * inv2n : 0.0;
      }
    }
  }
  total *= inv2n;
  auto ar = feat_a.record(), br = feat_b.record();
  return make_op<T>("contrastive_loss", BasicTensor<T>::scalar(static_cast<T>(total)),
                    {feat_a, feat_b}, [ar, br, coef = std::move(coef), n, f](const BasicTensor<T>& dy) {
    const double g = dy[0];
    for (int i = 0; i < n; ++i) {
      if (coef[i] == 0.0) continue;
      for (int k = 0; k < f; ++k) {
        const std::size_t idx = static_cast<std::size_t>(i) * f + k;
        const T v = static_cast<T>(g * coef[i] * (static_cast<double>(ar->value[idx]) - br->value[idx]));
        if (ar->requires_grad) ar->grad_buffer()[idx] += v;
        if (br->requires_grad) br->grad_buffer()[idx] -= v;
      }
    }
  });
}

inline constexpr double kBceClamp = 1e-7;

// Mean binary cross-entropy. Predictions are clamped to [delta, 1 - delta]
// before the logarithm; the clamp has zero gradient outside that band.
template <class T>
BasicVar<T> bce_loss(const BasicVar<T>& predictions, const std::vector<T>& labels) {
  const std::size_t n = predictions.value().size();
  if (n == 0 || labels.size() != n) {
    throw ShapeError("bce_loss: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(n) + " predictions");
  }
  double total = 0;
  std::vector<double> dpred(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double p = predictions.value()[i];
    const double y = labels[i];
    if (!(p >= 0.0 && p <= 1.0)) throw UsageError("bce_loss: prediction outside [0,1]");
    if (y != 0.0 && y != 1.0) throw UsageError("bce_loss: labels must be 0 or 1");
    const double pc = std::clamp(p, kBceClamp, 1.0 - kBceClamp);
    total -= y * std::log(pc) + (1.0 - y) * std::log(1.0 - pc);
    if (p > kBceClamp && p < 1.0 - kBceClamp) dpred[i] = -(y / pc - (1.0 - y) / (1.0 - pc)) / n;
  }
  total /= static_cast<double>(n);
  auto pr = predictions.record();
  return make_op<T>("bce_loss", BasicTensor<T>::scalar(static_cast<T>(total)), {predictions},
                    [pr, dpred = std::move(dpred)](const BasicTensor<T>& dy) {
    auto& d = pr->grad_buffer();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += static_cast<T>(dy[0] * dpred[i]);
  });
}

// Plain-value batch forms.

struct ClassifierBatch {
  BasicTensor<double> logits;  // N x C
  BasicTensor<double> labels;  // N x C, one-hot rows
  double reg_weight = 0.0;
  std::vector<BasicTensor<double>> params;
};

struct ContrastivePairBatch {
  BasicTensor<double> feat_a;  // N x F
  BasicTensor<double> feat_b;  // N x F
  std::vector<int> flags;
  double margin = 1.0;
  MarginMode mode = MarginMode::kSquaredDistance;
};

struct BceBatch {
  std::vector<double> predictions;
  std::vector<double> labels;
};

inline double softmax_xent_l2(const ClassifierBatch& b) {
  std::vector<BasicVar<double>> params;
  for (const auto& p : b.params) params.push_back(BasicVar<double>::constant(p));
  return softmax_xent_l2(BasicVar<double>::constant(b.logits), b.labels, b.reg_weight, params)
      .value()
      .item();
}

inline double contrastive_loss(const ContrastivePairBatch& b) {
  return contrastive_loss(BasicVar<double>::constant(b.feat_a), BasicVar<double>::constant(b.feat_b),
                          b.flags, b.margin, b.mode)
      .value()
      .item();
}

inline double bce_loss(const BceBatch& b) {
  const int n = static_cast<int>(b.predictions.size());
  if (n == 0) throw ShapeError("bce_loss: empty batch");
  return bce_loss(BasicVar<double>::constant(BasicTensor<double>(Shape{n}, b.predictions)), b.labels)
      .value()
      .item();
}

}  // namespace semcorr
