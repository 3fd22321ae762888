#pragma once

#include <algorithm>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "semcorr/hypercolumn.hpp"
#include "semcorr/region.hpp"

namespace semcorr {

template <class T>
double squared_distance(std::span<const T> anchor, const BasicDescriptorField<T>& field, Pixel p) {
  const std::size_t plane = static_cast<std::size_t>(field.height()) * field.width();
  const T* base = field.data.data().data() + static_cast<std::size_t>(p.y) * field.width() + p.x;
  double d2 = 0;
  for (std::size_t c = 0; c < anchor.size(); ++c) {
    const double diff = static_cast<double>(anchor[c]) - base[c * plane];
    d2 += diff * diff;
  }
  return d2;
}

// Hard-negative selection. The candidate set must already exclude the true
// match and its exclusion neighbourhood. Returns the (at most k) candidates
// with the smallest squared distance among those violating the margin
// (d^2 < margin), nearest first, then pads with uniformly drawn unused
// candidates. Fewer than k come back only when the set itself is smaller.
template <class T>
std::vector<Pixel> hard_negative_mine(std::span<const T> anchor, const BasicDescriptorField<T>& field,
                                      const CandidateSet& candidates, double margin, int k, Rng& rng) {
  if (candidates.empty()) throw DataError("hard_negative_mine: empty candidate set");
  if (k < 1) throw UsageError("hard_negative_mine: k must be >= 1");
  if (static_cast<int>(anchor.size()) != field.channels()) {
    throw ShapeError("hard_negative_mine: anchor has " + std::to_string(anchor.size()) +
                     " dims but field has " + std::to_string(field.channels()) + " channels");
  }
  const std::size_t n = candidates.size();
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Pixel p = candidates.points[i];
    if (!field.contains(p)) throw ShapeError("hard_negative_mine: candidate outside descriptor field");
    d2[i] = squared_distance(anchor, field, p);
  }
  std::vector<std::size_t> violators;
  for (std::size_t i = 0; i < n; ++i) {
    if (d2[i] < margin) violators.push_back(i);
  }
  // Candidates are row-major already, so a stable sort keeps the tie-break.
  std::stable_sort(violators.begin(), violators.end(),
                   [&](std::size_t a, std::size_t b) { return d2[a] < d2[b]; });
  const std::size_t want = std::min(n, static_cast<std::size_t>(k));
  std::vector<char> used(n, 0);
  std::vector<Pixel> out;
  for (std::size_t i = 0; i < violators.size() && out.size() < want; ++i) {
    out.push_back(candidates.points[violators[i]]);
    used[violators[i]] = 1;
  }
  if (out.size() < want) {
    std::vector<std::size_t> rest;
    for (std::size_t i = 0; i < n; ++i) {
      if (!used[i]) rest.push_back(i);
    }
    // Partial Fisher-Yates: only the drawn prefix is shuffled.
    for (std::size_t j = 0; out.size() < want; ++j) {
      std::swap(rest[j], rest[j + rng.index(rest.size() - j)]);
      out.push_back(candidates.points[rest[j]]);
    }
  }
  return out;
}

}  // namespace semcorr
