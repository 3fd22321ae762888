#pragma once

// Brute-force PCK: squared distances against the squared threshold, exactly
// (a double squared fits a binary128 mantissa). T itself is the double
// product alpha * max(w, h), as configured.

#include <algorithm>
#include <vector>

#include "semcorr/semcorr.hpp"

namespace semcorr::testing {

struct PckInstance {
  std::vector<Point2> predicted;
  std::vector<Point2> truth;
  int width = 0;
  int height = 0;
  double alpha = 0.1;
};

inline double pck_oracle(const PckInstance& in, bool inclusive = true) {
  const double t_double = in.alpha * static_cast<double>(in.width > in.height ? in.width : in.height);
  const __float128 t = t_double;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < in.predicted.size(); ++i) {
    const __float128 dx = static_cast<__float128>(in.predicted[i].x) - in.truth[i].x;
    const __float128 dy = static_cast<__float128>(in.predicted[i].y) - in.truth[i].y;
    const __float128 d2 = dx * dx + dy * dy;
    hits += inclusive ? d2 <= t * t : d2 < t * t;
  }
  return static_cast<double>(hits) / static_cast<double>(in.predicted.size());
}

// Integer pixel predictions and truths, as the matcher produces them, with a
// random alpha. A third use alphas on a 0.05 grid, where integer distances
// often land exactly on the threshold.
inline PckInstance random_pck_instance(Rng& rng) {
  PckInstance in;
  in.width = 8 + static_cast<int>(rng.index(120));
  in.height = 8 + static_cast<int>(rng.index(120));
  const bool on_grid = rng.index(3) == 0;
  in.alpha = on_grid ? 0.05 * static_cast<double>(1 + rng.index(6)) : rng.uniform(0.01, 0.5);
  const int n = 1 + static_cast<int>(rng.index(40));
  for (int i = 0; i < n; ++i) {
    const Point2 t{static_cast<double>(rng.index(static_cast<std::size_t>(in.width))),
                   static_cast<double>(rng.index(static_cast<std::size_t>(in.height)))};
    Point2 p{static_cast<double>(rng.index(static_cast<std::size_t>(in.width))),
             static_cast<double>(rng.index(static_cast<std::size_t>(in.height)))};
    if (rng.bernoulli(0.5)) {
      const int spread = 1 + static_cast<int>(in.alpha * std::max(in.width, in.height));
      p = {t.x + static_cast<double>(rng.index(static_cast<std::size_t>(2 * spread + 1))) - spread,
           t.y + static_cast<double>(rng.index(static_cast<std::size_t>(2 * spread + 1))) - spread};
    }
    in.truth.push_back(t);
    in.predicted.push_back(p);
  }
  return in;
}

}  // namespace semcorr::testing
