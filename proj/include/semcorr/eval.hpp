#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "semcorr/error.hpp"
#include "semcorr/geometry.hpp"

namespace semcorr {

struct PckConfig {
  double alpha = 0.1;
  // true: distance <= T counts as correct; false: distance < T.
  bool inclusive = true;
};

// Threshold T = alpha * max(w, h) for one image.
inline double pck_threshold(double alpha, int image_w, int image_h) {
  return alpha * static_cast<double>(std::max(image_w, image_h));
}

inline bool pck_correct(Point2 predicted, Point2 truth, double threshold, bool inclusive) {
  const double dx = predicted.x - truth.x, dy = predicted.y - truth.y;
  const double d = std::sqrt(dx * dx + dy * dy);
  return inclusive ? d <= threshold : d < threshold;
}

inline double pck(const std::vector<Point2>& predictions, const std::vector<Point2>& groundtruth, int image_w,
                  int image_h, const PckConfig& config = {}) {
  if (predictions.empty()) throw UsageError("pck: empty prediction list");
  if (predictions.size() != groundtruth.size()) {
    throw UsageError("pck: " + std::to_string(predictions.size()) + " predictions vs " +
                     std::to_string(groundtruth.size()) + " ground-truth points");
  }
  if (!(config.alpha > 0)) throw UsageError("pck: alpha must be > 0");
  const double t = pck_threshold(config.alpha, image_w, image_h);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    correct += pck_correct(predictions[i], groundtruth[i], t, config.inclusive);
  }
  return static_cast<double>(correct) / static_cast<double>(predictions.size());
}

inline void require_increasing(const std::vector<double>& alphas) {
  if (alphas.empty()) throw UsageError("alpha grid is empty");
  for (std::size_t i = 0; i < alphas.size(); ++i) {
    if (!(alphas[i] > 0) || (i && !(alphas[i] > alphas[i - 1]))) {
      throw UsageError("alpha grid must be positive and strictly increasing");
    }
  }
}

struct CurvePoint {
  double alpha = 0.0;
  double pck = 0.0;
};

inline std::vector<CurvePoint> pck_curve(const std::vector<Point2>& predictions, const std::vector<Point2>& groundtruth,
                                         int image_w, int image_h, const std::vector<double>& alphas,
                                         bool inclusive = true) {
  require_increasing(alphas);
  std::vector<CurvePoint> out;
  for (double a : alphas) out.push_back({a, pck(predictions, groundtruth, image_w, image_h, {a, inclusive})});
  return out;
}

// One evaluated keypoint; each carries its own image's reference length.
struct KeypointOutcome {
  Point2 predicted;
  Point2 truth;
  int image_w = 0;
  int image_h = 0;
};

inline double pck_outcomes(const std::vector<KeypointOutcome>& outcomes, double alpha, bool inclusive = true) {
  if (outcomes.empty()) throw UsageError("pck: no keypoints");
  std::size_t correct = 0;
  for (const auto& o : outcomes) {
    correct += pck_correct(o.predicted, o.truth, pck_threshold(alpha, o.image_w, o.image_h), inclusive);
  }
  return static_cast<double>(correct) / static_cast<double>(outcomes.size());
}

struct ClassResults {
  std::string name;
  std::vector<KeypointOutcome> outcomes;
};

struct ClassPck {
  std::string name;
  double pck = 0.0;
  std::size_t keypoints = 0;

  friend bool operator==(const ClassPck&, const ClassPck&) = default;
};

struct ReportCurvePoint {
  double alpha = 0.0;
  double mean_pck = 0.0;
  std::vector<double> per_class;

  friend bool operator==(const ReportCurvePoint&, const ReportCurvePoint&) = default;
};

struct PckReport {
  double alpha = 0.1;
  std::vector<ClassPck> classes;
  double mean_pck = 0.0;  // unweighted over classes
  std::vector<ReportCurvePoint> curve;
  std::size_t keypoints = 0;

  friend bool operator==(const PckReport&, const PckReport&) = default;
};

// Keypoints are pooled within a class; the mean is unweighted over classes.
inline PckReport class_report(const std::vector<ClassResults>& results, const PckConfig& config,
                              const std::vector<double>& alpha_grid,
                              const std::function<void(std::string_view)>& warn = {}) {
  if (results.empty()) throw UsageError("class_report: no classes");
  if (!(config.alpha > 0)) throw UsageError("class_report: alpha must be > 0");
  if (!alpha_grid.empty()) require_increasing(alpha_grid);
  std::vector<const ClassResults*> present;
  for (const auto& r : results) {
    if (r.outcomes.empty()) {
      if (warn) warn("class '" + r.name + "' has no keypoints; excluded from the report");
      continue;
    }
    present.push_back(&r);
  }
  if (present.empty()) throw DataError("class_report: every class is empty");
  PckReport rep;
  rep.alpha = config.alpha;
  double sum = 0;
  for (const auto* r : present) {
    const double v = pck_outcomes(r->outcomes, config.alpha, config.inclusive);
    rep.classes.push_back({r->name, v, r->outcomes.size()});
    rep.keypoints += r->outcomes.size();
    sum += v;
  }
  rep.mean_pck = sum / static_cast<double>(present.size());
  for (double a : alpha_grid) {
    ReportCurvePoint cp{a, 0.0, {}};
    double s = 0;
    for (const auto* r : present) {
      cp.per_class.push_back(pck_outcomes(r->outcomes, a, config.inclusive));
      s += cp.per_class.back();
    }
    cp.mean_pck = s / static_cast<double>(present.size());
    rep.curve.push_back(std::move(cp));
  }
  return rep;
}

inline nlohmann::json to_json(const PckReport& r) {
  nlohmann::json j;
  j["alpha"] = r.alpha;
  j["mean_pck"] = r.mean_pck;
  j["keypoints"] = r.keypoints;
  j["classes"] = nlohmann::json::array();
  for (const auto& c : r.classes) j["classes"].push_back({{"name", c.name}, {"pck", c.pck}, {"keypoints", c.keypoints}});
  j["curve"] = nlohmann::json::array();
  for (const auto& p : r.curve) j["curve"].push_back({{"alpha", p.alpha}, {"mean_pck", p.mean_pck}, {"per_class", p.per_class}});
  return j;
}

inline PckReport report_from_json(const nlohmann::json& j) {
  try {
    PckReport r;
    r.alpha = j.at("alpha").get<double>();
    r.mean_pck = j.at("mean_pck").get<double>();
    r.keypoints = j.at("keypoints").get<std::size_t>();
    for (const auto& c : j.at("classes")) {
      r.classes.push_back({c.at("name").get<std::string>(), c.at("pck").get<double>(), c.at("keypoints").get<std::size_t>()});
    }
    for (const auto& p : j.at("curve")) {
      r.curve.push_back({p.at("alpha").get<double>(), p.at("mean_pck").get<double>(),
                         p.at("per_class").get<std::vector<double>>()});
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed PCK report: ") + e.what());
  }
}

// Per-class columns plus a mean column, values in percent.
inline std::string format_report_table(const PckReport& r, const std::string& row_label) {
  std::ostringstream os;
  std::size_t label_w = std::max<std::size_t>(row_label.size(), 6);
  char buf[64];
  os << std::string(label_w, ' ');
  for (const auto& c : r.classes) os << " | " << c.name;
  os << " | mean\n";
  os << std::string(label_w - row_label.size(), ' ') << row_label;
  for (const auto& c : r.classes) {
    std::snprintf(buf, sizeof buf, "%.2f", 100.0 * c.pck);
    os << " | " << std::string(c.name.size() > std::string(buf).size() ? c.name.size() - std::string(buf).size() : 0, ' ')
       << buf;
  }
  std::snprintf(buf, sizeof buf, "%.2f", 100.0 * r.mean_pck);
  os << " | " << buf << "\n";
  std::snprintf(buf, sizeof buf, "%g", r.alpha);
  os << "PCK with alpha = " << buf << ", L = max(w,h); " << r.keypoints << " keypoints\n";
  return os.str();
}

inline std::string format_curve_csv(const PckReport& r) {
  std::ostringstream os;
  os << "alpha,mean_pck";
  for (const auto& c : r.classes) os << ',' << c.name;
  os << '\n';
  char buf[64];
  for (const auto& p : r.curve) {
    std::snprintf(buf, sizeof buf, "%.6g,%.6f", p.alpha, p.mean_pck);
    os << buf;
    for (double v : p.per_class) {
      std::snprintf(buf, sizeof buf, ",%.6f", v);
      os << buf;
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace semcorr
