#pragma once

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "semcorr/error.hpp"

namespace semcorr {

// Flat key=value settings with dotted section prefixes
// (e.g. `matcher.patch_radius=2`). Only registered keys are accepted, so a
// misspelt override fails instead of silently doing nothing.
class Config {
 public:
  Config() : values_(defaults()) {}

  static const std::map<std::string, std::string>& defaults() {
    static const std::map<std::string, std::string> d{
        {"run.seed", "1"},
        {"run.threads", "1"},
        {"gen.count", "250"},
        {"gen.size", "64"},
        {"gen.keypoints", "10"},
        {"gen.classes", "disk,rectangle,triangle,ellipse"},
        {"gen.family", "affine_deform"},
        {"gen.rotation_deg", "12"},
        {"gen.min_scale", "0.92"},
        {"gen.max_scale", "1.08"},
        {"gen.translation", "4"},
        {"gen.deform_amplitude", "2"},
        {"gen.deform_terms", "3"},
        {"gen.intensity_jitter", "0.08"},
        {"data.train_fraction", "0.8"},
        {"backbone.channels", "8,16,32"},
        {"backbone.epochs", "15"},
        {"backbone.batch_size", "16"},
        {"backbone.learning_rate", "0.005"},
        {"backbone.reg_weight", "0.0001"},
        {"hypercolumn.standardize", "true"},
        {"embedding.dim", "16"},
        {"embedding.channels", "16,16"},
        {"embedding.margin", "1"},
        {"embedding.negatives", "4"},
        {"embedding.exclusion_radius", "2"},
        {"embedding.margin_mode", "squared"},
        {"embedding.epochs", "8"},
        {"embedding.learning_rate", "0.002"},
        {"matcher.patch_radius", "2"},
        {"matcher.conv1", "16"},
        {"matcher.conv2", "16"},
        {"matcher.hidden", "32"},
        {"matcher.batch_size", "64"},
        {"matcher.learning_rate", "0.001"},
        {"matcher.hard_negative_fraction", "0.5"},
        {"matcher.hard_negative_pool", "8"},
        {"matcher.exclusion_radius", "2"},
        {"matcher.epochs", "30"},
        {"matcher.hc_only", "false"},
        {"matcher.dilation_radius", "-1"},
        {"matcher.full_image", "false"},
        {"eval.alpha", "0.1"},
        {"eval.inclusive", "true"},
        {"eval.alpha_grid", "0.02,0.04,0.06,0.08,0.1,0.12,0.14,0.16,0.18,0.2"},
    };
    return d;
  }

  void set(const std::string& key, const std::string& value) {
    if (!defaults().count(key)) throw UsageError("unknown config key '" + key + "'");
    values_[key] = value;
  }

  // Parses one `key=value` assignment.
  void assign(const std::string& text, const std::string& where = "override") {
    const auto eq = text.find('=');
    if (eq == std::string::npos || eq == 0) throw UsageError(where + ": expected key=value, got '" + text + "'");
    set(trim(text.substr(0, eq)), trim(text.substr(eq + 1)));
  }

  void load_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw UsageError("cannot open config file " + path);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
      ++lineno;
      const auto t = trim(line);
      if (t.empty() || t[0] == '#') continue;
      assign(t, path + ":" + std::to_string(lineno));
    }
  }

  const std::string& str(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw UsageError("unknown config key '" + key + "'");
    return it->second;
  }

  long long integer(const std::string& key) const {
    const auto& s = str(key);
    long long v = 0;
    auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size()) bad(key, "an integer");
    return v;
  }

  double real(const std::string& key) const {
    const auto& s = str(key);
    double v = 0;
    auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size()) bad(key, "a number");
    return v;
  }

  bool flag(const std::string& key) const {
    const auto& s = str(key);
    if (s == "true" || s == "1") return true;
    if (s == "false" || s == "0") return false;
    bad(key, "true or false");
  }

  std::vector<std::string> list(const std::string& key) const {
    std::vector<std::string> out;
    std::stringstream ss(str(key));
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      if (item.empty()) bad(key, "a comma-separated list without empty items");
      out.push_back(item);
    }
    return out;
  }

  std::vector<int> int_list(const std::string& key) const {
    std::vector<int> out;
    for (const auto& s : list(key)) {
      int v = 0;
      auto r = std::from_chars(s.data(), s.data() + s.size(), v);
      if (r.ec != std::errc() || r.ptr != s.data() + s.size()) bad(key, "a list of integers");
      out.push_back(v);
    }
    return out;
  }

  std::vector<double> real_list(const std::string& key) const {
    std::vector<double> out;
    for (const auto& s : list(key)) {
      double v = 0;
      auto r = std::from_chars(s.data(), s.data() + s.size(), v);
      if (r.ec != std::errc() || r.ptr != s.data() + s.size()) bad(key, "a list of numbers");
      out.push_back(v);
    }
    return out;
  }

  // Every key in sorted order; loading the snapshot reproduces this config.
  std::string snapshot() const {
    std::string out;
    for (const auto& [k, v] : values_) out += k + "=" + v + "\n";
    return out;
  }

  void write_snapshot(const std::string& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot write config snapshot " + path);
    os << snapshot();
    if (!os) throw DataError("write failed for " + path);
  }

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
  }

  [[noreturn]] void bad(const std::string& key, const std::string& expected) const {
    throw UsageError("config key '" + key + "' must be " + expected + ", got '" + values_.at(key) + "'");
  }

  std::map<std::string, std::string> values_;
};

}  // namespace semcorr
