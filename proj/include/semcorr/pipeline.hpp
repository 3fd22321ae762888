#pragma once

#include <cstdio>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "semcorr/backbone.hpp"
#include "semcorr/checkpoint.hpp"
#include "semcorr/config.hpp"
#include "semcorr/dataset.hpp"
#include "semcorr/embedding.hpp"
#include "semcorr/eval.hpp"
#include "semcorr/hypercolumn.hpp"
#include "semcorr/matcher.hpp"
#include "semcorr/parallel.hpp"
#include "semcorr/region.hpp"

// End-to-end orchestration: dataset generation, the three training stages,
// matching and evaluation, with the file layout used by the command-line
// tool.
namespace semcorr {

using Logger = std::function<void(std::string_view)>;

// Typed view of a Config.
struct Settings {
  std::uint64_t seed = 1;
  int threads = 1;
  int count = 250;
  int size = 64;
  GenOptions gen;
  std::vector<std::string> classes;
  WarpSpec warp;
  double train_fraction = 0.8;
  BackboneConfig backbone;
  ClassifierTrainOptions classifier;
  HypercolumnOptions hypercolumn;
  EmbeddingConfig embedding;
  int embedding_epochs = 8;
  double embedding_lr = 2e-3;
  ComparatorConfig comparator;
  int comparator_epochs = 30;
  bool hc_only = false;
  int dilation_radius = -1;
  bool full_image = false;
  PckConfig pck;
  std::vector<double> alpha_grid;

  static Settings from(const Config& c) {
    Settings s;
    s.seed = static_cast<std::uint64_t>(c.integer("run.seed"));
    s.threads = static_cast<int>(c.integer("run.threads"));
    if (s.threads < 1) throw UsageError("run.threads must be >= 1");
    s.count = static_cast<int>(c.integer("gen.count"));
    s.size = static_cast<int>(c.integer("gen.size"));
    s.gen.keypoints = static_cast<int>(c.integer("gen.keypoints"));
    s.classes = c.list("gen.classes");
    for (const auto& k : s.classes) {
      Silhouette{k}.contains({0, 0});
    }
    const auto& family = c.str("gen.family");
    if (family == "affine") {
      s.warp.family = WarpFamily::kAffine;
    } else if (family == "affine_deform") {
      s.warp.family = WarpFamily::kAffineDeform;
    } else {
      throw UsageError("gen.family must be affine or affine_deform, got '" + family + "'");
    }
    s.warp.max_rotation_deg = c.real("gen.rotation_deg");
    s.warp.min_scale = c.real("gen.min_scale");
    s.warp.max_scale = c.real("gen.max_scale");
    const double t = c.real("gen.translation");
    if (t < 0) throw UsageError("gen.translation must be >= 0");
    s.warp.min_tx = s.warp.min_ty = -t;
    s.warp.max_tx = s.warp.max_ty = t;
    s.warp.deform_amplitude = c.real("gen.deform_amplitude");
    s.warp.deform_terms = static_cast<int>(c.integer("gen.deform_terms"));
    s.warp.intensity_jitter = c.real("gen.intensity_jitter");
    s.train_fraction = c.real("data.train_fraction");
    if (!(s.train_fraction > 0 && s.train_fraction < 1)) throw UsageError("data.train_fraction must lie in (0, 1)");

    s.backbone.channels = c.int_list("backbone.channels");
    s.backbone.input_size = s.size;
    s.backbone.complete_defaults();
    s.classifier.epochs = static_cast<int>(c.integer("backbone.epochs"));
    s.classifier.batch_size = static_cast<int>(c.integer("backbone.batch_size"));
    s.classifier.learning_rate = c.real("backbone.learning_rate");
    s.classifier.reg_weight = c.real("backbone.reg_weight");
    s.hypercolumn.standardize = c.flag("hypercolumn.standardize");

    s.embedding.dim = static_cast<int>(c.integer("embedding.dim"));
    s.embedding.channels = c.int_list("embedding.channels");
    s.embedding.margin = c.real("embedding.margin");
    s.embedding.negatives = static_cast<int>(c.integer("embedding.negatives"));
    s.embedding.exclusion_radius = c.real("embedding.exclusion_radius");
    const auto& mode = c.str("embedding.margin_mode");
    if (mode == "squared") {
      s.embedding.margin_mode = MarginMode::kSquaredDistance;
    } else if (mode == "distance") {
      s.embedding.margin_mode = MarginMode::kDistance;
    } else {
      throw UsageError("embedding.margin_mode must be squared or distance, got '" + mode + "'");
    }
    s.embedding.input_size = s.size;
    s.embedding_epochs = static_cast<int>(c.integer("embedding.epochs"));
    s.embedding_lr = c.real("embedding.learning_rate");

    s.comparator.patch_radius = static_cast<int>(c.integer("matcher.patch_radius"));
    s.comparator.conv1 = static_cast<int>(c.integer("matcher.conv1"));
    s.comparator.conv2 = static_cast<int>(c.integer("matcher.conv2"));
    s.comparator.hidden = static_cast<int>(c.integer("matcher.hidden"));
    s.comparator.batch_size = static_cast<int>(c.integer("matcher.batch_size"));
    s.comparator.learning_rate = c.real("matcher.learning_rate");
    s.comparator.hard_negative_fraction = c.real("matcher.hard_negative_fraction");
    s.comparator.hard_negative_pool = static_cast<int>(c.integer("matcher.hard_negative_pool"));
    s.comparator.exclusion_radius = c.real("matcher.exclusion_radius");
    s.comparator_epochs = static_cast<int>(c.integer("matcher.epochs"));
    s.hc_only = c.flag("matcher.hc_only");
    s.dilation_radius = static_cast<int>(c.integer("matcher.dilation_radius"));
    s.full_image = c.flag("matcher.full_image");

    s.pck.alpha = c.real("eval.alpha");
    s.pck.inclusive = c.flag("eval.inclusive");
    s.alpha_grid = c.real_list("eval.alpha_grid");

    if (s.count < 0) throw UsageError("gen.count must be >= 0");
    if (s.classifier.epochs < 0 || s.embedding_epochs < 0 || s.comparator_epochs < 0) {
      throw UsageError("epoch counts must be >= 0");
    }
    if (s.classifier.batch_size < 1) throw UsageError("backbone.batch_size must be >= 1");
    s.warp.validate(s.size);
    s.backbone.layer_shapes();
    s.embedding.validate();
    s.comparator.validate();
    if (!(s.pck.alpha > 0)) throw UsageError("eval.alpha must be > 0");
    require_increasing(s.alpha_grid);
    return s;
  }
};

// Independent seed per stage or item, derived with splitmix64.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

enum SeedSalt : std::uint64_t { kSaltGen = 1, kSaltSplit, kSaltBackbone, kSaltEmbedding, kSaltComparator };

// ---------------------------------------------------------------------------
// In-memory stages.

inline std::vector<CorrespondencePair> generate_dataset(const Settings& s, int count, Logger log = {}) {
  if (count < 1) throw UsageError("pair count must be >= 1");
  if (s.classes.empty()) throw UsageError("gen.classes is empty");
  std::vector<CorrespondencePair> pairs;
  pairs.reserve(static_cast<std::size_t>(count));
  const std::uint64_t base = derive_seed(s.seed, kSaltGen);
  for (int i = 0; i < count; ++i) {
    const auto& cls = s.classes[static_cast<std::size_t>(i) % s.classes.size()];
    pairs.push_back(gen_pair(cls, s.warp, s.size, derive_seed(base, static_cast<std::uint64_t>(i)), s.gen));
    if (log && (i + 1) % 50 == 0) log("generated " + std::to_string(i + 1) + " pairs");
  }
  return pairs;
}

// Class names present in the data, sorted; their positions are the
// classifier's label ids.
inline std::vector<std::string> class_names(const std::vector<CorrespondencePair>& pairs) {
  std::set<std::string> names;
  for (const auto& p : pairs) names.insert(p.label);
  return {names.begin(), names.end()};
}

inline Backbone train_backbone_stage(const std::vector<CorrespondencePair>& pairs, const Settings& s,
                                     ClassifierTrainResult* metrics = nullptr) {
  const auto names = class_names(pairs);
  std::map<std::string, int> id;
  for (std::size_t i = 0; i < names.size(); ++i) id[names[i]] = static_cast<int>(i);
  std::vector<LabeledImage> data;
  for (const auto& p : pairs) {
    data.push_back({p.image_a, id[p.label]});
    data.push_back({p.image_b, id[p.label]});
  }
  auto opt = s.classifier;
  opt.seed = derive_seed(s.seed, kSaltBackbone);
  auto result = train_classifier(data, s.backbone, static_cast<int>(names.size()), opt);
  if (metrics) *metrics = result;
  return result.net;
}

inline Embedding train_embedding_stage(const std::vector<CorrespondencePair>& pairs, const Settings& s,
                                       EmbeddingTrainResult* metrics = nullptr, Logger log = {}) {
  std::vector<EmbeddingPair> data;
  for (const auto& p : pairs) {
    if (p.keypoints.empty()) continue;
    EmbeddingPair e{&p.image_a, &p.image_b, {}, {}, &p.mask_b};
    for (const auto& k : p.keypoints) {
      e.points_a.push_back(round_to_pixel(k.a));
      e.points_b.push_back(round_to_pixel(k.b));
    }
    data.push_back(std::move(e));
  }
  if (data.empty()) throw DataError("embedding training: no pair has keypoints");
  EmbeddingTrainOptions opt;
  opt.epochs = s.embedding_epochs;
  opt.learning_rate = s.embedding_lr;
  opt.dilation_radius = s.dilation_radius;
  opt.seed = derive_seed(s.seed, kSaltEmbedding);
  opt.warn = log;
  auto result = train_embedding(data, s.embedding, opt);
  if (metrics) *metrics = result;
  return result.net;
}

// Per-pixel descriptors: hypercolumns, optionally fused with the embedding.
// With standardisation on, the embedding channels are standardised as well,
// which equals standardising the whole concatenated field.
inline DescriptorField describe(const Tensor& image, const Backbone& backbone, const Embedding* embedding,
                                const HypercolumnOptions& hc_opt) {
  const auto hc = extract_hypercolumns(backbone.forward(image), image.dim(2), image.dim(3), hc_opt);
  if (!embedding) return hc;
  auto emb = embedding->embed(image);
  if (hc_opt.standardize) standardize_channels(emb);
  return fuse(hc, emb);
}

inline int dilation_radius_for(const Settings& s, const ObjectMask& m) {
  return s.dilation_radius >= 0 ? s.dilation_radius : default_dilation_radius(m.width, m.height);
}

// Descriptor fields of both images of every pair; stable addresses.
struct FieldCache {
  std::deque<DescriptorField> a, b;

  FieldCache(const std::vector<CorrespondencePair>& pairs, const Backbone& backbone, const Embedding* embedding,
             const HypercolumnOptions& opt) {
    for (const auto& p : pairs) {
      a.push_back(describe(p.image_a, backbone, embedding, opt));
      b.push_back(describe(p.image_b, backbone, embedding, opt));
    }
  }
};

inline std::vector<ComparatorPairData> comparator_data(const std::vector<CorrespondencePair>& pairs,
                                                       const FieldCache& fields, const Settings& s,
                                                       Logger log = {}) {
  std::vector<ComparatorPairData> out;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& p = pairs[i];
    if (p.keypoints.empty()) continue;
    if (p.mask_b.empty()) {
      if (log) log("pair " + std::to_string(i) + " has an empty target mask; skipped");
      continue;
    }
    ComparatorPairData d{&fields.a[i], &fields.b[i], {}, {}, candidate_set(p.mask_b, dilation_radius_for(s, p.mask_b))};
    for (const auto& k : p.keypoints) {
      d.queries.push_back(round_to_pixel(k.a));
      d.targets.push_back(round_to_pixel(k.b));
    }
    out.push_back(std::move(d));
  }
  return out;
}

inline Comparator train_comparator_stage(const std::vector<CorrespondencePair>& train_pairs,
                                         const std::vector<CorrespondencePair>& val_pairs, const Backbone& backbone,
                                         const Embedding* embedding, const Settings& s,
                                         ComparatorTrainResult* metrics = nullptr, Logger log = {}) {
  const FieldCache train_fields(train_pairs, backbone, embedding, s.hypercolumn);
  const FieldCache val_fields(val_pairs, backbone, embedding, s.hypercolumn);
  const auto train = comparator_data(train_pairs, train_fields, s, log);
  const auto val = comparator_data(val_pairs, val_fields, s, log);
  ComparatorTrainOptions opt;
  opt.epochs = s.comparator_epochs;
  opt.seed = derive_seed(s.seed, kSaltComparator);
  auto result = train_comparator(train, val, s.comparator, opt);
  if (metrics) *metrics = result;
  return result.net;
}

struct PairMatches {
  std::vector<MatchResult> results;  // one per keypoint, in keypoint order
  std::size_t candidates = 0;
  bool skipped = false;
};

inline PairMatches match_pair(const CorrespondencePair& p, const Backbone& backbone, const Embedding* embedding,
                              const Comparator& comparator, const Settings& s) {
  PairMatches out;
  if (!s.full_image && p.mask_b.empty()) {
    out.skipped = true;
    return out;
  }
  const int w = p.image_b.dim(3), h = p.image_b.dim(2);
  const CandidateSet candidates =
      s.full_image ? full_image_candidates(w, h) : candidate_set(p.mask_b, dilation_radius_for(s, p.mask_b));
  out.candidates = candidates.size();
  if (p.keypoints.empty()) return out;
  const auto field_a = describe(p.image_a, backbone, embedding, s.hypercolumn);
  const auto field_b = describe(p.image_b, backbone, embedding, s.hypercolumn);
  if (field_a.channels() != comparator.descriptor_channels()) {
    throw ShapeError("comparator expects " + std::to_string(comparator.descriptor_channels()) +
                     "-channel descriptors, the models produce " + std::to_string(field_a.channels()));
  }
  ComparatorScorer scorer(comparator, field_b);
  for (const auto& k : p.keypoints) {
    out.results.push_back(match_keypoint(round_to_pixel(k.a), field_a, scorer, candidates));
  }
  return out;
}

inline std::vector<KeypointOutcome> outcomes_for(const CorrespondencePair& p, const std::vector<MatchResult>& r) {
  std::vector<KeypointOutcome> out;
  for (std::size_t i = 0; i < r.size(); ++i) {
    out.push_back({to_point(r[i].matched), p.keypoints[i].b, p.image_b.dim(3), p.image_b.dim(2)});
  }
  return out;
}

// ---------------------------------------------------------------------------
// File-level commands.

namespace pipeline_detail {

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write " + path.string());
  os << text;
  if (!os) throw DataError("write failed for " + path.string());
}

inline std::filesystem::path prepare_dir(const std::string& out) {
  if (out.empty()) throw UsageError("--out is required");
  std::filesystem::path dir(out);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) throw DataError("cannot create output directory " + out);
  return dir;
}

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

inline void require_file(const std::string& path, const std::string& stage) {
  if (path.empty()) throw UsageError("the " + stage + " checkpoint is required (pass --" + stage + ")");
  if (!std::filesystem::is_regular_file(path)) {
    throw DataError("missing " + stage + " checkpoint: " + path);
  }
}

inline std::vector<CorrespondencePair> load_dataset(const std::string& manifest) {
  if (manifest.empty()) throw UsageError("--manifest is required");
  std::vector<CorrespondencePair> pairs;
  for (const auto& e : read_manifest(manifest)) pairs.push_back(load_pair(e));
  if (pairs.empty()) throw DataError("manifest " + manifest + " lists no pairs");
  return pairs;
}

inline std::string pair_stem(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "pair_%05zu", i);
  return buf;
}

}  // namespace pipeline_detail

// Writes pairs/ (six files per pair), manifest.txt listing every pair,
// train.txt / eval.txt holding the seeded split, and config_gen.txt.
inline void cmd_gen(const Config& config, const std::string& out, Logger log = {}) {
  using namespace pipeline_detail;
  const Settings s = Settings::from(config);
  if (s.count < 1) throw UsageError("gen.count must be >= 1");
  const auto pairs = generate_dataset(s, s.count, log);
  const auto dir = prepare_dir(out);
  std::filesystem::create_directories(dir / "pairs");
  std::vector<std::string> lines;
  for (std::size_t i = 0; i < pairs.size(); ++i) lines.push_back(write_pair(pairs[i], dir / "pairs", pair_stem(i), "pairs"));
  std::string manifest;
  for (const auto& l : lines) manifest += l + "\n";
  write_text(dir / "manifest.txt", manifest);
  if (lines.size() >= 2) {
    const auto [train, eval] = split(lines, s.train_fraction, derive_seed(s.seed, kSaltSplit));
    std::string t, e;
    for (const auto& l : train) t += l + "\n";
    for (const auto& l : eval) e += l + "\n";
    write_text(dir / "train.txt", t);
    write_text(dir / "eval.txt", e);
  }
  config.write_snapshot((dir / "config_gen.txt").string());
}

// Writes <stage>.ckpt, <stage>_metrics.csv (one row per epoch) and
// config_train_<stage>.txt; the comparator stage also writes
// comparator_batches.csv with the label mix of every batch.
struct TrainArgs {
  std::string stage;  // backbone | embedding | comparator
  std::string manifest;
  std::string val_manifest;  // optional, comparator validation accuracy
  std::string backbone;      // upstream checkpoints for the comparator
  std::string embedding;
  std::string out;
};

inline void cmd_train(const Config& config, const TrainArgs& a, Logger log = {}) {
  using namespace pipeline_detail;
  const Settings s = Settings::from(config);
  if (a.stage != "backbone" && a.stage != "embedding" && a.stage != "comparator") {
    throw UsageError("--stage must be backbone, embedding or comparator, got '" + a.stage + "'");
  }
  std::optional<Backbone> backbone;
  std::optional<Embedding> embedding;
  if (a.stage == "comparator") {
    require_file(a.backbone, "backbone");
    if (!s.hc_only) require_file(a.embedding, "embedding");
    backbone = Backbone::from_checkpoint(load_checkpoint(a.backbone));
    if (!s.hc_only) embedding = Embedding::from_checkpoint(load_checkpoint(a.embedding));
  }
  const auto pairs = load_dataset(a.manifest);
  std::vector<CorrespondencePair> val;
  if (!a.val_manifest.empty()) val = load_dataset(a.val_manifest);
  if (s.size != pairs.front().image_a.dim(3) || s.size != pairs.front().image_a.dim(2)) {
    throw DataError("images are " + std::to_string(pairs.front().image_a.dim(3)) + "x" +
                    std::to_string(pairs.front().image_a.dim(2)) + " but gen.size is " + std::to_string(s.size));
  }

  Checkpoint ck;
  std::string metrics, batches;
  if (a.stage == "backbone") {
    ClassifierTrainResult r;
    ck = train_backbone_stage(pairs, s, &r).to_checkpoint();
    std::string names;
    for (const auto& n : class_names(pairs)) names += (names.empty() ? "" : ",") + n;
    ck.meta["classes"] = names;
    metrics = "epoch,loss,accuracy\n";
    for (std::size_t e = 0; e < r.epoch_loss.size(); ++e) {
      metrics += std::to_string(e) + "," + fmt(r.epoch_loss[e]) + "," + fmt(r.epoch_accuracy[e]) + "\n";
    }
  } else if (a.stage == "embedding") {
    EmbeddingTrainResult r;
    ck = train_embedding_stage(pairs, s, &r, log).to_checkpoint();
    metrics = "epoch,loss\n";
    for (std::size_t e = 0; e < r.epoch_loss.size(); ++e) metrics += std::to_string(e) + "," + fmt(r.epoch_loss[e]) + "\n";
  } else {
    ComparatorTrainResult r;
    ck = train_comparator_stage(pairs, val, *backbone, embedding ? &*embedding : nullptr, s, &r, log).to_checkpoint();
    ck.meta["mode"] = s.hc_only ? "hc_only" : "fused";
    metrics = "epoch,loss,train_accuracy,val_accuracy\n";
    for (std::size_t e = 0; e < r.epoch_loss.size(); ++e) {
      metrics += std::to_string(e) + "," + fmt(r.epoch_loss[e]) + "," + fmt(r.train_accuracy[e]) + "," +
                 (r.val_accuracy.empty() || val.empty() ? std::string("nan") : fmt(r.val_accuracy[e])) + "\n";
    }
    batches = "batch,positives,negatives\n";
    for (std::size_t b = 0; b < r.batch_composition.size(); ++b) {
      batches += std::to_string(b) + "," + std::to_string(r.batch_composition[b].first) + "," +
                 std::to_string(r.batch_composition[b].second) + "\n";
    }
  }
  const auto dir = prepare_dir(a.out);
  save_checkpoint((dir / (a.stage + ".ckpt")).string(), ck);
  write_text(dir / (a.stage + "_metrics.csv"), metrics);
  if (!batches.empty()) write_text(dir / "comparator_batches.csv", batches);
  config.write_snapshot((dir / ("config_train_" + a.stage + ".txt")).string());
}

struct MatchArgs {
  std::string manifest;
  std::string backbone, embedding, comparator;
  std::string out;
};

// Writes matches/pair_NNNNN.csv (one record per keypoint) and
// match_index.csv: pair,records,class,keypoints,candidates.
inline void cmd_match(const Config& config, const MatchArgs& a, Logger log = {}) {
  using namespace pipeline_detail;
  const Settings s = Settings::from(config);
  require_file(a.backbone, "backbone");
  require_file(a.comparator, "comparator");
  const auto comparator_ck = load_checkpoint(a.comparator);
  const bool fused = comparator_ck.meta.count("mode") == 0 || comparator_ck.meta.at("mode") == "fused";
  if (fused) require_file(a.embedding, "embedding");
  const auto backbone = Backbone::from_checkpoint(load_checkpoint(a.backbone));
  std::optional<Embedding> embedding;
  if (fused) embedding = Embedding::from_checkpoint(load_checkpoint(a.embedding));
  const auto comparator = Comparator::from_checkpoint(comparator_ck);
  const auto pairs = load_dataset(a.manifest);

  std::vector<std::pair<std::size_t, PairMatches>> done;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    auto m = match_pair(pairs[i], backbone, embedding ? &*embedding : nullptr, comparator, s);
    if (m.skipped) {
      if (log) log("pair " + std::to_string(i) + " has an empty target mask; skipped");
      continue;
    }
    done.emplace_back(i, std::move(m));
  }
  const auto dir = prepare_dir(a.out);
  std::filesystem::create_directories(dir / "matches");
  std::string index = "pair,records,class,keypoints,candidates\n";
  for (const auto& [i, m] : done) {
    std::string body;
    for (const auto& r : m.results) body += format_match_record(r) + "\n";
    const std::string name = "matches/" + pair_stem(i) + ".csv";
    write_text(dir / name, body);
    index += std::to_string(i) + "," + name + "," + pairs[i].label + "," + std::to_string(m.results.size()) + "," +
             std::to_string(m.candidates) + "\n";
  }
  write_text(dir / "match_index.csv", index);
  config.write_snapshot((dir / "config_match.txt").string());
}

struct EvalArgs {
  std::string matches;  // directory written by cmd_match
  std::string manifest;
  std::string label = "matches";  // row label of the text table
  std::string out;
};

inline PckReport evaluate_matches(const Settings& s, const EvalArgs& a, Logger log = {}) {
  using namespace pipeline_detail;
  if (a.matches.empty()) throw UsageError("--matches is required");
  const auto pairs = load_dataset(a.manifest);
  const std::filesystem::path mdir(a.matches);
  std::ifstream is(mdir / "match_index.csv");
  if (!is) throw DataError("no match_index.csv in " + a.matches);
  std::string line;
  std::getline(is, line);  // header
  std::map<std::string, ClassResults> by_class;
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string item;
    while (std::getline(ss, item, ',')) f.push_back(item);
    if (f.size() != 5) throw DataError("match_index.csv:" + std::to_string(lineno) + ": expected 5 fields");
    std::size_t idx = 0;
    try {
      idx = static_cast<std::size_t>(std::stoull(f[0]));
    } catch (const std::exception&) {
      throw DataError("match_index.csv:" + std::to_string(lineno) + ": bad pair index '" + f[0] + "'");
    }
    if (idx >= pairs.size()) {
      throw DataError("match_index.csv:" + std::to_string(lineno) + ": pair " + f[0] + " is not in manifest " +
                      a.manifest);
    }
    const auto& p = pairs[idx];
    std::ifstream rs(mdir / f[1]);
    if (!rs) throw DataError("missing match records " + (mdir / f[1]).string());
    std::vector<MatchResult> records;
    std::string rl;
    while (std::getline(rs, rl)) {
      if (!rl.empty()) records.push_back(parse_match_record(rl));
    }
    if (records.size() != p.keypoints.size()) {
      throw DataError(f[1] + ": " + std::to_string(records.size()) + " records for pair " + f[0] + " with " +
                      std::to_string(p.keypoints.size()) + " keypoints");
    }
    for (std::size_t k = 0; k < records.size(); ++k) {
      const Pixel q = round_to_pixel(p.keypoints[k].a);
      if (records[k].query.x != q.x || records[k].query.y != q.y) {
        throw DataError(f[1] + ": record " + std::to_string(k) + " queries (" + std::to_string(records[k].query.x) +
                        "," + std::to_string(records[k].query.y) + "), not keypoint " +
                        std::to_string(p.keypoints[k].id) + " of pair " + f[0]);
      }
    }
    auto& cls = by_class[p.label];
    cls.name = p.label;
    const auto o = outcomes_for(p, records);
    cls.outcomes.insert(cls.outcomes.end(), o.begin(), o.end());
  }
  std::vector<ClassResults> results;
  for (auto& [name, r] : by_class) results.push_back(std::move(r));
  if (results.empty()) throw DataError("no match records in " + a.matches);
  return class_report(results, s.pck, s.alpha_grid, log);
}

// Writes report.json, report.txt (class table with a mean column) and
// curve.csv (one row per alpha in eval.alpha_grid).
inline PckReport cmd_eval(const Config& config, const EvalArgs& a, Logger log = {}) {
  using namespace pipeline_detail;
  const Settings s = Settings::from(config);
  const auto report = evaluate_matches(s, a, log);
  const auto dir = prepare_dir(a.out);
  write_text(dir / "report.json", to_json(report).dump(2) + "\n");
  write_text(dir / "report.txt", format_report_table(report, a.label));
  write_text(dir / "curve.csv", format_curve_csv(report));
  config.write_snapshot((dir / "config_eval.txt").string());
  return report;
}

}  // namespace semcorr
