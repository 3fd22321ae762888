// semcorr: generate data, train, match and evaluate from the command line.
//
//   semcorr gen   --out data [--count N] [--size S]
//   semcorr train --stage backbone|embedding|comparator --manifest M --out models
//   semcorr match --manifest M --backbone B [--embedding E] --comparator C --out run
//   semcorr eval  --matches run --manifest M --out run
//
// Exit codes: 0 ok, 2 usage, 3 data, 4 numeric.

#include <CLI11.hpp>

#include <iostream>
#include <string>
#include <vector>

#include "semcorr/semcorr.hpp"

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

void log_line(std::string_view msg) { std::cerr << "semcorr: " << msg << '\n'; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dense keypoint correspondence: data, training, matching, PCK evaluation"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_help_all_flag("--help-all");

  std::string config_path, out;
  std::vector<std::string> overrides;
  std::optional<long long> seed;
  std::optional<int> threads;
  app.add_option("--config", config_path, "key=value config file")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "run seed (run.seed)");
  app.add_option("--out", out, "output directory");
  app.add_option("--threads", threads, "worker threads (run.threads)");
  app.add_option("--set", overrides, "config override key=value (repeatable)");

  auto* gen = app.add_subcommand("gen", "generate synthetic correspondence pairs");
  std::optional<int> count, size;
  gen->add_option("--count", count, "number of pairs (gen.count)");
  gen->add_option("--size", size, "image side in pixels (gen.size)");

  auto* train = app.add_subcommand("train", "train one network stage");
  semcorr::TrainArgs targs;
  bool hc_only = false;
  std::optional<int> epochs;
  train->add_option("--stage", targs.stage, "backbone | embedding | comparator")
      ->required()
      ->check(CLI::IsMember({"backbone", "embedding", "comparator"}));
  train->add_option("--manifest", targs.manifest, "training pairs")->required();
  train->add_option("--val-manifest", targs.val_manifest, "validation pairs (comparator accuracy curve)");
  train->add_option("--backbone", targs.backbone, "backbone checkpoint (comparator stage)");
  train->add_option("--embedding", targs.embedding, "embedding checkpoint (comparator stage, fused mode)");
  train->add_flag("--hc-only", hc_only, "comparator on hypercolumns alone (matcher.hc_only)");
  train->add_option("--epochs", epochs, "epoch count of the selected stage");

  auto* match = app.add_subcommand("match", "match every keypoint of every pair");
  semcorr::MatchArgs margs;
  bool full_image = false;
  std::optional<int> radius;
  match->add_option("--manifest", margs.manifest, "pairs to match")->required();
  match->add_option("--backbone", margs.backbone, "backbone checkpoint")->required();
  match->add_option("--embedding", margs.embedding, "embedding checkpoint (fused comparators)");
  match->add_option("--comparator", margs.comparator, "comparator checkpoint")->required();
  match->add_option("--dilation-radius", radius, "mask dilation radius; < 0 picks 5% of the image side");
  match->add_flag("--full-image", full_image, "search every pixel instead of the dilated mask");

  auto* eval = app.add_subcommand("eval", "PCK report and alpha curve from match records");
  semcorr::EvalArgs eargs;
  std::optional<double> alpha;
  eval->add_option("--matches", eargs.matches, "directory written by `match`")->required();
  eval->add_option("--manifest", eargs.manifest, "the manifest the matches were made on")->required();
  eval->add_option("--alpha", alpha, "PCK alpha (eval.alpha)");
  eval->add_option("--label", eargs.label, "row label of the report table");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    semcorr::Config config;
    if (!config_path.empty()) config.load_file(config_path);
    for (const auto& o : overrides) config.assign(o);
    if (seed) config.set("run.seed", std::to_string(*seed));
    if (threads) config.set("run.threads", std::to_string(*threads));
    if (count) config.set("gen.count", std::to_string(*count));
    if (size) config.set("gen.size", std::to_string(*size));
    if (hc_only) config.set("matcher.hc_only", "true");
    if (full_image) config.set("matcher.full_image", "true");
    if (radius) config.set("matcher.dilation_radius", std::to_string(*radius));
    if (alpha) config.set("eval.alpha", std::to_string(*alpha));
    if (epochs) config.set(targs.stage == "comparator" ? "matcher.epochs" : targs.stage + ".epochs", std::to_string(*epochs));
    semcorr::set_threads(semcorr::Settings::from(config).threads);

    if (*gen) {
      semcorr::cmd_gen(config, out, log_line);
    } else if (*train) {
      targs.out = out;
      semcorr::cmd_train(config, targs, log_line);
    } else if (*match) {
      margs.out = out;
      semcorr::cmd_match(config, margs, log_line);
    } else if (*eval) {
      eargs.out = out;
      const auto report = semcorr::cmd_eval(config, eargs, log_line);
      std::cout << semcorr::format_report_table(report, eargs.label);
    }
  } catch (const semcorr::UsageError& e) {
    log_line(e.what());
    return kExitUsage;
  } catch (const semcorr::NumericError& e) {
    log_line(e.what());
    return kExitNumeric;
  } catch (const semcorr::Error& e) {
    log_line(e.what());
    return kExitData;
  } catch (const std::filesystem::filesystem_error& e) {
    log_line(e.what());
    return kExitData;
  }
  return 0;
}
