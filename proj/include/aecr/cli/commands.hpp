#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "aecr/contrast/extractor.hpp"
#include "aecr/data/dataset.hpp"
#include "aecr/data/padding.hpp"
#include "aecr/eval/metrics.hpp"
#include "aecr/network/dehaze_network.hpp"
#include "aecr/train/config.hpp"
#include "aecr/train/trainer.hpp"

namespace aecr::cli {

namespace fs = std::filesystem;
using nlohmann::json;

enum ExitCode : int { kOk = 0, kFailure = 1, kBadInput = 2, kTrainingAbort = 3 };

inline json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string(), "config");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("invalid JSON: ") + e.what(), "config");
  }
}

/// Applies the AECR_SEED environment override, if set.
inline void apply_seed_override(train::RunConfig& rc) {
  const char* env = std::getenv("AECR_SEED");
  if (!env || !*env) return;
  try {
    std::size_t used = 0;
    const auto seed = std::stoull(env, &used);
    if (used != std::string(env).size()) throw std::invalid_argument(env);
    rc.train.seed = seed;
  } catch (const std::exception&) {
    throw ConfigError("AECR_SEED must be an unsigned integer", "AECR_SEED");
  }
}

inline contrast::FeatureExtractor<float> build_extractor(const train::RunConfig& rc) {
  if (rc.extractor.random_seed) {
    return contrast::make_random_extractor<float>(*rc.extractor.random_seed, rc.train.loss.taps);
  }
  if (rc.extractor.pretrained.empty()) {
    throw ConfigError("extractor weights are required", "extractor");
  }
  return contrast::load_pretrained_extractor<float>(rc.extractor.pretrained, rc.train.loss.taps);
}

struct TrainArgs {
  std::string config;
  std::string resume;
  std::string out;
};

inline int cmd_train(const TrainArgs& args, std::ostream& err) {
  std::optional<train::Checkpoint> resume;
  if (!args.resume.empty()) resume = train::load_checkpoint(args.resume);

  train::RunConfig rc;
  if (!args.config.empty()) {
    rc = train::run_config_from_json(read_json_file(args.config));
  } else if (resume && resume->metadata.contains("config")) {
    rc = train::run_config_from_json(resume->metadata["config"]);
  } else {
    throw ConfigError("--config is required unless resuming", "config");
  }
  apply_seed_override(rc);
  if (resume && resume->metadata.value("complete", false)) {
    err << "already complete: " << args.resume << "\n";
    return kOk;
  }

  const auto extractor = build_extractor(rc);
  const auto dataset = data::load_paired_dataset<float>(rc.data.train_hazy, rc.data.train_clear);
  train::Trainer<float> trainer(rc.train, dataset, extractor);
  if (resume) {
    trainer.resume(*resume);
    if (trainer.complete()) {
      err << "already complete: " << args.resume << "\n";
      return kOk;
    }
  }
  train::TrainOptions opt;
  opt.out_dir = args.out;
  opt.run_config = train::to_json(rc);
  opt.log = &err;
  const auto result = trainer.run(opt);
  err << "wrote " << (fs::path(args.out) / (result.complete ? "final.aecr" : "last.aecr")).string() << "\n";
  return kOk;
}

/// Network described by a checkpoint's embedded config, with its weights.
inline network::DehazeNetwork<float> network_from_checkpoint(const train::Checkpoint& ckpt) {
  const auto& meta = ckpt.metadata;
  if (!meta.contains("config") || !meta["config"].is_object() || !meta["config"].contains("network")) {
    throw FormatError("checkpoint has no embedded network config");
  }
  network::NetworkConfig cfg;
  try {
    cfg = train::network_from_json(meta["config"]["network"]);
  } catch (const ConfigError& e) {
    throw FormatError(std::string("checkpoint network config is invalid: ") + e.what());
  }
  network::DehazeNetwork<float> net(cfg);
  train::load_params(ckpt, net);
  return net;
}

/// Restores one image of any size (reflect-padded to a multiple of 4, then
/// cropped back).
inline Tensor<float> restore_image(const network::DehazeNetwork<float>& net, const Tensor<float>& hazy) {
  const auto padded = data::reflect_pad_to_multiple(hazy, 4);
  return data::crop_top_left(net.infer(padded), hazy.h(), hazy.w());
}

inline int cmd_infer(const std::string& checkpoint, const std::string& input, const std::string& output,
                     std::ostream& err) {
  const auto net = network_from_checkpoint(train::load_checkpoint(checkpoint));
  std::vector<fs::path> files;
  if (fs::is_directory(input)) {
    files = data::list_images(input);
  } else if (fs::is_regular_file(input)) {
    files.push_back(input);
  } else {
    throw InputError("no such input: " + input);
  }
  fs::create_directories(output);
  for (const auto& f : files) {
    const auto restored = restore_image(net, data::read_image<float>(f));
    const auto dest = fs::path(output) / (f.stem().string() + ".png");
    data::write_image(dest, restored);
    err << f.filename().string() << " -> " << dest.string() << "\n";
  }
  return kOk;
}

inline int cmd_eval(const std::string& pred, const std::string& gt, const std::string& report_path,
                    std::ostream& out) {
  const auto report = eval::evaluate_dirs(pred, gt);
  eval::write_report(report, report_path);
  out << std::fixed << std::setprecision(4) << "mean_psnr " << report.mean_psnr << "\nmean_ssim "
      << report.mean_ssim << "\n";
  return kOk;
}

inline int cmd_params(const std::string& config, std::ostream& out) {
  const auto rc = train::run_config_from_json(read_json_file(config));
  const auto parts = network::parameter_breakdown(rc.train.network);
  std::size_t total = 0;
  for (const auto& [name, n] : parts) {
    out << std::left << std::setw(8) << name << " " << n << "\n";
    total += n;
  }
  out << std::left << std::setw(8) << "total" << " " << total << "\n";
  return kOk;
}

inline int cmd_synth(const std::string& clear, const std::string& out_dir, std::uint64_t seed,
                     int field_nodes, std::ostream& err) {
  data::SynthOptions opt;
  opt.seed = seed;
  opt.field_nodes = field_nodes;
  const auto doc = data::synthesize_directory(clear, out_dir, opt);
  err << "synthesized " << doc["images"].size() << " pairs into " << out_dir << "\n";
  return kOk;
}

inline void print_error(std::ostream& err, const std::string& kind, const std::string& message,
                        const std::string& field = {}) {
  json j{{"error", kind}, {"message", message}};
  if (!field.empty()) j["field"] = field;
  err << j.dump() << "\n";
}

/// Entry point of the `aecr` tool. Errors are reported as one JSON line on
/// `err`; exit code 2 for bad configs, inputs or files, 3 for a training abort.
inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout,
                   std::ostream& err = std::cerr) {
  CLI::App app{"Single-image dehazing toolkit", "aecr"};
  app.require_subcommand(1);

  TrainArgs targs;
  auto* train = app.add_subcommand("train", "train a network from a JSON config");
  train->add_option("--config", targs.config, "run config (JSON)");
  train->add_option("--resume", targs.resume, "checkpoint to continue from");
  train->add_option("--out", targs.out, "output directory")->required();

  std::string ckpt, input, output;
  auto* infer = app.add_subcommand("infer", "restore hazy images");
  infer->add_option("--checkpoint", ckpt)->required();
  infer->add_option("--input", input, "image file or directory")->required();
  infer->add_option("--output", output, "output directory")->required();

  std::string pred, gt, report;
  auto* evalc = app.add_subcommand("eval", "PSNR/SSIM of predictions against ground truth");
  evalc->add_option("--pred", pred)->required();
  evalc->add_option("--gt", gt)->required();
  evalc->add_option("--report", report, "JSON report path")->required();

  std::string pconfig;
  auto* params = app.add_subcommand("params", "print learnable-parameter counts");
  params->add_option("--config", pconfig)->required();

  std::string sclear, sout;
  std::uint64_t sseed = 0;
  int nodes = 0;
  auto* synth = app.add_subcommand("synth", "synthesize hazy/clear pairs from clear images");
  synth->add_option("--clear", sclear)->required();
  synth->add_option("--out", sout)->required();
  synth->add_option("--seed", sseed)->required();
  synth->add_option("--field-nodes", nodes, "transmission lattice size (0 = scalar t)")
      ->check(CLI::NonNegativeNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    print_error(err, "usage", e.what());
    return kBadInput;
  }

  try {
    if (*train) return cmd_train(targs, err);
    if (*infer) return cmd_infer(ckpt, input, output, err);
    if (*evalc) return cmd_eval(pred, gt, report, out);
    if (*params) return cmd_params(pconfig, out);
    if (*synth) return cmd_synth(sclear, sout, sseed, nodes, err);
  } catch (const ConfigError& e) {
    print_error(err, "config", e.what(), e.field());
    return kBadInput;
  } catch (const FormatError& e) {
    print_error(err, "format", e.what());
    return kBadInput;
  } catch (const InputError& e) {
    print_error(err, "input", e.what());
    return kBadInput;
  } catch (const TrainingError& e) {
    print_error(err, "training", e.what());
    return kTrainingAbort;
  } catch (const std::exception& e) {
    print_error(err, "internal", e.what());
    return kFailure;
  }
  return kFailure;
}

}  // namespace aecr::cli
