#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "iaa/errors.hpp"
#include "iaa/experiments.hpp"

namespace {

struct CliFlags {
  std::string config_path;
  std::string seed, out, alpha, eps, iters, victim;
  std::string clips, frame_size, clip_length, max_speed, workers;
};

void add_shared_flags(CLI::App* cmd, CliFlags& flags) {
  cmd->add_option("--config", flags.config_path, "config file (key = value lines)");
  cmd->add_option("--seed", flags.seed, "master RNG seed");
  cmd->add_option("--out", flags.out, "output directory");
  cmd->add_option("--alpha", flags.alpha, "comma-separated perturbation bounds");
  cmd->add_option("--eps", flags.eps, "comma-separated step sizes, paired with --alpha");
  cmd->add_option("--iters", flags.iters, "iteration budget T");
  cmd->add_option("--victim", flags.victim, "blend | warp | kernelnet");
  cmd->add_option("--clips", flags.clips, "number of evaluation clips");
  cmd->add_option("--frame-size", flags.frame_size, "frame height/width in pixels");
  cmd->add_option("--clip-length", flags.clip_length, "rendered frames per clip (odd)");
  cmd->add_option("--max-speed", flags.max_speed, "max primitive speed, px/frame");
  cmd->add_option("--workers", flags.workers, "worker threads (IAA_WORKERS also bounds this)");
}

iaa::ExperimentConfig build_config(const CliFlags& flags) {
  iaa::ConfigDoc doc;
  if (!flags.config_path.empty()) doc = iaa::ConfigDoc::load(flags.config_path);
  // flags override config keys
  if (!flags.seed.empty()) doc.set("seed", flags.seed);
  if (!flags.out.empty()) doc.set("out", flags.out);
  if (!flags.alpha.empty()) doc.set("attack.alpha", flags.alpha);
  if (!flags.eps.empty()) doc.set("attack.eps", flags.eps);
  if (!flags.iters.empty()) doc.set("attack.iters", flags.iters);
  if (!flags.victim.empty()) doc.set("victim", flags.victim);
  if (!flags.clips.empty()) doc.set("data.clips", flags.clips);
  if (!flags.frame_size.empty()) doc.set("data.frame_size", flags.frame_size);
  if (!flags.clip_length.empty()) doc.set("data.clip_length", flags.clip_length);
  if (!flags.max_speed.empty()) doc.set("data.max_speed", flags.max_speed);
  if (!flags.workers.empty()) doc.set("workers", flags.workers);
  return iaa::ExperimentConfig::from(doc);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"adversarial attacks on toy video frame interpolation models"};
  app.require_subcommand(1);

  CliFlags flags;
  auto* cmd_train = app.add_subcommand("train", "train the kernel-net and classifier victims");
  auto* cmd_sweep = app.add_subcommand("sweep", "PSNR/SSIM degradation vs alpha");
  auto* cmd_ablation = app.add_subcommand("ablation", "IAA vs random-initialized PGD");
  auto* cmd_targeted = app.add_subcommand("targeted", "white-target attack comparison");
  auto* cmd_transfer = app.add_subcommand("transfer", "cross-model transfer matrix");
  auto* cmd_recognition = app.add_subcommand("recognition", "attack on the toy classifier");
  for (auto* cmd : {cmd_train, cmd_sweep, cmd_ablation, cmd_targeted, cmd_transfer,
                    cmd_recognition}) {
    add_shared_flags(cmd, flags);
  }

  CLI11_PARSE(app, argc, argv);

  try {
    const iaa::ExperimentConfig cfg = build_config(flags);
    std::vector<std::filesystem::path> written;
    if (cmd_train->parsed()) written = iaa::run_train(cfg);
    if (cmd_sweep->parsed()) written = iaa::run_attack_sweep(cfg);
    if (cmd_ablation->parsed()) written = iaa::run_ablation(cfg);
    if (cmd_targeted->parsed()) written = iaa::run_targeted(cfg);
    if (cmd_transfer->parsed()) written = iaa::run_transfer(cfg);
    if (cmd_recognition->parsed()) written = iaa::run_recognition(cfg);
    for (const auto& path : written) std::cout << "wrote " << path.string() << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
  return 0;
}
