#include "iaa/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

#include "iaa/io.hpp"
#include "iaa/metrics.hpp"
#include "iaa/parallel.hpp"
#include "iaa/rng.hpp"

namespace iaa {

namespace {

// dataset sub-stream tags, one per data family
constexpr std::uint64_t kTagTrainClips = 11;
constexpr std::uint64_t kTagHeldoutClips = 12;
constexpr std::uint64_t kTagClsTrain = 21;
constexpr std::uint64_t kTagClsHeldout = 22;
constexpr std::uint64_t kTagEvalClips = 31;
constexpr std::uint64_t kTagRecEval = 41;
constexpr std::uint64_t kTagRandomInit = 77;

struct Aggregate {
  double mean = 0.0;
  double stddev = 0.0;
};

Aggregate aggregate(const std::vector<double>& values) {
  Aggregate a;
  if (values.empty()) return a;
  for (double v : values) a.mean += v;
  a.mean /= static_cast<double>(values.size());
  double acc = 0.0;
  for (double v : values) acc += (v - a.mean) * (v - a.mean);
  a.stddev = std::sqrt(acc / static_cast<double>(values.size()));
  return a;
}

std::string method_label(const std::string& base, std::size_t iters) {
  return base + "(T=" + std::to_string(iters) + ")";
}

}  // namespace

ExperimentConfig ExperimentConfig::from(const ConfigDoc& doc) {
  ExperimentConfig cfg;
  cfg.victim = doc.get("victim", cfg.victim);
  cfg.seed = doc.get_u64("seed", cfg.seed);
  cfg.out_dir = doc.get("out", cfg.out_dir.string());
  cfg.workers = doc.get_size("workers", cfg.workers);

  cfg.clips = doc.get_size("data.clips", cfg.clips);
  cfg.channels = doc.get_size("data.channels", cfg.channels);
  cfg.frame_size = doc.get_size("data.frame_size", cfg.frame_size);
  cfg.clip_length = doc.get_size("data.clip_length", cfg.clip_length);
  cfg.max_speed = doc.get_double("data.max_speed", cfg.max_speed);

  cfg.alphas = doc.get_list("attack.alpha", cfg.alphas);
  cfg.epss = doc.get_list("attack.eps", cfg.epss);
  cfg.iters = doc.get_size("attack.iters", cfg.iters);

  cfg.train_clips = doc.get_size("train.clips", cfg.train_clips);
  cfg.train_clip_length = doc.get_size("train.clip_length", cfg.train_clip_length);
  cfg.train_epochs = doc.get_size("train.epochs", cfg.train_epochs);
  cfg.train_lr = doc.get_double("train.lr", cfg.train_lr);
  cfg.heldout_clips = doc.get_size("train.heldout_clips", cfg.heldout_clips);
  cfg.cls_groups_per_class = doc.get_size("train.cls_groups_per_class", cfg.cls_groups_per_class);
  cfg.cls_epochs = doc.get_size("train.cls_epochs", cfg.cls_epochs);
  cfg.cls_lr = doc.get_double("train.cls_lr", cfg.cls_lr);
  cfg.cls_features = doc.get_size("train.cls_features", cfg.cls_features);
  cfg.kn_features = doc.get_size("train.kn_features", cfg.kn_features);

  cfg.ablation_alpha = doc.get_double("ablation.alpha", cfg.ablation_alpha);
  cfg.ablation_iters = doc.get_size("ablation.iters", cfg.ablation_iters);
  cfg.targeted_alpha = doc.get_double("targeted.alpha", cfg.targeted_alpha);
  cfg.transfer_alpha = doc.get_double("transfer.alpha", cfg.transfer_alpha);
  cfg.rec_groups_per_class = doc.get_size("recognition.groups_per_class", cfg.rec_groups_per_class);
  cfg.rec_frames_per_group = doc.get_size("recognition.frames_per_group", cfg.rec_frames_per_group);
  cfg.rec_groups_per_video = doc.get_size("recognition.groups_per_video", cfg.rec_groups_per_video);

  if (cfg.clip_length < 3 || cfg.clip_length % 2 == 0) {
    throw ContractError("config: data.clip_length must be odd and >= 3");
  }
  if (cfg.alphas.empty()) throw ContractError("config: attack.alpha must not be empty");
  for (double a : cfg.alphas) {
    if (a < 0.0 || a > 1.0) throw ContractError("config: alpha outside [0,1]");
  }
  return cfg;
}

double ExperimentConfig::eps_for_alpha(double alpha) const {
  for (std::size_t i = 0; i < alphas.size() && i < epss.size(); ++i) {
    if (alphas[i] == alpha) return std::min(epss[i], alpha);
  }
  return alpha / 20.0;  // default pairing ratio
}

namespace {

std::vector<std::vector<FrameTriplet>> eval_clips(const ExperimentConfig& cfg) {
  const auto clips = generate_clips(cfg.clips, cfg.channels, cfg.frame_size, cfg.frame_size,
                                    cfg.max_speed, cfg.clip_length, mix_seed(cfg.seed, kTagEvalClips));
  std::vector<std::vector<FrameTriplet>> out;
  out.reserve(clips.size());
  for (const auto& clip : clips) out.push_back(extract_triplets(clip));
  return out;
}

enum class Method { BasicT, Basic2T, Iaa };

ClipAttackResult run_method(Method method, const InterpolationModel& model,
                            const std::vector<FrameTriplet>& clip, double alpha, double eps,
                            std::size_t T, AttackMode mode, const AttackHooks* hooks,
                            std::uint64_t /*seed*/) {
  AttackConfig cfg;
  cfg.alpha = alpha;
  cfg.eps = eps;
  cfg.mode = mode;
  switch (method) {
    case Method::BasicT:
      cfg.iterations = T;
      return basic_attack_clip(model, clip, cfg, hooks);
    case Method::Basic2T:
      cfg.iterations = 2 * T;
      return basic_attack_clip(model, clip, cfg, hooks);
    case Method::Iaa:
      cfg.iterations = T;
      return iaa_attack(model, clip, cfg, hooks);
  }
  throw ContractError("unknown method");
}

struct MethodSpec {
  Method method;
  std::string label;
  std::size_t iterations;  // T handed to the engine
};

std::vector<MethodSpec> sweep_methods(std::size_t T) {
  return {{Method::BasicT, method_label("BA", T), T},
          {Method::Basic2T, method_label("BA", 2 * T), T},
          {Method::Iaa, "IAA", T}};
}

}  // namespace

// ---- train ----

std::vector<std::filesystem::path> run_train(const ExperimentConfig& cfg) {
  namespace fs = std::filesystem;
  fs::create_directories(cfg.checkpoint_dir());
  std::vector<fs::path> written;

  // kernel-net on synthetic triplets
  {
    const auto train_clips =
        generate_clips(cfg.train_clips, cfg.channels, cfg.frame_size, cfg.frame_size,
                       cfg.max_speed, cfg.train_clip_length, mix_seed(cfg.seed, kTagTrainClips));
    std::vector<FrameTriplet> train_set;
    for (const auto& clip : train_clips) {
      auto triplets = extract_triplets(clip);
      train_set.insert(train_set.end(), triplets.begin(), triplets.end());
    }
    const KernelNetModel init =
        KernelNetModel::random_init(cfg.channels, cfg.kn_features, mix_seed(cfg.seed, 1));
    TrainLog log;
    Checkpoint ckpt = train(init, train_set, cfg.train_epochs, cfg.train_lr,
                            mix_seed(cfg.seed, 2), &log);
    const fs::path ckpt_path = cfg.checkpoint_dir() / "kernelnet.ckpt";
    save_checkpoint(ckpt_path, ckpt);
    written.push_back(ckpt_path);

    // held-out clean interpolation quality
    const KernelNetModel model = KernelNetModel::from_checkpoint(ckpt);
    const auto heldout =
        generate_clips(cfg.heldout_clips, cfg.channels, cfg.frame_size, cfg.frame_size,
                       cfg.max_speed, cfg.clip_length, mix_seed(cfg.seed, kTagHeldoutClips));
    std::vector<double> psnrs;
    for (const auto& clip : heldout) {
      for (const auto& t : extract_triplets(clip)) {
        psnrs.push_back(psnr(model.interpolate_clamped(t.prev, t.next), t.gt));
      }
    }
    const Aggregate held = aggregate(psnrs);

    CsvWriter epochs_csv({"epoch", "mean_loss"});
    for (std::size_t e = 0; e < log.epoch_mean_loss.size(); ++e) {
      epochs_csv.row_values({static_cast<double>(e + 1), log.epoch_mean_loss[e]});
    }
    const fs::path epochs_path = cfg.out_dir / "train_kernelnet.csv";
    epochs_csv.save(epochs_path);
    written.push_back(epochs_path);

    CsvWriter summary({"model", "epochs", "learning_rate", "seed", "initial_loss", "final_loss",
                       "heldout_psnr_mean", "heldout_psnr_std", "heldout_triplets"});
    summary.row({"kernelnet", std::to_string(cfg.train_epochs), format_double(cfg.train_lr),
                 std::to_string(mix_seed(cfg.seed, 2)), format_double(log.initial_loss),
                 format_double(log.final_loss), format_double(held.mean),
                 format_double(held.stddev), std::to_string(psnrs.size())});
    const fs::path summary_path = cfg.out_dir / "train_kernelnet_summary.csv";
    summary.save(summary_path);
    written.push_back(summary_path);
    std::cout << "trained kernelnet: final_loss=" << format_double(log.final_loss)
              << " heldout_psnr=" << format_double(held.mean) << "\n";
  }

  // classifier on labeled motion groups
  {
    const auto train_set =
        generate_labeled_groups(kMotionClassCount, cfg.cls_groups_per_class,
                                cfg.rec_frames_per_group, mix_seed(cfg.seed, kTagClsTrain),
                                cfg.rec_groups_per_video);
    const ToyClassifier init = ToyClassifier::random_init(
        cfg.rec_frames_per_group, 1, cfg.cls_features, kMotionClassCount, mix_seed(cfg.seed, 3));
    TrainLog log;
    Checkpoint ckpt =
        train(init, train_set, cfg.cls_epochs, cfg.cls_lr, mix_seed(cfg.seed, 4), &log);
    const fs::path ckpt_path = cfg.checkpoint_dir() / "classifier.ckpt";
    save_checkpoint(ckpt_path, ckpt);
    written.push_back(ckpt_path);

    const ToyClassifier model = ToyClassifier::from_checkpoint(ckpt);
    const auto heldout =
        generate_labeled_groups(kMotionClassCount, 50, cfg.rec_frames_per_group,
                                mix_seed(cfg.seed, kTagClsHeldout), cfg.rec_groups_per_video);
    std::size_t correct = 0;
    for (const auto& s : heldout) {
      if (model.predict(s.group) == s.label) ++correct;
    }
    const double accuracy = static_cast<double>(correct) / static_cast<double>(heldout.size());

    CsvWriter epochs_csv({"epoch", "mean_loss"});
    for (std::size_t e = 0; e < log.epoch_mean_loss.size(); ++e) {
      epochs_csv.row_values({static_cast<double>(e + 1), log.epoch_mean_loss[e]});
    }
    const fs::path epochs_path = cfg.out_dir / "train_classifier.csv";
    epochs_csv.save(epochs_path);
    written.push_back(epochs_path);

    CsvWriter summary({"model", "epochs", "learning_rate", "seed", "initial_loss", "final_loss",
                       "heldout_accuracy", "heldout_groups"});
    summary.row({"classifier", std::to_string(cfg.cls_epochs), format_double(cfg.cls_lr),
                 std::to_string(mix_seed(cfg.seed, 4)), format_double(log.initial_loss),
                 format_double(log.final_loss), format_double(accuracy),
                 std::to_string(heldout.size())});
    const fs::path summary_path = cfg.out_dir / "train_classifier_summary.csv";
    summary.save(summary_path);
    written.push_back(summary_path);
    std::cout << "trained classifier: final_loss=" << format_double(log.final_loss)
              << " heldout_accuracy=" << format_double(accuracy) << "\n";
  }
  return written;
}

// ---- sweep ----

std::vector<std::filesystem::path> run_attack_sweep(const ExperimentConfig& cfg,
                                                    const AttackHooks* hooks) {
  namespace fs = std::filesystem;
  fs::create_directories(cfg.out_dir);
  const auto victim = make_victim(cfg.victim, cfg.checkpoint_dir());
  const auto clips = eval_clips(cfg);
  const auto methods = sweep_methods(cfg.iters);

  CsvWriter csv({"victim", "method", "alpha", "eps", "iterations", "triplets",
                 "psnr_clean_mean", "psnr_adv_mean", "psnr_adv_std", "ssim_clean_mean",
                 "ssim_adv_mean", "ssim_adv_std", "time_total_s", "time_mean_s", "time_std_s"});

  // trajectories at the second alpha (or the only one)
  const double traj_alpha = cfg.alphas.size() > 1 ? cfg.alphas[1] : cfg.alphas[0];
  CsvWriter traj_csv({"method", "alpha", "iteration", "mean_loss"});

  for (double alpha : cfg.alphas) {
    const double eps = cfg.eps_for_alpha(alpha);
    for (const auto& spec : methods) {
      std::vector<ClipAttackResult> results(clips.size());
      parallel_for(clips.size(), resolve_workers(cfg.workers), [&](std::size_t i) {
        results[i] = run_method(spec.method, *victim, clips[i], alpha, eps, spec.iterations,
                                AttackMode::NonTargeted, hooks, cfg.seed);
      });

      std::vector<double> psnr_clean, psnr_adv, ssim_clean, ssim_adv, times;
      for (const auto& r : results) {
        for (const auto& row : r.report.rows) {
          psnr_clean.push_back(row.psnr_clean);
          psnr_adv.push_back(row.psnr_adv);
          if (row.ssim_clean) ssim_clean.push_back(*row.ssim_clean);
          if (row.ssim_adv) ssim_adv.push_back(*row.ssim_adv);
          times.push_back(row.wall_time_seconds);
        }
      }
      const Aggregate pc = aggregate(psnr_clean), pa = aggregate(psnr_adv);
      const Aggregate sc = aggregate(ssim_clean), sa = aggregate(ssim_adv);
      const Aggregate tm = aggregate(times);
      csv.row({cfg.victim, spec.label, format_double(alpha), format_double(eps),
               std::to_string(spec.method == Method::Basic2T ? 2 * cfg.iters : cfg.iters),
               std::to_string(psnr_adv.size()), format_double(pc.mean), format_double(pa.mean),
               format_double(pa.stddev), format_double(sc.mean), format_double(sa.mean),
               format_double(sa.stddev), format_double(tm.mean * times.size()),
               format_double(tm.mean), format_double(tm.stddev)});

      if (alpha == traj_alpha) {
        // mean loss per iteration; IAA averages its warm-started triplets
        std::vector<std::vector<double>> stacks;
        for (const auto& r : results) {
          for (std::size_t ti = 0; ti < r.report.rows.size(); ++ti) {
            if (spec.method == Method::Iaa && ti == 0 && r.report.rows.size() > 1) continue;
            stacks.push_back(r.report.rows[ti].loss_trajectory);
          }
        }
        if (!stacks.empty()) {
          const std::size_t len = stacks.front().size();
          for (std::size_t it = 0; it < len; ++it) {
            double acc = 0.0;
            for (const auto& s : stacks) acc += s[it];
            traj_csv.row({spec.label, format_double(alpha), std::to_string(it),
                          format_double(acc / static_cast<double>(stacks.size()))});
          }
        }
      }
    }
  }

  std::vector<fs::path> written;
  const fs::path csv_path = cfg.out_dir / "sweep.csv";
  csv.save(csv_path);
  written.push_back(csv_path);
  const fs::path traj_path = cfg.out_dir / "sweep_trajectories.csv";
  traj_csv.save(traj_path);
  written.push_back(traj_path);

  // charts read the data back from the CSVs they sit next to
  {
    const CsvTable table = read_csv(csv_path);
    const std::size_t col_method = table.column("method");
    const std::size_t col_alpha = table.column("alpha");
    const std::size_t col_psnr = table.column("psnr_adv_mean");
    const std::size_t col_ssim = table.column("ssim_adv_mean");
    std::vector<PlotSeries> psnr_series, ssim_series;
    for (const auto& spec : methods) {
      PlotSeries ps{spec.label, {}, {}}, ss{spec.label, {}, {}};
      for (std::size_t r = 0; r < table.rows.size(); ++r) {
        if (table.rows[r][col_method] != spec.label) continue;
        ps.x.push_back(table.number(r, col_alpha));
        ps.y.push_back(table.number(r, col_psnr));
        ss.x.push_back(table.number(r, col_alpha));
        ss.y.push_back(table.number(r, col_ssim));
      }
      psnr_series.push_back(std::move(ps));
      ssim_series.push_back(std::move(ss));
    }
    const fs::path psnr_svg = cfg.out_dir / "sweep_psnr_vs_alpha.svg";
    save_svg_chart(psnr_svg, "adversarial PSNR vs alpha (" + cfg.victim + ")", "alpha",
                   "PSNR (dB)", psnr_series);
    written.push_back(psnr_svg);
    const fs::path ssim_svg = cfg.out_dir / "sweep_ssim_vs_alpha.svg";
    save_svg_chart(ssim_svg, "adversarial SSIM vs alpha (" + cfg.victim + ")", "alpha", "SSIM",
                   ssim_series);
    written.push_back(ssim_svg);

    const CsvTable traj = read_csv(traj_path);
    const std::size_t t_method = traj.column("method");
    const std::size_t t_iter = traj.column("iteration");
    const std::size_t t_loss = traj.column("mean_loss");
    std::vector<PlotSeries> loss_series;
    for (const auto& spec : methods) {
      PlotSeries s{spec.label, {}, {}};
      for (std::size_t r = 0; r < traj.rows.size(); ++r) {
        if (traj.rows[r][t_method] != spec.label) continue;
        s.x.push_back(traj.number(r, t_iter));
        s.y.push_back(traj.number(r, t_loss));
      }
      if (!s.x.empty()) loss_series.push_back(std::move(s));
    }
    const fs::path traj_svg = cfg.out_dir / "sweep_loss_trajectory.svg";
    save_svg_chart(traj_svg, "loss vs iteration (" + cfg.victim + ")", "iteration", "loss",
                   loss_series);
    written.push_back(traj_svg);
  }
  return written;
}

// ---- ablation ----

std::vector<std::filesystem::path> run_ablation(const ExperimentConfig& cfg,
                                                const AttackHooks* hooks) {
  namespace fs = std::filesystem;
  fs::create_directories(cfg.out_dir);
  const auto clips = eval_clips(cfg);
  const double alpha = cfg.ablation_alpha;
  const double eps = cfg.eps_for_alpha(alpha);
  const std::size_t T = cfg.ablation_iters;

  CsvWriter csv({"victim", "method", "alpha", "eps", "iterations_per_triplet", "triplets",
                 "psnr_clean_mean", "psnr_adv_mean", "ssim_clean_mean", "ssim_adv_mean"});

  for (const std::string name : {"blend", "warp", "kernelnet"}) {
    const auto victim = make_victim(name, cfg.checkpoint_dir());
    for (const bool random_init : {false, true}) {
      std::vector<ClipAttackResult> results(clips.size());
      parallel_for(clips.size(), resolve_workers(cfg.workers), [&](std::size_t i) {
        AttackConfig acfg;
        acfg.alpha = alpha;
        acfg.eps = eps;
        acfg.iterations = T;
        if (random_init) {
          results[i] = random_init_attack(*victim, clips[i], acfg,
                                          mix_seed(cfg.seed, kTagRandomInit + i), hooks);
        } else {
          results[i] = iaa_attack(*victim, clips[i], acfg, hooks);
        }
      });
      std::vector<double> psnr_clean, psnr_adv, ssim_clean, ssim_adv;
      for (const auto& r : results) {
        for (const auto& row : r.report.rows) {
          psnr_clean.push_back(row.psnr_clean);
          psnr_adv.push_back(row.psnr_adv);
          if (row.ssim_clean) ssim_clean.push_back(*row.ssim_clean);
          if (row.ssim_adv) ssim_adv.push_back(*row.ssim_adv);
        }
      }
      csv.row({name, random_init ? "BA_random" : "IAA", format_double(alpha),
               format_double(eps), std::to_string((T + 1) / 2), std::to_string(psnr_adv.size()),
               format_double(aggregate(psnr_clean).mean), format_double(aggregate(psnr_adv).mean),
               format_double(aggregate(ssim_clean).mean), format_double(aggregate(ssim_adv).mean)});
    }
  }

  const fs::path csv_path = cfg.out_dir / "ablation.csv";
  csv.save(csv_path);
  return {csv_path};
}

// ---- targeted ----

std::vector<std::filesystem::path> run_targeted(const ExperimentConfig& cfg,
                                                const AttackHooks* hooks) {
  namespace fs = std::filesystem;
  fs::create_directories(cfg.out_dir);
  const auto clips = eval_clips(cfg);
  const double alpha = cfg.targeted_alpha;
  const double eps = cfg.eps_for_alpha(alpha);
  const auto methods = sweep_methods(cfg.iters);

  CsvWriter csv({"victim", "method", "alpha", "eps", "triplets", "dist_clean_mean",
                 "dist_adv_mean", "psnr_adv_mean", "ssim_adv_mean", "brightness_clean_mean",
                 "brightness_adv_mean", "time_total_s"});

  for (const std::string name : {"blend", "warp", "kernelnet"}) {
    const auto victim = make_victim(name, cfg.checkpoint_dir());
    for (const auto& spec : methods) {
      std::vector<ClipAttackResult> results(clips.size());
      parallel_for(clips.size(), resolve_workers(cfg.workers), [&](std::size_t i) {
        results[i] = run_method(spec.method, *victim, clips[i], alpha, eps, spec.iterations,
                                AttackMode::Targeted, hooks, cfg.seed);
      });
      std::vector<double> dist_clean, dist_adv, psnr_adv, ssim_adv, bright_clean, bright_adv,
          times;
      for (std::size_t ci = 0; ci < clips.size(); ++ci) {
        for (std::size_t ti = 0; ti < clips[ci].size(); ++ti) {
          const auto& t = clips[ci][ti];
          const auto& row = results[ci].report.rows[ti];
          const Tensor white = Tensor::ones(t.gt.shape());
          const Tensor out_clean = victim->interpolate_clamped(t.prev, t.next);
          const Tensor out_adv = victim->interpolate_clamped(results[ci].pairs[ti].prev,
                                                             results[ci].pairs[ti].next);
          auto l2_dist = [](const Tensor& a, const Tensor& b) {
            double acc = 0.0;
            auto ad = a.data(), bd = b.data();
            for (std::size_t k = 0; k < ad.size(); ++k) {
              acc += (ad[k] - bd[k]) * (ad[k] - bd[k]);
            }
            return std::sqrt(acc);
          };
          dist_clean.push_back(l2_dist(out_clean, white));
          dist_adv.push_back(l2_dist(out_adv, white));
          bright_clean.push_back(mean_value(out_clean));
          bright_adv.push_back(mean_value(out_adv));
          psnr_adv.push_back(row.psnr_adv);
          if (row.ssim_adv) ssim_adv.push_back(*row.ssim_adv);
          times.push_back(row.wall_time_seconds);
        }
      }
      const Aggregate tm = aggregate(times);
      csv.row({name, spec.label, format_double(alpha), format_double(eps),
               std::to_string(dist_adv.size()), format_double(aggregate(dist_clean).mean),
               format_double(aggregate(dist_adv).mean), format_double(aggregate(psnr_adv).mean),
               format_double(aggregate(ssim_adv).mean), format_double(aggregate(bright_clean).mean),
               format_double(aggregate(bright_adv).mean),
               format_double(tm.mean * times.size())});
    }
  }

  const fs::path csv_path = cfg.out_dir / "targeted.csv";
  csv.save(csv_path);
  return {csv_path};
}

// ---- transfer ----

std::vector<std::filesystem::path> run_transfer(const ExperimentConfig& cfg,
                                                const AttackHooks* hooks) {
  namespace fs = std::filesystem;
  fs::create_directories(cfg.out_dir);
  const auto clips = eval_clips(cfg);
  const double alpha = cfg.transfer_alpha;
  const double eps = cfg.eps_for_alpha(alpha);
  const std::vector<std::string> names{"blend", "warp", "kernelnet"};

  CsvWriter csv({"source", "target", "alpha", "eps", "triplets", "psnr_clean_mean",
                 "psnr_adv_mean", "psnr_drop", "ssim_clean_mean", "ssim_adv_mean"});

  for (const auto& source_name : names) {
    const auto source = make_victim(source_name, cfg.checkpoint_dir());
    // craft once per source
    std::vector<ClipAttackResult> crafted(clips.size());
    parallel_for(clips.size(), resolve_workers(cfg.workers), [&](std::size_t i) {
      AttackConfig acfg;
      acfg.alpha = alpha;
      acfg.eps = eps;
      acfg.iterations = cfg.iters;
      crafted[i] = iaa_attack(*source, clips[i], acfg, hooks);
    });
    for (const auto& target_name : names) {
      const auto target = make_victim(target_name, cfg.checkpoint_dir());
      std::vector<double> psnr_clean, psnr_adv, ssim_clean, ssim_adv;
      for (std::size_t ci = 0; ci < clips.size(); ++ci) {
        const AttackReport scored = score_through(*target, clips[ci], crafted[ci].pairs);
        for (const auto& row : scored.rows) {
          psnr_clean.push_back(row.psnr_clean);
          psnr_adv.push_back(row.psnr_adv);
          if (row.ssim_clean) ssim_clean.push_back(*row.ssim_clean);
          if (row.ssim_adv) ssim_adv.push_back(*row.ssim_adv);
        }
      }
      const double pc = aggregate(psnr_clean).mean;
      const double pa = aggregate(psnr_adv).mean;
      csv.row({source_name, target_name, format_double(alpha), format_double(eps),
               std::to_string(psnr_adv.size()), format_double(pc), format_double(pa),
               format_double(pc - pa), format_double(aggregate(ssim_clean).mean),
               format_double(aggregate(ssim_adv).mean)});
    }
  }

  const fs::path csv_path = cfg.out_dir / "transfer.csv";
  csv.save(csv_path);
  return {csv_path};
}

// ---- recognition ----

std::vector<std::filesystem::path> run_recognition(const ExperimentConfig& cfg,
                                                   const AttackHooks* hooks) {
  namespace fs = std::filesystem;
  fs::create_directories(cfg.out_dir);
  const auto ckpt_path = cfg.checkpoint_dir() / "classifier.ckpt";
  if (!fs::exists(ckpt_path)) {
    throw CheckpointError("missing checkpoint " + ckpt_path.string() +
                          "; run the train command first");
  }
  const ToyClassifier model = ToyClassifier::from_checkpoint(load_checkpoint(ckpt_path));

  const auto samples =
      generate_labeled_groups(kMotionClassCount, cfg.rec_groups_per_class,
                              cfg.rec_frames_per_group, mix_seed(cfg.seed, kTagRecEval),
                              cfg.rec_groups_per_video);
  // split into videos (consecutive groups of one video form a segment)
  std::vector<std::vector<RecognitionSample>> videos;
  for (const auto& s : samples) {
    if (videos.empty() || videos.back().back().video_id != s.video_id) videos.emplace_back();
    videos.back().push_back(s);
  }

  const double alpha = cfg.alphas.size() > 2 ? cfg.alphas[2] : cfg.alphas.back();
  const double eps = cfg.eps_for_alpha(alpha);
  const std::size_t T = cfg.iters;

  struct RecMethod {
    std::string label;
    bool attack;      // false = clean forward only
    bool warm;
    std::size_t iterations;
  };
  const std::vector<RecMethod> methods{
      {"none", false, false, 0},
      {method_label("BA", T), true, false, T},
      {method_label("BA", 2 * T), true, false, 2 * T},
      {"IAA", true, true, 2 * T},
  };

  CsvWriter csv({"method", "alpha", "eps", "iterations", "groups", "clean_accuracy",
                 "adversarial_accuracy", "time_total_s"});

  auto attack_all = [&](bool warm, std::size_t iterations, double a, double e,
                        double* time_out, double* clean_out) {
    std::vector<RecognitionAttackResult> results(videos.size());
    parallel_for(videos.size(), resolve_workers(cfg.workers), [&](std::size_t v) {
      AttackConfig acfg;
      acfg.alpha = a;
      acfg.eps = e;
      acfg.iterations = iterations;
      acfg.warm_start = warm;
      acfg.iteration_policy = warm ? IterationPolicy::HalvedAfterFirst : IterationPolicy::Fixed;
      results[v] = recognition_attack(model, videos[v], acfg, hooks);
    });
    std::size_t clean_ok = 0, adv_ok = 0, total = 0;
    double time_acc = 0.0;
    for (const auto& r : results) {
      for (const auto& row : r.rows) {
        ++total;
        clean_ok += row.clean_correct ? 1 : 0;
        adv_ok += row.adv_correct ? 1 : 0;
        time_acc += row.wall_time_seconds;
      }
    }
    if (time_out) *time_out = time_acc;
    if (clean_out) *clean_out = static_cast<double>(clean_ok) / static_cast<double>(total);
    return static_cast<double>(adv_ok) / static_cast<double>(total);
  };

  double clean_accuracy = 0.0;
  double clean_time = 0.0;
  {
    Stopwatch sw;
    std::size_t ok = 0;
    for (const auto& s : samples) {
      if (model.predict(s.group) == s.label) ++ok;
    }
    clean_time = sw.seconds();
    clean_accuracy = static_cast<double>(ok) / static_cast<double>(samples.size());
  }

  for (const auto& m : methods) {
    if (!m.attack) {
      csv.row({m.label, "0", "0", "0", std::to_string(samples.size()),
               format_double(clean_accuracy), format_double(clean_accuracy),
               format_double(clean_time)});
      continue;
    }
    double time_total = 0.0, clean_acc = 0.0;
    const double adv_acc = attack_all(m.warm, m.iterations, alpha, eps, &time_total, &clean_acc);
    csv.row({m.label, format_double(alpha), format_double(eps), std::to_string(m.iterations),
             std::to_string(samples.size()), format_double(clean_acc), format_double(adv_acc),
             format_double(time_total)});
  }

  const fs::path csv_path = cfg.out_dir / "recognition.csv";
  csv.save(csv_path);

  // IAA accuracy across the alpha grid (plus the clean row)
  CsvWriter alpha_csv({"alpha", "eps", "adversarial_accuracy", "time_total_s"});
  alpha_csv.row({"0", "0", format_double(clean_accuracy), format_double(clean_time)});
  for (double a : cfg.alphas) {
    if (a == 0.0) continue;
    double time_total = 0.0;
    const double adv_acc =
        attack_all(true, 2 * T, a, cfg.eps_for_alpha(a), &time_total, nullptr);
    alpha_csv.row({format_double(a), format_double(cfg.eps_for_alpha(a)),
                   format_double(adv_acc), format_double(time_total)});
  }
  const fs::path alpha_path = cfg.out_dir / "recognition_alpha.csv";
  alpha_csv.save(alpha_path);

  const CsvTable table = read_csv(alpha_path);
  PlotSeries acc_series{"IAA", {}, {}};
  const std::size_t col_alpha = table.column("alpha");
  const std::size_t col_acc = table.column("adversarial_accuracy");
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    acc_series.x.push_back(table.number(r, col_alpha));
    acc_series.y.push_back(table.number(r, col_acc));
  }
  const fs::path svg_path = cfg.out_dir / "recognition_accuracy_vs_alpha.svg";
  save_svg_chart(svg_path, "classifier accuracy vs alpha", "alpha", "accuracy", {acc_series});

  return {csv_path, alpha_path, svg_path};
}

}  // namespace iaa
