#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "afgn/pipeline.hpp"

namespace afgn::cli {

namespace detail {

inline void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir + ": " + ec.message());
}

inline std::vector<ImageRecord> load_sized(const std::string& dir,
                                           SourceTag fallback, int side) {
  std::vector<ImageRecord> records = load_image_dir(dir, fallback);
  for (auto& rec : records) {
    if (rec.image.width != side || rec.image.height != side)
      rec.image = resize(rec.image, side);
  }
  return records;
}

struct CommandContext {
  RunConfig cfg;
  std::string config_path;

  void finalize() {
    cfg.validate();
    set_num_threads(cfg.threads);
  }
};

// Registers --config plus the override flags shared by every command.
inline void add_common_options(CLI::App* cmd, CommandContext& ctx) {
  cmd->add_option("--config", ctx.config_path,
                  "key=value config file (defaults applied first)");
  auto* cfg = &ctx.cfg;
  cmd->add_option("--side", cfg->image_side, "image side in pixels");
  cmd->add_option("--seed", cfg->seed, "run seed");
  cmd->add_option("--batch", cfg->batch_size, "batch size");
  cmd->add_option("--threads", cfg->threads, "worker threads (0 = auto)");
  // Load the file before flag overrides land in cfg.
  cmd->preparse_callback([&ctx](size_t) {
    if (!ctx.config_path.empty()) ctx.cfg = load_config(ctx.config_path);
  });
}

}  // namespace detail

// Single entry point behind the binary; returns the process exit code.
// Error contract: 0 success, 2 usage, 3 invariant violation, 4 file error.
inline int run(std::vector<std::string> args) {
  CLI::App app{"self-supervised GAN detection pipeline"};
  app.require_subcommand(1);

  detail::CommandContext ctx;

  // ---- synth ----
  auto* synth = app.add_subcommand(
      "synth", "generate a procedural real-image corpus");
  int synth_n = 0;
  std::string synth_out;
  synth->add_option("--n", synth_n, "number of images")->required();
  synth->add_option("--out", synth_out, "output directory")->required();
  detail::add_common_options(synth, ctx);
  synth->callback([&] {
    ctx.finalize();
    detail::ensure_dir(synth_out);
    auto records = synth_corpus(synth_n, ctx.cfg.image_side, ctx.cfg.seed);
    for (const auto& rec : records)
      save_ppm(rec.image, synth_out + "/" + rec.id + ".ppm");
    std::cout << "wrote " << records.size() << " images to " << synth_out
              << "\n";
  });

  // ---- train-ae ----
  auto* train_ae = app.add_subcommand(
      "train-ae", "train one fingerprint-generator autoencoder");
  std::string ae_level, ae_data, ae_out;
  int ae_epochs = -1;
  double ae_lr = -1;
  train_ae->add_option("--level", ae_level, "high|low|non")
      ->required()
      ->check(CLI::IsMember({"high", "low", "non"}));
  train_ae->add_option("--data", ae_data, "real image directory")->required();
  train_ae->add_option("--out", ae_out, "checkpoint path")->required();
  train_ae->add_option("--epochs", ae_epochs, "override epochs_generator");
  train_ae->add_option("--lr", ae_lr, "override lr_generator");
  detail::add_common_options(train_ae, ctx);
  train_ae->callback([&] {
    if (ae_epochs > 0) ctx.cfg.epochs_generator = ae_epochs;
    if (ae_lr > 0) ctx.cfg.lr_generator = ae_lr;
    ctx.finalize();
    AutoencoderLevel level = parse_level(ae_level);
    auto reals =
        detail::load_sized(ae_data, SourceTag::real, ctx.cfg.image_side);
    uint64_t seed = mix_seed(ctx.cfg.seed,
                             level == AutoencoderLevel::high   ? 1
                             : level == AutoencoderLevel::low ? 2
                                                              : 3);
    auto model = build_autoencoder<float>(
        spec_for_level(level, ctx.cfg.image_side), seed);
    GeneratorTrainConfig tc;
    tc.epochs = ctx.cfg.epochs_generator;
    tc.batch_size = ctx.cfg.batch_size;
    tc.lr = ctx.cfg.lr_generator;
    tc.seed = seed;
    TrainingCurve curve = train_autoencoder(model, reals, tc);
    save_autoencoder(model, ae_out);
    std::cout << "level=" << ae_level << " epochs=" << tc.epochs
              << " final_loss=" << curve.epoch_loss.back() << " -> " << ae_out
              << "\n";
  });

  // ---- reconstruct ----
  auto* rec_cmd = app.add_subcommand(
      "reconstruct", "run images through a trained generator");
  std::string rec_model, rec_in, rec_out;
  rec_cmd->add_option("--model", rec_model, "autoencoder checkpoint")
      ->required();
  rec_cmd->add_option("--in", rec_in, "input image directory")->required();
  rec_cmd->add_option("--out", rec_out, "output directory")->required();
  detail::add_common_options(rec_cmd, ctx);
  rec_cmd->callback([&] {
    ctx.finalize();
    auto model = load_autoencoder<float>(rec_model);
    auto records = detail::load_sized(rec_in, SourceTag::real,
                                      model.spec.input_side);
    detail::ensure_dir(rec_out);
    auto outputs = reconstruct_tagged(model, records);
    for (const auto& out : outputs)
      save_ppm(out.image, rec_out + "/" + out.id + ".ppm");
    std::cout << "wrote " << outputs.size() << " reconstructions to "
              << rec_out << "\n";
  });

  // ---- spectrum ----
  auto* spec_cmd = app.add_subcommand(
      "spectrum", "export the log-magnitude spectrum of one image");
  std::string spec_in, spec_out, spec_profile;
  spec_cmd->add_option("--in", spec_in, "input image (.ppm/.png)")->required();
  spec_cmd->add_option("--out", spec_out, "output 8-bit PGM heatmap")
      ->required();
  spec_cmd->add_option("--profile", spec_profile,
                       "also write radius,value CSV");
  detail::add_common_options(spec_cmd, ctx);
  spec_cmd->callback([&] {
    ctx.finalize();
    Image img = load_image(spec_in);
    if (!img.square()) img = resize(img, ctx.cfg.image_side);
    SpectrumImage spec = log_magnitude_spectrum(img);
    save_pgm(spectrum_as_image(spec), spec_out);
    if (!spec_profile.empty()) {
      std::ofstream out(spec_profile);
      if (!out) throw IoError("cannot write " + spec_profile);
      out << "radius,value\n";
      auto profile = radial_profile(spec);
      char buf[64];
      for (size_t r = 0; r < profile.size(); ++r) {
        std::snprintf(buf, sizeof(buf), "%.6f", profile[r]);
        out << r << "," << buf << "\n";
      }
    }
    std::cout << "wrote spectrum heatmap to " << spec_out << "\n";
  });

  // ---- train-detector ----
  auto* td = app.add_subcommand("train-detector",
                                "train the classifier on real vs fingerprints");
  std::string td_real, td_fp, td_out;
  std::string td_domain, td_mixup;
  int td_epochs = -1;
  td->add_option("--real", td_real, "real image directory")->required();
  td->add_option("--fp", td_fp, "fingerprint image directory")->required();
  td->add_option("--out", td_out, "checkpoint path")->required();
  td->add_option("--domain", td_domain, "spectrum|pixel")
      ->check(CLI::IsMember({"spectrum", "pixel"}));
  td->add_option("--mixup", td_mixup, "on|off")
      ->check(CLI::IsMember({"on", "off"}));
  td->add_option("--epochs", td_epochs, "override epochs_detector");
  detail::add_common_options(td, ctx);
  td->callback([&] {
    if (!td_domain.empty()) ctx.cfg.use_frequency = td_domain == "spectrum";
    if (!td_mixup.empty()) ctx.cfg.use_mixup = td_mixup == "on";
    if (td_epochs > 0) ctx.cfg.epochs_detector = td_epochs;
    ctx.finalize();
    auto reals =
        detail::load_sized(td_real, SourceTag::real, ctx.cfg.image_side);
    auto fps = detail::load_sized(td_fp, SourceTag::external_fake,
                                  ctx.cfg.image_side);
    InputDomain domain = ctx.cfg.use_frequency ? InputDomain::spectrum
                                               : InputDomain::pixel;
    AblationSwitches sw{ctx.cfg.use_high, ctx.cfg.use_low, ctx.cfg.use_non};
    DetectorDataset ds = prepare_detector_inputs(reals, fps, domain, sw);
    DetectorSpec dspec;
    dspec.input_side = ctx.cfg.image_side;
    dspec.domain = domain;
    auto model = build_detector<float>(dspec, mix_seed(ctx.cfg.seed, 20));
    DetectorTrainConfig tc;
    tc.epochs = ctx.cfg.epochs_detector;
    tc.batch_size = ctx.cfg.batch_size;
    tc.lr = ctx.cfg.lr_detector;
    tc.seed = mix_seed(ctx.cfg.seed, 21);
    tc.mixup = {ctx.cfg.use_mixup, ctx.cfg.mixup_alpha};
    tc.sampler_weight = ctx.cfg.sampler_weight;
    DetectorCurve curve = train_detector(model, ds, tc);
    save_detector(model, td_out);
    std::cout << "domain=" << to_string(domain)
              << " mixup=" << (ctx.cfg.use_mixup ? "on" : "off")
              << " final_loss=" << curve.epoch_loss.back()
              << " train_acc=" << curve.epoch_accuracy.back() << " -> "
              << td_out << "\n";
  });

  // ---- finetune ----
  auto* ft = app.add_subcommand(
      "finetune", "one-epoch transfer toward a target fake domain");
  std::string ft_model, ft_target, ft_real, ft_fp, ft_out;
  double ft_prop = 0.15;
  int ft_epochs = 1;
  ft->add_option("--model", ft_model, "detector checkpoint")->required();
  ft->add_option("--target", ft_target, "target fake directory")->required();
  ft->add_option("--real", ft_real, "base real directory")->required();
  ft->add_option("--fp", ft_fp, "base fingerprint directory")->required();
  ft->add_option("--out", ft_out, "updated checkpoint path")->required();
  ft->add_option("--prop", ft_prop, "target share of each batch");
  ft->add_option("--epochs", ft_epochs, "fine-tune epochs");
  detail::add_common_options(ft, ctx);
  ft->callback([&] {
    ctx.finalize();
    auto model = load_detector<float>(ft_model);
    int side = model.spec.input_side;
    auto target = detail::load_sized(ft_target, SourceTag::external_fake, side);
    auto reals = detail::load_sized(ft_real, SourceTag::real, side);
    auto fps = detail::load_sized(ft_fp, SourceTag::external_fake, side);
    AblationSwitches sw{ctx.cfg.use_high, ctx.cfg.use_low, ctx.cfg.use_non};
    DetectorDataset base =
        prepare_detector_inputs(reals, fps, model.spec.domain, sw);
    FineTuneConfig fc;
    fc.target_proportion = ft_prop;
    fc.epochs = ft_epochs;
    fc.batch_size = ctx.cfg.batch_size;
    fc.lr = ctx.cfg.lr_detector;
    fc.seed = mix_seed(ctx.cfg.seed, 22);
    fc.mixup = {ctx.cfg.use_mixup, ctx.cfg.mixup_alpha};
    fc.sampler_weight = ctx.cfg.sampler_weight;
    FineTuneReport report = fine_tune_transfer(model, target, base, fc);
    save_detector(model, ft_out);
    std::cout << "batches=" << report.batches
              << " target_slots=" << report.target_slots_per_batch << " -> "
              << ft_out << "\n";
  });

  // ---- predict ----
  auto* pred = app.add_subcommand("predict",
                                  "score a directory of images as fake");
  std::string pred_model, pred_in, pred_out;
  pred->add_option("--model", pred_model, "detector checkpoint")->required();
  pred->add_option("--in", pred_in, "input image directory")->required();
  pred->add_option("--out", pred_out, "output CSV (path,fake_prob)")
      ->required();
  detail::add_common_options(pred, ctx);
  pred->callback([&] {
    ctx.finalize();
    auto model = load_detector<float>(pred_model);
    auto records = detail::load_sized(pred_in, SourceTag::external_fake,
                                      model.spec.input_side);
    std::vector<double> scores = score_records(model, records);
    std::ofstream out(pred_out);
    if (!out) throw IoError("cannot write " + pred_out);
    out << "path,fake_prob\n";
    char buf[64];
    for (size_t i = 0; i < records.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%.6f", scores[i]);
      out << records[i].path << "," << buf << "\n";
    }
    std::cout << "scored " << records.size() << " images -> " << pred_out
              << "\n";
  });

  // ---- eval ----
  auto* eval = app.add_subcommand(
      "eval", "report accuracy/AP/AUROC per fake source tag");
  std::string ev_model, ev_real, ev_fake, ev_out;
  eval->add_option("--model", ev_model, "detector checkpoint")->required();
  eval->add_option("--real", ev_real, "real image directory")->required();
  eval->add_option("--fake", ev_fake, "fake image directory")->required();
  eval->add_option("--out", ev_out, "report CSV path")->required();
  detail::add_common_options(eval, ctx);
  eval->callback([&] {
    ctx.finalize();
    auto model = load_detector<float>(ev_model);
    int side = model.spec.input_side;
    auto reals = detail::load_sized(ev_real, SourceTag::real, side);
    auto fakes = detail::load_sized(ev_fake, SourceTag::external_fake, side);
    auto rows = evaluate_detector(model, reals, fakes);
    write_report_csv(ev_out, rows);
    std::cout << "wrote " << rows.size() << " rows to " << ev_out << "\n";
  });

  // ---- ablate ----
  auto* ab = app.add_subcommand(
      "ablate", "train and score every ablation configuration");
  std::string ab_real, ab_out, ab_drop;
  ab->add_option("--real", ab_real, "real image directory")->required();
  ab->add_option("--out", ab_out, "ablation CSV path")->required();
  ab->add_option("--drop", ab_drop,
                 "run a single row: high|low|non|freq|mixup");
  int ab_eg = -1, ab_ed = -1;
  ab->add_option("--epochs-generator", ab_eg, "override epochs_generator");
  ab->add_option("--epochs-detector", ab_ed, "override epochs_detector");
  detail::add_common_options(ab, ctx);
  ab->callback([&] {
    if (ab_eg > 0) ctx.cfg.epochs_generator = ab_eg;
    if (ab_ed > 0) ctx.cfg.epochs_detector = ab_ed;
    ctx.finalize();
    auto reals =
        detail::load_sized(ab_real, SourceTag::real, ctx.cfg.image_side);
    std::vector<AblationRow> rows = ab_drop.empty()
                                        ? all_ablation_rows()
                                        : std::vector<AblationRow>{
                                              parse_ablation_drop(ab_drop)};
    auto report = ablation_study(reals, ctx.cfg, rows);
    // same CSV schema as eval reports, first column names the config
    std::ofstream out(ab_out);
    if (!out) throw IoError("cannot write " + ab_out);
    out << "config,n,accuracy,average_precision,auroc\n";
    char buf[64];
    for (const auto& row : report) {
      out << row.tag << "," << row.n;
      for (double v : {row.accuracy, row.average_precision, row.auroc}) {
        std::snprintf(buf, sizeof(buf), "%.6f", v);
        out << "," << buf;
      }
      out << "\n";
    }
    std::cout << "wrote " << report.size() << " ablation rows to " << ab_out
              << "\n";
  });

  // CLI11 wants argv-style reversed input when parsing a vector.
  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: usage: " << e.what() << "\n";
    std::cerr << app.help();
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "error: invalid: " << e.what() << "\n";
    return 3;
  } catch (const ValueError& e) {
    std::cerr << "error: invalid: " << e.what() << "\n";
    return 3;
  } catch (const IoError& e) {
    std::cerr << "error: io: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace afgn::cli
