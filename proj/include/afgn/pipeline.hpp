#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "afgn/autoencoder.hpp"
#include "afgn/config.hpp"
#include "afgn/dataset.hpp"
#include "afgn/detector.hpp"
#include "afgn/metrics.hpp"
#include "afgn/synth.hpp"

namespace afgn {

struct GeneratorTrio {
  AutoencoderModel<float> high, low, non;
};

inline AutoencoderSpec spec_for_level(AutoencoderLevel level, int side) {
  switch (level) {
    case AutoencoderLevel::high: return AutoencoderSpec::high(side);
    case AutoencoderLevel::low: return AutoencoderSpec::low(side);
    case AutoencoderLevel::non: return AutoencoderSpec::non(side);
    default:
      throw ValueError("spec_for_level: custom specs need explicit plans");
  }
}

// Trains the three fingerprint generators on the real corpus. Seeds are
// derived per level so the trio is reproducible from one run seed.
inline GeneratorTrio train_generator_trio(std::span<const ImageRecord> reals,
                                          const RunConfig& cfg) {
  GeneratorTrio trio;
  GeneratorTrainConfig tc;
  tc.epochs = cfg.epochs_generator;
  tc.batch_size = cfg.batch_size;
  tc.lr = cfg.lr_generator;

  struct Slot {
    AutoencoderLevel level;
    AutoencoderModel<float>* model;
    uint64_t tag;
  };
  Slot slots[3] = {{AutoencoderLevel::high, &trio.high, 1},
                   {AutoencoderLevel::low, &trio.low, 2},
                   {AutoencoderLevel::non, &trio.non, 3}};
  for (auto& slot : slots) {
    uint64_t seed = mix_seed(cfg.seed, slot.tag);
    *slot.model =
        build_autoencoder<float>(spec_for_level(slot.level, cfg.image_side),
                                 seed);
    tc.seed = seed;
    train_autoencoder(*slot.model, reals, tc);
  }
  return trio;
}

// Per-fake-source-tag metrics against the shared real pool, plus a mean
// row, mirroring the usual reporting layout.
template <typename T = float>
std::vector<ReportRow> evaluate_detector(const DetectorModel<T>& model,
                                         std::span<const ImageRecord> reals,
                                         std::span<const ImageRecord> fakes) {
  if (reals.empty() || fakes.empty())
    throw ValueError("evaluate_detector: empty evaluation pool");
  std::vector<double> real_scores = score_records(model, reals);
  std::vector<double> fake_scores = score_records(model, fakes);

  std::map<std::string, std::vector<double>> by_tag;
  for (size_t i = 0; i < fakes.size(); ++i)
    by_tag[to_string(fakes[i].tag)].push_back(fake_scores[i]);

  std::vector<ReportRow> rows;
  ReportRow mean{"mean", fakes.size(), 0, 0, 0};
  for (const auto& [tag, scores] : by_tag) {
    ScoredSet set;
    for (double s : real_scores) set.add(s, 0);
    for (double s : scores) set.add(s, 1);
    ReportRow row{tag, scores.size(), accuracy(set), average_precision(set),
                  auroc(set)};
    mean.accuracy += row.accuracy;
    mean.average_precision += row.average_precision;
    mean.auroc += row.auroc;
    rows.push_back(std::move(row));
  }
  const double k = static_cast<double>(by_tag.size());
  mean.accuracy /= k;
  mean.average_precision /= k;
  mean.auroc /= k;
  rows.push_back(std::move(mean));
  return rows;
}

// Pooled (all fake tags together) metrics; used for ablation rows.
template <typename T = float>
ReportRow pooled_metrics(const DetectorModel<T>& model,
                         std::span<const ImageRecord> reals,
                         std::span<const ImageRecord> fakes,
                         std::string label) {
  std::vector<double> real_scores = score_records(model, reals);
  std::vector<double> fake_scores = score_records(model, fakes);
  ScoredSet set;
  for (double s : real_scores) set.add(s, 0);
  for (double s : fake_scores) set.add(s, 1);
  return {std::move(label), set.size(), accuracy(set), average_precision(set),
          auroc(set)};
}

enum class AblationRow { full, no_high, no_low, no_non, no_freq, no_mixup };

inline std::string ablation_label(AblationRow row) {
  switch (row) {
    case AblationRow::full: return "full";
    case AblationRow::no_high: return "w/o G_high";
    case AblationRow::no_low: return "w/o G_low";
    case AblationRow::no_non: return "w/o G_non";
    case AblationRow::no_freq: return "w/o Freq.";
    case AblationRow::no_mixup: return "w/o Mixup";
  }
  return "?";
}

inline AblationRow parse_ablation_drop(const std::string& s) {
  if (s == "high") return AblationRow::no_high;
  if (s == "low") return AblationRow::no_low;
  if (s == "non") return AblationRow::no_non;
  if (s == "freq") return AblationRow::no_freq;
  if (s == "mixup") return AblationRow::no_mixup;
  throw ValueError("ablate: unknown drop target '" + s +
                   "' (expected high|low|non|freq|mixup)");
}

// Applies one ablation row's switches on top of a base config.
inline RunConfig ablated_config(RunConfig cfg, AblationRow row) {
  switch (row) {
    case AblationRow::full: break;
    case AblationRow::no_high: cfg.use_high = false; break;
    case AblationRow::no_low: cfg.use_low = false; break;
    case AblationRow::no_non: cfg.use_non = false; break;
    case AblationRow::no_freq: cfg.use_frequency = false; break;
    case AblationRow::no_mixup: cfg.use_mixup = false; break;
  }
  return cfg;
}

// Full ablation study: train the trio once, then one detector per
// configuration row, each evaluated on the shared held-out pool.
inline std::vector<ReportRow> ablation_study(
    std::span<const ImageRecord> reals, const RunConfig& base_cfg,
    const std::vector<AblationRow>& rows) {
  base_cfg.validate();
  std::vector<ImageRecord> pool(reals.begin(), reals.end());
  DatasetSplit split =
      split_dataset(std::move(pool), 0.8, 0.0, 0.2, mix_seed(base_cfg.seed, 10));
  if (split.train.empty() || split.test.empty())
    throw ValueError("ablate: corpus too small to split 80/20");

  GeneratorTrio trio = train_generator_trio(split.train, base_cfg);
  std::vector<ImageRecord> fp_train =
      reconstruct_corpus(trio.high, trio.low, trio.non, split.train);
  std::vector<ImageRecord> fp_test =
      reconstruct_corpus(trio.high, trio.low, trio.non, split.test);

  std::vector<ReportRow> report;
  for (AblationRow row : rows) {
    RunConfig cfg = ablated_config(base_cfg, row);
    // Dropping use_high etc. strips that tag from every training batch;
    // the held-out pool keeps all three fingerprint kinds.
    InputDomain domain =
        cfg.use_frequency ? InputDomain::spectrum : InputDomain::pixel;
    AblationSwitches sw{cfg.use_high, cfg.use_low, cfg.use_non};
    DetectorDataset ds =
        prepare_detector_inputs(split.train, fp_train, domain, sw);

    DetectorSpec dspec;
    dspec.input_side = cfg.image_side;
    dspec.domain = domain;
    DetectorModel<float> det =
        build_detector<float>(dspec, mix_seed(cfg.seed, 20));
    DetectorTrainConfig tc;
    tc.epochs = cfg.epochs_detector;
    tc.batch_size = cfg.batch_size;
    tc.lr = cfg.lr_detector;
    tc.seed = mix_seed(cfg.seed, 21);
    tc.mixup = {cfg.use_mixup, cfg.mixup_alpha};
    tc.sampler_weight = cfg.sampler_weight;
    train_detector(det, ds, tc);

    report.push_back(
        pooled_metrics(det, split.test, fp_test, ablation_label(row)));
  }
  return report;
}

inline std::vector<AblationRow> all_ablation_rows() {
  return {AblationRow::full,    AblationRow::no_high, AblationRow::no_low,
          AblationRow::no_non,  AblationRow::no_freq, AblationRow::no_mixup};
}

}  // namespace afgn
