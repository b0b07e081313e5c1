#pragma once

#include <algorithm>
#include <cmath>
#include <iostream>
#include <span>
#include <string>
#include <vector>

#include "afgn/adam.hpp"
#include "afgn/autoencoder.hpp"
#include "afgn/checkpoint.hpp"
#include "afgn/dataset.hpp"
#include "afgn/ops.hpp"
#include "afgn/parallel.hpp"
#include "afgn/rng.hpp"
#include "afgn/spectrum.hpp"

namespace afgn {

enum class InputDomain { pixel, spectrum };

inline std::string to_string(InputDomain d) {
  return d == InputDomain::pixel ? "pixel" : "spectrum";
}

inline InputDomain parse_domain(const std::string& s) {
  if (s == "pixel") return InputDomain::pixel;
  if (s == "spectrum") return InputDomain::spectrum;
  throw ValueError("unknown input domain: " + s);
}

// Class convention everywhere: index 0 = real, index 1 = fake.
constexpr size_t kClassReal = 0;
constexpr size_t kClassFake = 1;

struct DetectorSpec {
  int input_side = 64;
  int input_channels = 3;
  std::vector<int> widths = {32, 64, 64, 64};  // stride-2 conv blocks
  InputDomain domain = InputDomain::spectrum;

  void validate() const {
    if (widths.empty()) throw ConfigError("detector needs conv blocks");
    int div = 1 << widths.size();
    if (input_side < div || input_side % div != 0)
      throw ConfigError("detector input side " + std::to_string(input_side) +
                        " must be a positive multiple of " +
                        std::to_string(div));
  }
};

// Conv blocks (4x4, stride 2, pad 1) + ReLU, global average pool, and a
// linear head to 2 logits.
template <typename T = float>
struct DetectorModel {
  DetectorSpec spec;
  std::vector<Tensor<T>> conv_w, conv_b;
  Tensor<T> head_w, head_b;

  std::vector<Tensor<T>> parameters() {
    std::vector<Tensor<T>> params;
    for (auto& w : conv_w) params.push_back(w);
    for (auto& b : conv_b) params.push_back(b);
    params.push_back(head_w);
    params.push_back(head_b);
    return params;
  }

  Tensor<T> forward(const Tensor<T>& x) const {
    Tensor<T> h = x;
    for (size_t i = 0; i < conv_w.size(); ++i)
      h = relu(bias_add(conv2d(h, conv_w[i], 2, 1), conv_b[i]));
    return linear(global_avg_pool(h), head_w, head_b);
  }
};

template <typename T = float>
DetectorModel<T> build_detector(const DetectorSpec& spec, uint64_t seed) {
  spec.validate();
  DetectorModel<T> model;
  model.spec = spec;
  Rng rng = Rng(seed).child(0xDE);
  int ch = spec.input_channels;
  for (size_t i = 0; i < spec.widths.size(); ++i) {
    int w = spec.widths[i];
    size_t fan_in = static_cast<size_t>(ch) * 16;
    Rng layer_rng = rng.child(i);
    model.conv_w.push_back(detail::kaiming_uniform<T>(
        {static_cast<size_t>(w), static_cast<size_t>(ch), 4, 4}, fan_in,
        layer_rng));
    Tensor<T> b({static_cast<size_t>(w)});
    b.set_requires_grad(true);
    model.conv_b.push_back(std::move(b));
    ch = w;
  }
  Rng head_rng = rng.child(0x77);
  model.head_w = detail::kaiming_uniform<T>(
      {2, static_cast<size_t>(ch)}, static_cast<size_t>(ch), head_rng);
  model.head_b = Tensor<T>({2});
  model.head_b.set_requires_grad(true);
  return model;
}

// Pools of model-ready inputs (raw pixels or spectra), with provenance.
struct DetectorDataset {
  InputDomain domain = InputDomain::spectrum;
  std::vector<Image> reals;
  std::vector<Image> fakes;
  std::vector<SourceTag> fake_tags;
};

inline Image domain_transform(const Image& img, InputDomain domain) {
  if (domain == InputDomain::pixel) return img;
  return spectrum_as_image(log_magnitude_spectrum(img));
}

struct AblationSwitches {
  bool use_high = true;
  bool use_low = true;
  bool use_non = true;
};

// Validates provenance (reals are real-tagged, fakes carry fingerprint
// tags), applies generator ablation, and transforms into the model domain.
// `allow_external_fakes` admits external-fake records (evaluation and
// transfer targets); detector *training* keeps it off so the
// self-supervision contract holds.
inline DetectorDataset prepare_detector_inputs(
    std::span<const ImageRecord> reals, std::span<const ImageRecord> fakes,
    InputDomain domain, const AblationSwitches& sw = {},
    bool allow_external_fakes = false) {
  if (reals.empty()) throw ValueError("detector inputs: empty real pool");
  for (const auto& r : reals)
    if (r.tag != SourceTag::real)
      throw ValueError("detector inputs: record '" + r.id +
                       "' in the real pool is tagged " + to_string(r.tag));
  std::vector<const ImageRecord*> kept;
  for (const auto& f : fakes) {
    if (f.tag == SourceTag::real)
      throw ValueError("detector inputs: record '" + f.id +
                       "' in the fake pool is tagged real");
    if (f.tag == SourceTag::external_fake && !allow_external_fakes)
      throw ValueError("detector inputs: record '" + f.id +
                       "' lacks fp-* provenance; training fakes must come "
                       "from the fingerprint generator");
    if ((f.tag == SourceTag::fp_high && !sw.use_high) ||
        (f.tag == SourceTag::fp_low && !sw.use_low) ||
        (f.tag == SourceTag::fp_non && !sw.use_non))
      continue;
    kept.push_back(&f);
  }
  if (kept.empty()) throw ValueError("detector inputs: empty fake pool");

  DetectorDataset ds;
  ds.domain = domain;
  ds.reals.resize(reals.size());
  parallel_for(reals.size(), [&](size_t i) {
    ds.reals[i] = domain_transform(reals[i].image, domain);
  });
  ds.fakes.resize(kept.size());
  ds.fake_tags.resize(kept.size());
  parallel_for(kept.size(), [&](size_t i) {
    ds.fakes[i] = domain_transform(kept[i]->image, domain);
    ds.fake_tags[i] = kept[i]->tag;
  });
  return ds;
}

// Samples with one-hot (or, post-mixup, soft) labels.
template <typename T = float>
struct LabeledBatch {
  Tensor<T> inputs;  // [B,C,S,S]
  Tensor<T> labels;  // [B,2], rows sum to 1
  std::vector<SourceTag> tags;
  InputDomain domain = InputDomain::spectrum;
};

// Draws `batch_size` slots with replacement. Every real image carries
// weight `real_weight`, every reconstructed image weight 1; with three
// reconstructions per real and weight 3 the expected class balance is 1:1.
template <typename T = float>
LabeledBatch<T> assemble_batch(const DetectorDataset& ds, int batch_size,
                               double real_weight, Rng& rng) {
  if (ds.reals.empty() || ds.fakes.empty())
    throw ValueError("assemble_batch: both pools must be non-empty");
  if (batch_size < 2)
    throw ValueError("assemble_batch: batch size must be >= 2");
  if (real_weight <= 0)
    throw ValueError("assemble_batch: real weight must be positive");
  double wr = real_weight * static_cast<double>(ds.reals.size());
  double p_real = wr / (wr + static_cast<double>(ds.fakes.size()));

  std::vector<const Image*> images(batch_size);
  LabeledBatch<T> batch;
  batch.domain = ds.domain;
  batch.tags.resize(batch_size);
  std::vector<T> labels(static_cast<size_t>(batch_size) * 2, T(0));
  for (int i = 0; i < batch_size; ++i) {
    if (rng.uniform() < p_real) {
      size_t idx = rng.uniform_index(ds.reals.size());
      images[i] = &ds.reals[idx];
      batch.tags[i] = SourceTag::real;
      labels[static_cast<size_t>(i) * 2 + kClassReal] = T(1);
    } else {
      size_t idx = rng.uniform_index(ds.fakes.size());
      images[i] = &ds.fakes[idx];
      batch.tags[i] = ds.fake_tags[idx];
      labels[static_cast<size_t>(i) * 2 + kClassFake] = T(1);
    }
  }
  batch.inputs = stack_images<T>(images);
  batch.labels =
      Tensor<T>::from({static_cast<size_t>(batch_size), 2}, std::move(labels));
  return batch;
}

struct MixupPolicy {
  bool enabled = true;
  double alpha = 1.0;  // lambda ~ Beta(alpha, alpha)
};

// Replaces every sample with lambda*s_i + (1-lambda)*s_j against a random
// partner, mixing labels the same way. Disabled policy returns the batch
// unchanged.
template <typename T = float>
LabeledBatch<T> mixup_batch(const LabeledBatch<T>& batch,
                            const MixupPolicy& policy, Rng& rng) {
  if (!policy.enabled) return batch;
  const size_t b = batch.inputs.extent(0);
  if (b < 2) throw ValueError("mixup_batch: need at least 2 samples");
  const size_t per = batch.inputs.numel() / b;

  LabeledBatch<T> out;
  out.domain = batch.domain;
  out.tags = batch.tags;
  std::vector<T> x(batch.inputs.numel());
  std::vector<T> y(b * 2);
  std::span<const T> xin = batch.inputs.values();
  std::span<const T> yin = batch.labels.values();
  for (size_t i = 0; i < b; ++i) {
    T lam = static_cast<T>(rng.beta(policy.alpha, policy.alpha));
    size_t j = rng.uniform_index(b);
    const T* xi = xin.data() + i * per;
    const T* xj = xin.data() + j * per;
    T* xo = x.data() + i * per;
    for (size_t k = 0; k < per; ++k)
      xo[k] = lam * xi[k] + (T(1) - lam) * xj[k];
    for (size_t k = 0; k < 2; ++k)
      y[i * 2 + k] = lam * yin[i * 2 + k] + (T(1) - lam) * yin[j * 2 + k];
  }
  out.inputs = Tensor<T>::from(batch.inputs.shape(), std::move(x));
  out.labels = Tensor<T>::from({b, 2}, std::move(y));
  return out;
}

struct DetectorTrainConfig {
  int epochs = 5;
  int batch_size = 16;
  double lr = 1e-4;
  uint64_t seed = 0;
  MixupPolicy mixup;
  double sampler_weight = 3.0;
};

struct DetectorCurve {
  std::vector<double> epoch_loss;
  std::vector<double> epoch_accuracy;  // against the dominant label
  bool pool_ratio_warning = false;
};

// Cross-entropy training over balanced mixup batches. The fake pool must
// carry fingerprint provenance; a pool that is not 3x the real pool is
// reported but tolerated.
template <typename T = float>
DetectorCurve train_detector(DetectorModel<T>& model,
                             const DetectorDataset& ds,
                             const DetectorTrainConfig& cfg) {
  if (ds.domain != model.spec.domain)
    throw ValueError("train_detector: dataset domain " + to_string(ds.domain) +
                     " does not match model domain " +
                     to_string(model.spec.domain));
  if (cfg.epochs < 1) throw ValueError("train_detector: epochs must be >= 1");
  DetectorCurve curve;
  if (ds.fakes.size() != 3 * ds.reals.size()) {
    curve.pool_ratio_warning = true;
    std::cerr << "warning: fake pool (" << ds.fakes.size()
              << ") is not 3x the real pool (" << ds.reals.size() << ")\n";
  }

  Adam<T> opt(model.parameters(), cfg.lr);
  Rng rng = Rng(cfg.seed).child(0xD7);
  const size_t pool = ds.reals.size() + ds.fakes.size();
  const size_t steps =
      (pool + cfg.batch_size - 1) / static_cast<size_t>(cfg.batch_size);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double loss_sum = 0.0;
    size_t hits = 0, total = 0;
    for (size_t s = 0; s < steps; ++s) {
      LabeledBatch<T> batch =
          assemble_batch<T>(ds, cfg.batch_size, cfg.sampler_weight, rng);
      batch = mixup_batch(batch, cfg.mixup, rng);
      Tensor<T> logits = model.forward(batch.inputs);
      Tensor<T> loss = softmax_cross_entropy(logits, batch.labels);
      opt.zero_grad();
      loss.backward();
      opt.step();
      loss_sum += loss.item();

      std::span<const T> z = logits.values();
      std::span<const T> y = batch.labels.values();
      for (int i = 0; i < cfg.batch_size; ++i) {
        bool pred_fake = z[i * 2 + 1] > z[i * 2 + 0];
        bool want_fake = y[i * 2 + 1] > y[i * 2 + 0];
        hits += pred_fake == want_fake;
        ++total;
      }
    }
    curve.epoch_loss.push_back(loss_sum / static_cast<double>(steps));
    curve.epoch_accuracy.push_back(static_cast<double>(hits) /
                                   static_cast<double>(total));
  }
  return curve;
}

// Per-sample probability of class "fake"; order preserved. The inputs'
// domain must match the model's stored domain fingerprint.
template <typename T = float>
std::vector<double> predict(const DetectorModel<T>& model,
                            std::span<const Image> inputs,
                            InputDomain inputs_domain) {
  if (inputs_domain != model.spec.domain)
    throw ValueError("predict: model was trained on " +
                     to_string(model.spec.domain) + " inputs but received " +
                     to_string(inputs_domain));
  NoGradGuard guard;
  std::vector<double> scores(inputs.size());
  constexpr size_t kChunk = 32;
  for (size_t begin = 0; begin < inputs.size(); begin += kChunk) {
    size_t end = std::min(inputs.size(), begin + kChunk);
    std::vector<const Image*> ptrs;
    for (size_t i = begin; i < end; ++i) ptrs.push_back(&inputs[i]);
    Tensor<T> logits = model.forward(stack_images<T>(ptrs));
    std::vector<T> probs = softmax_rows(logits);
    for (size_t i = begin; i < end; ++i)
      scores[i] = static_cast<double>(probs[(i - begin) * 2 + kClassFake]);
  }
  return scores;
}

// Raw pixel records scored through the model's own domain transform.
template <typename T = float>
std::vector<double> score_records(const DetectorModel<T>& model,
                                  std::span<const ImageRecord> records) {
  std::vector<Image> inputs(records.size());
  parallel_for(records.size(), [&](size_t i) {
    inputs[i] = domain_transform(records[i].image, model.spec.domain);
  });
  return predict(model, inputs, model.spec.domain);
}

struct FineTuneConfig {
  double target_proportion = 0.15;
  int epochs = 1;
  int batch_size = 16;
  double lr = 1e-4;
  uint64_t seed = 0;
  MixupPolicy mixup;
  double sampler_weight = 3.0;
};

struct FineTuneReport {
  size_t batches = 0;
  int target_slots_per_batch = 0;
};

// One-epoch adaptation toward a target fake domain: each batch reserves
// round(proportion * batch) slots for uniform draws from the target set
// (labeled fake), the remainder assembled from the base pools as usual.
template <typename T = float>
FineTuneReport fine_tune_transfer(DetectorModel<T>& model,
                                  std::span<const ImageRecord> target_fakes,
                                  const DetectorDataset& base,
                                  const FineTuneConfig& cfg) {
  if (target_fakes.empty())
    throw ValueError("fine_tune_transfer: empty target set");
  if (!(cfg.target_proportion > 0.0 && cfg.target_proportion < 1.0))
    throw ValueError("fine_tune_transfer: target proportion must lie in "
                     "(0,1), got " +
                     std::to_string(cfg.target_proportion));
  if (base.domain != model.spec.domain)
    throw ValueError("fine_tune_transfer: base domain mismatch");
  for (const auto& rec : target_fakes)
    if (rec.tag == SourceTag::real)
      throw ValueError("fine_tune_transfer: target record '" + rec.id +
                       "' is tagged real");

  const int t_slots = static_cast<int>(
      std::lround(cfg.target_proportion * cfg.batch_size));
  const int base_slots = cfg.batch_size - t_slots;
  if (base_slots < 2)
    throw ValueError("fine_tune_transfer: target proportion leaves fewer "
                     "than 2 base slots");

  std::vector<Image> target_inputs(target_fakes.size());
  parallel_for(target_fakes.size(), [&](size_t i) {
    target_inputs[i] = domain_transform(target_fakes[i].image, base.domain);
  });

  Adam<T> opt(model.parameters(), cfg.lr);
  Rng rng = Rng(cfg.seed).child(0xF7);
  const size_t pool = base.reals.size() + base.fakes.size();
  const size_t steps =
      (pool + cfg.batch_size - 1) / static_cast<size_t>(cfg.batch_size);

  FineTuneReport report;
  report.target_slots_per_batch = t_slots;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (size_t s = 0; s < steps; ++s) {
      LabeledBatch<T> batch =
          assemble_batch<T>(base, cfg.batch_size, cfg.sampler_weight, rng);
      // overwrite the leading slots with target draws
      std::span<T> x = batch.inputs.values();
      std::span<T> y = batch.labels.values();
      const size_t per = batch.inputs.numel() / cfg.batch_size;
      for (int i = 0; i < t_slots; ++i) {
        size_t idx = rng.uniform_index(target_inputs.size());
        const Image& img = target_inputs[idx];
        for (size_t k = 0; k < per; ++k)
          x[i * per + k] = static_cast<T>(img.data[k]);
        y[i * 2 + kClassReal] = T(0);
        y[i * 2 + kClassFake] = T(1);
        batch.tags[i] = target_fakes[idx].tag;
      }
      batch = mixup_batch(batch, cfg.mixup, rng);
      Tensor<T> loss =
          softmax_cross_entropy(model.forward(batch.inputs), batch.labels);
      opt.zero_grad();
      loss.backward();
      opt.step();
      ++report.batches;
    }
  }
  return report;
}

// -- persistence ------------------------------------------------------------

template <typename T = float>
void save_detector(const DetectorModel<T>& model, const std::string& path) {
  std::vector<NamedTensor> ts;
  ts.push_back(NamedTensor::scalar("meta/kind", kCheckpointKindDetector));
  ts.push_back(NamedTensor::scalar(
      "meta/side", static_cast<float>(model.spec.input_side)));
  ts.push_back(NamedTensor::scalar(
      "meta/channels", static_cast<float>(model.spec.input_channels)));
  ts.push_back(NamedTensor::scalar(
      "meta/domain",
      model.spec.domain == InputDomain::spectrum ? 1.0f : 0.0f));
  std::vector<float> widths(model.spec.widths.begin(),
                            model.spec.widths.end());
  ts.push_back(NamedTensor::vec("meta/widths", std::move(widths)));
  for (size_t i = 0; i < model.conv_w.size(); ++i) {
    NamedTensor wt{"block" + std::to_string(i) + "/w",
                   model.conv_w[i].shape(), {}};
    wt.data.assign(model.conv_w[i].values().begin(),
                   model.conv_w[i].values().end());
    NamedTensor bt{"block" + std::to_string(i) + "/b",
                   model.conv_b[i].shape(), {}};
    bt.data.assign(model.conv_b[i].values().begin(),
                   model.conv_b[i].values().end());
    ts.push_back(std::move(wt));
    ts.push_back(std::move(bt));
  }
  NamedTensor hw{"head/w", model.head_w.shape(), {}};
  hw.data.assign(model.head_w.values().begin(), model.head_w.values().end());
  NamedTensor hb{"head/b", model.head_b.shape(), {}};
  hb.data.assign(model.head_b.values().begin(), model.head_b.values().end());
  ts.push_back(std::move(hw));
  ts.push_back(std::move(hb));
  write_checkpoint(path, ts);
}

template <typename T = float>
DetectorModel<T> load_detector(const std::string& path) {
  auto ts = read_checkpoint(path);
  if (meta_scalar(ts, "meta/kind", path) != kCheckpointKindDetector)
    throw IoError(path + ": checkpoint does not hold a detector");
  DetectorSpec spec;
  spec.input_side = static_cast<int>(meta_scalar(ts, "meta/side", path));
  spec.input_channels =
      static_cast<int>(meta_scalar(ts, "meta/channels", path));
  spec.domain = meta_scalar(ts, "meta/domain", path) != 0.0f
                    ? InputDomain::spectrum
                    : InputDomain::pixel;
  spec.widths.clear();
  for (float v : require_tensor(ts, "meta/widths", path).data)
    spec.widths.push_back(static_cast<int>(v));

  DetectorModel<T> model = build_detector<T>(spec, 0);
  for (size_t i = 0; i < model.conv_w.size(); ++i) {
    const NamedTensor& wt =
        require_tensor(ts, "block" + std::to_string(i) + "/w", path);
    const NamedTensor& bt =
        require_tensor(ts, "block" + std::to_string(i) + "/b", path);
    if (wt.shape != model.conv_w[i].shape() ||
        bt.shape != model.conv_b[i].shape())
      throw IoError(path + ": block " + std::to_string(i) +
                    " shape mismatch against declared spec");
    std::copy(wt.data.begin(), wt.data.end(),
              model.conv_w[i].values().begin());
    std::copy(bt.data.begin(), bt.data.end(),
              model.conv_b[i].values().begin());
  }
  const NamedTensor& hw = require_tensor(ts, "head/w", path);
  const NamedTensor& hb = require_tensor(ts, "head/b", path);
  if (hw.shape != model.head_w.shape() || hb.shape != model.head_b.shape())
    throw IoError(path + ": head shape mismatch against declared spec");
  std::copy(hw.data.begin(), hw.data.end(), model.head_w.values().begin());
  std::copy(hb.data.begin(), hb.data.end(), model.head_b.values().begin());
  return model;
}

}  // namespace afgn
