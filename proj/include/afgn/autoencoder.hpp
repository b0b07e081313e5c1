#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "afgn/adam.hpp"
#include "afgn/checkpoint.hpp"
#include "afgn/dataset.hpp"
#include "afgn/image.hpp"
#include "afgn/ops.hpp"
#include "afgn/rng.hpp"
#include "afgn/tensor.hpp"

namespace afgn {

enum class AutoencoderLevel { high, low, non, custom };

inline std::string to_string(AutoencoderLevel level) {
  switch (level) {
    case AutoencoderLevel::high: return "high";
    case AutoencoderLevel::low: return "low";
    case AutoencoderLevel::non: return "non";
    case AutoencoderLevel::custom: return "custom";
  }
  return "?";
}

inline AutoencoderLevel parse_level(const std::string& s) {
  if (s == "high") return AutoencoderLevel::high;
  if (s == "low") return AutoencoderLevel::low;
  if (s == "non") return AutoencoderLevel::non;
  if (s == "custom") return AutoencoderLevel::custom;
  throw ValueError("unknown autoencoder level: " + s);
}

// One convolutional stage. Stride-2 stages use 4x4 kernels with pad 1 so a
// stage exactly halves (or doubles) even extents; stride-1 stages use 3x3
// with pad 1 and keep extents.
struct LayerSpec {
  bool transpose = false;
  int in_ch = 0;
  int out_ch = 0;
  int ksize = 0;
  int stride = 1;
  int pad = 0;
  bool relu_after = true;
};

struct AutoencoderSpec {
  AutoencoderLevel level = AutoencoderLevel::non;
  int stride2_depth = 0;  // t: stride-2 stages per side of the bottleneck
  int input_side = 64;
  int input_channels = 3;
  std::vector<int> encoder_channels;  // width after each encoder layer
  std::vector<int> decoder_channels;  // width after each decoder layer

  // 6 stride-2 stages each way; bottleneck side is S/64.
  static AutoencoderSpec high(int side) {
    AutoencoderSpec s;
    s.level = AutoencoderLevel::high;
    s.stride2_depth = 6;
    s.input_side = side;
    s.encoder_channels = {16, 32, 64, 64, 64, 64};
    s.decoder_channels = {64, 64, 64, 32, 16, 3};
    return s;
  }

  // One stride-2 stage each way; bottleneck side is S/2.
  static AutoencoderSpec low(int side) {
    AutoencoderSpec s;
    s.level = AutoencoderLevel::low;
    s.stride2_depth = 1;
    s.input_side = side;
    s.encoder_channels = {32};
    s.decoder_channels = {3};
    return s;
  }

  // Stride-1 everywhere: 2 conv layers in, 2 conv layers out, no
  // resampling at any stage.
  static AutoencoderSpec non(int side) {
    AutoencoderSpec s;
    s.level = AutoencoderLevel::non;
    s.stride2_depth = 0;
    s.input_side = side;
    s.encoder_channels = {32, 32};
    s.decoder_channels = {32, 3};
    return s;
  }

  // Arbitrary stride-2 depth with caller-chosen widths; used for
  // held-out "unseen generator" corpora.
  static AutoencoderSpec custom(int side, int depth, std::vector<int> enc,
                                std::vector<int> dec) {
    AutoencoderSpec s;
    s.level = AutoencoderLevel::custom;
    s.stride2_depth = depth;
    s.input_side = side;
    s.encoder_channels = std::move(enc);
    s.decoder_channels = std::move(dec);
    return s;
  }

  int bottleneck_side() const { return input_side >> stride2_depth; }

  void validate() const {
    if (input_side < 8)
      throw ConfigError("autoencoder input side must be >= 8, got " +
                        std::to_string(input_side));
    if (level == AutoencoderLevel::high && stride2_depth != 6)
      throw ConfigError("level=high requires stride2_depth 6");
    if (level == AutoencoderLevel::low && stride2_depth != 1)
      throw ConfigError("level=low requires stride2_depth 1");
    if (level == AutoencoderLevel::non && stride2_depth != 0)
      throw ConfigError("level=non requires stride2_depth 0");
    if (stride2_depth > 0) {
      int div = 1 << stride2_depth;
      if (input_side % div != 0)
        throw ConfigError("input side " + std::to_string(input_side) +
                          " must be divisible by 2^" +
                          std::to_string(stride2_depth) + " = " +
                          std::to_string(div));
      if (static_cast<int>(encoder_channels.size()) != stride2_depth ||
          static_cast<int>(decoder_channels.size()) != stride2_depth)
        throw ConfigError("channel plan must list one width per stride-2 "
                          "stage");
    } else {
      if (encoder_channels.empty() || decoder_channels.empty())
        throw ConfigError("channel plan must be non-empty");
    }
    if (decoder_channels.back() != input_channels)
      throw ConfigError("decoder must end at " +
                        std::to_string(input_channels) + " channels");
  }

  std::vector<LayerSpec> layers() const {
    std::vector<LayerSpec> out;
    int ch = input_channels;
    if (stride2_depth > 0) {
      for (int w : encoder_channels) {
        out.push_back({false, ch, w, 4, 2, 1, true});
        ch = w;
      }
      for (size_t i = 0; i < decoder_channels.size(); ++i) {
        bool last = i + 1 == decoder_channels.size();
        out.push_back({true, ch, decoder_channels[i], 4, 2, 1, !last});
        ch = decoder_channels[i];
      }
    } else {
      for (int w : encoder_channels) {
        out.push_back({false, ch, w, 3, 1, 1, true});
        ch = w;
      }
      for (size_t i = 0; i < decoder_channels.size(); ++i) {
        bool last = i + 1 == decoder_channels.size();
        out.push_back({false, ch, decoder_channels[i], 3, 1, 1, !last});
        ch = decoder_channels[i];
      }
    }
    return out;
  }
};

template <typename T = float>
struct AutoencoderModel {
  AutoencoderSpec spec;
  std::vector<LayerSpec> layers;
  std::vector<Tensor<T>> weights;
  std::vector<Tensor<T>> biases;
  int epochs_seen = 0;
  double final_loss = 0.0;

  std::vector<Tensor<T>> parameters() {
    std::vector<Tensor<T>> params;
    for (auto& w : weights) params.push_back(w);
    for (auto& b : biases) params.push_back(b);
    return params;
  }

  // Full reconstruction pass; builds the graph when gradients are enabled.
  Tensor<T> forward(const Tensor<T>& x) const {
    Tensor<T> h = x;
    for (size_t i = 0; i < layers.size(); ++i) {
      const LayerSpec& l = layers[i];
      h = l.transpose ? conv2d_transpose(h, weights[i], l.stride, l.pad)
                      : conv2d(h, weights[i], l.stride, l.pad);
      h = bias_add(h, biases[i]);
      if (l.relu_after) h = relu(h);
    }
    return h;
  }
};

namespace detail {

template <typename T>
Tensor<T> kaiming_uniform(std::vector<size_t> shape, size_t fan_in, Rng& rng) {
  double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  Tensor<T> t(shape);
  for (T& v : t.values())
    v = static_cast<T>(rng.uniform(-bound, bound));
  t.set_requires_grad(true);
  return t;
}

}  // namespace detail

// Deterministic per (spec, seed); Kaiming-uniform weights, zero biases.
template <typename T = float>
AutoencoderModel<T> build_autoencoder(const AutoencoderSpec& spec,
                                      uint64_t seed) {
  spec.validate();
  AutoencoderModel<T> model;
  model.spec = spec;
  model.layers = spec.layers();
  Rng rng = Rng(seed).child(0xAE);
  for (size_t i = 0; i < model.layers.size(); ++i) {
    const LayerSpec& l = model.layers[i];
    size_t fan_in = static_cast<size_t>(l.in_ch) * l.ksize * l.ksize;
    std::vector<size_t> wshape =
        l.transpose
            ? std::vector<size_t>{static_cast<size_t>(l.in_ch),
                                  static_cast<size_t>(l.out_ch),
                                  static_cast<size_t>(l.ksize),
                                  static_cast<size_t>(l.ksize)}
            : std::vector<size_t>{static_cast<size_t>(l.out_ch),
                                  static_cast<size_t>(l.in_ch),
                                  static_cast<size_t>(l.ksize),
                                  static_cast<size_t>(l.ksize)};
    Rng layer_rng = rng.child(i);
    model.weights.push_back(
        detail::kaiming_uniform<T>(std::move(wshape), fan_in, layer_rng));
    Tensor<T> b({static_cast<size_t>(l.out_ch)});
    b.set_requires_grad(true);
    model.biases.push_back(std::move(b));
  }
  return model;
}

// Stacks records [first, last) into a [N,C,S,S] tensor.
template <typename T>
Tensor<T> stack_images(std::span<const Image* const> images) {
  const Image& first = *images[0];
  size_t per = first.data.size();
  std::vector<T> data(images.size() * per);
  for (size_t n = 0; n < images.size(); ++n) {
    const Image& img = *images[n];
    if (img.data.size() != per || img.width != first.width ||
        img.channels != first.channels)
      throw ShapeError("stack_images: image " + std::to_string(n) +
                       " has mismatched shape");
    for (size_t i = 0; i < per; ++i)
      data[n * per + i] = static_cast<T>(img.data[i]);
  }
  return Tensor<T>::from({images.size(), static_cast<size_t>(first.channels),
                          static_cast<size_t>(first.height),
                          static_cast<size_t>(first.width)},
                         std::move(data));
}

struct GeneratorTrainConfig {
  int epochs = 10;
  int batch_size = 16;
  double lr = 1e-4;
  uint64_t seed = 0;
};

struct TrainingCurve {
  std::vector<double> epoch_loss;
};

// Trains with the per-element mean-squared reconstruction loss on real
// images only; any non-real record breaks the self-supervision contract
// and is rejected.
template <typename T = float>
TrainingCurve train_autoencoder(AutoencoderModel<T>& model,
                                std::span<const ImageRecord> corpus,
                                const GeneratorTrainConfig& cfg) {
  if (corpus.empty())
    throw ValueError("train_autoencoder: empty corpus");
  if (cfg.epochs < 1) throw ValueError("train_autoencoder: epochs must be >= 1");
  if (cfg.batch_size < 1)
    throw ValueError("train_autoencoder: batch size must be >= 1");
  const int side = model.spec.input_side;
  for (const auto& rec : corpus) {
    if (rec.tag != SourceTag::real)
      throw ValueError("train_autoencoder: record '" + rec.id +
                       "' is tagged " + to_string(rec.tag) +
                       "; generator training accepts real images only");
    if (rec.image.width != side || rec.image.height != side ||
        rec.image.channels != model.spec.input_channels)
      throw ShapeError("train_autoencoder: record '" + rec.id +
                       "' is not " + std::to_string(side) + "x" +
                       std::to_string(side));
    for (float v : rec.image.data)
      if (v < 0.0f || v > 1.0f)
        throw ValueError("train_autoencoder: record '" + rec.id +
                         "' has pixels outside [0,1]");
  }

  Adam<T> opt(model.parameters(), cfg.lr);
  Rng order_rng = Rng(cfg.seed).child(0x7A);
  TrainingCurve curve;
  const size_t n = corpus.size();
  std::vector<size_t> order(n);
  for (size_t i = 0; i < n; ++i) order[i] = i;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    order_rng.shuffle(order);
    double loss_sum = 0.0;
    for (size_t begin = 0; begin < n; begin += cfg.batch_size) {
      size_t end = std::min(n, begin + cfg.batch_size);
      std::vector<const Image*> batch;
      batch.reserve(end - begin);
      for (size_t i = begin; i < end; ++i)
        batch.push_back(&corpus[order[i]].image);
      Tensor<T> x = stack_images<T>(batch);
      Tensor<T> loss = mse_loss(model.forward(x), x);
      opt.zero_grad();
      loss.backward();
      opt.step();
      loss_sum += static_cast<double>(loss.item()) *
                  static_cast<double>(end - begin);
    }
    curve.epoch_loss.push_back(loss_sum / static_cast<double>(n));
  }
  for (auto& w : model.weights)
    if (!w.all_finite())
      throw ValueError("train_autoencoder: non-finite parameters after "
                       "training (diverged)");
  model.epochs_seen += cfg.epochs;
  model.final_loss = curve.epoch_loss.back();
  return curve;
}

// Same-shape reconstruction, clamped to [0,1].
template <typename T = float>
Image reconstruct(const AutoencoderModel<T>& model, const Image& input) {
  if (input.width != model.spec.input_side ||
      input.height != model.spec.input_side ||
      input.channels != model.spec.input_channels)
    throw ShapeError("reconstruct: input " + std::to_string(input.width) +
                     "x" + std::to_string(input.height) + "x" +
                     std::to_string(input.channels) + " does not match spec " +
                     std::to_string(model.spec.input_side) + "x" +
                     std::to_string(model.spec.input_side) + "x" +
                     std::to_string(model.spec.input_channels));
  NoGradGuard guard;
  const Image* one[] = {&input};
  Tensor<T> x = stack_images<T>(std::span<const Image* const>(one, 1));
  Tensor<T> y = model.forward(x);
  Image out(input.width, input.height, input.channels);
  std::span<const T> vals = y.values();
  for (size_t i = 0; i < out.data.size(); ++i)
    out.data[i] = static_cast<float>(vals[i]);
  out.clamp01();
  return out;
}

inline SourceTag tag_for_level(AutoencoderLevel level) {
  switch (level) {
    case AutoencoderLevel::high: return SourceTag::fp_high;
    case AutoencoderLevel::low: return SourceTag::fp_low;
    case AutoencoderLevel::non: return SourceTag::fp_non;
    case AutoencoderLevel::custom: return SourceTag::external_fake;
  }
  return SourceTag::external_fake;
}

// Reconstructs a corpus through one generator; outputs carry the
// generator's provenance tag and the source image id.
template <typename T = float>
std::vector<ImageRecord> reconstruct_tagged(const AutoencoderModel<T>& model,
                                            std::span<const ImageRecord> corpus) {
  NoGradGuard guard;
  SourceTag tag = tag_for_level(model.spec.level);
  std::vector<ImageRecord> out(corpus.size());
  constexpr size_t kChunk = 16;
  for (size_t begin = 0; begin < corpus.size(); begin += kChunk) {
    size_t end = std::min(corpus.size(), begin + kChunk);
    std::vector<const Image*> batch;
    for (size_t i = begin; i < end; ++i) batch.push_back(&corpus[i].image);
    Tensor<T> y = model.forward(stack_images<T>(batch));
    size_t per = corpus[begin].image.data.size();
    std::span<const T> vals = y.values();
    for (size_t i = begin; i < end; ++i) {
      ImageRecord& rec = out[i];
      rec.tag = tag;
      rec.source_id = corpus[i].id;
      rec.id = fingerprint_file_stem(tag, corpus[i].id);
      rec.image = Image(corpus[i].image.width, corpus[i].image.height,
                        corpus[i].image.channels);
      const T* src = vals.data() + (i - begin) * per;
      for (size_t j = 0; j < per; ++j)
        rec.image.data[j] = static_cast<float>(src[j]);
      rec.image.clamp01();
    }
  }
  return out;
}

// All three generators over the corpus: 3 x |corpus| tagged reconstructions,
// grouped by generator in (high, low, non) order.
template <typename T = float>
std::vector<ImageRecord> reconstruct_corpus(
    const AutoencoderModel<T>& g_high, const AutoencoderModel<T>& g_low,
    const AutoencoderModel<T>& g_non, std::span<const ImageRecord> corpus) {
  const AutoencoderModel<T>* models[3] = {&g_high, &g_low, &g_non};
  for (const auto* m : models)
    if (m->spec.input_side != g_high.spec.input_side ||
        m->spec.input_channels != g_high.spec.input_channels)
      throw ValueError("reconstruct_corpus: generator input sides disagree");
  std::vector<ImageRecord> out;
  out.reserve(corpus.size() * 3);
  for (const auto* m : models) {
    auto part = reconstruct_tagged(*m, corpus);
    for (auto& rec : part) out.push_back(std::move(rec));
  }
  return out;
}

// -- persistence ------------------------------------------------------------

inline constexpr float kCheckpointKindAutoencoder = 0.0f;
inline constexpr float kCheckpointKindDetector = 1.0f;

template <typename T = float>
void save_autoencoder(const AutoencoderModel<T>& model,
                      const std::string& path) {
  std::vector<NamedTensor> ts;
  ts.push_back(NamedTensor::scalar("meta/kind", kCheckpointKindAutoencoder));
  ts.push_back(NamedTensor::scalar(
      "meta/level", static_cast<float>(static_cast<int>(model.spec.level))));
  ts.push_back(NamedTensor::scalar(
      "meta/stride2_depth", static_cast<float>(model.spec.stride2_depth)));
  ts.push_back(NamedTensor::scalar(
      "meta/side", static_cast<float>(model.spec.input_side)));
  ts.push_back(NamedTensor::scalar(
      "meta/channels", static_cast<float>(model.spec.input_channels)));
  ts.push_back(NamedTensor::scalar("meta/epochs_seen",
                                   static_cast<float>(model.epochs_seen)));
  ts.push_back(NamedTensor::scalar("meta/final_loss",
                                   static_cast<float>(model.final_loss)));
  std::vector<float> enc(model.spec.encoder_channels.begin(),
                         model.spec.encoder_channels.end());
  std::vector<float> dec(model.spec.decoder_channels.begin(),
                         model.spec.decoder_channels.end());
  ts.push_back(NamedTensor::vec("meta/encoder_channels", std::move(enc)));
  ts.push_back(NamedTensor::vec("meta/decoder_channels", std::move(dec)));
  for (size_t i = 0; i < model.layers.size(); ++i) {
    const auto& w = model.weights[i];
    const auto& b = model.biases[i];
    NamedTensor wt{"layer" + std::to_string(i) + "/w", w.shape(), {}};
    wt.data.assign(w.values().begin(), w.values().end());
    NamedTensor bt{"layer" + std::to_string(i) + "/b", b.shape(), {}};
    bt.data.assign(b.values().begin(), b.values().end());
    ts.push_back(std::move(wt));
    ts.push_back(std::move(bt));
  }
  write_checkpoint(path, ts);
}

template <typename T = float>
AutoencoderModel<T> load_autoencoder(const std::string& path) {
  auto ts = read_checkpoint(path);
  if (meta_scalar(ts, "meta/kind", path) != kCheckpointKindAutoencoder)
    throw IoError(path + ": checkpoint does not hold an autoencoder");
  AutoencoderSpec spec;
  spec.level = static_cast<AutoencoderLevel>(
      static_cast<int>(meta_scalar(ts, "meta/level", path)));
  spec.stride2_depth =
      static_cast<int>(meta_scalar(ts, "meta/stride2_depth", path));
  spec.input_side = static_cast<int>(meta_scalar(ts, "meta/side", path));
  spec.input_channels =
      static_cast<int>(meta_scalar(ts, "meta/channels", path));
  for (float v : require_tensor(ts, "meta/encoder_channels", path).data)
    spec.encoder_channels.push_back(static_cast<int>(v));
  for (float v : require_tensor(ts, "meta/decoder_channels", path).data)
    spec.decoder_channels.push_back(static_cast<int>(v));

  AutoencoderModel<T> model = build_autoencoder<T>(spec, 0);
  model.epochs_seen =
      static_cast<int>(meta_scalar(ts, "meta/epochs_seen", path));
  model.final_loss = meta_scalar(ts, "meta/final_loss", path);
  for (size_t i = 0; i < model.layers.size(); ++i) {
    const NamedTensor& wt =
        require_tensor(ts, "layer" + std::to_string(i) + "/w", path);
    const NamedTensor& bt =
        require_tensor(ts, "layer" + std::to_string(i) + "/b", path);
    if (wt.shape != model.weights[i].shape() ||
        bt.shape != model.biases[i].shape())
      throw IoError(path + ": layer " + std::to_string(i) +
                    " shape mismatch against declared spec");
    std::copy(wt.data.begin(), wt.data.end(),
              model.weights[i].values().begin());
    std::copy(bt.data.begin(), bt.data.end(),
              model.biases[i].values().begin());
  }
  return model;
}

}  // namespace afgn
