#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "afgn/errors.hpp"

namespace afgn {

// Every hyperparameter, ablation switch, and seed of a run. A config plus
// the input data fully determines all outputs.
struct RunConfig {
  int image_side = 64;
  int batch_size = 16;
  double lr_generator = 1e-4;
  double lr_detector = 1e-4;
  int epochs_generator = 10;
  int epochs_detector = 5;
  uint64_t seed = 0;
  bool use_high = true;
  bool use_low = true;
  bool use_non = true;
  bool use_frequency = true;  // off = pixel-domain detector
  bool use_mixup = true;
  double mixup_alpha = 1.0;
  double sampler_weight = 3.0;  // per-item draw weight of a real image
  int threads = 0;              // 0 = hardware default

  void validate() const {
    if (image_side < 8)
      throw ConfigError("image_side must be >= 8, got " +
                        std::to_string(image_side));
    if (use_high && image_side % 64 != 0)
      throw ConfigError("image_side must be divisible by 64 when use_high "
                        "is on, got " +
                        std::to_string(image_side));
    if (use_low && image_side % 2 != 0)
      throw ConfigError("image_side must be even when use_low is on, got " +
                        std::to_string(image_side));
    if (batch_size < 2)
      throw ConfigError("batch_size must be >= 2, got " +
                        std::to_string(batch_size));
    if (lr_generator <= 0 || lr_detector <= 0)
      throw ConfigError("learning rates must be positive");
    if (epochs_generator < 1 || epochs_detector < 1)
      throw ConfigError("epoch counts must be >= 1");
    if (mixup_alpha <= 0)
      throw ConfigError("mixup_alpha must be positive, got " +
                        std::to_string(mixup_alpha));
    if (sampler_weight <= 0)
      throw ConfigError("sampler_weight must be positive, got " +
                        std::to_string(sampler_weight));
    if (threads < 0) throw ConfigError("threads must be >= 0");
    if (!(use_high || use_low || use_non))
      throw ConfigError("at least one generator must stay enabled");
  }
};

namespace detail {

inline bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1" || v == "on") return true;
  if (v == "false" || v == "0" || v == "off") return false;
  throw ConfigError("bad boolean for " + key + ": " + v);
}

template <typename T>
T parse_number(const std::string& v, const std::string& key) {
  std::istringstream is(v);
  T out;
  is >> out;
  if (!is || !is.eof()) throw ConfigError("bad value for " + key + ": " + v);
  return out;
}

}  // namespace detail

inline void apply_config_entry(RunConfig& cfg, const std::string& key,
                               const std::string& value) {
  using detail::parse_bool;
  using detail::parse_number;
  if (key == "image_side") cfg.image_side = parse_number<int>(value, key);
  else if (key == "batch_size") cfg.batch_size = parse_number<int>(value, key);
  else if (key == "lr_generator")
    cfg.lr_generator = parse_number<double>(value, key);
  else if (key == "lr_detector")
    cfg.lr_detector = parse_number<double>(value, key);
  else if (key == "epochs_generator")
    cfg.epochs_generator = parse_number<int>(value, key);
  else if (key == "epochs_detector")
    cfg.epochs_detector = parse_number<int>(value, key);
  else if (key == "seed") cfg.seed = parse_number<uint64_t>(value, key);
  else if (key == "use_high") cfg.use_high = parse_bool(value, key);
  else if (key == "use_low") cfg.use_low = parse_bool(value, key);
  else if (key == "use_non") cfg.use_non = parse_bool(value, key);
  else if (key == "use_frequency") cfg.use_frequency = parse_bool(value, key);
  else if (key == "use_mixup") cfg.use_mixup = parse_bool(value, key);
  else if (key == "mixup_alpha")
    cfg.mixup_alpha = parse_number<double>(value, key);
  else if (key == "sampler_weight")
    cfg.sampler_weight = parse_number<double>(value, key);
  else if (key == "threads") cfg.threads = parse_number<int>(value, key);
  else throw ConfigError("unknown config key: " + key);
}

// Flat key=value file; '#' starts a comment; unknown keys are rejected.
inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path);
  RunConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    size_t first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path + ":" + std::to_string(lineno) +
                        ": expected key=value");
    auto trim = [](std::string s) {
      size_t b = s.find_first_not_of(" \t\r");
      size_t e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    apply_config_entry(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return cfg;
}

}  // namespace afgn
