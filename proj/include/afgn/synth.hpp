#pragma once

#include <cmath>
#include <complex>
#include <cstdio>
#include <string>
#include <vector>

#include "afgn/dataset.hpp"
#include "afgn/image.hpp"
#include "afgn/parallel.hpp"
#include "afgn/rng.hpp"
#include "afgn/spectrum.hpp"

namespace afgn {

namespace detail {

// Gaussian random field with a power-law radial spectrum, zero mean,
// unit-ish std. Gives the corpus its natural-image-like 1/f decay.
inline std::vector<double> power_law_field(int side, double alpha, Rng& rng) {
  const size_t s = static_cast<size_t>(side);
  std::vector<std::complex<double>> f(s * s);
  for (size_t y = 0; y < s; ++y) {
    for (size_t x = 0; x < s; ++x) {
      // distance to nearest alias of the DC bin
      double fy = std::min<double>(y, s - y);
      double fx = std::min<double>(x, s - x);
      double r = std::sqrt(fy * fy + fx * fx);
      double amp = r == 0.0 ? 0.0 : std::pow(r, -alpha);
      f[y * s + x] = std::complex<double>(rng.normal(), rng.normal()) * amp;
    }
  }
  std::vector<double> field = idft2d_real(f, side);
  double mean = 0.0, var = 0.0;
  for (double v : field) mean += v;
  mean /= static_cast<double>(field.size());
  for (double v : field) var += (v - mean) * (v - mean);
  var /= static_cast<double>(field.size());
  double inv = var > 1e-12 ? 1.0 / std::sqrt(var) : 1.0;
  for (double& v : field) v = (v - mean) * inv;
  return field;
}

inline double smoothstep(double e0, double e1, double x) {
  double t = (x - e0) / (e1 - e0);
  t = t < 0.0 ? 0.0 : (t > 1.0 ? 1.0 : t);
  return t * t * (3.0 - 2.0 * t);
}

inline Image synth_image(int side, Rng rng) {
  Image img(side, side, 3);

  double alpha = rng.uniform(1.1, 2.2);
  std::vector<double> luma = power_law_field(side, alpha, rng);
  std::vector<double> chroma = power_law_field(side, alpha + 0.4, rng);

  double base[3], tint[3];
  for (int c = 0; c < 3; ++c) base[c] = rng.uniform(0.25, 0.75);
  for (int c = 0; c < 3; ++c) tint[c] = rng.uniform(-0.08, 0.08);
  double luma_gain = rng.uniform(0.10, 0.22);

  // smooth illumination gradient
  double gx = rng.uniform(-0.25, 0.25);
  double gy = rng.uniform(-0.25, 0.25);

  for (int y = 0; y < side; ++y)
    for (int x = 0; x < side; ++x) {
      double g = gx * (static_cast<double>(x) / side - 0.5) +
                 gy * (static_cast<double>(y) / side - 0.5);
      double l = luma[static_cast<size_t>(y) * side + x];
      double ch = chroma[static_cast<size_t>(y) * side + x];
      for (int c = 0; c < 3; ++c)
        img.at(c, y, x) =
            static_cast<float>(base[c] + g + luma_gain * l + tint[c] * ch);
    }

  // anti-aliased ellipses and axis-aligned soft rectangles
  int nshapes = 1 + static_cast<int>(rng.uniform_index(4));
  for (int si = 0; si < nshapes; ++si) {
    bool ellipse = rng.uniform() < 0.6;
    double cx = rng.uniform(0.1, 0.9) * side;
    double cy = rng.uniform(0.1, 0.9) * side;
    double ax = rng.uniform(0.06, 0.3) * side;
    double ay = rng.uniform(0.06, 0.3) * side;
    double color[3];
    for (int c = 0; c < 3; ++c) color[c] = rng.uniform(0.1, 0.9);
    double opacity = rng.uniform(0.5, 1.0);
    double edge = 1.2;  // px of soft edge
    for (int y = 0; y < side; ++y)
      for (int x = 0; x < side; ++x) {
        double cov;
        if (ellipse) {
          double dx = (x + 0.5 - cx) / ax, dy = (y + 0.5 - cy) / ay;
          double d = std::sqrt(dx * dx + dy * dy);
          // signed distance in px, approximated via the smaller axis
          double px_d = (d - 1.0) * std::min(ax, ay);
          cov = 1.0 - smoothstep(-edge, edge, px_d);
        } else {
          double dx = std::abs(x + 0.5 - cx) - ax;
          double dy = std::abs(y + 0.5 - cy) - ay;
          double px_d = std::max(dx, dy);
          cov = 1.0 - smoothstep(-edge, edge, px_d);
        }
        if (cov <= 0.0) continue;
        double a = cov * opacity;
        for (int c = 0; c < 3; ++c)
          img.at(c, y, x) =
              static_cast<float>(img.at(c, y, x) * (1.0 - a) + color[c] * a);
      }
  }

  // Keep the histogram non-degenerate under clamping: stretch around the
  // mean until the clamped result has enough contrast.
  for (int attempt = 0; attempt < 4; ++attempt) {
    Image clamped = img;
    clamped.clamp01();
    double mean = 0.0, var = 0.0;
    for (float v : clamped.data) mean += v;
    mean /= static_cast<double>(clamped.data.size());
    for (float v : clamped.data) var += (v - mean) * (v - mean);
    var /= static_cast<double>(clamped.data.size());
    if (std::sqrt(var) >= 0.04) {
      img = std::move(clamped);
      return img;
    }
    for (float& v : img.data)
      v = static_cast<float>(mean + (v - mean) * 1.8);
  }
  img.clamp01();
  return img;
}

}  // namespace detail

// Procedural stand-in for a corpus of real photographs: power-law random
// fields plus gradients and soft shapes, deterministic per seed.
inline std::vector<ImageRecord> synth_corpus(int n, int side, uint64_t seed) {
  if (n < 1) throw ValueError("synth_corpus: n must be >= 1");
  if (side < 8) throw ValueError("synth_corpus: side must be >= 8");
  std::vector<ImageRecord> records(static_cast<size_t>(n));
  Rng base(seed);
  parallel_for(static_cast<size_t>(n), [&](size_t i) {
    ImageRecord& rec = records[i];
    char idx[16];
    std::snprintf(idx, sizeof(idx), "%05zu", i);
    rec.id = "synth-" + std::to_string(seed) + "-" + idx;
    rec.tag = SourceTag::real;
    rec.image = detail::synth_image(side, base.child(i));
  });
  return records;
}

}  // namespace afgn
