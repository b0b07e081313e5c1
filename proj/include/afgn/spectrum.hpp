#pragma once

#include <cmath>
#include <complex>
#include <limits>
#include <span>
#include <vector>

#include "afgn/errors.hpp"
#include "afgn/image.hpp"

namespace afgn {

namespace detail {

constexpr double kTau = 6.283185307179586476925286766559;

inline bool is_pow2(size_t n) { return n != 0 && (n & (n - 1)) == 0; }

// In-place iterative radix-2 FFT (forward, unnormalized).
inline void fft_pow2(std::complex<double>* a, size_t n) {
  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (size_t len = 2; len <= n; len <<= 1) {
    double ang = -kTau / static_cast<double>(len);
    std::complex<double> wl(std::cos(ang), std::sin(ang));
    for (size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (size_t k = 0; k < len / 2; ++k) {
        std::complex<double> u = a[i + k];
        std::complex<double> v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wl;
      }
    }
  }
}

// Direct O(n^2) DFT for non power-of-two lines.
inline void dft_direct(std::complex<double>* a, size_t n) {
  std::vector<std::complex<double>> out(n);
  for (size_t k = 0; k < n; ++k) {
    std::complex<double> acc(0.0, 0.0);
    for (size_t m = 0; m < n; ++m) {
      double ang = -kTau * static_cast<double>(k * m % n) / n;
      acc += a[m] * std::complex<double>(std::cos(ang), std::sin(ang));
    }
    out[k] = acc;
  }
  for (size_t k = 0; k < n; ++k) a[k] = out[k];
}

inline void transform_line(std::complex<double>* a, size_t n) {
  if (is_pow2(n))
    fft_pow2(a, n);
  else
    dft_direct(a, n);
}

}  // namespace detail

// Unnormalized 2D forward DFT of a real S x S grid (row-column
// decomposition; power-of-two lines take the FFT path). Satisfies
// Parseval with factor 1/S^2.
inline std::vector<std::complex<double>> dft2d(std::span<const float> grid,
                                               int side) {
  if (side < 2) throw ValueError("dft2d: side must be >= 2");
  const size_t s = static_cast<size_t>(side);
  if (grid.size() != s * s)
    throw ShapeError("dft2d: grid has " + std::to_string(grid.size()) +
                     " values, not a square " + std::to_string(side) + "x" +
                     std::to_string(side));
  std::vector<std::complex<double>> f(s * s);
  for (size_t i = 0; i < s * s; ++i) f[i] = grid[i];

  std::vector<std::complex<double>> line(s);
  for (size_t y = 0; y < s; ++y) detail::transform_line(&f[y * s], s);
  for (size_t x = 0; x < s; ++x) {
    for (size_t y = 0; y < s; ++y) line[y] = f[y * s + x];
    detail::transform_line(line.data(), s);
    for (size_t y = 0; y < s; ++y) f[y * s + x] = line[y];
  }
  return f;
}

// Inverse 2D DFT (normalized by 1/S^2), returning the real part.
inline std::vector<double> idft2d_real(std::span<const std::complex<double>> f,
                                       int side) {
  const size_t s = static_cast<size_t>(side);
  std::vector<std::complex<double>> conj(s * s);
  for (size_t i = 0; i < s * s; ++i) conj[i] = std::conj(f[i]);
  std::vector<std::complex<double>> line(s);
  for (size_t y = 0; y < s; ++y) detail::transform_line(&conj[y * s], s);
  for (size_t x = 0; x < s; ++x) {
    for (size_t y = 0; y < s; ++y) line[y] = conj[y * s + x];
    detail::transform_line(line.data(), s);
    for (size_t y = 0; y < s; ++y) conj[y * s + x] = line[y];
  }
  std::vector<double> out(s * s);
  const double norm = 1.0 / static_cast<double>(s * s);
  for (size_t i = 0; i < s * s; ++i) out[i] = conj[i].real() * norm;
  return out;
}

// Per-channel fftshifted log-magnitude spectrum. `data` holds each channel
// min-max normalized to [0,1] (a constant channel maps to all zeros);
// `log_mag` keeps the pre-normalization log(1+|F|) grid for energy measures.
struct SpectrumImage {
  int side = 0;
  int channels = 0;
  std::vector<float> data;
  std::vector<float> log_mag;

  float at(int c, int y, int x) const {
    return data[(static_cast<size_t>(c) * side + y) * side + x];
  }
};

inline SpectrumImage log_magnitude_spectrum(const Image& img) {
  if (!img.square())
    throw ShapeError("log_magnitude_spectrum: image must be square, got " +
                     std::to_string(img.width) + "x" +
                     std::to_string(img.height));
  const int s = img.width;
  const int half = s / 2;
  SpectrumImage spec;
  spec.side = s;
  spec.channels = img.channels;
  spec.data.resize(static_cast<size_t>(s) * s * img.channels);
  spec.log_mag.resize(spec.data.size());
  for (int c = 0; c < img.channels; ++c) {
    std::span<const float> chan(img.data.data() + static_cast<size_t>(c) * s * s,
                                static_cast<size_t>(s) * s);
    auto f = dft2d(chan, s);
    float* lm = spec.log_mag.data() + static_cast<size_t>(c) * s * s;
    float lo = std::numeric_limits<float>::max();
    float hi = std::numeric_limits<float>::lowest();
    for (int y = 0; y < s; ++y) {
      for (int x = 0; x < s; ++x) {
        // fftshift: DC lands on the central cell.
        int sy = (y + half) % s;
        int sx = (x + half) % s;
        float v = static_cast<float>(
            std::log1p(std::abs(f[static_cast<size_t>(y) * s + x])));
        lm[static_cast<size_t>(sy) * s + sx] = v;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
    }
    float* out = spec.data.data() + static_cast<size_t>(c) * s * s;
    const float range = hi - lo;
    if (range <= 0.0f) {
      std::fill(out, out + static_cast<size_t>(s) * s, 0.0f);
    } else {
      for (size_t i = 0; i < static_cast<size_t>(s) * s; ++i)
        out[i] = (lm[i] - lo) / range;
    }
  }
  return spec;
}

// Mean normalized magnitude per integer-radius ring about the DC bin,
// averaged over channels; length floor(S/2).
inline std::vector<double> radial_profile(const SpectrumImage& spec) {
  const int s = spec.side;
  const int cy = s / 2, cx = s / 2;
  const int nbins = s / 2;
  std::vector<double> sums(nbins, 0.0);
  std::vector<size_t> counts(nbins, 0);
  for (int c = 0; c < spec.channels; ++c)
    for (int y = 0; y < s; ++y)
      for (int x = 0; x < s; ++x) {
        double dy = y - cy, dx = x - cx;
        int r = static_cast<int>(std::lround(std::sqrt(dy * dy + dx * dx)));
        if (r >= nbins) continue;
        sums[r] += spec.at(c, y, x);
        ++counts[r];
      }
  std::vector<double> profile(nbins, 0.0);
  for (int r = 0; r < nbins; ++r)
    if (counts[r] > 0) profile[r] = sums[r] / static_cast<double>(counts[r]);
  return profile;
}

// Fraction of the pre-normalization log-magnitude energy beyond radius S/4.
inline double fingerprint_energy_score(const SpectrumImage& spec) {
  const int s = spec.side;
  const int cy = s / 2, cx = s / 2;
  const double cutoff = s / 4.0;
  double total = 0.0, high = 0.0;
  const float* lm = spec.log_mag.data();
  for (int c = 0; c < spec.channels; ++c)
    for (int y = 0; y < s; ++y)
      for (int x = 0; x < s; ++x) {
        double v = lm[(static_cast<size_t>(c) * s + y) * s + x];
        double e = v * v;
        total += e;
        double dy = y - cy, dx = x - cx;
        if (std::sqrt(dy * dy + dx * dx) > cutoff) high += e;
      }
  return total > 0.0 ? high / total : 0.0;
}

// Normalized spectrum as a plain image (detector input / heatmap export).
inline Image spectrum_as_image(const SpectrumImage& spec) {
  Image img(spec.side, spec.side, spec.channels);
  img.data = spec.data;
  return img;
}

}  // namespace afgn
