#pragma once

// Power spectra on the positive-frequency interval I_L+ and the spectrum
// generators used by the experiments. Values are variances per bin, so the
// process variance is simply the sum of the entries.

#include <algorithm>
#include <cmath>

#include "wbfm/common.hpp"
#include "wbfm/rng.hpp"

namespace wbfm::model {

// Nonnegative spectral weights over I_L+ = [0, pos_hi]; vanishing at DC and,
// for even L, at Nyquist.
struct PowerSpectrum {
  rvec values;  // length pos_hi + 1 = floor(L/2) + 1
  int L = 0;
};

inline void validate(const PowerSpectrum& s) {
  const int Lp = s.L / 2 + 1;
  if (s.L <= 0 || static_cast<int>(s.values.size()) != Lp)
    throw config_error("PowerSpectrum: values must cover I_L+ (floor(L/2)+1 bins)");
  if (s.values[0] != 0.0) throw config_error("PowerSpectrum: S[0] must vanish");
  if (s.L % 2 == 0 && s.values[Lp - 1] != 0.0)
    throw config_error("PowerSpectrum: S[L/2] must vanish for even L");
  for (double v : s.values)
    if (!(v >= 0.0)) throw config_error("PowerSpectrum: entries must be nonnegative");
}

inline double total_power(const PowerSpectrum& s) {
  double acc = 0.0;
  for (double v : s.values) acc += v;
  return acc;
}

// Spectrum extended to the full L-bin grid (zero outside I_L+).
inline rvec full_grid(const PowerSpectrum& s) {
  rvec out(s.L, 0.0);
  for (size_t k = 0; k < s.values.size(); ++k) out[k] = s.values[k];
  return out;
}

inline PowerSpectrum normalize_mass(PowerSpectrum s, double mass = 1.0) {
  double tot = total_power(s);
  if (!(tot > 0.0)) throw config_error("PowerSpectrum: zero total power");
  for (double& v : s.values) v *= mass / tot;
  return s;
}

// Raised-cosine band: S(k) = (1 + cos(2 pi (k - center)/width))/2 inside
// |k - center| <= width/2, unit total mass.
inline PowerSpectrum raised_cosine_spectrum(int L, double center, double width) {
  PowerSpectrum s;
  s.L = L;
  s.values.assign(L / 2 + 1, 0.0);
  for (int k = 0; k <= L / 2; ++k)
    if (std::abs(k - center) <= width / 2.0)
      s.values[k] = 0.5 * (1.0 + std::cos(2.0 * pi * (k - center) / width));
  s.values[0] = 0.0;
  if (L % 2 == 0) s.values[L / 2] = 0.0;
  return normalize_mass(std::move(s));
}

// Smoothed-random band: raised-cosine envelope times the square of a
// Gaussian-smoothed uniform field (floor 0.15), unit total mass.
inline PowerSpectrum smoothed_random_spectrum(int L, double center, double width, double smooth,
                                              std::uint64_t seed) {
  const int Lp = L / 2 + 1;
  Rng rng(seed);
  rvec u(Lp);
  for (double& v : u) v = rng.uniform();
  const int h = static_cast<int>(std::ceil(4.0 * smooth));
  rvec kern(2 * h + 1);
  double ks = 0.0;
  for (int j = -h; j <= h; ++j) ks += kern[j + h] = std::exp(-0.5 * sq(j / smooth));
  PowerSpectrum s;
  s.L = L;
  s.values.assign(Lp, 0.0);
  for (int k = 0; k < Lp; ++k) {
    double env = 0.0;
    if (std::abs(k - center) <= width / 2.0)
      env = 0.5 * (1.0 + std::cos(2.0 * pi * (k - center) / width));
    if (env == 0.0) continue;
    double ru = 0.0, wsum = 0.0;  // truncated kernel average over valid lags
    for (int j = -h; j <= h; ++j) {
      int kk = k + j;
      if (kk < 0 || kk >= Lp) continue;
      ru += kern[j + h] * u[kk];
      wsum += kern[j + h];
    }
    ru /= wsum > 0.0 ? wsum : ks;
    s.values[k] = env * (0.15 + ru * ru);
  }
  s.values[0] = 0.0;
  if (L % 2 == 0) s.values[Lp - 1] = 0.0;
  return normalize_mass(std::move(s));
}

// Multiband line spectrum: n_lines Gaussian lines of width line_w bins at
// stratified, jittered positions across [center - width/2, center + width/2],
// amplitude-jittered, under a raised-cosine envelope; unit total mass. The
// layout seed is part of the configuration (one fixed band per experiment),
// not per-realization randomness.
inline PowerSpectrum multiband_spectrum(int L, double center = 700.0, double width = 600.0,
                                        int n_lines = 12, double line_w = 2.0,
                                        double amp_jitter = 0.35, double pos_jitter = 0.25,
                                        std::uint64_t seed = 12345) {
  const int Lp = L / 2 + 1;
  Rng rng(seed);
  PowerSpectrum s;
  s.L = L;
  s.values.assign(Lp, 0.0);
  const double lo = center - width / 2.0;
  const double spacing = width / n_lines;
  for (int i = 0; i < n_lines; ++i) {
    double pos = lo + (i + 0.5) * spacing + rng.uniform(-pos_jitter, pos_jitter) * spacing;
    double amp = std::max(0.2, 1.0 + amp_jitter * rng.gaussian());
    for (int k = 0; k < Lp; ++k) s.values[k] += amp * std::exp(-0.5 * sq((k - pos) / line_w));
  }
  for (int k = 0; k < Lp; ++k) {
    double x = std::clamp((k - center) / width, -0.5, 0.5);
    s.values[k] *= 0.5 * (1.0 + std::cos(2.0 * pi * x));
  }
  s.values[0] = 0.0;
  if (L % 2 == 0) s.values[Lp - 1] = 0.0;
  return normalize_mass(std::move(s));
}

// Noise level for a target SNR: sigma0^2 = total_power / 10^(snr_db/10).
inline double sigma_from_snr(const PowerSpectrum& s, double snr_db) {
  return std::sqrt(total_power(s) / std::pow(10.0, snr_db / 10.0));
}

}  // namespace wbfm::model
