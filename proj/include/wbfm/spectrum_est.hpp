#pragma once

// Spectrum estimation from the demodulated signal: circular Welch
// averaging, Gabor-transform marginalization, the seam-masked smoothed
// periodogram used inside the estimation loop, and the kernel-matched
// band-error metric used to judge recovery quality.

#include <algorithm>
#include <cmath>

#include "wbfm/common.hpp"
#include "wbfm/spectrum.hpp"
#include "wbfm/tf.hpp"

namespace wbfm::est {

// Symmetric circular convolution with a small centered kernel
// (kern[j + h], j in [-h, h]).
inline rvec circular_smooth(const rvec& x, const rvec& kern) {
  const int L = static_cast<int>(x.size());
  const int h = (static_cast<int>(kern.size()) - 1) / 2;
  rvec out(L, 0.0);
  for (int k = 0; k < L; ++k) {
    double acc = 0.0;
    for (int j = -h; j <= h; ++j) acc += kern[j + h] * x[imod(k - j, L)];
    out[k] = acc;
  }
  return out;
}

inline rvec gaussian_kernel(double sigma) {
  const int h = static_cast<int>(std::ceil(4.0 * sigma));
  rvec kern(2 * h + 1);
  double s = 0.0;
  for (int j = -h; j <= h; ++j) s += kern[j + h] = std::exp(-0.5 * sq(j / sigma));
  for (double& v : kern) v /= s;
  return kern;
}

// Full-grid circular convolution (kernel given on the full L grid with its
// peak at index 0), via FFT.
inline rvec circular_convolve_full(const rvec& x, const rvec& kernel) {
  const int L = static_cast<int>(x.size());
  cvec xc(L), kc(L);
  for (int i = 0; i < L; ++i) {
    xc[i] = x[i];
    kc[i] = kernel[i];
  }
  cvec X = Fft::forward(xc), K = Fft::forward(kc);
  for (int i = 0; i < L; ++i) X[i] *= K[i];
  cvec y = Fft::inverse(X);
  rvec out(L);
  for (int i = 0; i < L; ++i) out[i] = y[i].real();
  return out;
}

// numpy-style symmetric Hann taper of `n` points (endpoints zero);
// the segment taper of the Welch estimator.
inline rvec hann_taper(int n) {
  rvec w(n);
  for (int i = 0; i < n; ++i) w[i] = 0.5 - 0.5 * std::cos(2.0 * pi * i / (n - 1));
  return w;
}

struct WelchParams {
  int segment = 1024;
  int hop = 256;
};

// Circular Welch periodogram on the full L-bin grid: overlapping tapered
// segments (wrapping around the boundary), each zero-padded to length L,
// averaged, then mass-calibrated so sum_k P[k] = mean |U|^2.
inline rvec welch_full(const cvec& U, const WelchParams& wp) {
  const int L = static_cast<int>(U.size());
  if (wp.segment <= 1 || wp.segment > L) throw config_error("welch: segment length out of range");
  if (wp.hop <= 0 || L % wp.hop != 0) throw config_error("welch: hop must divide L");
  const rvec win = hann_taper(wp.segment);
  rvec P(L, 0.0);
  cvec buf(L), out(L);
  int nseg = 0;
  for (int start = 0; start < L; start += wp.hop) {
    std::fill(buf.begin(), buf.end(), cplx(0.0));
    for (int i = 0; i < wp.segment; ++i) buf[i] = U[imod(start + i, L)] * win[i];
    Fft::forward(buf.data(), out.data(), L);
    for (int k = 0; k < L; ++k) P[k] += std::norm(out[k]);
    ++nseg;
  }
  double psum = 0.0, power = 0.0;
  for (int k = 0; k < L; ++k) psum += P[k] /= nseg;
  for (const cplx& u : U) power += std::norm(u);
  power /= L;
  if (psum > 0.0)
    for (double& v : P) v *= power / psum;
  return P;
}

// Spectral blur kernel of the Welch estimator (peak at index 0).
inline rvec welch_kernel(int L, int segment) {
  rvec win = hann_taper(segment);
  cvec buf(L, 0.0);
  for (int i = 0; i < segment; ++i) buf[i] = win[i];
  cvec W = Fft::forward(buf);
  rvec K(L);
  double s = 0.0;
  for (int k = 0; k < L; ++k) s += K[k] = std::norm(W[k]);
  for (double& v : K) v /= s;
  return K;
}

// Marginalization of the Gabor transform: mean_n |STFT(k, na)|^2 with the
// window-energy normalization 1/(L ||g||^2), on the full fine grid.
inline rvec marginal_full(const cvec& U, const tf::GaborSystem& sys) {
  Eigen::MatrixXcd F = tf::stft_all(U, sys.window.g, sys.a);
  const int L = sys.L, N = sys.N;
  rvec P(L, 0.0);
  for (int n = 0; n < N; ++n)
    for (int k = 0; k < L; ++k) P[k] += std::norm(F(k, n));
  const double scale = 1.0 / (static_cast<double>(N) * L * sys.window.energy);
  for (double& v : P) v *= scale;
  return P;
}

// Spectral blur kernel of the marginalization (|ghat|^2, peak at 0).
inline rvec marginal_kernel(const tf::GaborSystem& sys) {
  rvec K(sys.L);
  double s = 0.0;
  for (int k = 0; k < sys.L; ++k) s += K[k] = std::norm(sys.window.ghat[k]);
  for (double& v : K) v /= s;
  return K;
}

enum class SpectrumMethod { welch, marginal };

// The estimate_spectrum operation: full-grid estimate restricted to I_L+
// with DC/Nyquist zeroed to satisfy the PowerSpectrum invariants.
inline model::PowerSpectrum estimate_spectrum(const cvec& U, const tf::GaborSystem& sys,
                                              SpectrumMethod method,
                                              const WelchParams& wp = WelchParams{}) {
  rvec P = method == SpectrumMethod::welch ? welch_full(U, wp) : marginal_full(U, sys);
  model::PowerSpectrum s;
  s.L = sys.L;
  s.values.assign(sys.L / 2 + 1, 0.0);
  for (int k = 1; k < sys.L / 2; ++k) s.values[k] = std::max(0.0, P[k]);
  return s;
}

// Band-averaged relative error of a full-grid estimate against the
// generator spectrum, honoring both the estimator's resolution and the
// additive track indeterminacy:
//   - truth is rolled down by kappa bins (a constant gamma' offset shifts
//     the demodulated spectrum) and blurred by the estimator's kernel;
//   - the comparison band is where the blurred truth exceeds 2% of its
//     peak, split into nb equal sub-bands;
//   - error = mean over sub-bands of |mean(S_hat) - mean(T)| / mean(T),
//     so single-realization periodogram noise averages down inside bands.
inline double band_error(const rvec& S_hat, const rvec& S_true_full, const rvec& kernel, int kappa,
                         int nb = 3) {
  const int L = static_cast<int>(S_hat.size());
  rvec rolled(L);
  for (int k = 0; k < L; ++k) rolled[k] = S_true_full[imod(k + kappa, L)];
  rvec T = circular_convolve_full(rolled, kernel);
  double tmax = *std::max_element(T.begin(), T.end());
  int kmin = -1, kmax = -1;
  for (int k = 0; k < L; ++k)
    if (T[k] > 0.02 * tmax) {
      if (kmin < 0) kmin = k;
      kmax = k + 1;
    }
  if (kmin < 0) throw numeric_error("band_error: empty comparison band");
  double err = 0.0;
  for (int i = 0; i < nb; ++i) {
    const int lo = kmin + static_cast<int>(std::llround(static_cast<double>(i) * (kmax - kmin) / nb));
    const int hi = kmin + static_cast<int>(std::llround(static_cast<double>(i + 1) * (kmax - kmin) / nb));
    double th = 0.0, eh = 0.0;
    for (int k = lo; k < hi; ++k) {
      th += T[k];
      eh += S_hat[k];
    }
    err += std::abs(eh - th) / th;
  }
  return err / nb;
}

}  // namespace wbfm::est
