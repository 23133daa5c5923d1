#pragma once

// Finite, periodic Fourier and Gabor analysis on frequency-shifted lattices.
//
// Conventions (inherited by every other header):
//   - all indexing is circular (mod L); there is no zero-padding anywhere;
//   - stft(x, g, m, n) = sum_t x[t] conj(g[t-n]) e^{-2 i pi m (t-n)/L},
//     i.e. the phase is referenced to the window position n;
//   - a Gabor system samples the STFT at (mb + c, na) for lattice offset
//     c in [0, b-1]; the b offsets tile the full STFT frequency grid.

#include <Eigen/Core>
#include <cmath>
#include <limits>

#include "wbfm/common.hpp"
#include "wbfm/fft.hpp"

namespace wbfm::tf {

// Integer frequency intervals I_L and I_L+ (parity-dependent bounds).
struct FrequencyIndexing {
  int L;
  int full_lo, full_hi;  // I_L  = [full_lo, full_hi]
  int pos_hi;            // I_L+ = [0, pos_hi]
};

inline FrequencyIndexing make_indexing(int L) {
  FrequencyIndexing ix;
  ix.L = L;
  if (L % 2 == 0) {
    ix.full_lo = 1 - L / 2;
    ix.full_hi = L / 2;
    ix.pos_hi = L / 2;
  } else {
    ix.full_lo = -(L - 1) / 2;
    ix.full_hi = (L - 1) / 2;
    ix.pos_hi = (L - 1) / 2;
  }
  return ix;
}

struct Window {
  cvec g;         // length L (real windows carry zero imaginary part)
  cvec ghat;      // DFT of g under the library convention
  double energy;  // ||g||_2^2
};

inline Window make_window_from_samples(cvec g) {
  Window w;
  w.energy = 0.0;
  for (const cplx& v : g) w.energy += std::norm(v);
  if (!(w.energy > 0.0)) throw config_error("window has zero energy");
  w.ghat = Fft::forward(g);
  w.g = std::move(g);
  return w;
}

enum class WindowKind { gauss, hann, rect };

// L-periodized window of the requested family, normalized to ||g||_2 = 1.
// `width` is the nominal time support in samples; gauss uses it as the
// Gaussian scale exp(-pi (t/width)^2), periodized over +-4 wraps.
inline Window make_window(WindowKind kind, int L, double width) {
  if (L < 4) throw config_error("make_window: L must be >= 4");
  if (!(width > 0.0)) throw config_error("make_window: width must be positive");
  rvec g(L, 0.0);
  for (int t = 0; t < L; ++t) {
    double tau = centered_index(t, L);
    switch (kind) {
      case WindowKind::gauss:
        for (int j = -4; j <= 4; ++j) g[t] += std::exp(-pi * sq((tau + j * L) / width));
        break;
      case WindowKind::hann:
        if (std::abs(tau) <= width / 2.0) g[t] = 0.5 * (1.0 + std::cos(2.0 * pi * tau / width));
        break;
      case WindowKind::rect:
        if (std::abs(tau) < width / 2.0 || tau == -width / 2.0) g[t] = 1.0;
        break;
    }
  }
  double e = 0.0;
  for (double v : g) e += v * v;
  if (!(e > 0.0)) throw config_error("make_window: empty support");
  double s = 1.0 / std::sqrt(e);
  cvec gc(L);
  for (int t = 0; t < L; ++t) gc[t] = g[t] * s;
  return make_window_from_samples(std::move(gc));
}

struct GaborSystem {
  int L, a, b;  // signal length, time hop, frequency stride
  int M, N;     // bins M = L/b, frames N = L/a
  Window window;
  FrequencyIndexing indexing;
  double kg;  // min_t sum_k |g[t + kM]|^2, cached invertibility diagnostic
};

// Brute-force evaluation of the K_g diagnostic (cheap: O(L b)).
inline double window_kg(const cvec& g, int L, int M, int b) {
  double kg = std::numeric_limits<double>::infinity();
  for (int t = 0; t < L; ++t) {
    double s = 0.0;
    for (int k = 0; k < b; ++k) s += std::norm(g[imod(t + k * M, L)]);
    kg = std::min(kg, s);
  }
  return kg;
}

inline GaborSystem make_system(int L, int a, int b, Window window) {
  if (L <= 0 || a <= 0 || b <= 0) throw config_error("make_system: L, a, b must be positive");
  if (L % a != 0) throw config_error("make_system: hop a must divide L");
  if (L % b != 0) throw config_error("make_system: stride b must divide L");
  if (static_cast<int>(window.g.size()) != L) throw config_error("make_system: window length != L");
  GaborSystem sys;
  sys.L = L;
  sys.a = a;
  sys.b = b;
  sys.M = L / b;
  sys.N = L / a;
  sys.indexing = make_indexing(L);
  sys.kg = window_kg(window.g, L, sys.M, b);
  sys.window = std::move(window);
  return sys;
}

inline GaborSystem make_system(int L, int a, int b, WindowKind kind, double width) {
  return make_system(L, a, b, make_window(kind, L, width));
}

// Forward / inverse DFT under the fixed convention (delegates to Fft).
inline cvec dft(const cvec& x) { return Fft::forward(x); }
inline cvec idft(const cvec& x) { return Fft::inverse(x); }

// Direct-summation STFT sample; the quadratic-time reference definition.
inline cplx stft(const cvec& x, const cvec& g, int m, int n) {
  const int L = static_cast<int>(x.size());
  cplx acc = 0.0;
  for (int t = 0; t < L; ++t) {
    int tau = t - n;
    double ph = -2.0 * pi * m * tau / L;
    acc += x[t] * std::conj(g[imod(tau, L)]) * cplx(std::cos(ph), std::sin(ph));
  }
  return acc;
}

// Full STFT on the frame grid via FFT: F(k, n) = stft(x, g, k, n*a) for all
// k in [0, L) and frames n. One length-L FFT per frame.
inline Eigen::MatrixXcd stft_frames(const cvec& x, const cvec& g, int a, const ivec& frames) {
  const int L = static_cast<int>(x.size());
  Eigen::MatrixXcd F(L, static_cast<Eigen::Index>(frames.size()));
  cvec y(L), Yh(L);
  for (size_t i = 0; i < frames.size(); ++i) {
    const int na = frames[i] * a;
    for (int t = 0; t < L; ++t) y[t] = x[imod(t + na, L)] * std::conj(g[t]);
    Fft::forward(y.data(), Yh.data(), L);
    for (int k = 0; k < L; ++k) F(k, static_cast<Eigen::Index>(i)) = Yh[k];
  }
  return F;
}

inline Eigen::MatrixXcd stft_all(const cvec& x, const cvec& g, int a) {
  const int L = static_cast<int>(x.size());
  const int N = L / a;
  ivec frames(N);
  for (int n = 0; n < N; ++n) frames[n] = n;
  return stft_frames(x, g, a, frames);
}

// Gabor coefficients at lattice offset c: an M x N matrix with
// [m][n] = stft(x, g, mb + c, na).
struct TFMatrix {
  Eigen::MatrixXcd coef;          // M x N
  const GaborSystem* system = nullptr;  // non-owning
  int offset_c = 0;
};

inline TFMatrix gabor_from_stft(const Eigen::MatrixXcd& F, const GaborSystem& sys, int c) {
  if (c < 0 || c >= sys.b) throw config_error("gabor: offset c outside [0, b-1]");
  TFMatrix tf;
  tf.coef.resize(sys.M, sys.N);
  for (int n = 0; n < sys.N; ++n)
    for (int m = 0; m < sys.M; ++m) tf.coef(m, n) = F(imod(m * sys.b + c, sys.L), n);
  tf.system = &sys;
  tf.offset_c = c;
  return tf;
}

inline TFMatrix gabor(const cvec& x, const GaborSystem& sys, int c) {
  if (static_cast<int>(x.size()) != sys.L) throw config_error("gabor: signal length != L");
  return gabor_from_stft(stft_all(x, sys.window.g, sys.a), sys, c);
}

}  // namespace wbfm::tf
