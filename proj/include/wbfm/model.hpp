#pragma once

// The signal model: stationary circular Gaussian synthesis from a power
// spectrum, analytic signals, smooth frequency modulation, additive real
// white noise, and the remainder bound of the fixed-time slice
// approximation.
//
// Model: Y_t = Z_t e^{2 i pi gamma(t)/L} + N_t, with Z the analytic
// stationary process (DFT supported on I_L+) and gamma a slow phase track
// in cycle units (instantaneous frequency gamma'(t) in DFT bins).

#include <algorithm>
#include <cmath>
#include <limits>

#include "wbfm/common.hpp"
#include "wbfm/rng.hpp"
#include "wbfm/spectrum.hpp"
#include "wbfm/tf.hpp"

namespace wbfm::model {

// Z = IDFT(b), b[nu] = L sqrt(S[nu]) xi_nu on I_L+, xi iid standard circular
// complex Gaussians. Ensemble covariance is then exactly
// C_Z(t,s) = sum_nu S[nu] e^{2 i pi nu (t-s)/L} with zero relation matrix.
inline cvec synthesize_stationary(const PowerSpectrum& spec, std::uint64_t seed) {
  validate(spec);
  const int L = spec.L;
  Rng rng(seed);
  cvec b(L, 0.0);
  for (size_t nu = 0; nu < spec.values.size(); ++nu) {
    cplx xi = rng.cgaussian();  // drawn for every bin so the stream layout is fixed
    b[nu] = L * std::sqrt(spec.values[nu]) * xi;
  }
  return Fft::inverse(b);
}

// One-sided spectrum construction: doubles the interior positive bins,
// keeps DC/Nyquist, zeroes the negative half. Violated model assumptions
// (energy at DC or Nyquist) warn rather than fail.
inline cvec analytic_signal(const rvec& x_r) {
  const int L = static_cast<int>(x_r.size());
  cvec x(L);
  for (int t = 0; t < L; ++t) x[t] = x_r[t];
  cvec X = Fft::forward(x);
  double scale = 0.0;
  for (int k = 0; k < L; ++k) scale = std::max(scale, std::abs(X[k]));
  const int nyq = L % 2 == 0 ? L / 2 : -1;
  if (scale > 0.0) {
    if (std::abs(X[0]) > 1e-9 * scale) warn("analytic_signal: input has energy at DC");
    if (nyq > 0 && std::abs(X[nyq]) > 1e-9 * scale)
      warn("analytic_signal: input has energy at Nyquist");
  }
  const int pos_hi = L % 2 == 0 ? L / 2 : (L - 1) / 2;
  cvec Y(L, 0.0);
  Y[0] = X[0];
  for (int k = 1; k <= pos_hi; ++k) Y[k] = k == nyq ? X[k] : 2.0 * X[k];
  return Fft::inverse(Y);
}

struct ModulationLaw {
  rvec gamma;              // length L, cycle units; gamma[0] = 0
  rvec gamma_prime;        // length L, DFT bins; forward difference of gamma
  double gamma_second_sup; // sup of the discrete second difference
};

// gamma[t] = sum_{s<t} gamma'[s], anchored at gamma[0] = 0.
inline rvec integrate_prime(const rvec& gp) {
  rvec g(gp.size(), 0.0);
  for (size_t t = 1; t < gp.size(); ++t) g[t] = g[t - 1] + gp[t - 1];
  return g;
}

enum class ModulationKind { constant, linear_chirp, sine_fm };

struct ModulationParams {
  double k0 = 0.0;     // base frequency offset (bins)
  double rate = 0.0;   // linear_chirp: gamma'(t) = k0 + rate * t
  double amp = 0.0;    // sine_fm amplitude (bins)
  double freq = 1.0;   // sine_fm cycles over the signal length
  double phase = 0.0;  // sine_fm initial phase (radians)
};

inline ModulationLaw make_modulation(ModulationKind kind, int L, const ModulationParams& p) {
  ModulationLaw law;
  law.gamma_prime.resize(L);
  for (int t = 0; t < L; ++t) {
    switch (kind) {
      case ModulationKind::constant:
        law.gamma_prime[t] = p.k0;
        break;
      case ModulationKind::linear_chirp:
        law.gamma_prime[t] = p.k0 + p.rate * t;
        break;
      case ModulationKind::sine_fm:
        law.gamma_prime[t] = p.k0 + p.amp * std::sin(2.0 * pi * p.freq * t / L + p.phase);
        break;
    }
  }
  for (double v : law.gamma_prime)
    if (v < 0.0 || v > L - 1.0)
      throw config_error("make_modulation: gamma' exits the representable range [0, L-1]");
  switch (kind) {
    case ModulationKind::constant:
      law.gamma_second_sup = 0.0;
      break;
    case ModulationKind::linear_chirp:
      law.gamma_second_sup = std::abs(p.rate);
      break;
    case ModulationKind::sine_fm:
      // exact sup of the discrete difference of the sine term
      law.gamma_second_sup = 2.0 * std::abs(p.amp * std::sin(pi * p.freq / L));
      break;
  }
  law.gamma = integrate_prime(law.gamma_prime);
  return law;
}

struct ModelSignal {
  cvec Z;              // stationary analytic part
  cvec Y;              // modulated observation
  rvec Y_r;            // Re(Y)
  double noise_sigma;  // sigma_0
  double sigma_z2;     // process variance = total spectral mass
};

// Y = Z e^{2 i pi gamma/L} + N with N real white Gaussian of variance
// sigma0^2 (added to the real part; the model observation is complex).
// sigma_z2, when nonnegative, records the ensemble variance sum_k S[k] of
// the generator; otherwise the realization's mean power is stored.
inline ModelSignal synthesize_observation(cvec Z, const ModulationLaw& law, double sigma0,
                                          std::uint64_t seed, double sigma_z2 = -1.0) {
  const int L = static_cast<int>(Z.size());
  if (static_cast<int>(law.gamma.size()) != L)
    throw config_error("synthesize_observation: modulation length != L");
  if (sigma0 < 0.0) throw config_error("synthesize_observation: sigma0 must be >= 0");
  ModelSignal out;
  out.noise_sigma = sigma0;
  out.sigma_z2 = 0.0;
  out.Y.resize(L);
  out.Y_r.resize(L);
  Rng rng(seed);
  for (int t = 0; t < L; ++t) {
    double ph = 2.0 * pi * law.gamma[t] / L;
    cplx y = Z[t] * cplx(std::cos(ph), std::sin(ph));
    if (sigma0 > 0.0) y += sigma0 * rng.gaussian();
    out.Y[t] = y;
    out.Y_r[t] = y.real();
  }
  out.Z = std::move(Z);
  if (sigma_z2 >= 0.0) {
    out.sigma_z2 = sigma_z2;
  } else {
    for (const cplx& z : out.Z) out.sigma_z2 += std::norm(z);
    out.sigma_z2 /= L;
  }
  return out;
}

struct RemainderBound {
  double T;      // linearization half-width sqrt(L / (pi ||gamma''||))
  double mu1;    // window l1 mass outside [-T, T]
  double mu2;    // second moment of |g| inside [-T, T]
  double bound;  // sigma_Z^2 (pi e / L ||gamma''|| mu2 + 2 mu1)^2
};

// Slice-approximation remainder bound; gamma''sup = 0 degenerates to
// T = infinity, mu1 = 0 and a zero bound (linear modulation is exact).
inline RemainderBound remainder_bound(const tf::GaborSystem& sys, double sigma_z2,
                                      double gamma_second_sup) {
  if (gamma_second_sup < 0.0) throw config_error("remainder_bound: gamma''sup must be >= 0");
  const int L = sys.L;
  RemainderBound rb;
  rb.T = gamma_second_sup == 0.0 ? std::numeric_limits<double>::infinity()
                                 : std::sqrt(L / (pi * gamma_second_sup));
  rb.mu1 = 0.0;
  rb.mu2 = 0.0;
  for (int t = sys.indexing.full_lo; t <= sys.indexing.full_hi; ++t) {
    double av = std::abs(sys.window.g[imod(t, L)]);
    if (std::abs(t) <= rb.T)
      rb.mu2 += static_cast<double>(t) * t * av;
    else
      rb.mu1 += av;
  }
  double e = std::exp(1.0);
  rb.bound = sigma_z2 * sq(pi * e / L * gamma_second_sup * rb.mu2 + 2.0 * rb.mu1);
  return rb;
}

// Reference builder for the fixed-time slice approximation: the shifted
// slice of the stationary part,
//   G[m] = e^{2 i pi gamma(na)/L} sum_t Z_t conj(g[t-na]) e^{-2 i pi (m - delta) tau / M},
// with tau the centered representative of t-na (the window-centered
// summation of the underlying linearization; for integer b*delta the
// centering is immaterial). For a lattice offset c the caller folds it into
// delta = (gamma'(na) - c)/b. The noise slice is NOT included; callers add
// the Gabor slice of the same noise realization to compare against the
// observation's transform.
inline cvec shifted_slice(const cvec& Z, const tf::GaborSystem& sys, int n, double delta,
                          double gamma_na) {
  const int L = sys.L, M = sys.M;
  const int na = n * sys.a;
  cvec out(M);
  double ph0 = 2.0 * pi * gamma_na / L;
  cplx pref(std::cos(ph0), std::sin(ph0));
  for (int m = 0; m < M; ++m) {
    cplx acc = 0.0;
    for (int t = 0; t < L; ++t) {
      int tau = centered_index(t - na, L);
      double phase = -2.0 * pi * (m - delta) * tau / M;
      acc += Z[t] * std::conj(sys.window.g[imod(tau, L)]) * cplx(std::cos(phase), std::sin(phase));
    }
    out[m] = pref * acc;
  }
  return out;
}

}  // namespace wbfm::model
