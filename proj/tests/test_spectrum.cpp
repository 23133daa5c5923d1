// Power spectra: invariants and generators, plus the Welch / transform-
// marginal estimators with their resolution kernels and the band-averaged
// error metric.

#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "wbfm/model.hpp"
#include "wbfm/rng.hpp"
#include "wbfm/spectrum.hpp"
#include "wbfm/spectrum_est.hpp"
#include "wbfm/tf.hpp"

using namespace wbfm;
using Catch::Approx;

// ---------------------------------------------------------------------------
// invariants and generators

TEST_CASE("spectrum validation enforces support and sign rules") {
  model::PowerSpectrum S;
  S.L = 16;
  S.values.assign(9, 0.1);
  S.values[0] = 0.0;
  S.values[8] = 0.0;
  CHECK_NOTHROW(model::validate(S));
  S.values[0] = 0.5;
  CHECK_THROWS_AS(model::validate(S), config_error);
  S.values[0] = 0.0;
  S.values[8] = 0.5;  // Nyquist mass illegal for even L
  CHECK_THROWS_AS(model::validate(S), config_error);
  S.values[8] = 0.0;
  S.values[4] = -0.1;
  CHECK_THROWS_AS(model::validate(S), config_error);
  S.values.pop_back();
  CHECK_THROWS_AS(model::validate(S), config_error);
}

TEST_CASE("generators produce valid unit-mass spectra") {
  const int L = 4096;
  for (const model::PowerSpectrum& S :
       {model::raised_cosine_spectrum(L, 700.0, 600.0),
        model::smoothed_random_spectrum(L, 700.0, 600.0, 8.0, 5),
        model::multiband_spectrum(L)}) {
    CHECK_NOTHROW(model::validate(S));
    CHECK(model::total_power(S) == Approx(1.0));
  }
}

TEST_CASE("multiband generator is deterministic and confined to its band") {
  const int L = 4096;
  const model::PowerSpectrum S1 = model::multiband_spectrum(L, 700.0, 600.0);
  const model::PowerSpectrum S2 = model::multiband_spectrum(L, 700.0, 600.0);
  for (size_t k = 0; k < S1.values.size(); ++k) CHECK(S1.values[k] == S2.values[k]);
  for (size_t k = 0; k < S1.values.size(); ++k)
    if (k < 360 || k > 1040) CHECK(S1.values[k] < 1e-6 * 1.0);
}

TEST_CASE("full grid places the one-sided weights on positive bins only") {
  model::PowerSpectrum S;
  S.L = 16;
  S.values.assign(9, 0.0);
  S.values[3] = 2.5;
  const rvec full = model::full_grid(S);
  REQUIRE(full.size() == 16);
  CHECK(full[3] == 2.5);
  for (int k = 0; k < 16; ++k)
    if (k != 3) CHECK(full[k] == 0.0);
}

TEST_CASE("sigma_from_snr matches the definition") {
  model::PowerSpectrum S;
  S.L = 16;
  S.values.assign(9, 0.0);
  S.values[4] = 4.0;
  CHECK(model::sigma_from_snr(S, 20.0) == Approx(std::sqrt(4.0 / 100.0)));
  CHECK(model::sigma_from_snr(S, 0.0) == Approx(2.0));
}

// ---------------------------------------------------------------------------
// smoothing and convolution helpers

TEST_CASE("circular smoothing preserves mass and handles wrap") {
  rvec x(16, 0.0);
  x[0] = 1.0;
  const rvec k = est::gaussian_kernel(1.5);
  const rvec y = est::circular_smooth(x, k);
  double mass = 0.0;
  for (double v : y) mass += v;
  CHECK(mass == Approx(1.0));
  CHECK(y[1] == Approx(y[15]));  // symmetric spill across the wrap
}

TEST_CASE("full circular convolution against a direct evaluation") {
  Rng rng(4);
  rvec x(32), k(32, 0.0);
  for (double& v : x) v = rng.uniform();
  k[0] = 0.5;
  k[1] = 0.3;
  k[31] = 0.2;
  const rvec y = est::circular_convolve_full(x, k);
  for (int i = 0; i < 32; ++i) {
    double direct = 0.0;
    for (int j = 0; j < 32; ++j) direct += x[j] * k[imod(i - j, 32)];
    CHECK(y[i] == Approx(direct).margin(1e-12));
  }
}

// ---------------------------------------------------------------------------
// estimators on known signals

TEST_CASE("welch estimate of a pure tone peaks at the tone bin") {
  const int L = 4096, k0 = 700;
  cvec U(L);
  for (int t = 0; t < L; ++t) U[t] = std::exp(cplx(0.0, 2.0 * pi * k0 * t / L));
  est::WelchParams wp;
  const rvec P = est::welch_full(U, wp);
  int kmax = 0;
  for (int k = 1; k < L; ++k)
    if (P[k] > P[kmax]) kmax = k;
  CHECK(kmax == k0);
  // mass calibration: total estimate equals mean power (= 1 for the tone)
  double mass = 0.0;
  for (double v : P) mass += v;
  CHECK(mass == Approx(1.0).epsilon(1e-6));
}

TEST_CASE("marginal estimate of a pure tone peaks at the tone bin") {
  const int L = 1024, k0 = 300;
  const tf::GaborSystem sys = tf::make_system(L, 16, 8, tf::WindowKind::gauss, 64.0);
  cvec U(L);
  for (int t = 0; t < L; ++t) U[t] = std::exp(cplx(0.0, 2.0 * pi * k0 * t / L));
  const rvec P = est::marginal_full(U, sys);
  int kmax = 0;
  for (int k = 1; k < L; ++k)
    if (P[k] > P[kmax]) kmax = k;
  CHECK(kmax == k0);
}

TEST_CASE("estimate_spectrum returns a valid one-sided spectrum") {
  const int L = 1024;
  const tf::GaborSystem sys = tf::make_system(L, 16, 8, tf::WindowKind::gauss, 64.0);
  const model::PowerSpectrum S = model::raised_cosine_spectrum(L, 200.0, 150.0);
  const cvec Z = model::synthesize_stationary(S, 11);
  for (auto method : {est::SpectrumMethod::welch, est::SpectrumMethod::marginal}) {
    est::WelchParams wp;
    wp.segment = 256;
    wp.hop = 64;
    const model::PowerSpectrum Shat = est::estimate_spectrum(Z, sys, method, wp);
    CHECK_NOTHROW(model::validate(Shat));
    CHECK(Shat.L == L);
  }
}

TEST_CASE("welch parameters are validated") {
  est::WelchParams wp;
  wp.segment = 4096;  // longer than the signal below
  CHECK_THROWS_AS(est::welch_full(cvec(1024, 1.0), wp), config_error);
  wp.segment = 256;
  wp.hop = 100;  // does not divide L
  CHECK_THROWS_AS(est::welch_full(cvec(1024, 1.0), wp), config_error);
}

// ---------------------------------------------------------------------------
// band-averaged error of recovered spectra (ensemble, both methods)

TEST_CASE("band error of the exact spectrum is zero") {
  const int L = 256;
  const model::PowerSpectrum S = model::raised_cosine_spectrum(L, 60.0, 40.0);
  const rvec full = model::full_grid(S);
  rvec kernel(L, 0.0);
  kernel[0] = 1.0;  // identity resolution kernel
  CHECK(est::band_error(full, full, kernel, 0) == Approx(0.0).margin(1e-12));
}

TEST_CASE("band error sees a constant track offset through the kappa roll") {
  const int L = 256, kappa = 9;
  const model::PowerSpectrum S = model::raised_cosine_spectrum(L, 60.0, 40.0);
  const rvec full = model::full_grid(S);
  rvec shifted(L);
  // a track offset by kappa demodulates the spectrum down by kappa bins
  for (int k = 0; k < L; ++k) shifted[k] = full[imod(k + kappa, L)];
  rvec kernel(L, 0.0);
  kernel[0] = 1.0;
  CHECK(est::band_error(shifted, full, kernel, kappa) == Approx(0.0).margin(1e-12));
  CHECK(est::band_error(shifted, full, kernel, 0) > 0.5);
}

TEST_CASE("single-realization recovery: ensemble band error stays under 10%") {
  // 50 stationary realizations at the working lattice; both estimators'
  // band-averaged error (6 sub-bands) must stay below 10% on average
  const int L = 4096;
  const tf::GaborSystem sys = tf::make_system(L, 32, 16, tf::WindowKind::gauss, 128.0);
  const model::PowerSpectrum S = model::multiband_spectrum(L);
  const rvec full = model::full_grid(S);
  const rvec wk = est::welch_kernel(L, 1024);
  const rvec mk = est::marginal_kernel(sys);
  double acc_w = 0.0, acc_m = 0.0;
  const int reps = 50;
  for (int d = 0; d < reps; ++d) {
    const cvec Z = model::synthesize_stationary(S, 6000 + d);
    const model::PowerSpectrum Sw =
        est::estimate_spectrum(Z, sys, est::SpectrumMethod::welch, est::WelchParams{});
    const model::PowerSpectrum Sm =
        est::estimate_spectrum(Z, sys, est::SpectrumMethod::marginal, est::WelchParams{});
    acc_w += est::band_error(model::full_grid(Sw), full, wk, 0, 6);
    acc_m += est::band_error(model::full_grid(Sm), full, mk, 0, 6);
  }
  CHECK(acc_w / reps < 0.10);
  CHECK(acc_m / reps < 0.10);
}
