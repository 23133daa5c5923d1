// Slice covariances: model formulas against Monte-Carlo oracles, shift
// structure, empirical estimation, factorization, and the eigenvalue floor.

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <functional>

#include "wbfm/covariance.hpp"
#include "wbfm/model.hpp"
#include "wbfm/rng.hpp"
#include "wbfm/tf.hpp"

using namespace wbfm;
using Catch::Approx;

namespace {

// empirical covariance of the offset-c slice over ndraw independent draws
Eigen::MatrixXcd mc_slice_cov(const tf::GaborSystem& sys, int c, int ndraw,
                              const std::function<cvec(std::uint64_t)>& draw) {
  Eigen::MatrixXcd acc = Eigen::MatrixXcd::Zero(sys.M, sys.M);
  Eigen::VectorXcd v(sys.M);
  for (int d = 0; d < ndraw; ++d) {
    const cvec x = draw(static_cast<std::uint64_t>(d));
    const tf::TFMatrix G = tf::gabor(x, sys, c);
    for (int m = 0; m < sys.M; ++m) v(m) = G.coef(m, 0);  // frame 0: stationarity
    acc += v * v.adjoint();
  }
  return acc / static_cast<double>(ndraw);
}

}  // namespace

// ---------------------------------------------------------------------------
// noise covariance

TEST_CASE("noise covariance diagonal is sigma0^2 (unit-norm window)") {
  const tf::GaborSystem sys = tf::make_system(64, 8, 4, tf::WindowKind::gauss, 16.0);
  const cov::SliceCovariance C = cov::noise_cov(sys, 0.5);
  for (int m = 0; m < sys.M; ++m) CHECK(C.C(m, m).real() == Approx(0.25).margin(1e-12));
  CHECK(C.kind == cov::CovKind::model_noise);
}

TEST_CASE("noise covariance matches a direct double-sum evaluation") {
  const tf::GaborSystem sys = tf::make_system(32, 8, 4, tf::WindowKind::gauss, 10.0);
  const double sigma0 = 0.8;
  const cov::SliceCovariance C = cov::noise_cov(sys, sigma0);
  for (int m = 0; m < sys.M; ++m)
    for (int mp = 0; mp < sys.M; ++mp) {
      cplx direct = 0.0;
      for (int t = 0; t < sys.L; ++t)
        direct += std::norm(sys.window.g[t]) *
                  std::exp(cplx(0.0, -2.0 * pi * (m - mp) * sys.b * t / sys.L));
      direct *= sq(sigma0);
      CHECK(std::abs(C.C(m, mp) - direct) < 1e-10);
    }
}

TEST_CASE("noise covariance matches the white-noise Monte Carlo oracle") {
  // non-self-dual window (width != sqrt(L)) so the frequency- and
  // time-autocorrelation forms disagree and the oracle discriminates
  const tf::GaborSystem sys = tf::make_system(32, 8, 4, tf::WindowKind::gauss, 12.0);
  const double sigma0 = 0.5;
  const cov::SliceCovariance C = cov::noise_cov(sys, sigma0);
  const int ndraw = 20000;
  const Eigen::MatrixXcd emp = mc_slice_cov(sys, 1, ndraw, [&](std::uint64_t d) {
    Rng rng(900 + d);
    cvec x(sys.L);
    for (auto& v : x) v = sigma0 * rng.cgaussian();
    return x;
  });
  const double tol = 0.05 * C.C.diagonal().real().maxCoeff();
  CHECK((emp - C.C).cwiseAbs().maxCoeff() < tol);
}

TEST_CASE("noise covariance is offset-invariant and Hermitian") {
  const tf::GaborSystem sys = tf::make_system(32, 8, 4, tf::WindowKind::hann, 14.0);
  const cov::SliceCovariance C = cov::noise_cov(sys, 1.0);
  CHECK((C.C - C.C.adjoint()).cwiseAbs().maxCoeff() < 1e-12);
  // the formula depends only on m - m', never on c: circulant structure
  for (int m = 0; m < sys.M; ++m)
    for (int mp = 0; mp < sys.M; ++mp)
      CHECK(std::abs(C.C(m, mp) - C.C(imod(m + 1, sys.M), imod(mp + 1, sys.M))) < 1e-12);
}

// ---------------------------------------------------------------------------
// signal covariance

TEST_CASE("signal covariance diagonal carries the windowed spectral mass") {
  const tf::GaborSystem sys = tf::make_system(32, 8, 4, tf::WindowKind::gauss, 10.0);
  model::PowerSpectrum S;
  S.L = 32;
  S.values.assign(17, 0.0);
  S.values[8] = 1.0;  // single line at bin 8
  const cov::SliceCovariance C = cov::signal_cov(sys, S, 0);
  // C[m,m] = S[8] |ghat[8 - mb]|^2
  for (int m = 0; m < sys.M; ++m) {
    const double expect = std::norm(sys.window.ghat[imod(8 - m * sys.b, 32)]);
    CHECK(C.C(m, m).real() == Approx(expect).margin(1e-12));
  }
}

TEST_CASE("signal covariance matches the stationary-synthesis Monte Carlo oracle") {
  const tf::GaborSystem sys = tf::make_system(32, 8, 4, tf::WindowKind::gauss, 10.0);
  const model::PowerSpectrum S = model::raised_cosine_spectrum(32, 8.0, 8.0);
  for (int c : {0, 1}) {
    const cov::SliceCovariance C = cov::signal_cov(sys, S, c);
    const Eigen::MatrixXcd emp = mc_slice_cov(
        sys, c, 20000, [&](std::uint64_t d) { return model::synthesize_stationary(S, 300 + d); });
    const double tol = 0.05 * C.C.diagonal().real().maxCoeff();
    CHECK((emp - C.C).cwiseAbs().maxCoeff() < tol);
  }
}

TEST_CASE("rank-one window: impulse ghat makes signal covariance diagonal") {
  // rect window of width 1 has |ghat| = const: use instead a single-line
  // spectrum with impulse window in frequency: ghat[k] = delta would need
  // g = const; check that a constant window yields a diagonal covariance
  const int L = 16, b = 2;
  cvec g(L, 1.0);
  const tf::GaborSystem sys = tf::make_system(L, 4, b, tf::make_window_from_samples(g));
  const model::PowerSpectrum S = model::raised_cosine_spectrum(L, 4.0, 4.0);
  const cov::SliceCovariance C = cov::signal_cov(sys, S, 0);
  for (int m = 0; m < sys.M; ++m)
    for (int mp = 0; mp < sys.M; ++mp)
      if (m != mp) CHECK(std::abs(C.C(m, mp)) < 1e-10);
}

// ---------------------------------------------------------------------------
// shifted total covariance

TEST_CASE("zero shift reproduces signal plus noise") {
  const tf::GaborSystem sys = tf::make_system(32, 8, 4, tf::WindowKind::gauss, 10.0);
  const model::PowerSpectrum S = model::raised_cosine_spectrum(32, 8.0, 8.0);
  const cov::SliceCovariance Cs = cov::signal_cov(sys, S, 0);
  const cov::SliceCovariance Cn = cov::noise_cov(sys, 0.3);
  const cov::SliceCovariance Ct = cov::shifted_total_cov(Cs, Cn, 0);
  CHECK((Ct.C - (Cs.C + Cn.C)).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("shift by M is the identity on the signal part") {
  const tf::GaborSystem sys = tf::make_system(32, 8, 4, tf::WindowKind::gauss, 10.0);
  const model::PowerSpectrum S = model::raised_cosine_spectrum(32, 8.0, 8.0);
  const cov::SliceCovariance Cs = cov::signal_cov(sys, S, 0);
  const cov::SliceCovariance Cn = cov::noise_cov(sys, 0.3);
  const cov::SliceCovariance C0 = cov::shifted_total_cov(Cs, Cn, 0);
  const cov::SliceCovariance CM = cov::shifted_total_cov(Cs, Cn, sys.M);
  CHECK((C0.C - CM.C).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("shifted covariance equals covariance of the shifted slice model") {
  // MC oracle: slices of Z e^{2 i pi k t / L} at delta = k/b have covariance
  // shifted_total_cov(signal, noise, delta) for integer delta
  const int L = 32, b = 4, k = 8, delta = k / b;
  const tf::GaborSystem sys = tf::make_system(L, 8, b, tf::WindowKind::gauss, 10.0);
  const model::PowerSpectrum S = model::raised_cosine_spectrum(L, 8.0, 8.0);
  const cov::SliceCovariance Cs = cov::signal_cov(sys, S, 0);
  const cov::SliceCovariance Cn = cov::noise_cov(sys, 0.0);
  const cov::SliceCovariance Ct = cov::shifted_total_cov(Cs, Cn, delta);
  const Eigen::MatrixXcd emp = mc_slice_cov(sys, 0, 20000, [&](std::uint64_t d) {
    cvec Z = model::synthesize_stationary(S, 700 + d);
    for (int t = 0; t < L; ++t) Z[t] *= std::exp(cplx(0.0, 2.0 * pi * k * t / L));
    return Z;
  });
  const double tol = 0.05 * Ct.C.diagonal().real().maxCoeff();
  CHECK((emp - Ct.C).cwiseAbs().maxCoeff() < tol);
}

// ---------------------------------------------------------------------------
// empirical covariance

TEST_CASE("empirical covariance of identical frames is the rank-one outer product") {
  const tf::GaborSystem sys = tf::make_system(16, 4, 2, tf::WindowKind::gauss, 6.0);
  tf::TFMatrix tfm;
  tfm.system = &sys;
  tfm.offset_c = 0;
  Rng rng(5);
  Eigen::VectorXcd v(sys.M);
  for (int m = 0; m < sys.M; ++m) v(m) = rng.cgaussian();
  tfm.coef.resize(sys.M, sys.N);
  for (int n = 0; n < sys.N; ++n) tfm.coef.col(n) = v;
  const cov::SliceCovariance C = cov::empirical_slice_cov(tfm, 1e-6);
  const Eigen::MatrixXcd expect = v * v.adjoint();
  // up to the ridge on the diagonal
  CHECK((C.C - expect).cwiseAbs().maxCoeff() < 2e-6 * expect.real().trace());
}

TEST_CASE("empirical covariance converges to the model covariance") {
  const tf::GaborSystem sys = tf::make_system(32, 8, 4, tf::WindowKind::gauss, 10.0);
  const model::PowerSpectrum S = model::raised_cosine_spectrum(32, 8.0, 8.0);
  const cov::SliceCovariance Cs = cov::signal_cov(sys, S, 0);
  // aggregate many independent realizations' frames into one wide TFMatrix
  const int reps = 6000;
  tf::TFMatrix wide;
  wide.system = &sys;
  wide.offset_c = 0;
  wide.coef.resize(sys.M, reps);
  for (int d = 0; d < reps; ++d) {
    const cvec Z = model::synthesize_stationary(S, 40000 + d);
    const tf::TFMatrix G = tf::gabor(Z, sys, 0);
    wide.coef.col(d) = G.coef.col(0);
  }
  const cov::SliceCovariance C = cov::empirical_slice_cov(wide, 0.0);
  const double tol = 0.08 * Cs.C.diagonal().real().maxCoeff();
  CHECK((C.C - Cs.C).cwiseAbs().maxCoeff() < tol);
}

TEST_CASE("empirical covariance needs at least two frames") {
  const tf::GaborSystem sys = tf::make_system(16, 4, 2, tf::WindowKind::gauss, 6.0);
  tf::TFMatrix tfm;
  tfm.system = &sys;
  tfm.offset_c = 0;
  tfm.coef.resize(sys.M, 1);
  tfm.coef.setOnes();
  CHECK_THROWS_AS(cov::empirical_slice_cov(tfm, 1e-6), config_error);
}

TEST_CASE("rank-deficient empirical covariance without ridge fails to factor") {
  const tf::GaborSystem sys = tf::make_system(32, 8, 8, tf::WindowKind::gauss, 10.0);
  // one coefficient row identically zero: the sample covariance has an
  // exactly-zero pivot, so factorization must fail when no ridge is added
  tf::TFMatrix tfm;
  tfm.system = &sys;
  tfm.offset_c = 0;
  tfm.coef.resize(sys.M, sys.N);
  Rng rng(6);
  for (int m = 0; m < sys.M; ++m)
    for (int n = 0; n < sys.N; ++n) tfm.coef(m, n) = m == 2 ? cplx(0.0) : rng.cgaussian();
  CHECK_THROWS_AS(cov::empirical_slice_cov(tfm, 0.0), numeric_error);
  // with a ridge the same matrix factors fine
  CHECK_NOTHROW(cov::empirical_slice_cov(tfm, 1e-3));
}

// ---------------------------------------------------------------------------
// quadratic form and log-det

TEST_CASE("quad_form against identity and scaled identity") {
  cov::SliceCovariance sc;
  sc.C = Eigen::MatrixXcd::Identity(4, 4);
  cov::finalize(sc, 0.0);
  Eigen::VectorXcd v(4);
  v << cplx(1, 0), cplx(0, 1), cplx(1, 1), cplx(2, 0);
  CHECK(cov::quad_form(sc, v) == Approx(v.squaredNorm()));
  cov::SliceCovariance sc2;
  sc2.C = 2.0 * Eigen::MatrixXcd::Identity(4, 4);
  cov::finalize(sc2, 0.0);
  CHECK(cov::quad_form(sc2, v) == Approx(0.5 * v.squaredNorm()));
}

TEST_CASE("quad_form equals the dense-inverse quadratic form") {
  const tf::GaborSystem sys = tf::make_system(32, 8, 4, tf::WindowKind::gauss, 10.0);
  const model::PowerSpectrum S = model::raised_cosine_spectrum(32, 8.0, 8.0);
  cov::SliceCovariance C = cov::signal_cov(sys, S, 0);
  C.C += 0.1 * Eigen::MatrixXcd::Identity(sys.M, sys.M);
  cov::finalize(C, 0.0);
  Rng rng(8);
  Eigen::VectorXcd v(sys.M);
  for (int m = 0; m < sys.M; ++m) v(m) = rng.cgaussian();
  const Eigen::MatrixXcd Cinv = C.C.inverse();
  const double direct = (v.adjoint() * Cinv * v)(0, 0).real();
  CHECK(cov::quad_form(C, v) == Approx(direct).epsilon(1e-10));
}

TEST_CASE("log_det matches the eigenvalue sum") {
  const tf::GaborSystem sys = tf::make_system(32, 8, 4, tf::WindowKind::gauss, 10.0);
  cov::SliceCovariance C = cov::noise_cov(sys, 0.9);
  cov::finalize(C, 1e-9);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(C.C, Eigen::EigenvaluesOnly);
  double expect = 0.0;
  for (int i = 0; i < sys.M; ++i) expect += std::log(es.eigenvalues()(i));
  CHECK(cov::log_det(C) == Approx(expect).epsilon(1e-10));
}

// ---------------------------------------------------------------------------
// eigenvalue floor

TEST_CASE("total covariance min eigenvalue respects the window floor") {
  Rng rng(321);
  for (int trial = 0; trial < 10; ++trial) {
    const int L = 64, b = 4;  // M = 16
    const auto kind = trial % 3 == 0   ? tf::WindowKind::gauss
                      : trial % 3 == 1 ? tf::WindowKind::hann
                                       : tf::WindowKind::rect;
    const double width = 8.0 + 40.0 * rng.uniform();
    const tf::GaborSystem sys = tf::make_system(L, 8, b, kind, width);
    const double center = 10.0 + 12.0 * rng.uniform();
    const double bw = 4.0 + 10.0 * rng.uniform();
    const model::PowerSpectrum S = model::raised_cosine_spectrum(L, center, bw);
    const double sigma0 = 0.2 + rng.uniform();
    const cov::SliceCovariance Cs = cov::signal_cov(sys, S, 0);
    const cov::SliceCovariance Cn = cov::noise_cov(sys, sigma0);
    const cov::SliceCovariance Ct = cov::shifted_total_cov(Cs, Cn, trial % sys.M);
    CHECK(cov::min_eig_floor(Ct, sys, sigma0));
  }
}
