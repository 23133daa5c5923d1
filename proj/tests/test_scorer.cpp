// Fast shift scoring: the circulant diagonal table against the per-shift
// dense brute force, and the log-det shift invariance that justifies
// dropping the determinant from the objective.

#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "wbfm/covariance.hpp"
#include "wbfm/model.hpp"
#include "wbfm/rng.hpp"
#include "wbfm/scorer.hpp"
#include "wbfm/tf.hpp"

using namespace wbfm;
using Catch::Approx;

namespace {

// dense brute force: q(delta) = v* C_delta^{-1} v with the shifted model
// covariance built and inverted per candidate
rvec brute_scores(const cov::SliceCovariance& signal, const cov::SliceCovariance& noise,
                  const Eigen::VectorXcd& v) {
  const int M = static_cast<int>(signal.C.rows());
  rvec q(M);
  for (int d = 0; d < M; ++d) {
    cov::SliceCovariance Cd = cov::shifted_total_cov(signal, noise, d);
    const Eigen::MatrixXcd Cinv = Cd.C.inverse();
    q[d] = (v.adjoint() * Cinv * v)(0, 0).real();
  }
  return q;
}

}  // namespace

TEST_CASE("fast path equals dense brute force on random slices") {
  const int L = 64, b = 8;  // M = 8
  const tf::GaborSystem sys = tf::make_system(L, 8, b, tf::WindowKind::gauss, 14.0);
  const model::PowerSpectrum S = model::raised_cosine_spectrum(L, 16.0, 14.0);
  const cov::SliceCovariance Cs = cov::signal_cov(sys, S, 0);
  const cov::SliceCovariance Cn = cov::noise_cov(sys, 0.4);
  cov::SliceCovariance C0 = cov::shifted_total_cov(Cs, Cn, 0);
  cov::finalize(C0, 0.0);
  const est::DiagTable table = est::make_diag_table(C0);

  Rng rng(77);
  for (int trial = 0; trial < 100; ++trial) {
    Eigen::VectorXcd v(sys.M);
    for (int m = 0; m < sys.M; ++m) v(m) = rng.cgaussian();
    const rvec fast = est::score_all_shifts(table, v);
    const rvec brute = brute_scores(Cs, Cn, v);
    int arg_fast = 0, arg_brute = 0;
    for (int d = 0; d < sys.M; ++d) {
      CHECK(std::abs(fast[d] - brute[d]) <= 1e-9 * std::abs(brute[d]));
      if (fast[d] < fast[arg_fast]) arg_fast = d;
      if (brute[d] < brute[arg_brute]) arg_brute = d;
    }
    CHECK(arg_fast == arg_brute);
  }
}

TEST_CASE("log det of the shifted covariance is shift-invariant") {
  const int L = 64, b = 8;  // M = 8
  const tf::GaborSystem sys = tf::make_system(L, 8, b, tf::WindowKind::gauss, 12.0);
  const model::PowerSpectrum S = model::raised_cosine_spectrum(L, 20.0, 10.0);
  const cov::SliceCovariance Cs = cov::signal_cov(sys, S, 0);
  const cov::SliceCovariance Cn = cov::noise_cov(sys, 0.3);
  rvec lds(sys.M);
  for (int d = 0; d < sys.M; ++d) {
    cov::SliceCovariance Cd = cov::shifted_total_cov(Cs, Cn, d);
    cov::finalize(Cd, 0.0);
    lds[d] = cov::log_det(Cd);
  }
  for (int d = 1; d < sys.M; ++d) CHECK(std::abs(lds[d] - lds[0]) < 1e-8);
}

TEST_CASE("rotating the data equals shifting the covariance") {
  const int L = 64, b = 8;
  const tf::GaborSystem sys = tf::make_system(L, 8, b, tf::WindowKind::gauss, 14.0);
  const model::PowerSpectrum S = model::raised_cosine_spectrum(L, 16.0, 14.0);
  const cov::SliceCovariance Cs = cov::signal_cov(sys, S, 0);
  const cov::SliceCovariance Cn = cov::noise_cov(sys, 0.4);
  cov::SliceCovariance C0 = cov::shifted_total_cov(Cs, Cn, 0);
  cov::finalize(C0, 0.0);
  Rng rng(99);
  Eigen::VectorXcd v(sys.M);
  for (int m = 0; m < sys.M; ++m) v(m) = rng.cgaussian();
  for (int d = 0; d < sys.M; ++d) {
    cov::SliceCovariance Cd = cov::shifted_total_cov(Cs, Cn, d);
    cov::finalize(Cd, 0.0);
    Eigen::VectorXcd rot(sys.M);
    for (int m = 0; m < sys.M; ++m) rot(m) = v(imod(m + d, sys.M));
    CHECK(cov::quad_form(Cd, v) == Approx(cov::quad_form(C0, rot)).epsilon(1e-10));
  }
}

TEST_CASE("fine-grid scoring stitches per-offset scores at gamma' = b delta + c") {
  const int L = 64, a = 8, b = 4;
  const tf::GaborSystem sys = tf::make_system(L, a, b, tf::WindowKind::gauss, 14.0);
  const model::PowerSpectrum S = model::raised_cosine_spectrum(L, 16.0, 14.0);
  cvec Z = model::synthesize_stationary(S, 21);
  const Eigen::MatrixXcd F = tf::stft_all(Z, sys.window.g, a);

  cov::SliceCovariance C0 = cov::shifted_total_cov(cov::signal_cov(sys, S, 0),
                                                   cov::noise_cov(sys, 0.2), 0);
  cov::finalize(C0, 1e-9);
  const est::DiagTable table = est::make_diag_table(C0);

  const int n = 2;
  const rvec qfull = est::score_column_fine(table, F, n, L, b);
  REQUIRE(static_cast<int>(qfull.size()) == L);
  // entry c + b*delta must equal the offset-c slice scored at shift delta
  for (int c = 0; c < b; ++c) {
    Eigen::VectorXcd slice(sys.M);
    for (int m = 0; m < sys.M; ++m) slice(m) = F(m * b + c, n);
    const rvec q = est::score_all_shifts(table, slice);
    for (int d = 0; d < sys.M; ++d)
      CHECK(qfull[c + b * d] == Approx(q[d]).epsilon(1e-9).margin(1e-12));
  }
}
