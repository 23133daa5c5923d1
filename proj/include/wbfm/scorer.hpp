#pragma once

// Fast evaluation of the shift-search quadratic forms.
//
// The ML frequency-shift search minimizes q(delta) = v* C_delta^{-1} v over
// all integer shifts delta, where C_delta shifts the signal part of the
// covariance along both indices and the noise part is circulant-invariant.
// This is equivalent to rotating the data against the fixed delta = 0
// inverse A = C_0^{-1}:
//   q(delta) = sum_{m,m'} conj(v[m+delta]) A[m,m'] v[m'+delta]  (mod M).
// Writing A in its double-DFT coordinates B = M F A F^{-1} (rows/cols) and
// gathering diagonals D[j,m] = B[m, (m+j) mod M] turns the whole
// delta-profile into one length-M inverse DFT of
//   T[j] = sum_m conj(Vh[m]) D[j,m] Vh[(m+j) mod M],  Vh = DFT(v),
// costing O(M^2) per slice instead of O(M^3) per (slice, delta).
// The dense per-delta brute force stays in the test suite as the oracle.

#include <Eigen/Dense>

#include "wbfm/common.hpp"
#include "wbfm/covariance.hpp"
#include "wbfm/fft.hpp"

namespace wbfm::est {

struct DiagTable {
  Eigen::MatrixXcd D;  // D(j, m), M x M
};

inline DiagTable make_diag_table(const cov::SliceCovariance& sc) {
  if (!sc.factored) throw numeric_error("make_diag_table: covariance not factorized");
  const int M = static_cast<int>(sc.C.rows());
  Eigen::MatrixXcd A = sc.llt.solve(Eigen::MatrixXcd::Identity(M, M));
  // B = M * DFT_columns( IDFT_rows(A) )
  cvec buf(M), out(M);
  Eigen::MatrixXcd B(M, M);
  for (int r = 0; r < M; ++r) {
    for (int j = 0; j < M; ++j) buf[j] = A(r, j);
    Fft::inverse(buf.data(), out.data(), M);
    for (int j = 0; j < M; ++j) B(r, j) = out[j];
  }
  for (int j = 0; j < M; ++j) {
    for (int r = 0; r < M; ++r) buf[r] = B(r, j);
    Fft::forward(buf.data(), out.data(), M);
    for (int r = 0; r < M; ++r) B(r, j) = static_cast<double>(M) * out[r];
  }
  DiagTable dt;
  dt.D.resize(M, M);
  for (int j = 0; j < M; ++j)
    for (int m = 0; m < M; ++m) dt.D(j, m) = B(m, imod(m + j, M));
  return dt;
}

// q(delta) for every delta in [0, M) of one slice v (length M).
inline rvec score_all_shifts(const DiagTable& dt, const Eigen::VectorXcd& v) {
  const int M = static_cast<int>(v.size());
  cvec vh(M), T(M), w(M);
  for (int m = 0; m < M; ++m) vh[m] = v(m);
  Fft::forward(vh.data(), vh.data(), M);
  for (int j = 0; j < M; ++j) {
    cplx acc = 0.0;
    for (int m = 0; m < M; ++m) acc += std::conj(vh[m]) * dt.D(j, m) * vh[imod(m + j, M)];
    T[j] = acc;
  }
  Fft::inverse(T.data(), w.data(), M);
  rvec q(M);
  for (int d = 0; d < M; ++d) q[d] = w[d].real() / M;
  return q;
}

// Fine-grid score profile of one full-resolution STFT column (length L):
// qfull[c + b*delta] = q_c(delta), scoring each offset's slice against the
// same offset-0 covariance family so all offsets share one frequency axis.
inline rvec score_column_fine(const DiagTable& dt, const Eigen::MatrixXcd& F, int col, int L,
                              int b) {
  const int M = L / b;
  rvec qfull(L);
  Eigen::VectorXcd v(M);
  for (int c = 0; c < b; ++c) {
    for (int m = 0; m < M; ++m) v(m) = F(imod(m * b + c, L), col);
    rvec q = score_all_shifts(dt, v);
    for (int d = 0; d < M; ++d) qfull[c + b * d] = q[d];
  }
  return qfull;
}

}  // namespace wbfm::est
