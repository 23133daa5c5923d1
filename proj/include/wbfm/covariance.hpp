#pragma once

// Model and empirical covariances of fixed-time Gabor slices, with eager
// Hermitian positive-definite factorization for quadratic-form evaluation.
//
// Normalization note. With the synthesis convention of model.hpp the
// signal slice covariance is exactly
//   C_Z[m,m'] = sum_k S[k] conj(ghat[k - mb - c]) ghat[k - m'b - c],
// and the white-noise slice covariance is the flat-spectrum special case
// S = sigma0^2/L of the same formula, which collapses to
//   C_N[m,m'] = sigma0^2 * (DFT |g|^2)[(m - m') b],
// whose diagonal is sigma0^2 ||g||^2. Both scalings are pinned by the
// Monte-Carlo oracles in the test suite; S is a variance per bin,
// sigma0^2 a variance per sample, which is where the 1/L comes from.

#include <Eigen/Dense>

#include "wbfm/common.hpp"
#include "wbfm/spectrum.hpp"
#include "wbfm/tf.hpp"

namespace wbfm::cov {

enum class CovKind { model_noise, model_signal, model_total, empirical };

struct SliceCovariance {
  Eigen::MatrixXcd C;  // Hermitian M x M
  CovKind kind = CovKind::model_total;
  int offset_c = 0;
  double ridge = 0.0;  // absolute ridge added to the diagonal
  Eigen::LLT<Eigen::MatrixXcd> llt;
  bool factored = false;
};

// Ridge-regularize (lambda = lambda_rel * trace / M) and factorize.
// Throws numeric_error if the regularized matrix is not positive definite.
inline void finalize(SliceCovariance& sc, double lambda_rel) {
  const int M = static_cast<int>(sc.C.rows());
  sc.ridge = lambda_rel * sc.C.trace().real() / M;
  if (sc.ridge != 0.0) sc.C.diagonal().array() += sc.ridge;
  sc.llt.compute(sc.C);
  if (sc.llt.info() != Eigen::Success)
    throw numeric_error("slice covariance not positive definite after ridge");
  sc.factored = true;
}

// Circulant noise slice covariance (diagonal sigma0^2 ||g||^2).
inline SliceCovariance noise_cov(const tf::GaborSystem& sys, double sigma0) {
  if (sigma0 < 0.0) throw config_error("noise_cov: sigma0 must be >= 0");
  const int L = sys.L, M = sys.M;
  cvec gg(L);
  for (int t = 0; t < L; ++t) gg[t] = std::norm(sys.window.g[t]);
  cvec r = Fft::forward(gg);
  SliceCovariance sc;
  sc.kind = CovKind::model_noise;
  sc.C.resize(M, M);
  for (int m = 0; m < M; ++m)
    for (int mp = 0; mp < M; ++mp) sc.C(m, mp) = sq(sigma0) * r[imod((m - mp) * sys.b, L)];
  return sc;
}

// Frequency-shift (gather) matrix W(m, k) = ghat[(k - mb - c) mod L].
inline Eigen::MatrixXcd shift_matrix(const cvec& ghat, int M, int b, int c) {
  const int L = static_cast<int>(ghat.size());
  Eigen::MatrixXcd W(M, L);
  for (int m = 0; m < M; ++m)
    for (int k = 0; k < L; ++k) W(m, k) = ghat[imod(k - m * b - c, L)];
  return W;
}

// C = conj(W) diag(P) W^T for a full-grid spectral weight P (length L).
inline Eigen::MatrixXcd weighted_outer(const Eigen::MatrixXcd& W, const rvec& P) {
  Eigen::Map<const Eigen::VectorXd> p(P.data(), static_cast<Eigen::Index>(P.size()));
  return (W.conjugate() * p.asDiagonal()) * W.transpose();
}

// Signal slice covariance at lattice offset c (model spectrum over I_L+).
inline SliceCovariance signal_cov(const tf::GaborSystem& sys, const model::PowerSpectrum& spec,
                                  int c) {
  if (c < 0 || c >= sys.b) throw config_error("signal_cov: offset c outside [0, b-1]");
  validate(spec);
  SliceCovariance sc;
  sc.kind = CovKind::model_signal;
  sc.offset_c = c;
  sc.C = weighted_outer(shift_matrix(sys.window.ghat, sys.M, sys.b, c), model::full_grid(spec));
  return sc;
}

// Total covariance of the delta-shifted slice model:
// C[m,m'] = signal.C[(m-delta) mod M, (m'-delta) mod M] + noise.C[m,m'].
inline SliceCovariance shifted_total_cov(const SliceCovariance& signal,
                                         const SliceCovariance& noise, int delta) {
  const int M = static_cast<int>(signal.C.rows());
  if (noise.C.rows() != M) throw config_error("shifted_total_cov: dimension mismatch");
  SliceCovariance sc;
  sc.kind = CovKind::model_total;
  sc.offset_c = signal.offset_c;
  sc.C.resize(M, M);
  for (int m = 0; m < M; ++m)
    for (int mp = 0; mp < M; ++mp)
      sc.C(m, mp) = signal.C(imod(m - delta, M), imod(mp - delta, M)) + noise.C(m, mp);
  return sc;
}

// Sample covariance of the frames of one offset's Gabor transform, with no
// mean subtraction (the model is zero-mean), ridge-regularized and factored.
inline SliceCovariance empirical_slice_cov(const tf::TFMatrix& tfm, double lambda_rel) {
  const int N = static_cast<int>(tfm.coef.cols());
  if (N < 2) throw config_error("empirical_slice_cov: need at least 2 frames");
  SliceCovariance sc;
  sc.kind = CovKind::empirical;
  sc.offset_c = tfm.offset_c;
  sc.C = (tfm.coef * tfm.coef.adjoint()) / static_cast<double>(N);
  finalize(sc, lambda_rel);
  return sc;
}

// v* C^{-1} v via two triangular solves on the cached factorization.
inline double quad_form(const SliceCovariance& sc, const Eigen::VectorXcd& v) {
  if (!sc.factored) throw numeric_error("quad_form: covariance not factorized");
  // C = LL*; v* C^{-1} v = || L^{-1} v ||^2, one forward solve.
  Eigen::VectorXcd w = sc.llt.matrixL().solve(v);
  return w.squaredNorm();
}

// log det C from the Cholesky factor.
inline double log_det(const SliceCovariance& sc) {
  if (!sc.factored) throw numeric_error("log_det: covariance not factorized");
  double acc = 0.0;
  const auto& Lm = sc.llt.matrixLLT();
  for (int i = 0; i < Lm.rows(); ++i) acc += std::log(Lm(i, i).real());
  return 2.0 * acc;
}

inline double min_eigenvalue(const Eigen::MatrixXcd& C) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(C, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

// Invertibility floor: smallest eigenvalue >= sigma0^2 K_g - tol whenever
// the model noise term is present.
inline bool min_eig_floor(const SliceCovariance& sc, const tf::GaborSystem& sys, double sigma0,
                          double tol = 1e-8) {
  return min_eigenvalue(sc.C) >= sq(sigma0) * sys.kg - tol;
}

}  // namespace wbfm::cov
