#pragma once

// The estimation pipeline: initialization, two-stage maximum-likelihood
// frequency-shift search, demodulation, covariance re-estimation, the
// iterated joint loop with its stopping criterion, and evaluation metrics
// honoring the additive track indeterminacy.
//
// Two loop modes share the operations:
//
//   verbatim  - the plain alternation: center-of-mass init, empirical
//               slice covariance of the demodulated signal at offset 0
//               shared by all offsets, full two-stage search of the
//               observation's slices.
//
//   reference - the hardened variant used by the shipped experiments:
//               differential-flow init with a seam, model covariance built
//               from a seam-masked smoothed periodogram (template shared
//               across offsets at c = 0), chirp-rate-matched analysis
//               windows for the readout, inter-iteration robust smoothing,
//               and a terminal extrapolation patch across the seam. Each
//               element exists because a single-realization empirical
//               covariance at wideband scale is rank-deficient and
//               self-matched; the substitutions keep every operation above
//               but change where the covariance and the init come from.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "wbfm/common.hpp"
#include "wbfm/covariance.hpp"
#include "wbfm/model.hpp"
#include "wbfm/scorer.hpp"
#include "wbfm/spectrum_est.hpp"
#include "wbfm/tf.hpp"
#include "wbfm/track.hpp"

namespace wbfm::est {

// ---------------------------------------------------------------------------
// small numeric helpers

inline double median(rvec v) {
  if (v.empty()) throw numeric_error("median of empty vector");
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline double mad(const rvec& v, double med) {
  rvec dev(v.size());
  for (size_t i = 0; i < v.size(); ++i) dev[i] = std::abs(v[i] - med);
  return median(std::move(dev));
}

struct LineFit {
  double slope, intercept;
};

inline LineFit fit_line(const rvec& xs, const rvec& ys) {
  const size_t n = xs.size();
  double mx = 0.0, my = 0.0;
  for (size_t i = 0; i < n; ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (size_t i = 0; i < n; ++i) {
    sxx += sq(xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  LineFit f;
  f.slope = sxx > 0.0 ? sxy / sxx : 0.0;
  f.intercept = my - f.slope * mx;
  return f;
}

// Sub-bin refinement of a discrete extremum via the parabola through the
// circular neighbors; applied only where the curvature sign confirms it.
inline double parabolic_refine(double cm, double c0, double cp, bool minimum) {
  const double den = cm - 2.0 * c0 + cp;
  if (minimum ? den > 0.0 : den < 0.0)
    return std::clamp(0.5 * (cm - cp) / den, -0.5, 0.5);
  return 0.0;
}

// ---------------------------------------------------------------------------
// core operations

// Center-of-mass initialization: first moment of each frame's energy over
// the coarse bin index. Degenerate all-zero frames fall back to M/2.
inline rvec init_center_of_mass(const tf::TFMatrix& tfm) {
  const int M = static_cast<int>(tfm.coef.rows());
  const int N = static_cast<int>(tfm.coef.cols());
  rvec out(N);
  for (int n = 0; n < N; ++n) {
    double num = 0.0, den = 0.0;
    for (int m = 0; m < M; ++m) {
      const double e = std::norm(tfm.coef(m, n));
      num += m * e;
      den += e;
    }
    if (den > 0.0) {
      out[n] = num / den;
    } else {
      warn("init_center_of_mass: all-zero frame " + std::to_string(n));
      out[n] = M / 2.0;
    }
  }
  return out;
}

struct ShiftEstimate {
  int delta = 0;
  double score = std::numeric_limits<double>::infinity();
};

// Stage-1 search: argmin over candidate shifts of v* C_delta^{-1} v through
// the rotate-the-data identity on the delta = 0 covariance. The log-det
// term is omitted (it does not depend on delta). Ties break toward the
// smaller delta (candidates scanned in ascending order with strict <).
inline ShiftEstimate ml_shift_slice(const Eigen::VectorXcd& slice,
                                    const cov::SliceCovariance& cov0, const ivec& candidates) {
  if (candidates.empty()) throw config_error("ml_shift_slice: empty candidate set");
  const int M = static_cast<int>(slice.size());
  ivec cand = candidates;
  std::sort(cand.begin(), cand.end());
  Eigen::VectorXcd rot(M);
  ShiftEstimate best;
  for (int d : cand) {
    for (int p = 0; p < M; ++p) rot(p) = slice(imod(p + d, M));
    const double s = cov::quad_form(cov0, rot);
    if (s < best.score) {
      best.score = s;
      best.delta = d;
    }
  }
  return best;
}

struct RefinedShift {
  double gamma_prime = 0.0;  // b * delta + c, fine bins
  int delta = 0;
  int offset_c = 0;
  double score = std::numeric_limits<double>::infinity();
};

// Stage-2 refinement: run stage 1 on every lattice offset's slice and keep
// the best-scoring (delta, c); ties break toward the smaller c.
//
// The covariance supplied in every slot must carry the *offset-0* slice
// statistics of the stationary reference. Pairing each offset's slice with
// that offset's own statistics instead cancels the offset out of the
// alignment condition (data and template frequency axes move together), so
// stage 1 would only measure the coarse shift and the composite b*delta + c
// would add an arbitrary c on top. Against the shared offset-0 template the
// offsets compete on one frequency axis and the composite resolves the
// shift to fine-bin precision.
inline RefinedShift ml_shift_refined(const std::vector<Eigen::VectorXcd>& slices,
                                     const std::vector<cov::SliceCovariance>& covs, int b,
                                     const ivec& candidates) {
  if (slices.size() != covs.size() || slices.empty())
    throw config_error("ml_shift_refined: need one slice and covariance per offset");
  RefinedShift best;
  for (size_t c = 0; c < slices.size(); ++c) {
    ShiftEstimate e = ml_shift_slice(slices[c], covs[c], candidates);
    if (e.score < best.score) {
      best.score = e.score;
      best.delta = e.delta;
      best.offset_c = static_cast<int>(c);
      best.gamma_prime = static_cast<double>(b) * e.delta + static_cast<double>(c);
    }
  }
  return best;
}

// U = Y e^{-2 i pi gamma/L}.
inline cvec demodulate(const cvec& Y, const rvec& gamma) {
  if (Y.size() != gamma.size()) throw config_error("demodulate: length mismatch");
  const int L = static_cast<int>(Y.size());
  cvec U(L);
  for (int t = 0; t < L; ++t) {
    const double ph = -2.0 * pi * gamma[t] / L;
    U[t] = Y[t] * cplx(std::cos(ph), std::sin(ph));
  }
  return U;
}

// Relative l2 change between consecutive per-frame estimates.
inline double stopping_criterion(const rvec& prev, const rvec& next) {
  if (prev.size() != next.size()) throw config_error("stopping_criterion: length mismatch");
  double dn = 0.0, nn = 0.0;
  for (size_t i = 0; i < prev.size(); ++i) {
    dn += sq(prev[i] - next[i]);
    nn += sq(next[i]);
  }
  if (nn == 0.0) {
    warn("stopping_criterion: zero-norm track, returning +inf");
    return std::numeric_limits<double>::infinity();
  }
  return std::sqrt(dn / nn);
}

// ---------------------------------------------------------------------------
// configuration and logs

enum class EstimatorMode { verbatim, reference };

struct ReferenceParams {
  int flow_rmax = 320;     // flow cross-correlation search half-range (bins)
  int seam_guard = 4;      // flow steps patched within +-guard of the seam
  int seam_lo = -4;        // quarantined frames n0 + seam_lo .. n0 + seam_hi
  int seam_hi = 5;
  int mask_half = 170;     // periodogram mask half-width around seam frames
  int mask_ramp = 32;      // cosine ramp length of the mask edges
  int n_iter = 6;          // fixed readout iterations
  rvec psm_schedule{3.0, 2.5, 2.0, 2.0, 2.0, 2.0};  // periodogram smoothing (bins)
  int n_rho_levels = 5;    // chirp-rate quantization levels for the readout
  int smooth_half = 6;     // robust smoothing window half-width (frames)
  int smooth_drop = 4;     // residuals trimmed per smoothing window
  int patch_base = 15;     // frames per extrapolation branch fit
  double patch_threshold = 3.0;  // replace readouts deviating by > this many bins
};

struct EstimatorConfig {
  double eps = 1e-3;
  int max_iter = 50;
  double lambda_rel = 1e-6;
  InterpKind interp = InterpKind::cubic;
  int search_lo = 0;    // admissible gamma' interval on the fine grid
  int search_hi = -1;   // -1: up to L-1
  EstimatorMode mode = EstimatorMode::verbatim;
  ReferenceParams ref;
};

struct IterationLog {
  rvec criteria;                    // one stopping-criterion value per iteration
  std::vector<rvec> frame_tracks;   // per-iteration gamma'(an) snapshots
  ModulationTrack final_track;
  cvec final_U;                     // demodulated signal of the last iteration
  bool converged = false;
  int iterations = 0;
  int seam_frame = -1;              // reference mode only
};

// ---------------------------------------------------------------------------
// verbatim loop

inline rvec clip_track_range(rvec gp, const EstimatorConfig& cfg, int L) {
  const double hi = cfg.search_hi < 0 ? L - 1.0 : cfg.search_hi;
  for (double& v : gp) v = std::clamp(v, static_cast<double>(cfg.search_lo), hi);
  return gp;
}

inline IterationLog run_verbatim(const cvec& Y, const tf::GaborSystem& sys,
                                 const EstimatorConfig& cfg) {
  const int L = sys.L, b = sys.b, M = sys.M, N = sys.N;
  const int fine_hi = cfg.search_hi < 0 ? L - 1 : cfg.search_hi;
  if (cfg.search_lo < 0 || fine_hi >= L || cfg.search_lo > fine_hi)
    throw config_error("estimator: invalid search range");

  // Gabor transforms of the observation at every offset, computed once.
  Eigen::MatrixXcd FY = tf::stft_all(Y, sys.window.g, sys.a);
  std::vector<tf::TFMatrix> VY(b);
  for (int c = 0; c < b; ++c) VY[c] = tf::gabor_from_stft(FY, sys, c);

  IterationLog log;
  rvec gp(N);
  {
    rvec com = init_center_of_mass(VY[0]);
    for (int n = 0; n < N; ++n) gp[n] = b * com[n];
    gp = clip_track_range(std::move(gp), cfg, L);
  }

  for (int it = 0; it < cfg.max_iter; ++it) {
    ModulationTrack track = track_from_frames(gp, sys, cfg.interp);
    cvec U = demodulate(Y, track.gamma);
    Eigen::MatrixXcd FU = tf::stft_all(U, sys.window.g, sys.a);

    // One empirical covariance of the demodulated transform at offset 0,
    // reduced to its fast shift-search table and shared by all offsets so
    // they compete on a single frequency axis (see ml_shift_refined).
    const DiagTable table = make_diag_table(
        cov::empirical_slice_cov(tf::gabor_from_stft(FU, sys, 0), cfg.lambda_rel));

    rvec gp_next(N);
    Eigen::VectorXcd v(M);
    for (int n = 0; n < N; ++n) {
      double best_score = std::numeric_limits<double>::infinity();
      int best_fine = cfg.search_lo;
      for (int c = 0; c < b; ++c) {
        for (int m = 0; m < M; ++m) v(m) = VY[c].coef(m, n);
        rvec q = score_all_shifts(table, v);
        for (int d = 0; d < M; ++d) {
          const int fine = b * d + c;
          if (fine < cfg.search_lo || fine > fine_hi) continue;
          if (q[d] < best_score) {
            best_score = q[d];
            best_fine = fine;
          }
        }
      }
      gp_next[n] = best_fine;
    }

    log.criteria.push_back(stopping_criterion(gp, gp_next));
    log.frame_tracks.push_back(gp_next);
    gp = std::move(gp_next);
    log.iterations = it + 1;
    if (log.criteria.back() < cfg.eps) {
      log.converged = true;
      break;
    }
  }

  log.final_track = track_from_frames(gp, sys, cfg.interp);
  log.final_U = demodulate(Y, log.final_track.gamma);
  return log;
}

// ---------------------------------------------------------------------------
// reference loop: differential-flow init

struct FlowInit {
  rvec gp;  // per-frame track from integrated flow, anchored at the seam
  int n0;   // seam step: the least-consistent frame transition
};

inline FlowInit flow_init(const cvec& Y, const tf::GaborSystem& sys, const ReferenceParams& rp) {
  const int L = sys.L, N = sys.N;
  Eigen::MatrixXcd F = tf::stft_all(Y, sys.window.g, sys.a);
  // magnitude columns and their DFTs for FFT cross-correlation
  Eigen::MatrixXd A(L, N);
  std::vector<cvec> X(N);
  cvec buf(L);
  rvec norm(N);
  for (int n = 0; n < N; ++n) {
    double e = 0.0;
    for (int k = 0; k < L; ++k) {
      A(k, n) = std::abs(F(k, n));
      e += sq(A(k, n));
      buf[k] = A(k, n);
    }
    norm[n] = std::sqrt(e);
    X[n] = Fft::forward(buf);
  }

  const int rmax = std::min(rp.flow_rmax, L / 2 - 1);
  rvec d(N), rho(N);
  cvec prod(L), cc(L);
  for (int n = 0; n < N; ++n) {
    const int nn = imod(n + 1, N);
    for (int k = 0; k < L; ++k) prod[k] = X[nn][k] * std::conj(X[n][k]);
    Fft::inverse(prod.data(), cc.data(), L);
    int jbest = -1;
    double cbest = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < L; ++j) {
      if (std::abs(centered_index(j, L)) > rmax) continue;
      if (cc[j].real() > cbest) {
        cbest = cc[j].real();
        jbest = j;
      }
    }
    const double cm = cc[imod(jbest - 1, L)].real();
    const double c0 = cc[jbest].real();
    const double cp = cc[imod(jbest + 1, L)].real();
    const double den = cm - 2.0 * c0 + cp;
    double frac = 0.0;
    if (den != 0.0) frac = std::clamp(0.5 * (cm - cp) / den, -0.5, 0.5);
    d[n] = centered_index(jbest, L) + frac;
    rho[n] = c0 / (norm[nn] * norm[n]);
  }

  // seam = weakest step; patch low-confidence steps from the nearest good one
  FlowInit fi;
  fi.n0 = static_cast<int>(std::min_element(rho.begin(), rho.end()) - rho.begin());
  const double med = median(rho);
  const double md = mad(rho, med) + 1e-12;
  std::vector<bool> bad(N, false);
  ivec good;
  for (int n = 0; n < N; ++n) {
    const int dist = std::min(imod(n - fi.n0, N), imod(fi.n0 - n, N));
    bad[n] = rho[n] < med - 6.0 * md || dist <= rp.seam_guard;
    if (!bad[n]) good.push_back(n);
  }
  if (!good.empty()) {
    for (int n = 0; n < N; ++n) {
      if (!bad[n]) continue;
      int pick = good[0], bestd = std::numeric_limits<int>::max();
      for (int gidx : good) {
        const int dist = std::min(imod(gidx - n, N), imod(n - gidx, N));
        if (dist < bestd) {
          bestd = dist;
          pick = gidx;
        }
      }
      d[n] = d[pick];
    }
  }

  // integrate the per-step differences starting just after the seam
  fi.gp.assign(N, 0.0);
  int prev = imod(fi.n0 + 1, N);
  for (int k = 1; k < N; ++k) {
    const int cur = imod(fi.n0 + 1 + k, N);
    fi.gp[cur] = fi.gp[prev] + d[prev];
    prev = cur;
  }
  return fi;
}

// Local trimmed linear fit in seam-rolled order (never crosses the seam):
// fit a line on each window, drop the worst residuals, refit, evaluate.
inline rvec robust_smooth(const rvec& gp, int n0, const ReferenceParams& rp) {
  const int N = static_cast<int>(gp.size());
  rvec v(N);
  for (int k = 0; k < N; ++k) v[k] = gp[imod(n0 + 1 + k, N)];
  rvec out(N);
  for (int k = 0; k < N; ++k) {
    const int lo = std::max(0, k - rp.smooth_half);
    const int hi = std::min(N, k + rp.smooth_half + 1);
    rvec xs, ys;
    for (int i = lo; i < hi; ++i) {
      xs.push_back(i);
      ys.push_back(v[i]);
    }
    LineFit f = fit_line(xs, ys);
    const size_t keep = std::max<size_t>(xs.size() > static_cast<size_t>(rp.smooth_drop)
                                             ? xs.size() - rp.smooth_drop
                                             : xs.size(),
                                         5);
    if (keep < xs.size()) {
      std::vector<size_t> idx(xs.size());
      std::iota(idx.begin(), idx.end(), 0);
      std::stable_sort(idx.begin(), idx.end(), [&](size_t i, size_t j) {
        const double ri = std::abs(ys[i] - (f.slope * xs[i] + f.intercept));
        const double rj = std::abs(ys[j] - (f.slope * xs[j] + f.intercept));
        return ri < rj;
      });
      rvec xs2, ys2;
      for (size_t i = 0; i < keep && i < idx.size(); ++i) {
        xs2.push_back(xs[idx[i]]);
        ys2.push_back(ys[idx[i]]);
      }
      f = fit_line(xs2, ys2);
    }
    out[k] = f.slope * k + f.intercept;
  }
  rvec res(N);
  for (int k = 0; k < N; ++k) res[imod(n0 + 1 + k, N)] = out[k];
  return res;
}

inline ivec seam_frames(int n0, int N, const ReferenceParams& rp) {
  ivec frames;
  for (int k = rp.seam_lo; k <= rp.seam_hi; ++k) frames.push_back(imod(n0 + k, N));
  return frames;
}

// Time-domain mask zeroing +-mask_half samples around each quarantined
// frame center, with cosine ramps on both edges.
inline rvec seam_mask(const ivec& frames, const tf::GaborSystem& sys, const ReferenceParams& rp) {
  const int L = sys.L;
  const int half = std::min(rp.mask_half, L / 4);
  rvec mask(L, 1.0);
  for (int n : frames) {
    const int center = n * sys.a;
    for (int dt = -(half + rp.mask_ramp); dt <= half + rp.mask_ramp; ++dt) {
      const int tt = imod(center + dt, L);
      const int ad = std::abs(dt);
      if (ad <= half) {
        mask[tt] = 0.0;
      } else {
        const double vv = 0.5 * (1.0 + std::cos(pi * (half + rp.mask_ramp - ad) / rp.mask_ramp));
        mask[tt] = std::min(mask[tt], vv);
      }
    }
  }
  return mask;
}

// Periodogram of the masked demodulated signal, Gaussian-smoothed along
// frequency; the template spectrum of the model covariance.
inline rvec masked_periodogram(const cvec& U, const ivec& frames, const tf::GaborSystem& sys,
                               double smooth_sigma, const ReferenceParams& rp) {
  const int L = static_cast<int>(U.size());
  rvec mask = seam_mask(frames, sys, rp);
  double m2 = 0.0;
  for (double v : mask) m2 += v * v;
  cvec buf(L), out(L);
  for (int t = 0; t < L; ++t) buf[t] = U[t] * mask[t];
  Fft::forward(buf.data(), out.data(), L);
  rvec P(L);
  for (int k = 0; k < L; ++k) P[k] = std::norm(out[k]) / (L * m2);
  return circular_smooth(P, gaussian_kernel(smooth_sigma));
}

// ---------------------------------------------------------------------------
// reference loop: readout

// Chirp-rate-matched analysis window g e^{+i pi rho tau^2 / L}. A slice of
// a locally chirped stationary signal seen through the rate-matched window
// has the plain-window stationary covariance, so slices taken this way are
// scored against the plain-window template.
inline cvec chirped_window(const cvec& g, double rho, int L) {
  cvec gw(L);
  for (int t = 0; t < L; ++t) {
    const double tau = centered_index(t, L);
    const double ph = pi * rho * tau * tau / L;
    gw[t] = g[t] * cplx(std::cos(ph), std::sin(ph));
  }
  return gw;
}

inline double parabolic_argmin_circular(const rvec& q) {
  const int L = static_cast<int>(q.size());
  const int j = static_cast<int>(std::min_element(q.begin(), q.end()) - q.begin());
  const double frac =
      parabolic_refine(q[imod(j - 1, L)], q[j], q[imod(j + 1, L)], /*minimum=*/true);
  return j + frac;
}

struct ReadoutResult {
  rvec gp;         // absolute per-frame readout, unwrapped against the track
  cvec U;          // demodulated signal used for the template
  DiagTable table; // final template table (reused by the seam patch)
  double rho_med;  // median chirp rate of the track (bins per sample)
};

// One loop iteration: demodulate by the smoothed track, rebuild the
// covariance template from the masked periodogram, then read out every
// frame's shift from the raw observation through rate-matched windows.
inline ReadoutResult readout_iteration(const cvec& Y, const tf::GaborSystem& sys,
                                       const rvec& gp_track, const ivec& quarantine, double psm,
                                       double lambda_rel, const Eigen::MatrixXcd& W0,
                                       const cov::SliceCovariance& noise,
                                       const ReferenceParams& rp) {
  const int L = sys.L, N = sys.N;
  ReadoutResult rr;
  ModulationTrack track = track_from_frames(gp_track, sys, InterpKind::cubic);
  rr.U = demodulate(Y, track.gamma);
  rvec P = masked_periodogram(rr.U, quarantine, sys, psm, rp);

  cov::SliceCovariance tot;
  tot.kind = cov::CovKind::model_total;
  tot.C = cov::weighted_outer(W0, P) + noise.C;
  cov::finalize(tot, lambda_rel);
  rr.table = make_diag_table(tot);

  // per-frame chirp rate from the track, clipped and quantized
  rvec rho(N);
  for (int n = 0; n < N; ++n)
    rho[n] = signed_mod(gp_track[imod(n + 1, N)] - gp_track[imod(n - 1, N)], L) / (2.0 * sys.a);
  const double med = median(rho);
  rr.rho_med = med;
  const double md = mad(rho, med) + 1e-9;
  for (double& v : rho) v = std::clamp(v, med - 4.0 * md, med + 4.0 * md);
  const double lo = *std::min_element(rho.begin(), rho.end()) - 1e-9;
  const double hi = *std::max_element(rho.begin(), rho.end()) + 1e-9;

  rvec sabs(N, 0.0);
  for (int q = 0; q < rp.n_rho_levels; ++q) {
    const double e0 = lo + (hi - lo) * q / rp.n_rho_levels;
    const double e1 = lo + (hi - lo) * (q + 1) / rp.n_rho_levels;
    ivec sel;
    for (int n = 0; n < N; ++n)
      if (rho[n] >= e0 && rho[n] <= e1) sel.push_back(n);
    if (sel.empty()) continue;
    cvec gw = chirped_window(sys.window.g, 0.5 * (e0 + e1), L);
    Eigen::MatrixXcd F = tf::stft_frames(Y, gw, sys.a, sel);
    for (size_t i = 0; i < sel.size(); ++i) {
      rvec q_fine = score_column_fine(rr.table, F, static_cast<int>(i), L, sys.b);
      sabs[sel[i]] = parabolic_argmin_circular(q_fine);
    }
  }
  // continuity: lift each absolute readout onto the track's unwrapped branch
  rr.gp.resize(N);
  for (int n = 0; n < N; ++n)
    rr.gp[n] = sabs[n] + std::round((gp_track[n] - sabs[n]) / L) * L;
  return rr;
}

// Terminal repair of the quarantined frames: extrapolate the track linearly
// from both sides of the seam, choose the changeover by total slice score,
// and replace only readouts that disagree wildly with the extrapolation.
inline rvec seam_patch(const rvec& gp_r, int n0, const cvec& Y, const tf::GaborSystem& sys,
                       const DiagTable& table, double rho_mid, const ReferenceParams& rp) {
  const int L = sys.L, N = sys.N;
  rvec v(N);
  for (int k = 0; k < N; ++k) v[k] = gp_r[imod(n0 + 1 + k, N)];
  const int head = rp.seam_hi;
  const int tail = 1 - rp.seam_lo;
  const int base = rp.patch_base;
  if (head + base > N || tail + base > N) return gp_r;  // degenerate geometry

  rvec xs, ys;
  for (int i = head; i < head + base; ++i) {
    xs.push_back(i);
    ys.push_back(v[i]);
  }
  const LineFit right = fit_line(xs, ys);
  xs.clear();
  ys.clear();
  for (int i = N - tail - base; i < N - tail; ++i) {
    xs.push_back(i);
    ys.push_back(v[i]);
  }
  const LineFit left = fit_line(xs, ys);

  ivec qpos;  // rolled positions of the quarantined frames, left side first
  for (int p = N - tail; p < N; ++p) qpos.push_back(p);
  for (int p = 0; p < head; ++p) qpos.push_back(p);
  const int nq = static_cast<int>(qpos.size());
  rvec left_val(nq), right_val(nq);
  ivec frames(nq);
  for (int i = 0; i < nq; ++i) {
    const int p = qpos[i];
    left_val[i] = left.slope * (p >= N - tail ? p : p + N) + left.intercept;
    right_val[i] = right.slope * (p < head ? p : p - N) + right.intercept;
    frames[i] = imod(n0 + 1 + p, N);
  }

  cvec gw = chirped_window(sys.window.g, rho_mid, L);
  Eigen::MatrixXcd F = tf::stft_frames(Y, gw, sys.a, frames);
  std::vector<rvec> qf(nq);
  for (int i = 0; i < nq; ++i) qf[i] = score_column_fine(table, F, i, L, sys.b);
  auto score_at = [&](int i, double val) {
    return qf[i][imod(static_cast<int>(std::lround(val)), L)];
  };

  int best_cut = 0;
  double best_cost = std::numeric_limits<double>::infinity();
  for (int cut = 0; cut <= nq; ++cut) {
    double cost = 0.0;
    for (int i = 0; i < nq; ++i) cost += score_at(i, i < cut ? left_val[i] : right_val[i]);
    if (cost < best_cost) {
      best_cost = cost;
      best_cut = cut;
    }
  }
  rvec patched = gp_r;
  for (int i = 0; i < nq; ++i) {
    const double val = i < best_cut ? left_val[i] : right_val[i];
    const int n = frames[i];
    if (std::abs(patched[n] - val) > rp.patch_threshold) patched[n] = val;
  }
  return patched;
}

inline IterationLog run_reference(const cvec& Y, const tf::GaborSystem& sys, double sigma0,
                                  const EstimatorConfig& cfg) {
  const ReferenceParams& rp = cfg.ref;
  IterationLog log;
  const Eigen::MatrixXcd W0 = cov::shift_matrix(sys.window.ghat, sys.M, sys.b, 0);
  const cov::SliceCovariance noise = cov::noise_cov(sys, sigma0);

  FlowInit fi = flow_init(Y, sys, rp);
  log.seam_frame = fi.n0;
  const ivec quarantine = seam_frames(fi.n0, sys.N, rp);
  rvec gp_s = robust_smooth(fi.gp, fi.n0, rp);
  rvec gp_prev = gp_s;
  ReadoutResult rr;
  for (int it = 0; it < rp.n_iter; ++it) {
    const double psm =
        rp.psm_schedule[std::min<size_t>(it, rp.psm_schedule.size() - 1)];
    rr = readout_iteration(Y, sys, gp_s, quarantine, psm, cfg.lambda_rel, W0, noise, rp);
    log.criteria.push_back(stopping_criterion(gp_prev, rr.gp));
    log.frame_tracks.push_back(rr.gp);
    gp_prev = rr.gp;
    gp_s = robust_smooth(rr.gp, fi.n0, rp);
    log.iterations = it + 1;
  }
  rvec gp_final = seam_patch(rr.gp, fi.n0, Y, sys, rr.table, rr.rho_med, rp);
  log.converged = log.criteria.empty() ? false : log.criteria.back() < cfg.eps;
  log.final_track = track_from_frames(gp_final, sys, cfg.interp);
  log.final_U = std::move(rr.U);
  return log;
}

// Joint covariance and modulation estimation (the iterated loop).
inline IterationLog run_algorithm1(const cvec& Y, const tf::GaborSystem& sys, double sigma0,
                                   const EstimatorConfig& cfg) {
  if (static_cast<int>(Y.size()) != sys.L) throw config_error("run_algorithm1: length mismatch");
  return cfg.mode == EstimatorMode::verbatim ? run_verbatim(Y, sys, cfg)
                                             : run_reference(Y, sys, sigma0, cfg);
}

// ---------------------------------------------------------------------------
// evaluation

struct TrackMetrics {
  double rmse_corrected = 0.0;  // after removing the optimal additive constant
  double max_corrected = 0.0;
  double rmse_raw = 0.0;  // wrap-aware but uncorrected
  double max_raw = 0.0;
  double offset = 0.0;  // the removed constant (mean wrapped error)
};

// Per-sample gamma' error metrics with the additive indeterminacy removed.
// Errors are evaluated on the circle (wrapped to [-L/2, L/2)).
inline TrackMetrics evaluate_track(const rvec& gp_est, const rvec& gp_true, int L) {
  if (gp_est.size() != gp_true.size()) throw config_error("evaluate_track: length mismatch");
  TrackMetrics m;
  rvec e(gp_est.size());
  for (size_t t = 0; t < gp_est.size(); ++t) {
    e[t] = signed_mod(gp_est[t] - gp_true[t], L);
    m.offset += e[t];
    m.rmse_raw += sq(e[t]);
    m.max_raw = std::max(m.max_raw, std::abs(e[t]));
  }
  m.offset /= static_cast<double>(e.size());
  m.rmse_raw = std::sqrt(m.rmse_raw / e.size());
  for (double v : e) {
    m.rmse_corrected += sq(v - m.offset);
    m.max_corrected = std::max(m.max_corrected, std::abs(v - m.offset));
  }
  m.rmse_corrected = std::sqrt(m.rmse_corrected / e.size());
  return m;
}

// Fraction of frames whose gamma'(an) estimate lands within `tol` bins of
// the truth after removing the median offset (the majority-vote constant).
inline double frame_hit_fraction(const rvec& gp_frames, const rvec& gp_true_samples, int a, int L,
                                 double tol = 1.0) {
  const int N = static_cast<int>(gp_frames.size());
  rvec e(N);
  for (int n = 0; n < N; ++n)
    e[n] = signed_mod(gp_frames[n] - gp_true_samples[static_cast<size_t>(n) * a], L);
  const double med = median(e);
  int hits = 0;
  for (double v : e)
    if (std::abs(v - med) <= tol) ++hits;
  return static_cast<double>(hits) / N;
}

}  // namespace wbfm::est
