#pragma once

// Modulation tracks: per-frame shift estimates lifted to per-sample
// frequency and phase tracks by circular interpolation and discrete
// integration anchored at gamma(0) = 0.

#include <cmath>

#include "wbfm/common.hpp"
#include "wbfm/model.hpp"
#include "wbfm/tf.hpp"

namespace wbfm::est {

enum class InterpKind { linear, cubic };

// Frame-rate values v[n] (at t = na) -> all L samples, circular boundary.
inline rvec interpolate_frames(const rvec& v, int a, int L, InterpKind kind) {
  const int N = static_cast<int>(v.size());
  rvec out(L);
  for (int t = 0; t < L; ++t) {
    const int n = t / a;
    const double u = static_cast<double>(t % a) / a;
    if (kind == InterpKind::linear) {
      out[t] = (1.0 - u) * v[imod(n, N)] + u * v[imod(n + 1, N)];
    } else {  // circular Catmull-Rom
      const double p0 = v[imod(n - 1, N)], p1 = v[imod(n, N)];
      const double p2 = v[imod(n + 1, N)], p3 = v[imod(n + 2, N)];
      out[t] = 0.5 * (2.0 * p1 + (-p0 + p2) * u + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * u * u +
                      (-p0 + 3.0 * p1 - 3.0 * p2 + p3) * u * u * u);
    }
  }
  return out;
}

struct ModulationTrack {
  rvec delta;      // per-frame coarse-grid shift (integer-valued, stored real)
  ivec offset_c;   // chosen lattice offset per frame
  rvec gp_frames;  // gamma'(an) in fine bins (kept unfolded for continuity)
  rvec gp_samples; // per-sample gamma'
  rvec gamma;      // per-sample gamma, gamma[0] = 0
};

// Derive the coarse/offset decomposition gamma' = b*delta + c (+ frac) from
// the per-frame fine values, folding into [0, L).
inline void fill_grid_decomposition(ModulationTrack& track, int b, int L) {
  const size_t N = track.gp_frames.size();
  track.delta.resize(N);
  track.offset_c.resize(N);
  for (size_t n = 0; n < N; ++n) {
    int fine = imod(static_cast<int>(std::lround(track.gp_frames[n])), L);
    track.delta[n] = fine / b;
    track.offset_c[n] = fine % b;
  }
}

// Interpolate frame-rate gamma'(an) to per-sample gamma' and integrate.
inline ModulationTrack track_from_frames(const rvec& gp_frames, const tf::GaborSystem& sys,
                                         InterpKind interp) {
  if (gp_frames.size() < 2) throw config_error("track_from_frames: need at least 2 frames");
  ModulationTrack track;
  track.gp_frames = gp_frames;
  track.gp_samples = interpolate_frames(gp_frames, sys.a, sys.L, interp);
  track.gamma = model::integrate_prime(track.gp_samples);
  fill_grid_decomposition(track, sys.b, sys.L);
  return track;
}

}  // namespace wbfm::est
