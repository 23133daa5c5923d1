#pragma once

// Thin FFTW wrapper fixing the library-wide transform convention:
//   forward:  X[k] = sum_t x[t] e^{-2 i pi k t / L}   (unscaled)
//   inverse:  x[t] = (1/L) sum_k X[k] e^{+2 i pi k t / L}
//
// Plans are created once per length with FFTW_ESTIMATE|FFTW_UNALIGNED (a
// deterministic planner; no wisdom, no runtime tuning) and executed through
// the new-array interface, so any buffer can be transformed. Plan creation
// is serialized behind a mutex; execution on distinct buffers is
// thread-safe per FFTW's documentation.

#include <fftw3.h>

#include <mutex>
#include <unordered_map>

#include "wbfm/common.hpp"

namespace wbfm {

class Fft {
 public:
  // In-place or out-of-place transform of n complex values.
  static void forward(const cplx* in, cplx* out, int n) { exec(in, out, n, FFTW_FORWARD); }
  static void inverse(const cplx* in, cplx* out, int n) {
    exec(in, out, n, FFTW_BACKWARD);
    double s = 1.0 / n;
    for (int i = 0; i < n; ++i) out[i] *= s;
  }

  static cvec forward(const cvec& x) {
    cvec out(x.size());
    forward(x.data(), out.data(), static_cast<int>(x.size()));
    return out;
  }
  static cvec inverse(const cvec& x) {
    cvec out(x.size());
    inverse(x.data(), out.data(), static_cast<int>(x.size()));
    return out;
  }

 private:
  static void exec(const cplx* in, cplx* out, int n, int sign) {
    fftw_plan p = plan(n, sign);
    // FFTW's new-array execute does not write through the input pointer.
    fftw_execute_dft(p, reinterpret_cast<fftw_complex*>(const_cast<cplx*>(in)),
                     reinterpret_cast<fftw_complex*>(out));
  }

  static fftw_plan plan(int n, int sign) {
    static std::mutex mu;
    static std::unordered_map<long, fftw_plan> cache;
    std::lock_guard<std::mutex> lock(mu);
    long key = 2L * n + (sign == FFTW_FORWARD ? 0 : 1);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    cvec scratch(static_cast<size_t>(n));
    fftw_plan p = fftw_plan_dft_1d(n, reinterpret_cast<fftw_complex*>(scratch.data()),
                                   reinterpret_cast<fftw_complex*>(scratch.data()), sign,
                                   FFTW_ESTIMATE | FFTW_UNALIGNED);
    if (!p) throw numeric_error("fftw plan creation failed for n=" + std::to_string(n));
    cache.emplace(key, p);
    return p;
  }
};

}  // namespace wbfm
