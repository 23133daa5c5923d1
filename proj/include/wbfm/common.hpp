#pragma once

// Shared aliases, constants and error types for the wbfm library.

#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <vector>

namespace wbfm {

using cplx = std::complex<double>;
using cvec = std::vector<cplx>;
using rvec = std::vector<double>;
using ivec = std::vector<int>;

inline constexpr double pi = 3.141592653589793238462643383279502884;

// Error taxonomy mirrors the CLI exit codes: config/usage -> 1,
// numerical failure -> 2, file I/O -> 3.
struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct numeric_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct io_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Nonnegative remainder of a mod m (m > 0); works for negative a.
inline int imod(int a, int m) {
  int r = a % m;
  return r < 0 ? r + m : r;
}
inline long imod(long a, long m) {
  long r = a % m;
  return r < 0 ? r + m : r;
}

// Signed representative of x modulo L in [-L/2, L/2).
inline double signed_mod(double x, double L) {
  double r = std::fmod(x + L / 2.0, L);
  if (r < 0) r += L;
  return r - L / 2.0;
}

// Centered integer representative: t in [0,L) -> tau in [-L/2, L/2).
inline int centered_index(int t, int L) {
  int tau = imod(t + L / 2, L);
  return tau - L / 2;
}

inline double sq(double x) { return x * x; }

// Non-fatal diagnostics (degenerate frames, zero-denominator criteria, ...).
// Kept as a free function so tests can silence it if ever needed.
inline void warn(const std::string& msg) { std::fputs(("warning: " + msg + "\n").c_str(), stderr); }

}  // namespace wbfm
