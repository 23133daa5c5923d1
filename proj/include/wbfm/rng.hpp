#pragma once

// Seedable random generator with a pinned cross-platform stream.
//
// std::normal_distribution is implementation-defined, which would break the
// bit-reproducibility contract of the experiment runner, so the Gaussian
// draws use an explicit Box-Muller transform over mt19937_64 with a fixed
// 53-bit uniform mapping. Every draw sequence depends only on the seed.

#include <cmath>
#include <random>

#include "wbfm/common.hpp"

namespace wbfm {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  // Uniform on [0, 1) with 53-bit resolution.
  double uniform() { return (eng_() >> 11) * 0x1.0p-53; }

  // Uniform on [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller; pairs are generated together and the
  // second member cached, so the stream is a pure function of the seed.
  double gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();  // guard log(0)
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * pi * u2);
    have_spare_ = true;
    return r * std::cos(2.0 * pi * u2);
  }

  // Standard circular complex normal: E|z|^2 = 1, E[z^2] = 0.
  cplx cgaussian() {
    double re = gaussian();
    double im = gaussian();
    return cplx(re, im) * 0.7071067811865475244;  // 1/sqrt(2)
  }

  std::uint64_t raw() { return eng_(); }

 private:
  std::mt19937_64 eng_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace wbfm
