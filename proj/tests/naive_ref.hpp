#pragma once

// Independent reference implementations for the codec tests. These stay in
// the test tree on purpose: they are the oracle the production paths are
// checked against, written in scatter form so they do not share structure
// (or mistakes) with the library's gather-form loops.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace ref {

// out[(k + m) % D] += key[k] * z[m]
inline std::vector<double> circular_convolution(std::span<const double> key,
                                                std::span<const double> z) {
  const std::size_t d = key.size();
  std::vector<double> out(d, 0.0);
  for (std::size_t k = 0; k < d; ++k) {
    for (std::size_t m = 0; m < d; ++m) {
      out[(k + m) % d] += key[k] * z[m];
    }
  }
  return out;
}

// out[(t - k) mod D] += key[k] * s[t]
inline std::vector<double> circular_correlation(std::span<const double> key,
                                                std::span<const double> s) {
  const std::size_t d = key.size();
  std::vector<double> out(d, 0.0);
  for (std::size_t k = 0; k < d; ++k) {
    for (std::size_t t = 0; t < d; ++t) {
      out[(t + d - k) % d] += key[k] * s[t];
    }
  }
  return out;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

inline double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline double rel_err(double a, double b) {
  const double scale = std::max({std::abs(a), std::abs(b), 1e-300});
  return std::abs(a - b) / scale;
}

// || a - b || / max(||a||, ||b||)
inline double vec_rel_err(std::span<const double> a, std::span<const double> b) {
  double diff = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) diff += (a[i] - b[i]) * (a[i] - b[i]);
  const double scale = std::max({norm(a), norm(b), 1e-300});
  return std::sqrt(diff) / scale;
}

}  // namespace ref
