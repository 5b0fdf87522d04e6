#include "c3sl/codec.hpp"

#include <fftw3.h>

#include <cmath>
#include <complex>
#include <cstring>
#include <map>
#include <mutex>
#include <stdexcept>
#include <string>

#include "c3sl/common.hpp"
#include "c3sl/errors.hpp"

namespace c3sl {

namespace {

void check_same_dim(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("dimension mismatch: " + std::to_string(a.size()) +
                                " vs " + std::to_string(b.size()));
  }
  if (a.empty()) throw std::invalid_argument("zero-dimensional vector");
}

// --- naive O(D^2) path -----------------------------------------------------
// Fixed accumulation order (k ascending). With a delta key this reduces to a
// pure permutation of the input bits, which the vanilla-SL degeneration
// contract depends on.

std::vector<double> conv_naive(std::span<const double> key, std::span<const double> z) {
  const std::size_t d = key.size();
  std::vector<double> out(d);
  for (std::size_t j = 0; j < d; ++j) {
    // out_j = sum_k key_k * z_{(j-k) mod d}, k ascending, split at the wrap
    double acc = 0.0;
    for (std::size_t k = 0; k <= j; ++k) acc += key[k] * z[j - k];
    for (std::size_t k = j + 1; k < d; ++k) acc += key[k] * z[j + d - k];
    out[j] = acc;
  }
  return out;
}

std::vector<double> corr_naive(std::span<const double> key, std::span<const double> s) {
  const std::size_t d = key.size();
  std::vector<double> out(d);
  for (std::size_t j = 0; j < d; ++j) {
    // out_j = sum_k key_k * s_{(j+k) mod d}, k ascending, split at the wrap
    double acc = 0.0;
    for (std::size_t k = 0; k < d - j; ++k) acc += key[k] * s[j + k];
    for (std::size_t k = d - j; k < d; ++k) acc += key[k] * s[j + k - d];
    out[j] = acc;
  }
  return out;
}

// --- FFT path ----------------------------------------------------------------
// Plans are cached per dimension and created with FFTW_ESTIMATE so the chosen
// algorithm depends only on the size; FFTW_UNALIGNED lets the new-array
// execute functions run on ordinary std::vector storage. Plan creation is not
// thread-safe in FFTW, hence the mutex; execution via the new-array API is.

struct FftPlans {
  fftw_plan r2c = nullptr;
  fftw_plan c2r = nullptr;
};

FftPlans& plans_for(std::size_t d) {
  static std::mutex mu;
  static std::map<std::size_t, FftPlans> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(d);
  if (it != cache.end()) return it->second;

  std::vector<double> real(d);
  std::vector<std::complex<double>> cplx(d / 2 + 1);
  FftPlans p;
  const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
  p.r2c = fftw_plan_dft_r2c_1d(static_cast<int>(d), real.data(),
                               reinterpret_cast<fftw_complex*>(cplx.data()), flags);
  p.c2r = fftw_plan_dft_c2r_1d(static_cast<int>(d),
                               reinterpret_cast<fftw_complex*>(cplx.data()), real.data(),
                               flags);
  if (p.r2c == nullptr || p.c2r == nullptr) {
    throw std::runtime_error("fftw plan creation failed for dim " + std::to_string(d));
  }
  return cache.emplace(d, p).first->second;
}

void fft_forward(std::size_t d, const double* in, std::complex<double>* out) {
  // FFTW's r2c transform modifies neither buffer's ownership but wants a
  // non-const input pointer.
  fftw_execute_dft_r2c(plans_for(d).r2c, const_cast<double*>(in),
                       reinterpret_cast<fftw_complex*>(out));
}

void fft_inverse(std::size_t d, std::complex<double>* in, double* out) {
  fftw_execute_dft_c2r(plans_for(d).c2r, reinterpret_cast<fftw_complex*>(in), out);
}

std::vector<double> conv_fft(std::span<const double> key, std::span<const double> z,
                             bool conjugate_key) {
  const std::size_t d = key.size();
  const std::size_t bins = d / 2 + 1;
  std::vector<std::complex<double>> fk(bins), fz(bins);
  fft_forward(d, key.data(), fk.data());
  fft_forward(d, z.data(), fz.data());
  for (std::size_t m = 0; m < bins; ++m) {
    const std::complex<double> k = conjugate_key ? std::conj(fk[m]) : fk[m];
    fk[m] = k * fz[m];
  }
  std::vector<double> out(d);
  fft_inverse(d, fk.data(), out.data());
  const double inv_d = 1.0 / static_cast<double>(d);
  for (double& v : out) v *= inv_d;
  return out;
}

}  // namespace

ConvPath resolve_path(ConvPath path, std::size_t dim) {
  if (path != ConvPath::Auto) return path;
  return dim >= kFftPathThreshold ? ConvPath::Fft : ConvPath::Naive;
}

KeySet KeySet::generate(std::size_t dim, std::size_t count, std::uint64_t seed) {
  if (dim == 0) throw std::invalid_argument("key dimension must be positive");
  if (count == 0) throw std::invalid_argument("key count must be positive");
  KeySet ks(dim, count, seed, Mode::Random);
  ks.values_.resize(dim * count);
  Rng rng(seed);
  const double sigma = 1.0 / std::sqrt(static_cast<double>(dim));
  for (std::size_t i = 0; i < count; ++i) {
    double* k = ks.values_.data() + i * dim;
    double norm_sq = 0.0;
    for (std::size_t j = 0; j < dim; ++j) {
      k[j] = sigma * rng.gaussian();
      norm_sq += k[j] * k[j];
    }
    if (norm_sq == 0.0) {
      throw std::runtime_error("key sampled to the all-zero vector");
    }
    const double inv_norm = 1.0 / std::sqrt(norm_sq);
    for (std::size_t j = 0; j < dim; ++j) k[j] *= inv_norm;
  }
  return ks;
}

KeySet KeySet::delta(std::size_t dim, std::size_t count) {
  if (dim == 0) throw std::invalid_argument("key dimension must be positive");
  if (count == 0) throw std::invalid_argument("key count must be positive");
  KeySet ks(dim, count, 0, Mode::Delta);
  ks.values_.assign(dim * count, 0.0);
  for (std::size_t i = 0; i < count; ++i) {
    ks.values_[i * dim + (i % dim)] = 1.0;
  }
  return ks;
}

KeySet KeySet::from_values(std::size_t dim, std::size_t count, std::uint64_t seed,
                           std::vector<double> values, Mode mode) {
  if (dim == 0 || count == 0) throw std::invalid_argument("empty key set");
  if (values.size() != dim * count) {
    throw std::invalid_argument("key value buffer has wrong size");
  }
  KeySet ks(dim, count, seed, mode);
  ks.values_ = std::move(values);
  return ks;
}

std::span<const double> KeySet::key(std::size_t i) const {
  if (i >= count_) throw std::invalid_argument("key index out of range");
  return {values_.data() + i * dim_, dim_};
}

std::uint64_t KeySet::content_digest() const {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  const auto* bytes = reinterpret_cast<const unsigned char*>(values_.data());
  const std::size_t n = values_.size() * sizeof(double);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= bytes[i];
    h *= 0x100000001B3ULL;
  }
  return h;
}

std::vector<double> bind(std::span<const double> key, std::span<const double> z,
                         ConvPath path) {
  check_same_dim(key, z);
  if (resolve_path(path, key.size()) == ConvPath::Fft) {
    return conv_fft(key, z, /*conjugate_key=*/false);
  }
  return conv_naive(key, z);
}

std::vector<double> unbind(std::span<const double> key, std::span<const double> s,
                           ConvPath path) {
  check_same_dim(key, s);
  if (resolve_path(path, key.size()) == ConvPath::Fft) {
    return conv_fft(key, s, /*conjugate_key=*/true);
  }
  return corr_naive(key, s);
}

std::vector<double> bind_adjoint(std::span<const double> key,
                                 std::span<const double> upstream, ConvPath path) {
  return unbind(key, upstream, path);
}

std::vector<double> unbind_adjoint(std::span<const double> key,
                                   std::span<const double> upstream, ConvPath path) {
  return bind(key, upstream, path);
}

std::vector<double> superpose(const std::vector<std::vector<double>>& bound) {
  if (bound.empty()) throw std::invalid_argument("superpose of empty list");
  const std::size_t d = bound.front().size();
  if (d == 0) throw std::invalid_argument("zero-dimensional vector");
  std::vector<double> out(d, 0.0);
  for (const auto& v : bound) {
    if (v.size() != d) throw std::invalid_argument("superpose with mixed dimensions");
    for (std::size_t j = 0; j < d; ++j) out[j] += v[j];
  }
  return out;
}

std::vector<double> encode_group(const KeySet& keys, const double* group, std::size_t n,
                                 ConvPath path) {
  if (n == 0) throw std::invalid_argument("empty group");
  if (n > keys.count()) {
    throw std::invalid_argument("group of " + std::to_string(n) +
                                " features exceeds key count " +
                                std::to_string(keys.count()));
  }
  const std::size_t d = keys.dim();
  std::vector<double> out(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto v = bind(keys.key(i), std::span<const double>(group + i * d, d), path);
    for (std::size_t j = 0; j < d; ++j) out[j] += v[j];
  }
  return out;
}

std::vector<double> encode_group(const KeySet& keys,
                                 const std::vector<std::vector<double>>& group,
                                 ConvPath path) {
  if (group.empty()) throw std::invalid_argument("empty group");
  const std::size_t d = keys.dim();
  Matrix rows(group.size(), d);
  for (std::size_t i = 0; i < group.size(); ++i) {
    if (group[i].size() != d) {
      throw std::invalid_argument("group feature dimension does not match keys");
    }
    std::memcpy(rows.row(i), group[i].data(), d * sizeof(double));
  }
  return encode_group(keys, rows.data.data(), group.size(), path);
}

std::vector<double> decode_slot(const KeySet& keys, std::span<const double> s,
                                std::size_t i, ConvPath path) {
  if (i >= keys.count()) throw std::invalid_argument("decode slot out of range");
  return unbind(keys.key(i), s, path);
}

NoiseDecomposition noise_decomposition(const KeySet& keys,
                                       const std::vector<std::vector<double>>& group,
                                       std::size_t index, ConvPath path) {
  if (group.empty()) throw std::invalid_argument("empty group");
  if (index >= group.size()) throw std::invalid_argument("index outside group bounds");
  if (group.size() > keys.count()) {
    throw std::invalid_argument("group exceeds key count");
  }
  const std::size_t d = keys.dim();
  NoiseDecomposition out;
  out.cross_term.assign(d, 0.0);
  for (std::size_t j = 0; j < group.size(); ++j) {
    if (group[j].size() != d) {
      throw std::invalid_argument("group feature dimension does not match keys");
    }
    auto retrieved = unbind(keys.key(index), bind(keys.key(j), group[j], path), path);
    if (j == index) {
      out.signal_term = std::move(retrieved);
    } else {
      for (std::size_t k = 0; k < d; ++k) out.cross_term[k] += retrieved[k];
    }
  }
  return out;
}

double cosine(std::span<const double> a, std::span<const double> b) {
  check_same_dim(a, b);
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace c3sl
