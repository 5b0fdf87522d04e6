#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace c3sl {

// Execution path for circular convolution / correlation.
//
// Naive is the O(D^2) direct sum with a fixed accumulation order; Fft is the
// O(D log D) transform path. Auto picks Naive below kFftPathThreshold and Fft
// at or above it. The naive path is not just a fallback: binding with a
// coordinate delta is bit-exact on it, which the R=1 degeneration contract
// relies on, and at small D it is also the faster option.
enum class ConvPath : std::uint8_t { Auto = 0, Naive = 1, Fft = 2 };

inline constexpr std::size_t kFftPathThreshold = 128;

ConvPath resolve_path(ConvPath path, std::size_t dim);

// Fixed set of unit-norm binding keys plus the seed that generated them.
// Immutable after creation; no operation in this library writes to a KeySet.
class KeySet {
 public:
  enum class Mode : std::uint8_t { Random = 0, Delta = 1 };

  // count keys of dimension dim, entries i.i.d. Normal(0, 1/dim) from the
  // seeded generator, each key rescaled to unit L2 norm.
  static KeySet generate(std::size_t dim, std::size_t count, std::uint64_t seed);

  // Debug keys: key i is the coordinate delta at index i mod dim. Binding
  // with them is an exact circular shift, which exposes identity paths.
  static KeySet delta(std::size_t dim, std::size_t count);

  // Adopts externally loaded key values (used by the key-file reader).
  static KeySet from_values(std::size_t dim, std::size_t count, std::uint64_t seed,
                            std::vector<double> values, Mode mode);

  std::size_t dim() const { return dim_; }
  std::size_t count() const { return count_; }
  std::uint64_t seed() const { return seed_; }
  Mode mode() const { return mode_; }

  std::span<const double> key(std::size_t i) const;

  // R x D, the paper's memory-overhead figure for this codec.
  std::size_t param_count() const { return dim_ * count_; }

  // FNV-1a over the raw key bytes; lets tests assert keys stay frozen.
  std::uint64_t content_digest() const;

 private:
  KeySet(std::size_t dim, std::size_t count, std::uint64_t seed, Mode mode)
      : dim_(dim), count_(count), seed_(seed), mode_(mode) {}

  std::size_t dim_;
  std::size_t count_;
  std::uint64_t seed_;
  Mode mode_;
  std::vector<double> values_;  // row-major, count x dim
};

// Circular convolution: out_j = sum_k key_k * z_{(j-k) mod D}.
std::vector<double> bind(std::span<const double> key, std::span<const double> z,
                         ConvPath path = ConvPath::Auto);

// Circular correlation: out_j = sum_k key_k * s_{(j+k) mod D}. Approximate
// inverse of bind for random unit keys, and its exact adjoint.
std::vector<double> unbind(std::span<const double> key, std::span<const double> s,
                           ConvPath path = ConvPath::Auto);

// Gradient of <upstream, bind(key, z)> with respect to z. Equals
// unbind(key, upstream); named separately so the backward path reads as such.
std::vector<double> bind_adjoint(std::span<const double> key,
                                 std::span<const double> upstream,
                                 ConvPath path = ConvPath::Auto);

// Gradient of <upstream, unbind(key, s)> with respect to s. Equals
// bind(key, upstream).
std::vector<double> unbind_adjoint(std::span<const double> key,
                                   std::span<const double> upstream,
                                   ConvPath path = ConvPath::Auto);

// Elementwise sum of bound vectors.
std::vector<double> superpose(const std::vector<std::vector<double>>& bound);

// S = sum_i bind(keys[i], group[i]); group is n rows of keys.dim() values,
// row-major, 1 <= n <= keys.count(). A trailing partial group uses the first
// n keys.
std::vector<double> encode_group(const KeySet& keys, const double* group, std::size_t n,
                                 ConvPath path = ConvPath::Auto);
std::vector<double> encode_group(const KeySet& keys,
                                 const std::vector<std::vector<double>>& group,
                                 ConvPath path = ConvPath::Auto);

// Retrieves slot i from a compressed vector: unbind(keys[i], s).
std::vector<double> decode_slot(const KeySet& keys, std::span<const double> s,
                                std::size_t i, ConvPath path = ConvPath::Auto);

// Splits the retrieval of slot `index` into its two error sources:
//   signal = unbind(K_i, bind(K_i, Z_i))
//   cross  = sum_{j != i} unbind(K_i, bind(K_j, Z_j))
// signal + cross equals decode_slot(keys, encode_group(...), index) up to
// floating-point associativity.
struct NoiseDecomposition {
  std::vector<double> signal_term;
  std::vector<double> cross_term;
};
NoiseDecomposition noise_decomposition(const KeySet& keys,
                                       const std::vector<std::vector<double>>& group,
                                       std::size_t index,
                                       ConvPath path = ConvPath::Auto);

// Cosine similarity; 0 when either vector is all-zero.
double cosine(std::span<const double> a, std::span<const double> b);

}  // namespace c3sl
