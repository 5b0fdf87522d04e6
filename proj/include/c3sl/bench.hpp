#pragma once

#include <cstdint>
#include <vector>

#include "c3sl/codec.hpp"

namespace c3sl {

// Monte-Carlo retrieval quality of the codec at one compression ratio:
// fresh keys and R random unit-norm gaussian features per trial, encode,
// decode every slot, and split each retrieval into its two error sources.
struct BenchRow {
  std::size_t dim = 0;
  std::size_t ratio = 0;
  std::size_t trials = 0;
  double mean_cosine = 0.0;
  double std_cosine = 0.0;
  double signal_energy = 0.0;  // mean ||K_i . (K_i * Z_i)||^2
  double cross_energy = 0.0;   // mean ||sum_{j!=i} K_i . (K_j * Z_j)||^2
};

BenchRow run_retrieval_bench(std::size_t dim, std::size_t ratio, std::size_t trials,
                             std::uint64_t seed, bool delta_keys,
                             ConvPath path = ConvPath::Auto);

}  // namespace c3sl
