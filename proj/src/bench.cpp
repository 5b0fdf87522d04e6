#include "c3sl/bench.hpp"

#include <cmath>
#include <stdexcept>

#include "c3sl/common.hpp"

namespace c3sl {

BenchRow run_retrieval_bench(std::size_t dim, std::size_t ratio, std::size_t trials,
                             std::uint64_t seed, bool delta_keys, ConvPath path) {
  if (dim == 0 || ratio == 0 || trials == 0) {
    throw std::invalid_argument("bench requires positive dim, ratio, and trials");
  }
  BenchRow row;
  row.dim = dim;
  row.ratio = ratio;
  row.trials = trials;

  double cos_sum = 0.0, cos_sq_sum = 0.0;
  double signal_sum = 0.0, cross_sum = 0.0;
  std::size_t samples = 0;

  for (std::size_t trial = 0; trial < trials; ++trial) {
    const std::uint64_t trial_seed = mix_seed(seed, (ratio << 20) + trial);
    const KeySet keys = delta_keys ? KeySet::delta(dim, ratio)
                                   : KeySet::generate(dim, ratio, trial_seed);
    Rng rng(mix_seed(trial_seed, 0xFEA7));
    std::vector<std::vector<double>> group(ratio);
    for (auto& z : group) {
      z.resize(dim);
      double norm_sq = 0.0;
      for (double& v : z) {
        v = rng.gaussian();
        norm_sq += v * v;
      }
      const double inv = 1.0 / std::sqrt(norm_sq);
      for (double& v : z) v *= inv;
    }

    const auto compressed = encode_group(keys, group, path);
    for (std::size_t i = 0; i < ratio; ++i) {
      const auto restored = decode_slot(keys, compressed, i, path);
      const double c = cosine(restored, group[i]);
      cos_sum += c;
      cos_sq_sum += c * c;

      const auto parts = noise_decomposition(keys, group, i, path);
      double se = 0.0, ce = 0.0;
      for (std::size_t j = 0; j < dim; ++j) {
        se += parts.signal_term[j] * parts.signal_term[j];
        ce += parts.cross_term[j] * parts.cross_term[j];
      }
      signal_sum += se;
      cross_sum += ce;
      ++samples;
    }
  }

  const double n = static_cast<double>(samples);
  row.mean_cosine = cos_sum / n;
  const double var = cos_sq_sum / n - row.mean_cosine * row.mean_cosine;
  row.std_cosine = var > 0.0 ? std::sqrt(var) : 0.0;
  row.signal_energy = signal_sum / n;
  row.cross_energy = cross_sum / n;
  return row;
}

}  // namespace c3sl
