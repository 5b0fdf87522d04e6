#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace c3sl {

// Cost formulas for the two compression schemes, plus the communication
// counters the transport reports against. All formulas are evaluated exactly
// as printed in their source tables, with integer floor division where the
// compressed channel count 4C/R does not divide evenly.

// Key memory of the circular-convolution codec: R x D.
std::uint64_t c3sl_params(std::uint64_t ratio, std::uint64_t dim);

// Per-batch encode+decode FLOPs of the codec: 2*B*D^2 (one circular
// convolution and one correlation per sample, D^2 each). Independent of R.
std::uint64_t c3sl_flops(std::uint64_t batch, std::uint64_t dim);

// BottleNet++ encoder/decoder parameter count:
//   (C*k^2 + 1) * (4C/R) + ((4C/R)*k^2 + 1) * C
std::uint64_t bottlenet_params(std::uint64_t channels, std::uint64_t kernel,
                               std::uint64_t ratio);

// BottleNet++ training FLOPs:
//   B*(2*C*k^2 + 1)*(4C/R)*H'*W' + B*((8C/R)*k^2 + 1)*C*H*W
std::uint64_t bottlenet_flops(std::uint64_t batch, std::uint64_t channels,
                              std::uint64_t kernel, std::uint64_t ratio,
                              std::uint64_t h, std::uint64_t w, std::uint64_t h_out,
                              std::uint64_t w_out);

// True when 4C is divisible by R; otherwise the formulas above flooring.
bool bottlenet_ratio_divides(std::uint64_t channels, std::uint64_t ratio);

struct CommBytes {
  std::uint64_t forward_feature_bytes = 0;  // ceil(B/R) * D * bytes_per_scalar
  std::uint64_t forward_label_bytes = 0;    // B * 4, reported separately
  std::uint64_t backward_feature_bytes = 0; // ceil(B/R) * D * bytes_per_scalar
};

CommBytes comm_bytes(std::uint64_t batch, std::uint64_t dim, std::uint64_t ratio,
                     std::uint64_t bytes_per_scalar);

struct CostReport {
  std::string method;        // "c3sl" or "bottlenet++"
  std::string model;         // labeling only, e.g. "vgg16-cifar10"
  std::uint64_t ratio = 0;
  std::uint64_t params = 0;
  std::uint64_t flops = 0;   // training FLOPs per batch
  std::uint64_t forward_payload_bytes = 0;
  std::uint64_t backward_payload_bytes = 0;
  bool floored_division = false;  // BottleNet++ with R not dividing 4C
};

// Split-point shape for a cost grid entry. dim must equal channels*h*w.
struct SplitShape {
  std::string model;
  std::uint64_t channels = 0;
  std::uint64_t h = 0;
  std::uint64_t w = 0;
  std::uint64_t h_out = 1;
  std::uint64_t w_out = 1;
  std::uint64_t kernel = 2;
  std::uint64_t dim() const { return channels * h * w; }
};

// The two split points the comparison tables use. Feature dims back out to
// D=2048 (C=512, 2x2) and D=4096 (C=1024, 2x2).
std::vector<SplitShape> reference_split_shapes();

// Reports for both methods over the given ratios, at batch size `batch`.
std::vector<CostReport> cost_grid(const std::vector<SplitShape>& shapes,
                                  const std::vector<std::uint64_t>& ratios,
                                  std::uint64_t batch);

}  // namespace c3sl
