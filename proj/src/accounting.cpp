#include "c3sl/accounting.hpp"

#include <stdexcept>

namespace c3sl {

namespace {
void check_positive(std::uint64_t v, const char* name) {
  if (v == 0) throw std::invalid_argument(std::string(name) + " must be positive");
}
}  // namespace

std::uint64_t c3sl_params(std::uint64_t ratio, std::uint64_t dim) {
  check_positive(ratio, "ratio");
  check_positive(dim, "dim");
  return ratio * dim;
}

std::uint64_t c3sl_flops(std::uint64_t batch, std::uint64_t dim) {
  check_positive(batch, "batch");
  check_positive(dim, "dim");
  return 2 * batch * dim * dim;
}

std::uint64_t bottlenet_params(std::uint64_t channels, std::uint64_t kernel,
                               std::uint64_t ratio) {
  check_positive(channels, "channels");
  check_positive(kernel, "kernel");
  check_positive(ratio, "ratio");
  const std::uint64_t compressed = 4 * channels / ratio;  // floors when R does not divide 4C
  const std::uint64_t k2 = kernel * kernel;
  return (channels * k2 + 1) * compressed + (compressed * k2 + 1) * channels;
}

std::uint64_t bottlenet_flops(std::uint64_t batch, std::uint64_t channels,
                              std::uint64_t kernel, std::uint64_t ratio, std::uint64_t h,
                              std::uint64_t w, std::uint64_t h_out, std::uint64_t w_out) {
  check_positive(batch, "batch");
  check_positive(channels, "channels");
  check_positive(kernel, "kernel");
  check_positive(ratio, "ratio");
  check_positive(h, "h");
  check_positive(w, "w");
  check_positive(h_out, "h_out");
  check_positive(w_out, "w_out");
  const std::uint64_t k2 = kernel * kernel;
  const std::uint64_t enc =
      batch * (2 * channels * k2 + 1) * (4 * channels / ratio) * h_out * w_out;
  const std::uint64_t dec = batch * ((8 * channels / ratio) * k2 + 1) * channels * h * w;
  return enc + dec;
}

bool bottlenet_ratio_divides(std::uint64_t channels, std::uint64_t ratio) {
  return (4 * channels) % ratio == 0;
}

CommBytes comm_bytes(std::uint64_t batch, std::uint64_t dim, std::uint64_t ratio,
                     std::uint64_t bytes_per_scalar) {
  check_positive(batch, "batch");
  check_positive(dim, "dim");
  check_positive(ratio, "ratio");
  check_positive(bytes_per_scalar, "bytes_per_scalar");
  const std::uint64_t groups = (batch + ratio - 1) / ratio;
  CommBytes out;
  out.forward_feature_bytes = groups * dim * bytes_per_scalar;
  out.forward_label_bytes = batch * 4;
  out.backward_feature_bytes = groups * dim * bytes_per_scalar;
  return out;
}

std::vector<SplitShape> reference_split_shapes() {
  return {
      {"vgg16-cifar10", 512, 2, 2, 1, 1, 2},
      {"resnet50-cifar100", 1024, 2, 2, 1, 1, 2},
  };
}

std::vector<CostReport> cost_grid(const std::vector<SplitShape>& shapes,
                                  const std::vector<std::uint64_t>& ratios,
                                  std::uint64_t batch) {
  std::vector<CostReport> out;
  for (const auto& shape : shapes) {
    const std::uint64_t dim = shape.dim();
    for (std::uint64_t r : ratios) {
      const CommBytes comm = comm_bytes(batch, dim, r, 4);

      CostReport c3;
      c3.method = "c3sl";
      c3.model = shape.model;
      c3.ratio = r;
      c3.params = c3sl_params(r, dim);
      c3.flops = c3sl_flops(batch, dim);
      c3.forward_payload_bytes = comm.forward_feature_bytes;
      c3.backward_payload_bytes = comm.backward_feature_bytes;
      out.push_back(c3);

      CostReport bn;
      bn.method = "bottlenet++";
      bn.model = shape.model;
      bn.ratio = r;
      bn.params = bottlenet_params(shape.channels, shape.kernel, r);
      bn.flops = bottlenet_flops(batch, shape.channels, shape.kernel, r, shape.h,
                                 shape.w, shape.h_out, shape.w_out);
      // BottleNet++ shrinks channels to 4C/R and spatial dims to H'xW'.
      const std::uint64_t bn_dim = (4 * shape.channels / r) * shape.h_out * shape.w_out;
      bn.forward_payload_bytes = batch * bn_dim * 4;
      bn.backward_payload_bytes = batch * bn_dim * 4;
      bn.floored_division = !bottlenet_ratio_divides(shape.channels, r);
      out.push_back(bn);
    }
  }
  return out;
}

}  // namespace c3sl
