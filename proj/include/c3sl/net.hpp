#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "c3sl/common.hpp"

namespace c3sl {

enum class Activation : std::uint8_t { None = 0, Relu = 1 };

struct DenseLayer {
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;
  std::vector<double> weights;  // out_dim x in_dim, row-major
  std::vector<double> bias;     // out_dim
  Activation act = Activation::None;
};

// Seeded initialization: He-uniform for relu layers, Glorot-uniform otherwise,
// zero bias. The layer seed is derived from (seed, layer_index) so the edge
// and cloud halves initialize identically whether they live in one process or
// two.
DenseLayer make_dense(std::size_t in_dim, std::size_t out_dim, Activation act,
                      std::uint64_t seed, std::size_t layer_index);

struct LayerGrads {
  std::vector<double> weights;
  std::vector<double> bias;
};
using Gradients = std::vector<LayerGrads>;

// Per-layer forward/backward caches for one half of the model.
struct HalfCache {
  std::vector<Matrix> inputs;    // input to each layer
  std::vector<Matrix> preacts;   // W x + b before activation
  Matrix output;
  std::uint64_t step_id = 0;     // guards against stale-cache backward
};

// One half of the split model (a plain stack of dense layers).
class Half {
 public:
  Half() = default;
  explicit Half(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {}

  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& layers() { return layers_; }

  std::size_t in_dim() const { return layers_.front().in_dim; }
  std::size_t out_dim() const { return layers_.back().out_dim; }

  // x is batch x in_dim. The cache is stamped with step_id.
  Matrix forward(const Matrix& x, HalfCache& cache, std::uint64_t step_id) const;
  Matrix forward(const Matrix& x) const;  // no cache, evaluation only

  // upstream is batch x out_dim; returns gradient with respect to the input
  // and fills per-layer parameter grads.
  Matrix backward(const HalfCache& cache, const Matrix& upstream, Gradients& grads,
                  std::uint64_t step_id) const;

  std::size_t param_count() const;

 private:
  std::vector<DenseLayer> layers_;
};

struct SplitModel {
  Half edge;   // f_theta, runs on the edge device
  Half cloud;  // f_psi, runs on the cloud server
  std::size_t cut_dim = 0;
  std::size_t num_classes = 0;
};

// MLP halves: input -> edge_hidden(relu)... -> cut_dim, then
// cut_dim -> cloud_hidden(relu)... -> num_classes (linear head).
SplitModel make_split_model(std::size_t input_dim, const std::vector<std::size_t>& edge_hidden,
                            std::size_t cut_dim, const std::vector<std::size_t>& cloud_hidden,
                            std::size_t num_classes, std::uint64_t seed);

// Mean cross-entropy over the batch plus the gradient with respect to the
// logits (softmax - onehot, divided by batch size).
double softmax_cross_entropy(const Matrix& logits, const std::vector<std::uint32_t>& labels,
                             Matrix& dlogits);

// Row-wise argmax with lowest-index tie-breaking.
std::vector<std::uint32_t> argmax_rows(const Matrix& logits);

class AdamOptimizer {
 public:
  AdamOptimizer() = default;
  AdamOptimizer(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void attach(const std::vector<DenseLayer>& layers);
  void step(std::vector<DenseLayer>& layers, const Gradients& grads);

  std::uint64_t step_count() const { return step_; }
  double learning_rate() const { return lr_; }

 private:
  struct Slot {
    std::vector<double> m_w, v_w, m_b, v_b;
  };

  double lr_ = 1e-4;
  double beta1_ = 0.9;
  double beta2_ = 0.999;
  double eps_ = 1e-8;
  std::uint64_t step_ = 0;
  std::vector<Slot> slots_;
};

// Checkpoint layout (little-endian): magic "C3MD", version u16, layer count
// u16, then per layer: in_dim u32, out_dim u32, activation u8, weights then
// bias as 32-bit IEEE-754.
inline constexpr std::uint16_t kCheckpointVersion = 1;

void write_checkpoint(const std::string& path, const std::vector<DenseLayer>& layers);
std::vector<DenseLayer> read_checkpoint(const std::string& path);

}  // namespace c3sl
