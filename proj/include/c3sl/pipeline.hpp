#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "c3sl/codec.hpp"
#include "c3sl/common.hpp"
#include "c3sl/dataset.hpp"
#include "c3sl/net.hpp"

namespace c3sl {

enum class Compression : std::uint8_t { None = 0, C3sl = 1 };

struct TrainConfig {
  std::size_t ratio = 1;        // R, features merged per group
  std::size_t batch = 64;       // B
  std::size_t cut_dim = 64;     // D, edge output width == key dimension
  std::size_t input_dim = 64;
  std::vector<std::size_t> edge_hidden = {128};
  std::vector<std::size_t> cloud_hidden = {128};
  std::size_t num_classes = 4;
  std::size_t epochs = 1;
  double learning_rate = 1e-4;
  std::uint64_t key_seed = 1;
  std::uint64_t model_seed = 1;
  KeySet::Mode key_mode = KeySet::Mode::Random;
  Compression compression = Compression::C3sl;
  ConvPath conv_path = ConvPath::Auto;
  bool strict_grouping = false;
  // Reshuffle the training set each epoch (seeded); regrouping between epochs
  // gives every sample fresh superposition partners.
  bool shuffle = true;
  std::uint64_t shuffle_seed = 1;
  // When set, activations and gradients are rounded through 32-bit floats at
  // the points where the transport serializes them, so an in-process run is
  // bit-comparable to a networked one. Gradient-checking tests switch this
  // off; quantization noise otherwise dominates finite differences.
  bool wire_float32 = true;
  bool eval_each_epoch = false;

  void validate() const;  // throws std::invalid_argument
};

KeySet make_keys(const TrainConfig& cfg);
SplitModel make_model(const TrainConfig& cfg);

// Digest over every field that shapes the training trajectory; the handshake
// compares the edge's and cloud's values.
std::uint64_t config_digest(const TrainConfig& cfg);

struct GroupSlice {
  std::size_t row_begin = 0;
  std::size_t rows = 0;
};

// Consecutive, order-preserving slices of `ratio` rows; the final slice holds
// the remainder unless strict, in which case non-divisibility is an error.
std::vector<GroupSlice> divide_groups(std::size_t batch, std::size_t ratio, bool strict);

// Sample order for one epoch: identity when shuffling is off, otherwise a
// Fisher-Yates permutation seeded by (seed, epoch). The edge process and the
// in-process trainer share this so their trajectories stay bit-comparable.
std::vector<std::uint32_t> epoch_order(std::size_t n, const TrainConfig& cfg,
                                       std::size_t epoch);

// Gathers rows [begin, begin+rows) of the epoch order into a batch.
void gather_batch(const Dataset& data, const std::vector<std::uint32_t>& order,
                  std::size_t begin, std::size_t rows, Matrix& x,
                  std::vector<std::uint32_t>& labels);

// Compressed view of one batch as the wire carries it: num_groups rows of
// cut_dim scalars plus the per-group feature counts and the labels.
struct EncodedBatch {
  std::vector<std::uint16_t> group_sizes;  // empty in Compression::None mode
  std::vector<double> data;                // (num_groups or batch) x cut_dim
  std::vector<std::uint32_t> labels;

  std::size_t feature_block_bytes() const { return data.size() * 4; }
  std::size_t label_bytes() const { return labels.size() * 4; }
};

// Pure per-batch codec steps shared by the in-process pipeline and both
// transport endpoints. `wire_round` applies the 32-bit rounding the transport
// would perform.
EncodedBatch encode_batch(const Matrix& z, const std::vector<std::uint32_t>& labels,
                          const KeySet& keys, const TrainConfig& cfg);
Matrix decode_batch(const std::vector<std::uint16_t>& group_sizes,
                    std::span<const double> data, const KeySet& keys,
                    const TrainConfig& cfg);
// Cloud side of the backward pass: gradient with respect to each compressed
// vector, dL/dS^g = sum_i bind(K_i, dL/dZhat_i), rounded for the wire.
std::vector<double> decode_backward(const std::vector<std::uint16_t>& group_sizes,
                                    const Matrix& grad_restored, const KeySet& keys,
                                    const TrainConfig& cfg);
// Edge side: continue from dL/dS^g to dL/dZ_i = unbind(K_i, dL/dS^g).
Matrix encode_backward(const std::vector<std::uint16_t>& group_sizes,
                       std::span<const double> grad_compressed, const KeySet& keys,
                       const TrainConfig& cfg);

// f_theta plus its optimizer; owns the forward cache between the two phases
// of a step. Used directly by the edge process and by the in-process trainer.
class EdgeRuntime {
 public:
  EdgeRuntime(Half edge, KeySet keys, const TrainConfig& cfg);

  EncodedBatch forward(const Matrix& x, const std::vector<std::uint32_t>& labels);
  void backward(std::span<const double> grad_compressed);

  // Evaluation-path encoding; leaves training state untouched.
  EncodedBatch encode_only(const Matrix& x, const std::vector<std::uint32_t>& labels) const;

  const Half& half() const { return edge_; }
  const KeySet& keys() const { return keys_; }

 private:
  Half edge_;
  KeySet keys_;
  TrainConfig cfg_;
  AdamOptimizer opt_;
  HalfCache cache_;
  std::vector<std::uint16_t> group_sizes_;
  std::uint64_t step_id_ = 0;
  bool awaiting_backward_ = false;
};

// f_psi plus its optimizer.
class CloudRuntime {
 public:
  CloudRuntime(Half cloud, KeySet keys, const TrainConfig& cfg);

  struct Result {
    double loss = 0.0;
    std::vector<double> grad_compressed;  // num_groups x cut_dim, wire-rounded
  };
  Result process(const std::vector<std::uint16_t>& group_sizes,
                 std::span<const double> data, const std::vector<std::uint32_t>& labels);

  // Decode + forward only; for evaluation.
  Matrix predict(const std::vector<std::uint16_t>& group_sizes,
                 std::span<const double> data) const;

  const Half& half() const { return cloud_; }
  const KeySet& keys() const { return keys_; }

 private:
  Half cloud_;
  KeySet keys_;
  TrainConfig cfg_;
  AdamOptimizer opt_;
  std::uint64_t step_id_ = 0;
};

struct StepResult {
  double loss = 0.0;
  std::uint64_t forward_feature_bytes = 0;
  std::uint64_t forward_label_bytes = 0;
  std::uint64_t backward_feature_bytes = 0;
};

struct StepRecord {
  std::size_t step = 0;
  std::size_t epoch = 0;
  double loss = 0.0;
  std::optional<double> accuracy;
  std::uint64_t forward_bytes = 0;
  std::uint64_t backward_bytes = 0;
  std::uint64_t cumulative_bytes = 0;
  double wall_ms = 0.0;
};

struct RunSummary {
  std::size_t steps = 0;
  std::size_t epochs = 0;
  double first_loss = 0.0;
  double final_loss = 0.0;
  std::optional<double> final_accuracy;
  std::uint64_t forward_feature_bytes = 0;
  std::uint64_t forward_label_bytes = 0;
  std::uint64_t backward_feature_bytes = 0;
  double achieved_ratio = 0.0;  // vanilla feature bytes / actual feature bytes
  double wall_ms = 0.0;
};

// steps.csv with the fixed header
// step,epoch,loss,accuracy,forward_bytes,backward_bytes,cumulative_bytes,wall_ms
void write_steps_csv(const std::string& path, const std::vector<StepRecord>& records);
std::string summary_json(const TrainConfig& cfg, const RunSummary& summary);

// In-process orchestration of the training loop: edge forward, group, encode,
// simulated transmission, decode, loss, backward through the codec with
// frozen keys, Adam on both halves.
class Trainer {
 public:
  Trainer(SplitModel model, KeySet keys, const TrainConfig& cfg);

  StepResult step(const Matrix& x, const std::vector<std::uint32_t>& labels);

  // Compression stays active at evaluation time.
  double evaluate(const Dataset& dataset) const;

  // Full run over a dataset; per-step records land in `records` when given.
  RunSummary run(const Dataset& train, const Dataset* test,
                 std::vector<StepRecord>* records);

  const Half& edge_half() const { return edge_.half(); }
  const Half& cloud_half() const { return cloud_.half(); }
  const KeySet& keys() const { return edge_.keys(); }

 private:
  TrainConfig cfg_;
  EdgeRuntime edge_;
  CloudRuntime cloud_;
};

// Loss and exact analytic gradients of one batch without touching optimizer
// state; the finite-difference suite drives this.
struct LossAndGrads {
  double loss = 0.0;
  Gradients edge_grads;
  Gradients cloud_grads;
};
LossAndGrads compute_loss_and_grads(const SplitModel& model, const KeySet& keys,
                                    const Matrix& x, const std::vector<std::uint32_t>& labels,
                                    const TrainConfig& cfg);
double compute_loss(const SplitModel& model, const KeySet& keys, const Matrix& x,
                    const std::vector<std::uint32_t>& labels, const TrainConfig& cfg);

}  // namespace c3sl
