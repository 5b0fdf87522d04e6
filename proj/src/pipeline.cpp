#include "c3sl/pipeline.hpp"

#include <bit>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "c3sl/errors.hpp"

namespace c3sl {

void TrainConfig::validate() const {
  if (ratio == 0) throw std::invalid_argument("ratio must be positive");
  if (batch == 0) throw std::invalid_argument("batch size must be positive");
  if (cut_dim == 0) throw std::invalid_argument("cut dimension must be positive");
  if (input_dim == 0) throw std::invalid_argument("input dimension must be positive");
  if (num_classes < 2) throw std::invalid_argument("need at least two classes");
  if (epochs == 0) throw std::invalid_argument("epochs must be positive");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw std::invalid_argument("learning rate must be finite and non-negative");
  }
  if (ratio > 0xFFFF) throw std::invalid_argument("ratio exceeds u16 range");
  if (strict_grouping && batch % ratio != 0) {
    throw std::invalid_argument("strict grouping requires batch divisible by ratio");
  }
}

KeySet make_keys(const TrainConfig& cfg) {
  return cfg.key_mode == KeySet::Mode::Delta ? KeySet::delta(cfg.cut_dim, cfg.ratio)
                                             : KeySet::generate(cfg.cut_dim, cfg.ratio,
                                                                cfg.key_seed);
}

SplitModel make_model(const TrainConfig& cfg) {
  return make_split_model(cfg.input_dim, cfg.edge_hidden, cfg.cut_dim, cfg.cloud_hidden,
                          cfg.num_classes, cfg.model_seed);
}

std::uint64_t config_digest(const TrainConfig& cfg) {
  std::ostringstream os;
  os << "c3sl.v1|r=" << cfg.ratio << "|b=" << cfg.batch << "|d=" << cfg.cut_dim
     << "|in=" << cfg.input_dim << "|eh=";
  for (std::size_t h : cfg.edge_hidden) os << h << ",";
  os << "|ch=";
  for (std::size_t h : cfg.cloud_hidden) os << h << ",";
  os << "|c=" << cfg.num_classes << "|e=" << cfg.epochs << "|lr="
     << std::bit_cast<std::uint64_t>(cfg.learning_rate) << "|ks=" << cfg.key_seed
     << "|ms=" << cfg.model_seed << "|km=" << static_cast<int>(cfg.key_mode)
     << "|comp=" << static_cast<int>(cfg.compression)
     << "|path=" << static_cast<int>(cfg.conv_path)
     << "|strict=" << cfg.strict_grouping << "|w32=" << cfg.wire_float32
     << "|sh=" << cfg.shuffle << "|shs=" << cfg.shuffle_seed;
  const std::string s = os.str();
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001B3ULL;
  }
  return h;
}

std::vector<GroupSlice> divide_groups(std::size_t batch, std::size_t ratio, bool strict) {
  if (ratio == 0) throw std::invalid_argument("ratio must be positive");
  if (batch == 0) throw std::invalid_argument("empty batch");
  if (strict && batch % ratio != 0) {
    throw std::invalid_argument("strict grouping: batch " + std::to_string(batch) +
                                " not divisible by ratio " + std::to_string(ratio));
  }
  std::vector<GroupSlice> groups;
  groups.reserve((batch + ratio - 1) / ratio);
  for (std::size_t begin = 0; begin < batch; begin += ratio) {
    groups.push_back({begin, std::min(ratio, batch - begin)});
  }
  return groups;
}

std::vector<std::uint32_t> epoch_order(std::size_t n, const TrainConfig& cfg,
                                       std::size_t epoch) {
  std::vector<std::uint32_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = static_cast<std::uint32_t>(i);
  if (cfg.shuffle) {
    Rng rng(mix_seed(cfg.shuffle_seed, 0x0EDE7ULL + epoch));
    for (std::size_t i = n; i-- > 1;) {
      const std::size_t j = rng.below(i + 1);
      std::swap(order[i], order[j]);
    }
  }
  return order;
}

void gather_batch(const Dataset& data, const std::vector<std::uint32_t>& order,
                  std::size_t begin, std::size_t rows, Matrix& x,
                  std::vector<std::uint32_t>& labels) {
  x = Matrix(rows, data.input_dim);
  labels.resize(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const std::uint32_t src = order[begin + r];
    std::memcpy(x.row(r), data.x.row(src), data.input_dim * sizeof(double));
    labels[r] = data.labels[src];
  }
}

EncodedBatch encode_batch(const Matrix& z, const std::vector<std::uint32_t>& labels,
                          const KeySet& keys, const TrainConfig& cfg) {
  if (labels.size() != z.rows) throw std::invalid_argument("labels do not match batch");
  EncodedBatch out;
  out.labels = labels;
  if (cfg.compression == Compression::None) {
    out.data = z.data;
  } else {
    if (z.cols != keys.dim()) {
      throw std::invalid_argument("activation width does not match key dimension");
    }
    const auto groups = divide_groups(z.rows, cfg.ratio, cfg.strict_grouping);
    out.group_sizes.reserve(groups.size());
    out.data.reserve(groups.size() * z.cols);
    for (const auto& g : groups) {
      out.group_sizes.push_back(static_cast<std::uint16_t>(g.rows));
      const auto s = encode_group(keys, z.row(g.row_begin), g.rows, cfg.conv_path);
      out.data.insert(out.data.end(), s.begin(), s.end());
    }
  }
  if (cfg.wire_float32) round_f32_inplace(out.data);
  return out;
}

Matrix decode_batch(const std::vector<std::uint16_t>& group_sizes,
                    std::span<const double> data, const KeySet& keys,
                    const TrainConfig& cfg) {
  const std::size_t d = keys.dim();
  if (cfg.compression == Compression::None) {
    if (data.size() % d != 0) throw std::invalid_argument("feature block size mismatch");
    Matrix restored(data.size() / d, d);
    std::memcpy(restored.data.data(), data.data(), data.size() * sizeof(double));
    return restored;
  }
  if (data.size() != group_sizes.size() * d) {
    throw std::invalid_argument("feature block size mismatch");
  }
  std::size_t total = 0;
  for (std::uint16_t n : group_sizes) total += n;
  Matrix restored(total, d);
  std::size_t row = 0;
  for (std::size_t g = 0; g < group_sizes.size(); ++g) {
    const std::span<const double> s = data.subspan(g * d, d);
    for (std::size_t i = 0; i < group_sizes[g]; ++i) {
      const auto z_hat = decode_slot(keys, s, i, cfg.conv_path);
      std::memcpy(restored.row(row++), z_hat.data(), d * sizeof(double));
    }
  }
  return restored;
}

std::vector<double> decode_backward(const std::vector<std::uint16_t>& group_sizes,
                                    const Matrix& grad_restored, const KeySet& keys,
                                    const TrainConfig& cfg) {
  const std::size_t d = keys.dim();
  std::vector<double> out;
  if (cfg.compression == Compression::None) {
    out = grad_restored.data;
  } else {
    out.assign(group_sizes.size() * d, 0.0);
    std::size_t row = 0;
    for (std::size_t g = 0; g < group_sizes.size(); ++g) {
      double* gs = out.data() + g * d;
      for (std::size_t i = 0; i < group_sizes[g]; ++i) {
        // restored_i = unbind(K_i, S), so dL/dS accumulates the adjoint,
        // which is a plain circular convolution with the key.
        const auto contrib =
            unbind_adjoint(keys.key(i), grad_restored.row_span(row++), cfg.conv_path);
        for (std::size_t j = 0; j < d; ++j) gs[j] += contrib[j];
      }
    }
  }
  if (cfg.wire_float32) round_f32_inplace(out);
  return out;
}

Matrix encode_backward(const std::vector<std::uint16_t>& group_sizes,
                       std::span<const double> grad_compressed, const KeySet& keys,
                       const TrainConfig& cfg) {
  const std::size_t d = keys.dim();
  if (cfg.compression == Compression::None) {
    if (grad_compressed.size() % d != 0) {
      throw std::invalid_argument("gradient block size mismatch");
    }
    Matrix grad_z(grad_compressed.size() / d, d);
    std::memcpy(grad_z.data.data(), grad_compressed.data(),
                grad_compressed.size() * sizeof(double));
    return grad_z;
  }
  if (grad_compressed.size() != group_sizes.size() * d) {
    throw std::invalid_argument("gradient block size mismatch");
  }
  std::size_t total = 0;
  for (std::uint16_t n : group_sizes) total += n;
  Matrix grad_z(total, d);
  std::size_t row = 0;
  for (std::size_t g = 0; g < group_sizes.size(); ++g) {
    const std::span<const double> gs = grad_compressed.subspan(g * d, d);
    for (std::size_t i = 0; i < group_sizes[g]; ++i) {
      // S = sum_i bind(K_i, Z_i): the sum fans the gradient out to every
      // slot, and bind's adjoint is circular correlation with the key.
      const auto gz = bind_adjoint(keys.key(i), gs, cfg.conv_path);
      std::memcpy(grad_z.row(row++), gz.data(), d * sizeof(double));
    }
  }
  return grad_z;
}

EdgeRuntime::EdgeRuntime(Half edge, KeySet keys, const TrainConfig& cfg)
    : edge_(std::move(edge)), keys_(std::move(keys)), cfg_(cfg),
      opt_(cfg.learning_rate) {
  cfg_.validate();
  if (edge_.out_dim() != keys_.dim()) {
    throw std::invalid_argument("edge output width does not match key dimension");
  }
  opt_.attach(edge_.layers());
}

EncodedBatch EdgeRuntime::forward(const Matrix& x, const std::vector<std::uint32_t>& labels) {
  if (awaiting_backward_) {
    throw ContractError("edge forward called while a backward is pending");
  }
  const Matrix z = edge_.forward(x, cache_, ++step_id_);
  EncodedBatch enc = encode_batch(z, labels, keys_, cfg_);
  group_sizes_ = enc.group_sizes;
  awaiting_backward_ = true;
  return enc;
}

void EdgeRuntime::backward(std::span<const double> grad_compressed) {
  if (!awaiting_backward_) {
    throw ContractError("edge backward without a matching forward");
  }
  const Matrix grad_z = encode_backward(group_sizes_, grad_compressed, keys_, cfg_);
  Gradients grads;
  edge_.backward(cache_, grad_z, grads, step_id_);
  opt_.step(edge_.layers(), grads);
  awaiting_backward_ = false;
}

EncodedBatch EdgeRuntime::encode_only(const Matrix& x,
                                      const std::vector<std::uint32_t>& labels) const {
  const Matrix z = edge_.forward(x);
  return encode_batch(z, labels, keys_, cfg_);
}

CloudRuntime::CloudRuntime(Half cloud, KeySet keys, const TrainConfig& cfg)
    : cloud_(std::move(cloud)), keys_(std::move(keys)), cfg_(cfg),
      opt_(cfg.learning_rate) {
  cfg_.validate();
  if (cloud_.in_dim() != keys_.dim()) {
    throw std::invalid_argument("cloud input width does not match key dimension");
  }
  opt_.attach(cloud_.layers());
}

CloudRuntime::Result CloudRuntime::process(const std::vector<std::uint16_t>& group_sizes,
                                           std::span<const double> data,
                                           const std::vector<std::uint32_t>& labels) {
  const Matrix restored = decode_batch(group_sizes, data, keys_, cfg_);
  if (!restored.all_finite()) throw NumericError("non-finite restored activations");
  if (restored.rows != labels.size()) {
    throw std::invalid_argument("restored batch does not match label count");
  }
  HalfCache cache;
  const Matrix logits = cloud_.forward(restored, cache, ++step_id_);
  Matrix dlogits;
  Result result;
  result.loss = softmax_cross_entropy(logits, labels, dlogits);
  Gradients grads;
  const Matrix grad_restored = cloud_.backward(cache, dlogits, grads, step_id_);
  opt_.step(cloud_.layers(), grads);
  result.grad_compressed = decode_backward(group_sizes, grad_restored, keys_, cfg_);
  return result;
}

Matrix CloudRuntime::predict(const std::vector<std::uint16_t>& group_sizes,
                             std::span<const double> data) const {
  const Matrix restored = decode_batch(group_sizes, data, keys_, cfg_);
  return cloud_.forward(restored);
}

Trainer::Trainer(SplitModel model, KeySet keys, const TrainConfig& cfg)
    : cfg_(cfg),
      edge_(std::move(model.edge), keys, cfg),
      cloud_(std::move(model.cloud), std::move(keys), cfg) {
  if (model.cut_dim != 0 && model.cut_dim != cfg.cut_dim) {
    throw std::invalid_argument("model cut dimension does not match config");
  }
}

StepResult Trainer::step(const Matrix& x, const std::vector<std::uint32_t>& labels) {
  EncodedBatch enc = edge_.forward(x, labels);
  CloudRuntime::Result cloud = cloud_.process(enc.group_sizes, enc.data, enc.labels);
  edge_.backward(cloud.grad_compressed);

  StepResult out;
  out.loss = cloud.loss;
  out.forward_feature_bytes = enc.feature_block_bytes();
  out.forward_label_bytes = enc.label_bytes();
  out.backward_feature_bytes = cloud.grad_compressed.size() * 4;
  return out;
}

double Trainer::evaluate(const Dataset& dataset) const {
  if (dataset.size() == 0) throw std::invalid_argument("empty evaluation dataset");
  std::size_t correct = 0;
  for (std::size_t begin = 0; begin < dataset.size(); begin += cfg_.batch) {
    const std::size_t rows = std::min(cfg_.batch, dataset.size() - begin);
    Matrix x(rows, dataset.input_dim);
    std::memcpy(x.data.data(), dataset.x.row(begin), rows * dataset.input_dim * sizeof(double));
    std::vector<std::uint32_t> labels(dataset.labels.begin() + begin,
                                      dataset.labels.begin() + begin + rows);
    const EncodedBatch enc = edge_.encode_only(x, labels);
    const Matrix logits = cloud_.predict(enc.group_sizes, enc.data);
    const auto pred = argmax_rows(logits);
    for (std::size_t n = 0; n < rows; ++n) {
      if (pred[n] == labels[n]) ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(dataset.size());
}

RunSummary Trainer::run(const Dataset& train, const Dataset* test,
                        std::vector<StepRecord>* records) {
  if (train.size() == 0) throw std::invalid_argument("empty training dataset");
  RunSummary summary;
  summary.epochs = cfg_.epochs;
  std::uint64_t cumulative = 0;
  std::size_t step_index = 0;
  const auto run_start = std::chrono::steady_clock::now();

  for (std::size_t epoch = 0; epoch < cfg_.epochs; ++epoch) {
    const auto order = epoch_order(train.size(), cfg_, epoch);
    for (std::size_t begin = 0; begin < train.size(); begin += cfg_.batch) {
      const std::size_t rows = std::min(cfg_.batch, train.size() - begin);
      Matrix x;
      std::vector<std::uint32_t> labels;
      gather_batch(train, order, begin, rows, x, labels);

      const auto t0 = std::chrono::steady_clock::now();
      const StepResult r = step(x, labels);
      const auto t1 = std::chrono::steady_clock::now();

      if (step_index == 0) summary.first_loss = r.loss;
      summary.final_loss = r.loss;
      summary.forward_feature_bytes += r.forward_feature_bytes;
      summary.forward_label_bytes += r.forward_label_bytes;
      summary.backward_feature_bytes += r.backward_feature_bytes;
      cumulative += r.forward_feature_bytes + r.backward_feature_bytes;
      ++step_index;

      if (records != nullptr) {
        StepRecord rec;
        rec.step = step_index;
        rec.epoch = epoch + 1;
        rec.loss = r.loss;
        rec.forward_bytes = r.forward_feature_bytes;
        rec.backward_bytes = r.backward_feature_bytes;
        rec.cumulative_bytes = cumulative;
        rec.wall_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
        records->push_back(rec);
      }
    }
    if (cfg_.eval_each_epoch && test != nullptr && records != nullptr &&
        !records->empty()) {
      records->back().accuracy = evaluate(*test);
    }
  }

  summary.steps = step_index;
  if (test != nullptr) summary.final_accuracy = evaluate(*test);
  summary.wall_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - run_start)
          .count();

  const std::uint64_t vanilla =
      static_cast<std::uint64_t>(summary.steps) == 0
          ? 0
          : [&] {
              // vanilla transmits batch x cut_dim floats each way per step
              std::uint64_t total = 0;
              for (std::size_t epoch = 0; epoch < cfg_.epochs; ++epoch) {
                for (std::size_t begin = 0; begin < train.size(); begin += cfg_.batch) {
                  total += std::min(cfg_.batch, train.size() - begin) * cfg_.cut_dim * 4;
                }
              }
              return total;
            }();
  if (summary.forward_feature_bytes > 0) {
    summary.achieved_ratio = static_cast<double>(vanilla) /
                             static_cast<double>(summary.forward_feature_bytes);
  }
  return summary;
}

void write_steps_csv(const std::string& path, const std::vector<StepRecord>& records) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open metrics file for writing: " + path);
  out << "step,epoch,loss,accuracy,forward_bytes,backward_bytes,cumulative_bytes,wall_ms\n";
  out.precision(17);
  for (const auto& r : records) {
    out << r.step << ',' << r.epoch << ',' << r.loss << ',';
    if (r.accuracy) out << *r.accuracy;
    out << ',' << r.forward_bytes << ',' << r.backward_bytes << ',' << r.cumulative_bytes
        << ',' << r.wall_ms << '\n';
  }
  if (!out) throw IoError("short write to metrics file: " + path);
}

std::string summary_json(const TrainConfig& cfg, const RunSummary& summary) {
  nlohmann::json j;
  j["config"] = {
      {"ratio", cfg.ratio},
      {"batch", cfg.batch},
      {"cut_dim", cfg.cut_dim},
      {"input_dim", cfg.input_dim},
      {"edge_hidden", cfg.edge_hidden},
      {"cloud_hidden", cfg.cloud_hidden},
      {"num_classes", cfg.num_classes},
      {"epochs", cfg.epochs},
      {"learning_rate", cfg.learning_rate},
      {"key_seed", cfg.key_seed},
      {"model_seed", cfg.model_seed},
      {"key_mode", cfg.key_mode == KeySet::Mode::Delta ? "delta" : "random"},
      {"compression", cfg.compression == Compression::C3sl ? "c3sl" : "none"},
      {"conv_path", cfg.conv_path == ConvPath::Auto
                        ? "auto"
                        : (cfg.conv_path == ConvPath::Fft ? "fft" : "naive")},
      {"strict_grouping", cfg.strict_grouping},
      {"wire_float32", cfg.wire_float32},
  };
  j["steps"] = summary.steps;
  j["epochs"] = summary.epochs;
  j["first_loss"] = summary.first_loss;
  j["final_loss"] = summary.final_loss;
  if (summary.final_accuracy) {
    j["final_accuracy"] = *summary.final_accuracy;
  } else {
    j["final_accuracy"] = nullptr;
  }
  j["forward_feature_bytes"] = summary.forward_feature_bytes;
  j["forward_label_bytes"] = summary.forward_label_bytes;
  j["backward_feature_bytes"] = summary.backward_feature_bytes;
  j["total_bytes"] = summary.forward_feature_bytes + summary.forward_label_bytes +
                     summary.backward_feature_bytes;
  j["achieved_ratio"] = summary.achieved_ratio;
  j["wall_ms"] = summary.wall_ms;
  return j.dump(2);
}

LossAndGrads compute_loss_and_grads(const SplitModel& model, const KeySet& keys,
                                    const Matrix& x, const std::vector<std::uint32_t>& labels,
                                    const TrainConfig& cfg) {
  const std::uint64_t step_id = 1;
  HalfCache edge_cache;
  const Matrix z = model.edge.forward(x, edge_cache, step_id);
  const EncodedBatch enc = encode_batch(z, labels, keys, cfg);
  const Matrix restored = decode_batch(enc.group_sizes, enc.data, keys, cfg);

  HalfCache cloud_cache;
  const Matrix logits = model.cloud.forward(restored, cloud_cache, step_id);
  Matrix dlogits;
  LossAndGrads out;
  out.loss = softmax_cross_entropy(logits, labels, dlogits);
  const Matrix grad_restored =
      model.cloud.backward(cloud_cache, dlogits, out.cloud_grads, step_id);

  std::vector<double> grad_compressed =
      decode_backward(enc.group_sizes, grad_restored, keys, cfg);
  const Matrix grad_z = encode_backward(enc.group_sizes, grad_compressed, keys, cfg);
  model.edge.backward(edge_cache, grad_z, out.edge_grads, step_id);
  return out;
}

double compute_loss(const SplitModel& model, const KeySet& keys, const Matrix& x,
                    const std::vector<std::uint32_t>& labels, const TrainConfig& cfg) {
  const Matrix z = model.edge.forward(x);
  const EncodedBatch enc = encode_batch(z, labels, keys, cfg);
  const Matrix restored = decode_batch(enc.group_sizes, enc.data, keys, cfg);
  const Matrix logits = model.cloud.forward(restored);
  Matrix dlogits;
  return softmax_cross_entropy(logits, labels, dlogits);
}

}  // namespace c3sl
