#include "c3sl/net.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "c3sl/bytes.hpp"
#include "c3sl/errors.hpp"

namespace c3sl {

DenseLayer make_dense(std::size_t in_dim, std::size_t out_dim, Activation act,
                      std::uint64_t seed, std::size_t layer_index) {
  if (in_dim == 0 || out_dim == 0) throw std::invalid_argument("layer dims must be positive");
  DenseLayer layer;
  layer.in_dim = in_dim;
  layer.out_dim = out_dim;
  layer.act = act;
  layer.weights.resize(in_dim * out_dim);
  layer.bias.assign(out_dim, 0.0);

  Rng rng(mix_seed(seed, layer_index));
  const double limit = act == Activation::Relu
                           ? std::sqrt(6.0 / static_cast<double>(in_dim))
                           : std::sqrt(6.0 / static_cast<double>(in_dim + out_dim));
  for (double& w : layer.weights) w = rng.uniform(-limit, limit);
  return layer;
}

namespace {

// y = act(W x + b). Four independent accumulator lanes break the add
// dependency chain; the combination order is fixed, so results are
// deterministic for a given build.
void dense_forward(const DenseLayer& layer, const Matrix& x, Matrix& preact, Matrix& y) {
  preact = Matrix(x.rows, layer.out_dim);
  y = Matrix(x.rows, layer.out_dim);
  const std::size_t in = layer.in_dim;
  for (std::size_t n = 0; n < x.rows; ++n) {
    const double* __restrict xn = x.row(n);
    for (std::size_t o = 0; o < layer.out_dim; ++o) {
      const double* __restrict w = layer.weights.data() + o * in;
      double lane0 = 0.0, lane1 = 0.0, lane2 = 0.0, lane3 = 0.0;
      std::size_t i = 0;
      for (; i + 4 <= in; i += 4) {
        lane0 += w[i] * xn[i];
        lane1 += w[i + 1] * xn[i + 1];
        lane2 += w[i + 2] * xn[i + 2];
        lane3 += w[i + 3] * xn[i + 3];
      }
      for (; i < in; ++i) lane0 += w[i] * xn[i];
      const double acc = layer.bias[o] + ((lane0 + lane1) + (lane2 + lane3));
      preact.at(n, o) = acc;
      y.at(n, o) = layer.act == Activation::Relu && acc < 0.0 ? 0.0 : acc;
    }
  }
}

}  // namespace

Matrix Half::forward(const Matrix& x, HalfCache& cache, std::uint64_t step_id) const {
  if (layers_.empty()) throw ContractError("forward through empty half");
  if (x.cols != in_dim()) {
    throw std::invalid_argument("input width " + std::to_string(x.cols) +
                                " does not match layer width " + std::to_string(in_dim()));
  }
  cache.inputs.clear();
  cache.preacts.clear();
  cache.step_id = step_id;
  Matrix cur = x;
  for (const auto& layer : layers_) {
    cache.inputs.push_back(cur);
    Matrix preact, y;
    dense_forward(layer, cur, preact, y);
    cache.preacts.push_back(std::move(preact));
    cur = std::move(y);
  }
  cache.output = cur;
  return cur;
}

Matrix Half::forward(const Matrix& x) const {
  HalfCache scratch;
  return forward(x, scratch, 0);
}

Matrix Half::backward(const HalfCache& cache, const Matrix& upstream, Gradients& grads,
                      std::uint64_t step_id) const {
  if (cache.step_id != step_id) {
    throw ContractError("backward with stale cache: cache step " +
                        std::to_string(cache.step_id) + ", expected " +
                        std::to_string(step_id));
  }
  if (cache.inputs.size() != layers_.size()) {
    throw ContractError("cache does not match model layout");
  }
  if (upstream.rows != cache.output.rows || upstream.cols != out_dim()) {
    throw std::invalid_argument("upstream gradient has wrong shape");
  }

  grads.assign(layers_.size(), LayerGrads{});
  Matrix up = upstream;
  for (std::size_t li = layers_.size(); li-- > 0;) {
    const DenseLayer& layer = layers_[li];
    const Matrix& x = cache.inputs[li];
    const Matrix& preact = cache.preacts[li];

    // dL/d(preact) = upstream * act'(preact)
    Matrix dz = up;
    if (layer.act == Activation::Relu) {
      for (std::size_t n = 0; n < dz.rows; ++n) {
        for (std::size_t o = 0; o < dz.cols; ++o) {
          if (preact.at(n, o) < 0.0) dz.at(n, o) = 0.0;
        }
      }
    }

    LayerGrads& g = grads[li];
    g.weights.assign(layer.in_dim * layer.out_dim, 0.0);
    g.bias.assign(layer.out_dim, 0.0);
    for (std::size_t n = 0; n < dz.rows; ++n) {
      const double* __restrict xn = x.row(n);
      const double* __restrict dzn = dz.row(n);
      for (std::size_t o = 0; o < layer.out_dim; ++o) {
        double* __restrict gw = g.weights.data() + o * layer.in_dim;
        const double d = dzn[o];
        g.bias[o] += d;
        for (std::size_t i = 0; i < layer.in_dim; ++i) gw[i] += d * xn[i];
      }
    }

    Matrix dx(dz.rows, layer.in_dim);
    for (std::size_t n = 0; n < dz.rows; ++n) {
      const double* __restrict dzn = dz.row(n);
      double* __restrict dxn = dx.row(n);
      for (std::size_t o = 0; o < layer.out_dim; ++o) {
        const double* __restrict w = layer.weights.data() + o * layer.in_dim;
        const double d = dzn[o];
        for (std::size_t i = 0; i < layer.in_dim; ++i) dxn[i] += d * w[i];
      }
    }
    up = std::move(dx);
  }
  return up;
}

std::size_t Half::param_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.weights.size() + l.bias.size();
  return n;
}

SplitModel make_split_model(std::size_t input_dim, const std::vector<std::size_t>& edge_hidden,
                            std::size_t cut_dim, const std::vector<std::size_t>& cloud_hidden,
                            std::size_t num_classes, std::uint64_t seed) {
  if (input_dim == 0 || cut_dim == 0 || num_classes == 0) {
    throw std::invalid_argument("model dims must be positive");
  }
  std::vector<DenseLayer> edge, cloud;
  std::size_t layer_index = 0;
  std::size_t prev = input_dim;
  for (std::size_t h : edge_hidden) {
    edge.push_back(make_dense(prev, h, Activation::Relu, seed, layer_index++));
    prev = h;
  }
  edge.push_back(make_dense(prev, cut_dim, Activation::None, seed, layer_index++));

  prev = cut_dim;
  for (std::size_t h : cloud_hidden) {
    cloud.push_back(make_dense(prev, h, Activation::Relu, seed, layer_index++));
    prev = h;
  }
  cloud.push_back(make_dense(prev, num_classes, Activation::None, seed, layer_index++));

  SplitModel model;
  model.edge = Half(std::move(edge));
  model.cloud = Half(std::move(cloud));
  model.cut_dim = cut_dim;
  model.num_classes = num_classes;
  return model;
}

double softmax_cross_entropy(const Matrix& logits, const std::vector<std::uint32_t>& labels,
                             Matrix& dlogits) {
  if (labels.size() != logits.rows) {
    throw std::invalid_argument("label count does not match batch size");
  }
  const std::size_t classes = logits.cols;
  dlogits = Matrix(logits.rows, classes);
  double loss = 0.0;
  const double inv_batch = 1.0 / static_cast<double>(logits.rows);
  for (std::size_t n = 0; n < logits.rows; ++n) {
    if (labels[n] >= classes) {
      throw std::invalid_argument("label " + std::to_string(labels[n]) +
                                  " out of range for " + std::to_string(classes) +
                                  " classes");
    }
    const double* z = logits.row(n);
    double zmax = z[0];
    for (std::size_t c = 0; c < classes; ++c) {
      if (!std::isfinite(z[c])) throw NumericError("non-finite logits");
      if (z[c] > zmax) zmax = z[c];
    }
    double sum = 0.0;
    for (std::size_t c = 0; c < classes; ++c) sum += std::exp(z[c] - zmax);
    const double log_sum = std::log(sum);
    loss += (log_sum - (z[labels[n]] - zmax)) * inv_batch;
    double* d = dlogits.row(n);
    for (std::size_t c = 0; c < classes; ++c) {
      d[c] = std::exp(z[c] - zmax) / sum * inv_batch;
    }
    d[labels[n]] -= inv_batch;
  }
  return loss;
}

std::vector<std::uint32_t> argmax_rows(const Matrix& logits) {
  std::vector<std::uint32_t> out(logits.rows);
  for (std::size_t n = 0; n < logits.rows; ++n) {
    const double* z = logits.row(n);
    std::size_t best = 0;
    for (std::size_t c = 1; c < logits.cols; ++c) {
      if (z[c] > z[best]) best = c;  // strict: lowest index wins ties
    }
    out[n] = static_cast<std::uint32_t>(best);
  }
  return out;
}

void AdamOptimizer::attach(const std::vector<DenseLayer>& layers) {
  slots_.clear();
  slots_.resize(layers.size());
  for (std::size_t i = 0; i < layers.size(); ++i) {
    slots_[i].m_w.assign(layers[i].weights.size(), 0.0);
    slots_[i].v_w.assign(layers[i].weights.size(), 0.0);
    slots_[i].m_b.assign(layers[i].bias.size(), 0.0);
    slots_[i].v_b.assign(layers[i].bias.size(), 0.0);
  }
  step_ = 0;
}

void AdamOptimizer::step(std::vector<DenseLayer>& layers, const Gradients& grads) {
  if (slots_.size() != layers.size() || grads.size() != layers.size()) {
    throw ContractError("optimizer not attached to this layer stack");
  }
  ++step_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(step_));
  auto update = [&](std::vector<double>& p, const std::vector<double>& g,
                    std::vector<double>& m, std::vector<double>& v) {
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      p[i] -= lr_ * m_hat / (std::sqrt(v_hat) + eps_);
    }
  };
  for (std::size_t li = 0; li < layers.size(); ++li) {
    if (grads[li].weights.size() != layers[li].weights.size() ||
        grads[li].bias.size() != layers[li].bias.size()) {
      throw ContractError("gradient shape does not match parameters");
    }
    update(layers[li].weights, grads[li].weights, slots_[li].m_w, slots_[li].v_w);
    update(layers[li].bias, grads[li].bias, slots_[li].m_b, slots_[li].v_b);
  }
}

namespace {
constexpr char kCheckpointMagic[4] = {'C', '3', 'M', 'D'};
}

void write_checkpoint(const std::string& path, const std::vector<DenseLayer>& layers) {
  if (layers.size() > 0xFFFF) throw std::invalid_argument("too many layers for checkpoint");
  std::vector<std::uint8_t> buf;
  buf.insert(buf.end(), kCheckpointMagic, kCheckpointMagic + 4);
  put_u16(buf, kCheckpointVersion);
  put_u16(buf, static_cast<std::uint16_t>(layers.size()));
  for (const auto& layer : layers) {
    put_u32(buf, static_cast<std::uint32_t>(layer.in_dim));
    put_u32(buf, static_cast<std::uint32_t>(layer.out_dim));
    buf.push_back(static_cast<std::uint8_t>(layer.act));
    for (double w : layer.weights) put_f32(buf, static_cast<float>(w));
    for (double b : layer.bias) put_f32(buf, static_cast<float>(b));
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open checkpoint for writing: " + path);
  out.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size()));
  if (!out) throw IoError("short write to checkpoint: " + path);
}

std::vector<DenseLayer> read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  std::vector<std::uint8_t> buf((std::istreambuf_iterator<char>(in)),
                                std::istreambuf_iterator<char>());
  try {
    ByteReader r(buf);
    auto magic = r.bytes(4);
    if (std::memcmp(magic.data(), kCheckpointMagic, 4) != 0) {
      throw IoError("bad checkpoint magic: " + path);
    }
    const std::uint16_t version = r.u16();
    if (version != kCheckpointVersion) {
      throw IoError("unsupported checkpoint version " + std::to_string(version));
    }
    const std::uint16_t count = r.u16();
    std::vector<DenseLayer> layers;
    layers.reserve(count);
    for (std::uint16_t li = 0; li < count; ++li) {
      DenseLayer layer;
      layer.in_dim = r.u32();
      layer.out_dim = r.u32();
      const std::uint8_t act = r.u8();
      if (act > 1) throw IoError("unknown activation code in checkpoint");
      layer.act = static_cast<Activation>(act);
      if (layer.in_dim == 0 || layer.out_dim == 0) {
        throw IoError("checkpoint layer with zero dimension");
      }
      layer.weights.resize(layer.in_dim * layer.out_dim);
      for (double& w : layer.weights) w = static_cast<double>(r.f32());
      layer.bias.resize(layer.out_dim);
      for (double& b : layer.bias) b = static_cast<double>(r.f32());
      layers.push_back(std::move(layer));
    }
    if (!r.done()) throw IoError("trailing bytes in checkpoint: " + path);
    return layers;
  } catch (const ProtocolError&) {
    throw IoError("truncated checkpoint: " + path);
  }
}

}  // namespace c3sl
