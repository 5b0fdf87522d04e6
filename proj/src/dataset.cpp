#include "c3sl/dataset.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "c3sl/errors.hpp"

namespace c3sl {

namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

std::uint32_t read_be32(std::istream& in, const std::string& path) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw IoError("truncated IDX file: " + path);
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
         (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

void write_be32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

}  // namespace

Matrix load_idx_images(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open IDX image file: " + path);
  const std::uint32_t magic = read_be32(in, path);
  if (magic != kImageMagic) {
    throw IoError("bad IDX image magic in " + path);
  }
  const std::uint32_t count = read_be32(in, path);
  const std::uint32_t rows = read_be32(in, path);
  const std::uint32_t cols = read_be32(in, path);
  const std::size_t dim = static_cast<std::size_t>(rows) * cols;
  if (count == 0 || dim == 0) throw IoError("empty IDX image file: " + path);

  Matrix x(count, dim);
  std::vector<unsigned char> pixels(dim);
  for (std::uint32_t n = 0; n < count; ++n) {
    in.read(reinterpret_cast<char*>(pixels.data()), static_cast<std::streamsize>(dim));
    if (!in) throw IoError("truncated IDX image file: " + path);
    double* row = x.row(n);
    for (std::size_t i = 0; i < dim; ++i) {
      row[i] = static_cast<double>(pixels[i]) / 255.0;
    }
  }
  return x;
}

std::vector<std::uint32_t> load_idx_labels(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open IDX label file: " + path);
  const std::uint32_t magic = read_be32(in, path);
  if (magic != kLabelMagic) {
    throw IoError("bad IDX label magic in " + path);
  }
  const std::uint32_t count = read_be32(in, path);
  std::vector<std::uint32_t> labels(count);
  for (std::uint32_t n = 0; n < count; ++n) {
    char b;
    in.read(&b, 1);
    if (!in) throw IoError("truncated IDX label file: " + path);
    labels[n] = static_cast<unsigned char>(b);
  }
  return labels;
}

Dataset load_idx_dataset(const std::string& dir, const std::string& stem) {
  Dataset ds;
  ds.x = load_idx_images(dir + "/" + stem + "-images-idx3-ubyte");
  ds.labels = load_idx_labels(dir + "/" + stem + "-labels-idx1-ubyte");
  if (ds.labels.size() != ds.x.rows) {
    throw IoError("IDX image/label count mismatch for stem " + stem);
  }
  ds.input_dim = ds.x.cols;
  std::uint32_t max_label = 0;
  for (std::uint32_t l : ds.labels) {
    if (l > max_label) max_label = l;
  }
  ds.num_classes = max_label + 1;
  return ds;
}

void write_idx_images(const std::string& path, const Matrix& images, std::size_t rows,
                      std::size_t cols) {
  if (rows * cols != images.cols) {
    throw std::invalid_argument("rows*cols does not match image width");
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open IDX image file for writing: " + path);
  write_be32(out, kImageMagic);
  write_be32(out, static_cast<std::uint32_t>(images.rows));
  write_be32(out, static_cast<std::uint32_t>(rows));
  write_be32(out, static_cast<std::uint32_t>(cols));
  for (std::size_t n = 0; n < images.rows; ++n) {
    const double* row = images.row(n);
    for (std::size_t i = 0; i < images.cols; ++i) {
      double v = row[i];
      if (v < 0.0) v = 0.0;
      if (v > 1.0) v = 1.0;
      const unsigned char b = static_cast<unsigned char>(std::lround(v * 255.0));
      out.write(reinterpret_cast<const char*>(&b), 1);
    }
  }
  if (!out) throw IoError("short write to IDX image file: " + path);
}

void write_idx_labels(const std::string& path, const std::vector<std::uint32_t>& labels) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open IDX label file for writing: " + path);
  write_be32(out, kLabelMagic);
  write_be32(out, static_cast<std::uint32_t>(labels.size()));
  for (std::uint32_t l : labels) {
    if (l > 255) throw std::invalid_argument("IDX labels must fit in a byte");
    const unsigned char b = static_cast<unsigned char>(l);
    out.write(reinterpret_cast<const char*>(&b), 1);
  }
  if (!out) throw IoError("short write to IDX label file: " + path);
}

namespace {

// Balanced labels in round-robin order, then a seeded Fisher-Yates shuffle.
Dataset sample_blobs(std::size_t samples, const BlobSpec& spec,
                     const std::vector<std::vector<double>>& centers, Rng& rng) {
  Dataset ds;
  ds.input_dim = spec.input_dim;
  ds.num_classes = spec.num_classes;
  ds.x = Matrix(samples, spec.input_dim);
  ds.labels.resize(samples);
  for (std::size_t n = 0; n < samples; ++n) {
    const std::size_t c = n % spec.num_classes;
    ds.labels[n] = static_cast<std::uint32_t>(c);
    double* row = ds.x.row(n);
    for (std::size_t i = 0; i < spec.input_dim; ++i) {
      row[i] = centers[c][i] + spec.cluster_std * rng.gaussian();
    }
  }
  for (std::size_t n = samples; n-- > 1;) {
    const std::size_t m = rng.below(n + 1);
    if (m == n) continue;
    for (std::size_t i = 0; i < spec.input_dim; ++i) {
      std::swap(ds.x.at(n, i), ds.x.at(m, i));
    }
    std::swap(ds.labels[n], ds.labels[m]);
  }
  return ds;
}

}  // namespace

BlobData make_blobs(const BlobSpec& spec) {
  if (spec.train_samples == 0 || spec.input_dim == 0 || spec.num_classes == 0) {
    throw std::invalid_argument("blob spec requires positive sizes");
  }
  Rng rng(mix_seed(spec.seed, 0xB10B));
  std::vector<std::vector<double>> centers(spec.num_classes);
  for (auto& center : centers) {
    center.resize(spec.input_dim);
    double norm_sq = 0.0;
    for (double& v : center) {
      v = rng.gaussian();
      norm_sq += v * v;
    }
    const double scale = spec.separation / std::sqrt(norm_sq);
    for (double& v : center) v *= scale;
  }
  BlobData blobs;
  blobs.train = sample_blobs(spec.train_samples, spec, centers, rng);
  blobs.test = sample_blobs(spec.test_samples, spec, centers, rng);
  return blobs;
}

}  // namespace c3sl
