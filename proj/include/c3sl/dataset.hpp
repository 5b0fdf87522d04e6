#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "c3sl/common.hpp"

namespace c3sl {

struct Dataset {
  std::size_t input_dim = 0;
  std::size_t num_classes = 0;
  Matrix x;                          // samples x input_dim
  std::vector<std::uint32_t> labels; // samples

  std::size_t size() const { return x.rows; }
};

// IDX readers. Images: magic 0x00000803, big-endian dims (count, rows, cols),
// u8 pixels scaled to [0,1]. Labels: magic 0x00000801, u8 values.
Matrix load_idx_images(const std::string& path);
std::vector<std::uint32_t> load_idx_labels(const std::string& path);

// Loads <dir>/<stem>-images-idx3-ubyte and <dir>/<stem>-labels-idx1-ubyte.
Dataset load_idx_dataset(const std::string& dir, const std::string& stem);

// IDX writers (testing and fixture generation).
void write_idx_images(const std::string& path, const Matrix& images, std::size_t rows,
                      std::size_t cols);
void write_idx_labels(const std::string& path, const std::vector<std::uint32_t>& labels);

struct BlobSpec {
  std::size_t train_samples = 2000;
  std::size_t test_samples = 500;
  std::size_t input_dim = 64;
  std::size_t num_classes = 4;
  double separation = 8.0;   // distance of each cluster center from the origin
  double cluster_std = 1.0;
  std::uint64_t seed = 1;
};

// Seeded synthetic Gaussian clusters: one unit direction per class scaled by
// `separation`, isotropic noise around it, balanced classes, deterministic
// Fisher-Yates shuffle. Train and test sets come from one generator stream.
struct BlobData {
  Dataset train;
  Dataset test;
};
BlobData make_blobs(const BlobSpec& spec);

}  // namespace c3sl
