#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "c3sl/dataset.hpp"
#include "c3sl/errors.hpp"
#include "naive_ref.hpp"

using namespace c3sl;

TEST_CASE("idx files round-trip") {
  const auto dir = std::filesystem::temp_directory_path() / "c3sl_idx_test";
  std::filesystem::create_directories(dir);

  Matrix images(3, 4);
  images.data = {0.0, 1.0, 0.5, 0.25, 0.1, 0.9, 0.0, 1.0, 0.33, 0.66, 0.2, 0.8};
  const std::vector<std::uint32_t> labels = {2, 0, 1};

  write_idx_images((dir / "t-images-idx3-ubyte").string(), images, 2, 2);
  write_idx_labels((dir / "t-labels-idx1-ubyte").string(), labels);

  const Dataset ds = load_idx_dataset(dir.string(), "t");
  CHECK(ds.size() == 3);
  CHECK(ds.input_dim == 4);
  CHECK(ds.num_classes == 3);
  CHECK(ds.labels == labels);
  for (std::size_t i = 0; i < images.data.size(); ++i) {
    CHECK(std::abs(ds.x.data[i] - images.data[i]) <= 0.5 / 255.0 + 1e-12);
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("idx loader validates headers against golden bytes") {
  const auto dir = std::filesystem::temp_directory_path() / "c3sl_idx_golden";
  std::filesystem::create_directories(dir);
  const std::string img = (dir / "img").string();
  const std::string lbl = (dir / "lbl").string();

  // one 2x2 image, big-endian header 0x00000803, count 1, rows 2, cols 2
  const unsigned char img_bytes[] = {0, 0, 8, 3, 0, 0, 0, 1, 0, 0, 0, 2,
                                     0, 0, 0, 2, 0, 128, 255, 64};
  std::ofstream(img, std::ios::binary)
      .write(reinterpret_cast<const char*>(img_bytes), sizeof(img_bytes));
  const Matrix x = load_idx_images(img);
  CHECK(x.rows == 1);
  CHECK(x.cols == 4);
  CHECK(x.data[0] == 0.0);
  CHECK(ref::rel_err(x.data[1], 128.0 / 255.0) < 1e-15);
  CHECK(x.data[2] == 1.0);

  const unsigned char lbl_bytes[] = {0, 0, 8, 1, 0, 0, 0, 2, 7, 1};
  std::ofstream(lbl, std::ios::binary)
      .write(reinterpret_cast<const char*>(lbl_bytes), sizeof(lbl_bytes));
  const auto labels = load_idx_labels(lbl);
  CHECK(labels == std::vector<std::uint32_t>{7, 1});

  // wrong magic
  const unsigned char bad[] = {0, 0, 8, 1, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 1, 9};
  std::ofstream(img, std::ios::binary | std::ios::trunc)
      .write(reinterpret_cast<const char*>(bad), sizeof(bad));
  CHECK_THROWS_AS(load_idx_images(img), IoError);

  // truncated pixel data
  const unsigned char short_img[] = {0, 0, 8, 3, 0, 0, 0, 1, 0, 0, 0, 2, 0, 0, 0, 2, 9};
  std::ofstream(img, std::ios::binary | std::ios::trunc)
      .write(reinterpret_cast<const char*>(short_img), sizeof(short_img));
  CHECK_THROWS_AS(load_idx_images(img), IoError);

  CHECK_THROWS_AS(load_idx_labels((dir / "missing").string()), IoError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("blob generation is deterministic, balanced, and separated") {
  BlobSpec spec;
  spec.train_samples = 400;
  spec.test_samples = 100;
  spec.input_dim = 16;
  spec.num_classes = 4;
  spec.separation = 8.0;
  spec.seed = 123;

  const BlobData a = make_blobs(spec);
  const BlobData b = make_blobs(spec);
  CHECK(a.train.x.data == b.train.x.data);
  CHECK(a.train.labels == b.train.labels);
  CHECK(a.test.x.data == b.test.x.data);

  CHECK(a.train.size() == 400);
  CHECK(a.test.size() == 100);
  CHECK(a.train.num_classes == 4);

  std::size_t per_class[4] = {0, 0, 0, 0};
  for (std::uint32_t l : a.train.labels) {
    REQUIRE(l < 4);
    per_class[l]++;
  }
  for (std::size_t c = 0; c < 4; ++c) CHECK(per_class[c] == 100);

  // class means are far apart relative to the cluster width
  std::vector<std::vector<double>> mean(4, std::vector<double>(16, 0.0));
  for (std::size_t n = 0; n < a.train.size(); ++n) {
    for (std::size_t i = 0; i < 16; ++i) {
      mean[a.train.labels[n]][i] += a.train.x.at(n, i) / 100.0;
    }
  }
  for (std::size_t c = 0; c < 4; ++c) {
    for (std::size_t c2 = c + 1; c2 < 4; ++c2) {
      double dist_sq = 0.0;
      for (std::size_t i = 0; i < 16; ++i) {
        const double diff = mean[c][i] - mean[c2][i];
        dist_sq += diff * diff;
      }
      CHECK(std::sqrt(dist_sq) > 4.0 * spec.cluster_std);
    }
  }

  // a different seed moves the data
  spec.seed = 124;
  CHECK(make_blobs(spec).train.x.data != a.train.x.data);

  spec.train_samples = 0;
  CHECK_THROWS_AS(make_blobs(spec), std::invalid_argument);
}
