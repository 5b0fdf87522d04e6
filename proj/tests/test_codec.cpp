#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "c3sl/codec.hpp"
#include "c3sl/common.hpp"
#include "c3sl/errors.hpp"
#include "c3sl/keyfile.hpp"
#include "naive_ref.hpp"

using namespace c3sl;

namespace {

std::vector<double> random_vec(Rng& rng, std::size_t d, double scale = 1.0) {
  std::vector<double> v(d);
  for (double& x : v) x = scale * rng.gaussian();
  return v;
}

std::vector<double> random_unit(Rng& rng, std::size_t d) {
  auto v = random_vec(rng, d);
  const double n = ref::norm(v);
  for (double& x : v) x /= n;
  return v;
}

}  // namespace

TEST_CASE("generate_keys produces unit-norm deterministic keys") {
  const KeySet a = KeySet::generate(4, 2, 7);
  const KeySet b = KeySet::generate(4, 2, 7);
  REQUIRE(a.dim() == 4);
  REQUIRE(a.count() == 2);
  for (std::size_t i = 0; i < a.count(); ++i) {
    CHECK(ref::rel_err(ref::norm(a.key(i)), 1.0) < 1e-12);
    for (std::size_t j = 0; j < a.dim(); ++j) {
      CHECK(a.key(i)[j] == b.key(i)[j]);  // bit-identical regeneration
    }
  }
  CHECK(a.content_digest() == b.content_digest());

  const KeySet other = KeySet::generate(4, 2, 8);
  CHECK(other.content_digest() != a.content_digest());
}

TEST_CASE("key set parameter count matches R x D") {
  const KeySet ks = KeySet::generate(2048, 16, 1234);
  CHECK(ks.param_count() == 32768);
  for (std::size_t i = 0; i < ks.count(); ++i) {
    CHECK(ref::rel_err(ref::norm(ks.key(i)), 1.0) < 1e-12);
  }
}

TEST_CASE("generate_keys rejects empty shapes") {
  CHECK_THROWS_AS(KeySet::generate(0, 2, 1), std::invalid_argument);
  CHECK_THROWS_AS(KeySet::generate(4, 0, 1), std::invalid_argument);
  CHECK_THROWS_AS(KeySet::delta(0, 1), std::invalid_argument);
  CHECK_THROWS_AS(KeySet::generate(4, 1, 1).key(1), std::invalid_argument);
}

TEST_CASE("bind with a delta key is the identity / a circular shift") {
  const std::vector<double> delta0 = {1, 0, 0, 0};
  const std::vector<double> delta1 = {0, 1, 0, 0};
  const std::vector<double> z = {1, 2, 3, 4};

  for (ConvPath path : {ConvPath::Naive, ConvPath::Fft}) {
    CAPTURE(static_cast<int>(path));
    const auto ident = c3sl::bind(delta0, z, path);
    const auto shifted = c3sl::bind(delta1, z, path);
    if (path == ConvPath::Naive) {
      CHECK(ident == z);  // exact on the naive path
      CHECK(shifted == std::vector<double>{4, 1, 2, 3});
    } else {
      CHECK(ref::vec_rel_err(ident, z) < 1e-12);
      CHECK(ref::vec_rel_err(shifted, std::vector<double>{4, 1, 2, 3}) < 1e-12);
    }
  }
}

TEST_CASE("unbind with a delta key inverts the shift") {
  const std::vector<double> delta0 = {1, 0, 0, 0};
  const std::vector<double> delta1 = {0, 1, 0, 0};
  const std::vector<double> s = {4, 1, 2, 3};

  CHECK(c3sl::unbind(delta0, s, ConvPath::Naive) == s);
  CHECK(c3sl::unbind(delta1, s, ConvPath::Naive) == std::vector<double>{1, 2, 3, 4});
  CHECK(ref::vec_rel_err(c3sl::unbind(delta1, s, ConvPath::Fft),
                         std::vector<double>{1, 2, 3, 4}) < 1e-12);
}

TEST_CASE("shift identity holds for every delta index") {
  Rng rng(42);
  const std::size_t d = 16;
  const auto z = random_vec(rng, d);
  for (std::size_t m = 0; m < d; ++m) {
    std::vector<double> delta(d, 0.0);
    delta[m] = 1.0;
    const auto bound = c3sl::bind(delta, z, ConvPath::Naive);
    for (std::size_t j = 0; j < d; ++j) {
      CHECK(bound[(j + m) % d] == z[j]);
    }
    const auto recovered = c3sl::unbind(delta, bound, ConvPath::Naive);
    CHECK(recovered == z);
  }
}

TEST_CASE("fast and naive paths agree with the scatter-form oracle") {
  Rng rng(7);
  for (std::size_t d : {1u, 2u, 3u, 4u, 5u, 8u, 64u, 257u, 2048u}) {
    CAPTURE(d);
    const auto key = random_unit(rng, d);
    const auto z = random_vec(rng, d);

    const auto conv_ref = ref::circular_convolution(key, z);
    const auto corr_ref = ref::circular_correlation(key, z);

    CHECK(ref::vec_rel_err(c3sl::bind(key, z, ConvPath::Naive), conv_ref) < 1e-12);
    CHECK(ref::vec_rel_err(c3sl::bind(key, z, ConvPath::Fft), conv_ref) < 1e-10);
    CHECK(ref::vec_rel_err(c3sl::unbind(key, z, ConvPath::Naive), corr_ref) < 1e-12);
    CHECK(ref::vec_rel_err(c3sl::unbind(key, z, ConvPath::Fft), corr_ref) < 1e-10);

    // Auto path picks one of the two; it must still match the oracle.
    CHECK(ref::vec_rel_err(c3sl::bind(key, z), conv_ref) < 1e-10);
  }
}

TEST_CASE("binding is commutative and bilinear") {
  Rng rng(11);
  const std::size_t d = 32;
  const auto key = random_unit(rng, d);
  const auto a = random_vec(rng, d);
  const auto b = random_vec(rng, d);

  for (ConvPath path : {ConvPath::Naive, ConvPath::Fft}) {
    CAPTURE(static_cast<int>(path));
    CHECK(ref::vec_rel_err(c3sl::bind(key, a, path), c3sl::bind(a, key, path)) < 1e-12);

    const double alpha = 0.75, beta = -1.5;
    std::vector<double> combo(d);
    for (std::size_t i = 0; i < d; ++i) combo[i] = alpha * a[i] + beta * b[i];
    const auto left = c3sl::bind(key, combo, path);
    const auto ba = c3sl::bind(key, a, path);
    const auto bb = c3sl::bind(key, b, path);
    std::vector<double> right(d);
    for (std::size_t i = 0; i < d; ++i) right[i] = alpha * ba[i] + beta * bb[i];
    CHECK(ref::vec_rel_err(left, right) < 1e-12);

    const auto uleft = c3sl::unbind(key, combo, path);
    const auto ua = c3sl::unbind(key, a, path);
    const auto ub = c3sl::unbind(key, b, path);
    std::vector<double> uright(d);
    for (std::size_t i = 0; i < d; ++i) uright[i] = alpha * ua[i] + beta * ub[i];
    CHECK(ref::vec_rel_err(uleft, uright) < 1e-12);
  }
}

TEST_CASE("dimension mismatches are rejected") {
  const std::vector<double> k3 = {1, 0, 0};
  const std::vector<double> z4 = {1, 2, 3, 4};
  CHECK_THROWS_AS(c3sl::bind(k3, z4), std::invalid_argument);
  CHECK_THROWS_AS(c3sl::unbind(k3, z4), std::invalid_argument);
  CHECK_THROWS_AS(c3sl::bind_adjoint(k3, z4), std::invalid_argument);
  CHECK_THROWS_AS(c3sl::unbind_adjoint(k3, z4), std::invalid_argument);
}

TEST_CASE("superpose sums elementwise") {
  CHECK(superpose({{1, 2}, {3, 4}}) == std::vector<double>{4, 6});
  CHECK(superpose({{5, -1, 2}}) == std::vector<double>{5, -1, 2});
  CHECK(superpose({{1.5, -2.0}, {-1.5, 2.0}}) == std::vector<double>{0, 0});
  CHECK_THROWS_AS(superpose({}), std::invalid_argument);
  CHECK_THROWS_AS(superpose({{1, 2}, {1, 2, 3}}), std::invalid_argument);
}

TEST_CASE("encode_group pairs the i-th feature with the i-th key") {
  Rng rng(3);
  const std::size_t d = 16;
  const KeySet keys = KeySet::generate(d, 4, 99);
  std::vector<std::vector<double>> group;
  for (int i = 0; i < 3; ++i) group.push_back(random_vec(rng, d));

  // partial group: only the first |group| keys participate
  const auto s = encode_group(keys, group, ConvPath::Naive);
  std::vector<std::vector<double>> bound;
  for (std::size_t i = 0; i < group.size(); ++i) {
    bound.push_back(c3sl::bind(keys.key(i), group[i], ConvPath::Naive));
  }
  CHECK(ref::vec_rel_err(s, superpose(bound)) < 1e-14);

  std::vector<std::vector<double>> too_many(5, group[0]);
  CHECK_THROWS_AS(encode_group(keys, too_many), std::invalid_argument);
  const std::vector<std::vector<double>> empty;
  CHECK_THROWS_AS(encode_group(keys, empty), std::invalid_argument);
}

TEST_CASE("single-feature group with an identity key round-trips exactly") {
  const KeySet keys = KeySet::delta(8, 1);
  const std::vector<std::vector<double>> group = {{1, 2, 3, 4, 5, 6, 7, 8}};
  const auto s = encode_group(keys, group, ConvPath::Naive);
  CHECK(s == group[0]);
  CHECK(decode_slot(keys, s, 0, ConvPath::Naive) == group[0]);
  CHECK_THROWS_AS(decode_slot(keys, s, 1), std::invalid_argument);
}

TEST_CASE("adjoint identity certifies both backward operators") {
  Rng rng(17);
  for (std::size_t d : {1u, 32u, 257u}) {
    CAPTURE(d);
    for (ConvPath path : {ConvPath::Naive, ConvPath::Fft}) {
      const auto key = random_unit(rng, d);
      const auto a = random_vec(rng, d);
      const auto b = random_vec(rng, d);
      const double lhs = ref::dot(c3sl::bind(key, a, path), b);
      const double rhs = ref::dot(a, c3sl::unbind(key, b, path));
      CHECK(ref::rel_err(lhs, rhs) < 1e-12);

      // named wrappers match their definitions
      CHECK(c3sl::bind_adjoint(key, b, path) == c3sl::unbind(key, b, path));
      CHECK(c3sl::unbind_adjoint(key, b, path) == c3sl::bind(key, b, path));
    }
  }
}

TEST_CASE("directional derivative of bind matches the adjoint") {
  Rng rng(23);
  const std::size_t d = 32;
  const auto key = random_unit(rng, d);
  const auto z = random_vec(rng, d);
  const auto dir = random_unit(rng, d);
  const auto up = random_vec(rng, d);

  const double h = 1e-5;
  std::vector<double> zp(d), zm(d);
  for (std::size_t i = 0; i < d; ++i) {
    zp[i] = z[i] + h * dir[i];
    zm[i] = z[i] - h * dir[i];
  }
  const auto fp = c3sl::bind(key, zp, ConvPath::Naive);
  const auto fm = c3sl::bind(key, zm, ConvPath::Naive);
  double fd = 0.0;
  for (std::size_t i = 0; i < d; ++i) fd += up[i] * (fp[i] - fm[i]) / (2 * h);

  const auto adj = c3sl::bind_adjoint(key, up, ConvPath::Naive);
  const double analytic = ref::dot(adj, dir);
  CHECK(ref::rel_err(fd, analytic) < 1e-6);
}

TEST_CASE("noise decomposition sums to the full retrieval") {
  Rng rng(31);
  const std::size_t d = 64;
  for (std::size_t r : {1u, 2u, 4u}) {
    CAPTURE(r);
    const KeySet keys = KeySet::generate(d, r, 55);
    std::vector<std::vector<double>> group;
    for (std::size_t i = 0; i < r; ++i) group.push_back(random_vec(rng, d));

    const auto s = encode_group(keys, group);
    for (std::size_t idx = 0; idx < r; ++idx) {
      const auto parts = noise_decomposition(keys, group, idx);
      const auto full = decode_slot(keys, s, idx);
      std::vector<double> sum(d);
      for (std::size_t j = 0; j < d; ++j) {
        sum[j] = parts.signal_term[j] + parts.cross_term[j];
      }
      CHECK(ref::vec_rel_err(sum, full) < 1e-12);
      if (r == 1) {
        for (double v : parts.cross_term) CHECK(v == 0.0);
      }
    }
    CHECK_THROWS_AS(noise_decomposition(keys, group, r), std::invalid_argument);
  }
}

TEST_CASE("keys stay frozen through an encode/decode/backward cycle") {
  Rng rng(77);
  const KeySet keys = KeySet::generate(64, 4, 1);
  const std::uint64_t before = keys.content_digest();
  std::vector<std::vector<double>> group;
  for (int i = 0; i < 4; ++i) group.push_back(random_vec(rng, 64));
  const auto s = encode_group(keys, group);
  for (std::size_t i = 0; i < 4; ++i) {
    (void)decode_slot(keys, s, i);
    (void)c3sl::bind_adjoint(keys.key(i), s);
    (void)c3sl::unbind_adjoint(keys.key(i), s);
  }
  (void)noise_decomposition(keys, group, 2);
  CHECK(keys.content_digest() == before);
}

TEST_CASE("key file round-trips through the C3KS format") {
  const auto dir = std::filesystem::temp_directory_path() / "c3sl_keyfile_test";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "keys.c3ks").string();

  const KeySet keys = KeySet::generate(6, 3, 424242);
  write_keyset(path, keys);

  // header golden bytes: magic, version 1, reserved, D=6, R=3, reserved
  std::ifstream in(path, std::ios::binary);
  std::vector<unsigned char> head(16);
  in.read(reinterpret_cast<char*>(head.data()), 16);
  const std::vector<unsigned char> expect = {'C', '3', 'K', 'S', 1, 0, 0, 0,
                                             6, 0, 0, 0, 3, 0, 0, 0};
  CHECK(std::vector<unsigned char>(head.begin(), head.end()) == expect);

  const KeySet loaded = read_keyset(path);
  CHECK(loaded.dim() == keys.dim());
  CHECK(loaded.count() == keys.count());
  CHECK(loaded.seed() == keys.seed());
  for (std::size_t i = 0; i < keys.count(); ++i) {
    for (std::size_t j = 0; j < keys.dim(); ++j) {
      CHECK(loaded.key(i)[j] == round_f32(keys.key(i)[j]));
    }
  }

  // identical generation writes identical files
  const std::string path2 = (dir / "keys2.c3ks").string();
  write_keyset(path2, KeySet::generate(6, 3, 424242));
  std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
  const std::string b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
  const std::string b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
  CHECK(b1 == b2);

  CHECK_THROWS_AS(write_keyset("/nonexistent-dir/keys.c3ks", keys), IoError);
  CHECK_THROWS_AS(read_keyset((dir / "missing.c3ks").string()), IoError);

  // corrupt the magic
  {
    std::ofstream bad(path2, std::ios::binary | std::ios::in);
    bad.seekp(0);
    bad.write("XXXX", 4);
  }
  CHECK_THROWS_AS(read_keyset(path2), IoError);
  std::filesystem::remove_all(dir);
}
