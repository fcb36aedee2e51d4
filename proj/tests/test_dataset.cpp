#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>

#include "poolseed/dataset.hpp"
#include "poolseed/error.hpp"
#include "poolseed/rng.hpp"

using namespace poolseed;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
  static int counter = 0;
  fs::path dir = fs::temp_directory_path() / ("poolseed_dataset_" + std::to_string(counter++));
  fs::create_directories(dir);
  return dir;
}

void write_be32(std::ofstream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

// handcrafted 4-image 28x28 fixture; pixel = (image * 37 + position) % 256
void write_idx_fixture(const fs::path& images, const fs::path& labels, int count = 4,
                       int side = 28, std::uint32_t image_magic = 0x00000803,
                       std::uint32_t label_magic = 0x00000801, int label_count = -1,
                       bool truncate_pixels = false) {
  if (label_count < 0) label_count = count;
  std::ofstream img(images, std::ios::binary);
  write_be32(img, image_magic);
  write_be32(img, count);
  write_be32(img, side);
  write_be32(img, side);
  const int pixels = truncate_pixels ? count * side * side - 10 : count * side * side;
  for (int i = 0; i < pixels; ++i) {
    const unsigned char b = static_cast<unsigned char>((i / (side * side) * 37 + i) % 256);
    img.write(reinterpret_cast<const char*>(&b), 1);
  }
  img.close();
  std::ofstream lab(labels, std::ios::binary);
  write_be32(lab, label_magic);
  write_be32(lab, label_count);
  for (int i = 0; i < label_count; ++i) {
    const unsigned char b = static_cast<unsigned char>(i % 10);
    lab.write(reinterpret_cast<const char*>(&b), 1);
  }
}

DataTable balanced_table(int classes, int per_class, int cols = 3) {
  DataTable t;
  t.features = Matrix(classes * per_class, cols);
  t.class_count = classes;
  for (int r = 0; r < t.features.rows; ++r) {
    t.labels.push_back(r % classes);
    for (int c = 0; c < cols; ++c) t.features(r, c) = 0.01 * r + c;
  }
  return t;
}

}  // namespace

TEST_CASE("load_idx parses the 4-image fixture") {
  const auto dir = temp_dir();
  write_idx_fixture(dir / "img.idx", dir / "lab.idx");
  const DataTable t = load_idx((dir / "img.idx").string(), (dir / "lab.idx").string());
  CHECK(t.rows() == 4);
  CHECK(t.cols() == 784);
  REQUIRE(t.image_shape.has_value());
  CHECK(t.image_shape->height == 28);
  CHECK(t.image_shape->width == 28);
  CHECK(t.image_shape->channels == 1);
  CHECK(t.labels == std::vector<int>{0, 1, 2, 3});
  // byte 0 of image 0 is 0, byte 5 of image 1 is (37 + 784 + 5) % 256
  CHECK(t.features(0, 0) == 0.0);
  CHECK(t.features(1, 5) == doctest::Approx(((37 + 784 + 5) % 256) / 255.0).epsilon(1e-12));
}

TEST_CASE("load_idx rejects bad files") {
  const auto dir = temp_dir();
  SUBCASE("image magic") {
    write_idx_fixture(dir / "img.idx", dir / "lab.idx", 4, 28, 0x00000802);
    CHECK_THROWS_WITH_AS(load_idx((dir / "img.idx").string(), (dir / "lab.idx").string()),
                         doctest::Contains("magic"), Error);
  }
  SUBCASE("label magic") {
    write_idx_fixture(dir / "img.idx", dir / "lab.idx", 4, 28, 0x00000803, 0x00000802);
    CHECK_THROWS_AS(load_idx((dir / "img.idx").string(), (dir / "lab.idx").string()), Error);
  }
  SUBCASE("count mismatch: 5 labels vs 4 images") {
    write_idx_fixture(dir / "img.idx", dir / "lab.idx", 4, 28, 0x00000803, 0x00000801, 5);
    try {
      load_idx((dir / "img.idx").string(), (dir / "lab.idx").string());
      FAIL("expected CountMismatch");
    } catch (const Error& e) {
      CHECK(e.code() == Err::CountMismatch);
    }
  }
  SUBCASE("truncated pixel data") {
    write_idx_fixture(dir / "img.idx", dir / "lab.idx", 4, 28, 0x00000803, 0x00000801, 4, true);
    try {
      load_idx((dir / "img.idx").string(), (dir / "lab.idx").string());
      FAIL("expected TruncatedFile");
    } catch (const Error& e) {
      CHECK(e.code() == Err::TruncatedFile);
    }
  }
}

TEST_CASE("official test file matches the published label histogram when present") {
  const char* dir = std::getenv("POOLSEED_MNIST_DIR");
  if (dir == nullptr) {
    MESSAGE("POOLSEED_MNIST_DIR not set; skipping");
    return;
  }
  const DataTable t = load_idx(std::string(dir) + "/t10k-images-idx3-ubyte",
                               std::string(dir) + "/t10k-labels-idx1-ubyte");
  CHECK(t.rows() == 10000);
  std::vector<int> histogram(10, 0);
  for (int l : t.labels) {
    REQUIRE(l >= 0);
    REQUIRE(l < 10);
    ++histogram[l];
  }
  const std::vector<int> published{980, 1135, 1032, 1010, 982, 892, 958, 1028, 974, 1009};
  CHECK(histogram == published);
}

TEST_CASE("idx round-trip is bit-identical") {
  const auto dir = temp_dir();
  const DataTable t = generate_synthetic_digits(40, 10, 14, 9);
  save_idx(t, (dir / "img.idx").string(), (dir / "lab.idx").string());
  const DataTable back = load_idx((dir / "img.idx").string(), (dir / "lab.idx").string());
  CHECK(back.features == t.features);
  CHECK(back.labels == t.labels);
}

TEST_CASE("csv round-trip") {
  const auto dir = temp_dir();
  const DataTable t = generate_two_gaussians(20, {-2, 0}, {2, 0}, 1.0, 5);
  save_csv(t, (dir / "data.csv").string());
  const DataTable back = load_csv((dir / "data.csv").string());
  CHECK(back.labels == t.labels);
  REQUIRE(back.features.rows == t.features.rows);
  for (std::size_t i = 0; i < t.features.data.size(); ++i)
    CHECK(back.features.data[i] == t.features.data[i]);  // %.17g survives the trip
}

TEST_CASE("two gaussians: structure and determinism") {
  const DataTable t = generate_two_gaussians(500, {-2, 0}, {2, 0}, 1.0, 7);
  CHECK(t.rows() == 500);
  CHECK(t.cols() == 2);
  CHECK(t.class_count == 2);
  int zeros = 0;
  for (int l : t.labels) zeros += (l == 0);
  CHECK(zeros == 250);

  const DataTable again = generate_two_gaussians(500, {-2, 0}, {2, 0}, 1.0, 7);
  CHECK(again.features == t.features);

  const DataTable tiny = generate_two_gaussians(2, {-2, 0}, {2, 0}, 1.0, 7);
  CHECK(tiny.labels == std::vector<int>{0, 1});

  CHECK_THROWS_AS(generate_two_gaussians(501, {-2, 0}, {2, 0}, 1.0, 7), Error);
  try {
    generate_two_gaussians(3, {-2, 0}, {2, 0}, 1.0, 7);
  } catch (const Error& e) {
    CHECK(e.code() == Err::OddCount);
  }
}

TEST_CASE("two gaussians: law of large numbers") {
  const DataTable t = generate_two_gaussians(100000, {-2.0, 0.5}, {2.0, -0.5}, 1.0, 123);
  double sums[2][2] = {{0, 0}, {0, 0}};
  for (int r = 0; r < t.rows(); ++r) {
    sums[t.labels[r]][0] += t.features(r, 0);
    sums[t.labels[r]][1] += t.features(r, 1);
  }
  CHECK(std::abs(sums[0][0] / 50000 + 2.0) < 0.02);
  CHECK(std::abs(sums[0][1] / 50000 - 0.5) < 0.02);
  CHECK(std::abs(sums[1][0] / 50000 - 2.0) < 0.02);
  CHECK(std::abs(sums[1][1] / 50000 + 0.5) < 0.02);
}

TEST_CASE("split: stratified 70/10/20") {
  const DataTable t = balanced_table(2, 50);  // 100 rows, 50/50
  const SplitIndices s = split(t, 0.1, 0.2, 3);
  CHECK(s.train.size() == 70);
  CHECK(s.val.size() == 10);
  CHECK(s.test.size() == 20);
  int val_zero = 0;
  for (int i : s.val) val_zero += (t.labels[i] == 0);
  CHECK(val_zero == 5);
  int test_zero = 0;
  for (int i : s.test) test_zero += (t.labels[i] == 0);
  CHECK(test_zero == 10);

  std::set<int> all(s.train.begin(), s.train.end());
  all.insert(s.val.begin(), s.val.end());
  all.insert(s.test.begin(), s.test.end());
  CHECK(all.size() == 100);
}

TEST_CASE("split: degenerate and errors") {
  const DataTable t = balanced_table(3, 9);
  const SplitIndices s = split(t, 0.0, 0.0, 1);
  CHECK(s.train.size() == 27);
  CHECK(s.val.empty());
  CHECK(s.test.empty());

  const SplitIndices a = split(t, 0.2, 0.3, 42);
  const SplitIndices b = split(t, 0.2, 0.3, 42);
  CHECK(a.train == b.train);
  CHECK(a.val == b.val);
  CHECK(a.test == b.test);

  try {
    split(t, 0.5, 0.5, 1);
    FAIL("expected FractionOutOfRange");
  } catch (const Error& e) {
    CHECK(e.code() == Err::FractionOutOfRange);
  }
  CHECK_THROWS_AS(split(t, -0.1, 0.2, 1), Error);
}

TEST_CASE("split: per-class val proportion within 1/|val| on random shapes") {
  Rng rng(77);
  for (int trial = 0; trial < 20; ++trial) {
    const int classes = 2 + static_cast<int>(rng.index(9));
    DataTable t;
    t.class_count = classes;
    std::vector<int> class_sizes(classes);
    int n = 0;
    for (int c = 0; c < classes; ++c) {
      class_sizes[c] = 1 + static_cast<int>(rng.index(40));
      n += class_sizes[c];
    }
    t.features = Matrix(n, 2);
    for (int c = 0; c < classes; ++c)
      for (int i = 0; i < class_sizes[c]; ++i) t.labels.push_back(c);
    const double vf = 0.1 + 0.2 * rng.real();
    const SplitIndices s = split(t, vf, 0.1, rng.u64());
    if (s.val.empty()) continue;
    std::vector<int> val_count(classes, 0);
    for (int i : s.val) ++val_count[t.labels[i]];
    for (int c = 0; c < classes; ++c) {
      const double diff =
          std::abs(double(val_count[c]) / s.val.size() - double(class_sizes[c]) / n);
      CHECK(diff <= 1.0 / s.val.size() + 1e-12);
    }
  }
}

TEST_CASE("longtail: factor 10 on 10x100 gives the geometric ladder") {
  const DataTable t = balanced_table(10, 100);
  const DataTable lt = apply_longtail(t, 10.0, 5);
  std::vector<int> sizes(10, 0);
  for (int l : lt.labels) ++sizes[l];
  // round(100 * 10^(-i/9)) for i = 0..9
  CHECK(sizes == std::vector<int>{100, 77, 60, 46, 36, 28, 22, 17, 13, 10});
  CHECK(lt.rows() == 409);
}

TEST_CASE("longtail: identity, monotonicity, ratio") {
  const DataTable t = balanced_table(6, 60);
  const DataTable same = apply_longtail(t, 1.0, 5);
  CHECK(same.features == t.features);

  Rng rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    const double factor = 2.0 + 18.0 * rng.real();
    const DataTable lt = apply_longtail(t, factor, rng.u64());
    std::vector<int> sizes(6, 0);
    for (int l : lt.labels) ++sizes[l];
    for (int c = 1; c < 6; ++c) CHECK(sizes[c] <= sizes[c - 1]);
    // head/tail ratio matches the factor within tail rounding
    CHECK(sizes.front() == 60);
    CHECK(std::abs(sizes.back() - 60.0 / factor) <= 0.5 + 1e-9);
  }
}

TEST_CASE("longtail: insufficient class samples") {
  DataTable t;
  t.class_count = 3;
  t.features = Matrix(100 + 10 + 100, 2);
  for (int i = 0; i < 100; ++i) t.labels.push_back(0);
  for (int i = 0; i < 10; ++i) t.labels.push_back(1);
  for (int i = 0; i < 100; ++i) t.labels.push_back(2);
  try {
    apply_longtail(t, 10.0, 1);  // class 1 needs round(100 * 10^-0.5) = 32
    FAIL("expected InsufficientClassSamples");
  } catch (const Error& e) {
    CHECK(e.code() == Err::InsufficientClassSamples);
  }
}

TEST_CASE("normalize applies user constants") {
  const DataTable t = balanced_table(2, 4);
  const DataTable n = normalize(t, 0.5, 2.0);
  for (std::size_t i = 0; i < t.features.data.size(); ++i)
    CHECK(n.features.data[i] == doctest::Approx((t.features.data[i] - 0.5) / 2.0));
  CHECK_THROWS_AS(normalize(t, 0.0, 0.0), Error);
}

TEST_CASE("stratified subset keeps class proportions") {
  const DataTable t = balanced_table(5, 40);  // 200 rows
  const DataTable sub = stratified_subset(t, 50, 3);
  CHECK(sub.rows() == 50);
  std::vector<int> sizes(5, 0);
  for (int l : sub.labels) ++sizes[l];
  for (int c = 0; c < 5; ++c) CHECK(sizes[c] == 10);
}

TEST_CASE("fingerprint distinguishes tables") {
  DataTable a = balanced_table(2, 10);
  DataTable b = a;
  CHECK(dataset_fingerprint(a) == dataset_fingerprint(b));
  b.labels[0] = 1;
  CHECK(dataset_fingerprint(a) != dataset_fingerprint(b));
  DataTable c = a;
  c.features(0, 0) += 1e-12;
  CHECK(dataset_fingerprint(a) != dataset_fingerprint(c));
}

TEST_CASE("validate rejects corrupt tables") {
  DataTable t = balanced_table(2, 4);
  t.labels[0] = 7;
  CHECK_THROWS_AS(t.validate(), Error);
  DataTable u = balanced_table(2, 4);
  u.image_shape = ImageShape{2, 2, 1};  // 4 != 3 columns
  CHECK_THROWS_AS(u.validate(), Error);
}
