#include "poolseed/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include "poolseed/error.hpp"
#include "poolseed/rng.hpp"

namespace poolseed {

namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

std::uint32_t read_be32(std::istream& in, const std::string& path) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) fail(Err::TruncatedFile, path + ": truncated header");
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) | (std::uint32_t(b[2]) << 8) |
         std::uint32_t(b[3]);
}

void write_be32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

int round_count(double x) { return static_cast<int>(std::llround(x)); }

std::vector<std::vector<int>> rows_by_class(const DataTable& table) {
  std::vector<std::vector<int>> by_class(table.class_count);
  for (int r = 0; r < table.rows(); ++r) by_class[table.labels[r]].push_back(r);
  return by_class;
}

// Hamilton apportionment of `total` across classes proportionally to sizes;
// floor quotas first, leftovers by largest fractional part (ties by class id).
std::vector<int> apportion(const std::vector<int>& sizes, const std::vector<int>& caps, int total) {
  const int n_rows = std::accumulate(sizes.begin(), sizes.end(), 0);
  const std::size_t k = sizes.size();
  std::vector<int> counts(k, 0);
  std::vector<double> frac(k, 0.0);
  int assigned = 0;
  for (std::size_t c = 0; c < k; ++c) {
    const double quota = n_rows > 0 ? double(sizes[c]) * total / n_rows : 0.0;
    counts[c] = std::min(static_cast<int>(std::floor(quota)), caps[c]);
    frac[c] = quota - std::floor(quota);
    assigned += counts[c];
  }
  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return frac[a] > frac[b]; });
  std::size_t cursor = 0;
  while (assigned < total) {
    const std::size_t c = order[cursor % k];
    ++cursor;
    if (counts[c] < caps[c]) {
      ++counts[c];
      ++assigned;
    }
    if (cursor > 4 * k * static_cast<std::size_t>(total + 1)) break;  // caps exhausted
  }
  return counts;
}

}  // namespace

void DataTable::validate() const {
  require(static_cast<int>(labels.size()) == features.rows, Err::CountMismatch,
          "label count differs from feature row count");
  require(class_count >= 1, Err::InvalidArgument, "class_count must be >= 1");
  for (int r = 0; r < features.rows; ++r)
    require(labels[r] >= 0 && labels[r] < class_count, Err::InvalidArgument,
            "label out of [0, class_count) at row " + std::to_string(r));
  if (image_shape) {
    const auto& s = *image_shape;
    require(s.height * s.width * s.channels == features.cols, Err::DimensionMismatch,
            "image shape does not match feature column count");
  }
  for (double v : features.data)
    require(std::isfinite(v), Err::InvalidArgument, "non-finite feature value");
}

DataTable load_idx(const std::string& images_path, const std::string& labels_path) {
  std::ifstream img(images_path, std::ios::binary);
  require(img.good(), Err::IoFailure, "cannot open " + images_path);
  std::ifstream lab(labels_path, std::ios::binary);
  require(lab.good(), Err::IoFailure, "cannot open " + labels_path);

  const std::uint32_t img_magic = read_be32(img, images_path);
  require(img_magic == kImageMagic, Err::MagicMismatch,
          images_path + ": bad image magic " + std::to_string(img_magic));
  const std::uint32_t n_images = read_be32(img, images_path);
  const std::uint32_t height = read_be32(img, images_path);
  const std::uint32_t width = read_be32(img, images_path);

  const std::uint32_t lab_magic = read_be32(lab, labels_path);
  require(lab_magic == kLabelMagic, Err::MagicMismatch,
          labels_path + ": bad label magic " + std::to_string(lab_magic));
  const std::uint32_t n_labels = read_be32(lab, labels_path);
  require(n_images == n_labels, Err::CountMismatch,
          "image count " + std::to_string(n_images) + " != label count " + std::to_string(n_labels));

  const std::size_t pixels = std::size_t(n_images) * height * width;
  std::vector<unsigned char> raw(pixels);
  img.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(pixels));
  require(static_cast<std::size_t>(img.gcount()) == pixels, Err::TruncatedFile,
          images_path + ": truncated pixel data");

  std::vector<unsigned char> raw_labels(n_labels);
  lab.read(reinterpret_cast<char*>(raw_labels.data()), static_cast<std::streamsize>(n_labels));
  require(static_cast<std::size_t>(lab.gcount()) == n_labels, Err::TruncatedFile,
          labels_path + ": truncated label data");

  DataTable table;
  table.features = Matrix(static_cast<int>(n_images), static_cast<int>(height * width));
  for (std::size_t i = 0; i < pixels; ++i) table.features.data[i] = raw[i] / 255.0;
  table.labels.resize(n_labels);
  int max_label = 0;
  for (std::uint32_t i = 0; i < n_labels; ++i) {
    table.labels[i] = raw_labels[i];
    max_label = std::max(max_label, table.labels[i]);
  }
  table.class_count = max_label + 1;
  table.image_shape = ImageShape{static_cast<int>(height), static_cast<int>(width), 1};
  table.validate();
  return table;
}

void save_idx(const DataTable& table, const std::string& images_path, const std::string& labels_path) {
  require(table.image_shape.has_value(), Err::NotAnImage, "save_idx needs image-shaped data");
  require(table.image_shape->channels == 1, Err::InvalidArgument, "save_idx supports 1 channel");
  require(table.class_count <= 256, Err::InvalidArgument, "labels do not fit in one byte");

  std::ofstream img(images_path, std::ios::binary);
  require(img.good(), Err::IoFailure, "cannot write " + images_path);
  write_be32(img, kImageMagic);
  write_be32(img, static_cast<std::uint32_t>(table.rows()));
  write_be32(img, static_cast<std::uint32_t>(table.image_shape->height));
  write_be32(img, static_cast<std::uint32_t>(table.image_shape->width));
  std::vector<unsigned char> raw(table.features.data.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const double v = table.features.data[i];
    require(v >= 0.0 && v <= 1.0, Err::InvalidArgument, "pixel outside [0,1]");
    raw[i] = static_cast<unsigned char>(std::llround(v * 255.0));
  }
  img.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  require(img.good(), Err::IoFailure, "write failed: " + images_path);

  std::ofstream lab(labels_path, std::ios::binary);
  require(lab.good(), Err::IoFailure, "cannot write " + labels_path);
  write_be32(lab, kLabelMagic);
  write_be32(lab, static_cast<std::uint32_t>(table.rows()));
  for (int l : table.labels) {
    const unsigned char b = static_cast<unsigned char>(l);
    lab.write(reinterpret_cast<const char*>(&b), 1);
  }
  require(lab.good(), Err::IoFailure, "write failed: " + labels_path);
}

DataTable load_csv(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), Err::IoFailure, "cannot open " + path);
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), Err::TruncatedFile, path + ": empty file");
  int n_cols = 1;
  for (char c : line)
    if (c == ',') ++n_cols;
  require(n_cols >= 2, Err::InvalidArgument, path + ": need at least one feature column");

  std::vector<double> values;
  std::vector<int> labels;
  int n_rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    int col = 0;
    double label_value = 0.0;
    while (std::getline(ss, cell, ',')) {
      const double v = std::stod(cell);
      if (col < n_cols - 1)
        values.push_back(v);
      else
        label_value = v;
      ++col;
    }
    require(col == n_cols, Err::CountMismatch,
            path + ": row " + std::to_string(n_rows + 1) + " has " + std::to_string(col) + " cells");
    labels.push_back(static_cast<int>(std::llround(label_value)));
    ++n_rows;
  }
  DataTable table;
  table.features = Matrix(n_rows, n_cols - 1);
  table.features.data = std::move(values);
  table.labels = std::move(labels);
  int max_label = 0;
  for (int l : table.labels) {
    require(l >= 0, Err::InvalidArgument, path + ": negative label");
    max_label = std::max(max_label, l);
  }
  table.class_count = n_rows > 0 ? max_label + 1 : 1;
  table.validate();
  return table;
}

void save_csv(const DataTable& table, const std::string& path) {
  std::ofstream out(path);
  require(out.good(), Err::IoFailure, "cannot write " + path);
  for (int c = 0; c < table.cols(); ++c) out << "f" << c << ",";
  out << "label\n";
  char buf[32];
  for (int r = 0; r < table.rows(); ++r) {
    for (int c = 0; c < table.cols(); ++c) {
      std::snprintf(buf, sizeof(buf), "%.17g", table.features(r, c));
      out << buf << ",";
    }
    out << table.labels[r] << "\n";
  }
  require(out.good(), Err::IoFailure, "write failed: " + path);
}

DataTable generate_two_gaussians(int n, std::array<double, 2> mean_a, std::array<double, 2> mean_b,
                                 double sigma, std::uint64_t seed) {
  require(n % 2 == 0, Err::OddCount, "sample count must be even");
  require(n >= 2, Err::InvalidArgument, "need at least 2 samples");
  require(sigma > 0.0, Err::InvalidArgument, "sigma must be positive");
  DataTable table;
  table.features = Matrix(n, 2);
  table.labels.resize(n);
  table.class_count = 2;
  Rng rng(seed);
  const int half = n / 2;
  for (int r = 0; r < n; ++r) {
    const bool second = r >= half;
    const auto& mean = second ? mean_b : mean_a;
    table.features(r, 0) = mean[0] + sigma * rng.normal();
    table.features(r, 1) = mean[1] + sigma * rng.normal();
    table.labels[r] = second ? 1 : 0;
  }
  return table;
}

DataTable generate_synthetic_digits(int n, int classes, int side, std::uint64_t seed) {
  require(n >= 1 && classes >= 2 && side >= 8, Err::InvalidArgument, "bad synthetic digit request");
  require(classes <= 256, Err::InvalidArgument, "at most 256 classes");
  DataTable table;
  table.features = Matrix(n, side * side);
  table.labels.resize(n);
  table.class_count = classes;
  table.image_shape = ImageShape{side, side, 1};
  const double pi = 3.14159265358979323846;
  for (int r = 0; r < n; ++r) {
    const int c = r % classes;
    table.labels[r] = c;
    Rng rng(derive_seed(seed, 0xD161, static_cast<std::uint64_t>(r)));
    const double theta = pi * c / classes;
    const double freq = 2.0 + (c % 3);
    const double phase = rng.real() * 2.0 * pi;
    const double amp = 0.35 + 0.1 * rng.real();
    // class anchor blob position breaks rotational symmetry
    const double bx = side * (0.25 + 0.5 * ((c * 7) % classes) / double(classes));
    const double by = side * (0.25 + 0.5 * ((c * 3 + 1) % classes) / double(classes));
    double* px = table.features.row(r);
    for (int y = 0; y < side; ++y) {
      for (int x = 0; x < side; ++x) {
        const double u = (x * std::cos(theta) + y * std::sin(theta)) / side;
        double v = 0.5 + amp * std::sin(2.0 * pi * freq * u + phase);
        const double d2 = (x - bx) * (x - bx) + (y - by) * (y - by);
        v += 0.45 * std::exp(-d2 / (2.0 * 2.5 * 2.5));
        v += 0.08 * rng.normal();
        v = std::clamp(v, 0.0, 1.0);
        px[y * side + x] = std::llround(v * 255.0) / 255.0;  // byte-quantized
      }
    }
  }
  return table;
}

SplitIndices split(const DataTable& table, double val_fraction, double test_fraction,
                   std::uint64_t seed) {
  require(val_fraction >= 0.0 && test_fraction >= 0.0 && val_fraction + test_fraction < 1.0,
          Err::FractionOutOfRange, "fractions must be >= 0 and sum to < 1");
  const int n = table.rows();
  const int n_val = round_count(val_fraction * n);
  const int n_test = round_count(test_fraction * n);

  auto by_class = rows_by_class(table);
  std::vector<int> sizes(by_class.size());
  for (std::size_t c = 0; c < by_class.size(); ++c) sizes[c] = static_cast<int>(by_class[c].size());

  const std::vector<int> val_counts = apportion(sizes, sizes, n_val);
  std::vector<int> caps(sizes.size());
  for (std::size_t c = 0; c < sizes.size(); ++c) caps[c] = sizes[c] - val_counts[c];
  const std::vector<int> test_counts = apportion(sizes, caps, n_test);

  SplitIndices out;
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto rows = by_class[c];  // ascending row order before the seeded shuffle
    Rng rng(derive_seed(seed, 0x5B17, c));
    rng.shuffle(rows);
    int i = 0;
    for (int j = 0; j < val_counts[c]; ++j) out.val.push_back(rows[i++]);
    for (int j = 0; j < test_counts[c]; ++j) out.test.push_back(rows[i++]);
    for (; i < static_cast<int>(rows.size()); ++i) out.train.push_back(rows[i]);
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.val.begin(), out.val.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

DataTable apply_longtail(const DataTable& table, double imbalance_factor, std::uint64_t seed) {
  require(imbalance_factor >= 1.0, Err::InvalidArgument, "imbalance factor must be >= 1");
  const int k = table.class_count;
  if (k == 1 || imbalance_factor == 1.0) return table;

  auto by_class = rows_by_class(table);
  const double mu = std::pow(imbalance_factor, -1.0 / (k - 1));
  const int n0 = static_cast<int>(by_class[0].size());
  require(n0 > 0, Err::InsufficientClassSamples, "class 0 is empty");

  std::vector<int> keep;
  for (int c = 0; c < k; ++c) {
    const int target = static_cast<int>(std::llround(n0 * std::pow(mu, c)));
    require(static_cast<int>(by_class[c].size()) >= target, Err::InsufficientClassSamples,
            "class " + std::to_string(c) + " has " + std::to_string(by_class[c].size()) +
                " samples, needs " + std::to_string(target));
    Rng rng(derive_seed(seed, 0x7A17, c));
    auto chosen = rng.sample(by_class[c], target);
    keep.insert(keep.end(), chosen.begin(), chosen.end());
  }
  std::sort(keep.begin(), keep.end());
  return take_rows(table, keep);
}

DataTable normalize(const DataTable& table, double mean, double stddev) {
  require(stddev > 0.0, Err::InvalidArgument, "stddev must be positive");
  DataTable out = table;
  for (double& v : out.features.data) v = (v - mean) / stddev;
  out.image_shape.reset();  // values leave [0,1]; no longer byte-image data
  return out;
}

DataTable stratified_subset(const DataTable& table, int n, std::uint64_t seed) {
  require(n >= 1 && n <= table.rows(), Err::InvalidArgument, "subset size out of range");
  auto by_class = rows_by_class(table);
  std::vector<int> sizes(by_class.size());
  for (std::size_t c = 0; c < by_class.size(); ++c) sizes[c] = static_cast<int>(by_class[c].size());
  const std::vector<int> counts = apportion(sizes, sizes, n);
  std::vector<int> keep;
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    Rng rng(derive_seed(seed, 0x50B5, c));
    auto chosen = rng.sample(by_class[c], counts[c]);
    keep.insert(keep.end(), chosen.begin(), chosen.end());
  }
  std::sort(keep.begin(), keep.end());
  return take_rows(table, keep);
}

DataTable take_rows(const DataTable& table, const std::vector<int>& rows) {
  DataTable out;
  out.features = gather_rows(table.features, rows);
  out.labels.reserve(rows.size());
  for (int r : rows) out.labels.push_back(table.labels[r]);
  out.image_shape = table.image_shape;
  out.class_count = table.class_count;
  return out;
}

std::uint64_t dataset_fingerprint(const DataTable& table) {
  std::uint64_t h = fnv1a(&table.features.rows, sizeof(int));
  h = fnv1a(&table.features.cols, sizeof(int), h);
  h = fnv1a(&table.class_count, sizeof(int), h);
  h = fnv1a(table.labels.data(), table.labels.size() * sizeof(int), h);
  h = fnv1a(table.features.data.data(), table.features.data.size() * sizeof(double), h);
  return h;
}

}  // namespace poolseed
