#include "symnet/datasets.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <limits>
#include <numeric>

#include "symnet/errors.hpp"

namespace symnet {

namespace {

enum HmmStream : std::uint64_t { kTeacher = 1, kProjection = 2, kTrainPatterns = 3, kTestPatterns = 4 };

Matrix gaussian_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<float> n(0.0f, 1.0f);
  Matrix m(rows, cols);
  for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = n(rng);
  return m;
}

Dataset hmm_split(const Vector& teacher, const Matrix& projection, int patterns, std::uint64_t seed) {
  const Eigen::Index D = teacher.size();
  Matrix xi = gaussian_matrix(patterns, D, seed);  // P x D
  Dataset out;
  out.signed_labels = true;
  out.num_classes = 2;
  Vector t = xi * teacher;
  out.labels.resize(static_cast<std::size_t>(patterns));
  for (int mu = 0; mu < patterns; ++mu) out.labels[mu] = t[mu] >= 0.0f ? 1 : -1;
  out.inputs = (xi * projection.transpose()).unaryExpr([](float v) { return sign_of(v); });
  return out;
}

std::uint32_t read_be32(std::span<const std::uint8_t> b, std::size_t at) {
  return (std::uint32_t{b[at]} << 24) | (std::uint32_t{b[at + 1]} << 16) |
         (std::uint32_t{b[at + 2]} << 8) | std::uint32_t{b[at + 3]};
}

void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

std::vector<std::uint8_t> gunzip(std::span<const std::uint8_t> in) {
  z_stream zs{};
  if (inflateInit2(&zs, 15 + 32) != Z_OK) throw IoError("cannot initialise zlib");
  zs.next_in = const_cast<Bytef*>(in.data());
  zs.avail_in = static_cast<uInt>(in.size());
  std::vector<std::uint8_t> out;
  std::uint8_t buf[1 << 15];
  int rc = Z_OK;
  do {
    zs.next_out = buf;
    zs.avail_out = sizeof(buf);
    rc = inflate(&zs, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END) {
      inflateEnd(&zs);
      // A gzip stream that ends early is a truncated payload.
      if (rc == Z_BUF_ERROR) throw IdxTruncatedError("gzip stream ends early");
      throw IoError("corrupt gzip stream");
    }
    out.insert(out.end(), buf, buf + (sizeof(buf) - zs.avail_out));
  } while (rc != Z_STREAM_END);
  inflateEnd(&zs);
  return out;
}

std::vector<std::uint8_t> slurp(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

std::filesystem::path find_idx(const std::filesystem::path& dir, const std::string& stem) {
  for (const char* suffix : {"", ".gz"}) {
    auto p = dir / (stem + suffix);
    if (std::filesystem::exists(p)) return p;
  }
  return {};
}

const char* mnist_stem(bool train_split, bool images) {
  if (train_split) return images ? "train-images-idx3-ubyte" : "train-labels-idx1-ubyte";
  return images ? "t10k-images-idx3-ubyte" : "t10k-labels-idx1-ubyte";
}

}  // namespace

void HmmConfig::validate() const {
  if (D < 1 || N < 1 || P < 1 || P_test < 1) throw ConfigError("HMM sizes must be positive");
}

HmmData hmm_generate(const HmmConfig& cfg) {
  cfg.validate();
  Rng trng(mix_seed(cfg.seed, kTeacher));
  std::bernoulli_distribution coin(0.5);
  Vector teacher(cfg.D);
  for (int k = 0; k < cfg.D; ++k) teacher[k] = coin(trng) ? 1.0f : -1.0f;
  Matrix projection = gaussian_matrix(cfg.N, cfg.D, mix_seed(cfg.seed, kProjection));
  HmmData out;
  out.train = hmm_split(teacher, projection, cfg.P, mix_seed(cfg.seed, kTrainPatterns));
  out.test = hmm_split(teacher, projection, cfg.P_test, mix_seed(cfg.seed, kTestPatterns));
  out.teacher = std::move(teacher);
  out.projection = std::move(projection);
  return out;
}

std::size_t IdxTensor::element_count() const {
  std::size_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

IdxTensor parse_idx(std::span<const std::uint8_t> bytes) {
  if (bytes.size() >= 2 && bytes[0] == 0x1f && bytes[1] == 0x8b) {
    auto raw = gunzip(bytes);
    return parse_idx(raw);
  }
  if (bytes.size() < 4) throw IdxTruncatedError("IDX header shorter than the magic number");
  IdxTensor t;
  t.magic = read_be32(bytes, 0);
  const std::uint32_t ndims = t.magic & 0xffu;
  if ((t.magic & 0xffffff00u) != 0x00000800u || ndims == 0)
    throw IdxBadMagicError("unsupported IDX magic 0x" + [&] {
      char buf[16];
      std::snprintf(buf, sizeof(buf), "%08x", t.magic);
      return std::string(buf);
    }());
  const std::size_t header = 4 + 4 * std::size_t{ndims};
  if (bytes.size() < header) throw IdxTruncatedError("IDX dimension block truncated");
  std::size_t count = 1;
  for (std::uint32_t d = 0; d < ndims; ++d) {
    std::uint32_t dim = read_be32(bytes, 4 + 4 * d);
    t.dims.push_back(dim);
    if (dim != 0 && count > std::numeric_limits<std::uint32_t>::max() / dim)
      throw IdxDimensionOverflowError("IDX dimensions overflow a 32-bit element count");
    count *= dim;
  }
  if (bytes.size() - header < count)
    throw IdxTruncatedError("IDX payload has " + std::to_string(bytes.size() - header) +
                            " bytes, expected " + std::to_string(count));
  t.data.assign(bytes.begin() + static_cast<std::ptrdiff_t>(header),
                bytes.begin() + static_cast<std::ptrdiff_t>(header + count));
  return t;
}

IdxTensor read_idx(const std::filesystem::path& path) {
  auto bytes = slurp(path);
  return parse_idx(bytes);
}

std::vector<std::uint8_t> encode_idx(const IdxTensor& t) {
  if (t.data.size() != t.element_count()) throw ShapeError("IDX payload does not match its dimensions");
  std::vector<std::uint8_t> out;
  put_be32(out, 0x00000800u | static_cast<std::uint32_t>(t.dims.size()));
  for (auto d : t.dims) put_be32(out, d);
  out.insert(out.end(), t.data.begin(), t.data.end());
  return out;
}

void write_idx(const std::filesystem::path& path, const IdxTensor& t) {
  auto bytes = encode_idx(t);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path.string());
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("short write to " + path.string());
}

Matrix standardize(const Matrix& images) {
  if (images.size() == 0) throw ShapeError("cannot standardize an empty matrix");
  const double n = static_cast<double>(images.size());
  double mean = 0.0;
  for (Eigen::Index k = 0; k < images.size(); ++k) mean += images.data()[k];
  mean /= n;
  double var = 0.0;
  for (Eigen::Index k = 0; k < images.size(); ++k) {
    double d = images.data()[k] - mean;
    var += d * d;
  }
  var /= n;
  if (!(var > 0.0)) throw NumericError("cannot standardize: zero variance");
  const double inv_sd = 1.0 / std::sqrt(var);
  Matrix out(images.rows(), images.cols());
  for (Eigen::Index k = 0; k < images.size(); ++k)
    out.data()[k] = static_cast<float>((images.data()[k] - mean) * inv_sd);
  return out;
}

std::vector<int> parity_labels(std::span<const int> digits) {
  std::vector<int> out;
  out.reserve(digits.size());
  for (int d : digits) {
    if (d < 0 || d > 9) throw LabelError("digit out of range: " + std::to_string(d));
    out.push_back(d % 2 == 0 ? 1 : -1);
  }
  return out;
}

Dataset randomize_labels(const Dataset& data, std::uint64_t seed) {
  Dataset out = data;
  Rng rng(seed);
  if (data.signed_labels) {
    std::bernoulli_distribution coin(0.5);
    for (auto& y : out.labels) y = coin(rng) ? 1 : -1;
  } else {
    std::uniform_int_distribution<int> cls(0, data.num_classes - 1);
    for (auto& y : out.labels) y = cls(rng);
  }
  return out;
}

Dataset zero_pixels(const Dataset& data, double fraction, std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) throw ConfigError("pixel fraction must lie in [0, 1]");
  Dataset out = data;
  const auto width = static_cast<std::size_t>(data.inputs.cols());
  const auto k = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(width)));
  if (k == 0) return out;
  Rng rng(seed);
  std::vector<std::size_t> idx(width);
  for (Eigen::Index r = 0; r < out.inputs.rows(); ++r) {
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    // Partial Fisher-Yates: the first k slots are a uniform k-subset.
    for (std::size_t i = 0; i < k; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, width - 1);
      std::swap(idx[i], idx[pick(rng)]);
      out.inputs(r, static_cast<Eigen::Index>(idx[i])) = 0.0f;
    }
  }
  return out;
}

bool mnist_available(const std::filesystem::path& dir) {
  for (bool split : {true, false})
    for (bool images : {true, false})
      if (find_idx(dir, mnist_stem(split, images)).empty()) return false;
  return true;
}

Dataset load_mnist(const std::filesystem::path& dir, bool train_split, MnistTask task,
                   std::size_t limit) {
  auto img_path = find_idx(dir, mnist_stem(train_split, true));
  auto lbl_path = find_idx(dir, mnist_stem(train_split, false));
  if (img_path.empty() || lbl_path.empty()) throw IoError("MNIST files not found in " + dir.string());
  IdxTensor images = read_idx(img_path);
  IdxTensor labels = read_idx(lbl_path);
  if (images.magic != kIdxImageMagic || images.dims.size() != 3)
    throw IdxBadMagicError("image file is not a 3-D unsigned-byte tensor");
  if (labels.magic != kIdxLabelMagic || labels.dims.size() != 1)
    throw IdxBadMagicError("label file is not a 1-D unsigned-byte tensor");
  if (images.dims[0] != labels.dims[0]) throw ShapeError("image and label counts differ");
  std::size_t n = images.dims[0];
  if (limit > 0) n = std::min(n, limit);
  const std::size_t width = std::size_t{images.dims[1]} * images.dims[2];
  Matrix raw(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(width));
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < width; ++c)
      raw(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = images.data[r * width + c];
  std::vector<int> digits(labels.data.begin(), labels.data.begin() + static_cast<std::ptrdiff_t>(n));
  Dataset out;
  out.inputs = standardize(raw);
  if (task == MnistTask::kParity) {
    out.labels = parity_labels(digits);
    out.signed_labels = true;
    out.num_classes = 2;
  } else {
    out.labels = std::move(digits);
    out.num_classes = 10;
  }
  out.validate();
  return out;
}

}  // namespace symnet
