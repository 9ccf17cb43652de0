#include "symnet/io.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <zlib.h>

#include "symnet/errors.hpp"

namespace symnet {

namespace {

using nlohmann::json;

constexpr std::string_view kTerminator = "END_MANIFEST\n";
constexpr std::string_view kCheckpointFormat = "symnet-checkpoint";
constexpr std::string_view kDatasetFormat = "symnet-dataset";

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

std::uint32_t get_u32(const std::string& in, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[at + i])) << (8 * i);
  return v;
}

void put_floats(std::string& out, const float* p, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) put_u32(out, std::bit_cast<std::uint32_t>(p[i]));
}

std::uint32_t crc_of(std::string_view payload) {
  uLong c = crc32(0L, Z_NULL, 0);
  // zlib takes a 32-bit length; feed large payloads in chunks.
  const std::size_t chunk = 1u << 30;
  for (std::size_t at = 0; at < payload.size(); at += chunk) {
    const std::size_t n = std::min(chunk, payload.size() - at);
    c = crc32(c, reinterpret_cast<const Bytef*>(payload.data() + at), static_cast<uInt>(n));
  }
  return static_cast<std::uint32_t>(c);
}

std::string frame(json manifest, const std::string& payload) {
  manifest["payload_bytes"] = payload.size();
  manifest["crc32"] = crc_of(payload);
  return manifest.dump(2) + "\n" + std::string(kTerminator) + payload;
}

struct Framed {
  json manifest;
  std::string payload;
};

Framed unframe(const std::string& bytes, std::string_view format) {
  const std::size_t end = bytes.find(std::string("\n") + std::string(kTerminator));
  if (end == std::string::npos) throw IoError("missing manifest terminator");
  Framed f;
  try {
    f.manifest = json::parse(bytes.substr(0, end + 1));
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed manifest: ") + e.what());
  }
  if (!f.manifest.is_object() || f.manifest.value("format", "") != format)
    throw IoError("not a " + std::string(format) + " file");
  const int version = f.manifest.value("schema_version", -1);
  if (version != kCheckpointSchemaVersion)
    throw SchemaVersionError("unsupported schema version " + std::to_string(version));
  f.payload = bytes.substr(end + 1 + kTerminator.size());
  return f;
}

void check_payload(const Framed& f, std::size_t expected) {
  const auto declared = f.manifest.at("payload_bytes").get<std::size_t>();
  if (declared != expected)
    throw ManifestArchitectureError("manifest declares " + std::to_string(declared) +
                                    " payload bytes but its shape needs " + std::to_string(expected));
  if (f.payload.size() != declared)
    throw PayloadLengthError("payload has " + std::to_string(f.payload.size()) + " bytes, expected " +
                             std::to_string(declared));
  if (crc_of(f.payload) != f.manifest.at("crc32").get<std::uint32_t>())
    throw ChecksumError("payload checksum mismatch");
}

bool stores_latent(const Layer& l) { return l.spec.weights_binary && l.latent.size() != 0; }

json layer_json(const Layer& l) {
  return {{"fan_in", l.spec.fan_in},           {"fan_out", l.spec.fan_out},
          {"activation", to_string(l.spec.activation)}, {"has_bias", l.spec.has_bias},
          {"weights_binary", l.spec.weights_binary},    {"trainable", l.spec.trainable},
          {"latent", stores_latent(l)}};
}

template <typename T>
T field(const json& j, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw IoError(std::string("manifest field '") + key + "': " + e.what());
  }
}

}  // namespace

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("cannot read " + path.string());
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("cannot write " + path.string());
}

std::string encode_checkpoint(const Network& net, const CheckpointInfo& info) {
  net.validate();
  json m;
  m["format"] = kCheckpointFormat;
  m["schema_version"] = kCheckpointSchemaVersion;
  m["binary"] = net.is_binary();
  m["layers"] = json::array();
  std::string payload;
  for (const Layer& l : net.layers()) {
    m["layers"].push_back(layer_json(l));
    const Matrix& w = stores_latent(l) ? l.latent : l.weights;
    put_floats(payload, w.data(), static_cast<std::size_t>(w.size()));
    put_floats(payload, l.bias.data(), static_cast<std::size_t>(l.bias.size()));
  }
  m["seed_lineage"] = info.seed_lineage;
  m["metadata"] = info.metadata;
  return frame(std::move(m), payload);
}

LoadedCheckpoint decode_checkpoint(const std::string& bytes) {
  Framed f = unframe(bytes, kCheckpointFormat);
  std::vector<Layer> layers;
  std::vector<bool> latent_flags;
  std::size_t expected = 0;
  const json& lj = f.manifest.at("layers");
  if (!lj.is_array() || lj.empty()) throw IoError("manifest has no layers");
  for (const json& j : lj) {
    Layer l;
    l.spec.fan_in = field<int>(j, "fan_in");
    l.spec.fan_out = field<int>(j, "fan_out");
    l.spec.activation = activation_from_string(field<std::string>(j, "activation"));
    l.spec.has_bias = field<bool>(j, "has_bias");
    l.spec.weights_binary = field<bool>(j, "weights_binary");
    l.spec.trainable = field<bool>(j, "trainable");
    if (l.spec.fan_in < 1 || l.spec.fan_out < 1) throw ManifestArchitectureError("non-positive layer size");
    latent_flags.push_back(field<bool>(j, "latent"));
    expected += 4 * static_cast<std::size_t>(l.spec.fan_in) * static_cast<std::size_t>(l.spec.fan_out);
    if (l.spec.has_bias) expected += 4 * static_cast<std::size_t>(l.spec.fan_out);
    layers.push_back(std::move(l));
  }
  check_payload(f, expected);

  std::size_t at = 0;
  auto read_floats = [&](float* p, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i, at += 4) p[i] = std::bit_cast<float>(get_u32(f.payload, at));
  };
  for (std::size_t i = 0; i < layers.size(); ++i) {
    Layer& l = layers[i];
    Matrix w(l.spec.fan_out, l.spec.fan_in);
    read_floats(w.data(), static_cast<std::size_t>(w.size()));
    if (latent_flags[i]) {
      l.latent = w;
      l.weights = w.unaryExpr([](float v) { return sign_of(v); });
    } else {
      l.weights = std::move(w);
    }
    if (l.spec.has_bias) {
      l.bias.resize(l.spec.fan_out);
      read_floats(l.bias.data(), static_cast<std::size_t>(l.bias.size()));
    }
  }
  LoadedCheckpoint out{Network(std::move(layers)), {}};
  try {
    out.net.validate();
  } catch (const Error& e) {
    throw ManifestArchitectureError(std::string("inconsistent architecture: ") + e.what());
  }
  out.info.seed_lineage = f.manifest.value("seed_lineage", std::vector<std::uint64_t>{});
  out.info.metadata = f.manifest.value("metadata", json::object());
  return out;
}

void save_checkpoint(const Network& net, const std::filesystem::path& path, const CheckpointInfo& info) {
  write_file(path, encode_checkpoint(net, info));
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(read_file(path));
}

std::string encode_dataset(const Dataset& data, const json& metadata) {
  data.validate();
  json m;
  m["format"] = kDatasetFormat;
  m["schema_version"] = kCheckpointSchemaVersion;
  m["rows"] = data.inputs.rows();
  m["cols"] = data.inputs.cols();
  m["num_classes"] = data.num_classes;
  m["signed_labels"] = data.signed_labels;
  m["metadata"] = metadata;
  std::string payload;
  put_floats(payload, data.inputs.data(), static_cast<std::size_t>(data.inputs.size()));
  for (int y : data.labels) put_u32(payload, static_cast<std::uint32_t>(y));
  return frame(std::move(m), payload);
}

Dataset decode_dataset(const std::string& bytes, json* metadata) {
  Framed f = unframe(bytes, kDatasetFormat);
  const auto rows = field<long long>(f.manifest, "rows");
  const auto cols = field<long long>(f.manifest, "cols");
  if (rows < 1 || cols < 1) throw ManifestArchitectureError("non-positive dataset shape");
  check_payload(f, 4 * static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols + 1));
  Dataset d;
  d.num_classes = field<int>(f.manifest, "num_classes");
  d.signed_labels = field<bool>(f.manifest, "signed_labels");
  d.inputs.resize(rows, cols);
  std::size_t at = 0;
  for (Eigen::Index i = 0; i < d.inputs.size(); ++i, at += 4)
    d.inputs.data()[i] = std::bit_cast<float>(get_u32(f.payload, at));
  d.labels.resize(static_cast<std::size_t>(rows));
  for (auto& y : d.labels) {
    y = static_cast<int>(get_u32(f.payload, at));
    at += 4;
  }
  try {
    d.validate();
  } catch (const Error& e) {
    throw ManifestArchitectureError(std::string("inconsistent dataset: ") + e.what());
  }
  if (metadata) *metadata = f.manifest.value("metadata", json::object());
  return d;
}

void save_dataset(const Dataset& data, const std::filesystem::path& path, const json& metadata) {
  write_file(path, encode_dataset(data, metadata));
}

Dataset load_dataset(const std::filesystem::path& path, json* metadata) {
  return decode_dataset(read_file(path), metadata);
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

CsvTable::CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

CsvTable& CsvTable::cell(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) {
    pending_.push_back(s);
  } else {
    std::string q = "\"";
    for (char c : s) {
      if (c == '"') q.push_back('"');
      q.push_back(c);
    }
    q.push_back('"');
    pending_.push_back(std::move(q));
  }
  return *this;
}

CsvTable& CsvTable::cell(double v) {
  pending_.push_back(format_number(v));
  return *this;
}

CsvTable& CsvTable::cell(long long v) {
  pending_.push_back(std::to_string(v));
  return *this;
}

void CsvTable::end_row() {
  if (pending_.size() != header_.size())
    throw ShapeError("CSV row has " + std::to_string(pending_.size()) + " cells, header has " +
                     std::to_string(header_.size()));
  rows_.push_back(std::move(pending_));
  pending_.clear();
}

std::string CsvTable::str() const {
  std::string out;
  auto line = [&out](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out.push_back(',');
      out += cells[i];
    }
    out.push_back('\n');
  };
  line(header_);
  for (const auto& r : rows_) line(r);
  return out;
}

void CsvTable::write(const std::filesystem::path& path) const { write_file(path, str()); }

}  // namespace symnet
