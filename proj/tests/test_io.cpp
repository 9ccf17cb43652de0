#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>

#include "helpers.hpp"
#include "symnet/errors.hpp"
#include "symnet/io.hpp"

using namespace symnet;
using namespace testing_helpers;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::string kEnd = "\nEND_MANIFEST\n";

std::pair<json, std::string> split(const std::string& bytes) {
  const auto at = bytes.find(kEnd);
  REQUIRE(at != std::string::npos);
  return {json::parse(bytes.substr(0, at)), bytes.substr(at + kEnd.size())};
}

std::string join(const json& m, const std::string& payload) { return m.dump(2) + kEnd + payload; }

}  // namespace

TEST_CASE("checkpoint round trip is bit-identical, continuous and binary") {
  Network a = random_mlp({7, 5, 4, 3}, 1, false, true);
  CheckpointInfo info;
  info.seed_lineage = {42, 7};
  info.metadata = {{"algorithm", "sgd"}};
  LoadedCheckpoint back = decode_checkpoint(encode_checkpoint(a, info));
  CHECK(back.net == a);
  CHECK(back.info.seed_lineage == info.seed_lineage);
  CHECK(back.info.metadata == info.metadata);

  Network b = random_mlp({9, 5, 1}, 2, true);
  b.mutable_layer(0).latent(0, 0) = 0.0f;
  binarize_in_place(b);
  CHECK(decode_checkpoint(encode_checkpoint(b)).net == b);

  Network c = make_committee(11, 5);
  Rng rng(3);
  initialize(c, rng);
  Network cb = decode_checkpoint(encode_checkpoint(c)).net;
  CHECK(cb == c);
  CHECK_FALSE(cb.layer(1).spec.trainable);

  fs::path dir = fs::temp_directory_path() / "symnet_test_io";
  fs::remove_all(dir);
  save_checkpoint(a, dir / "nested" / "a.ckpt", info);
  CHECK(load_checkpoint(dir / "nested" / "a.ckpt").net == a);
  CHECK_THROWS_AS(load_checkpoint(dir / "missing.ckpt"), IoError);
}

TEST_CASE("checkpoint layout: human-readable manifest and little-endian float32 payload") {
  Network a = make_mlp(std::vector<int>{2, 1}, false, true);
  a.mutable_layer(0).weights << 1.5f, -2.0f;
  a.mutable_layer(0).bias << 0.25f;
  auto [m, payload] = split(encode_checkpoint(a));
  CHECK(m["schema_version"] == kCheckpointSchemaVersion);
  CHECK(m["layers"][0]["fan_in"] == 2);
  CHECK(m["payload_bytes"] == 12);
  REQUIRE(payload.size() == 12);
  float v[3];
  for (int i = 0; i < 3; ++i) {
    std::uint32_t u = 0;
    for (int b = 0; b < 4; ++b) u |= static_cast<std::uint32_t>(static_cast<unsigned char>(payload[4 * i + b])) << (8 * b);
    std::memcpy(&v[i], &u, 4);
  }
  CHECK(v[0] == 1.5f);
  CHECK(v[1] == -2.0f);
  CHECK(v[2] == 0.25f);
}

TEST_CASE("checkpoint errors are distinct") {
  Network a = random_mlp({6, 4, 2}, 4);
  const std::string good = encode_checkpoint(a);
  auto [m, payload] = split(good);

  CHECK_THROWS_AS(decode_checkpoint(good.substr(0, good.size() - 3)), PayloadLengthError);

  std::string flipped = good;
  flipped.back() = static_cast<char>(flipped.back() ^ 0x01);
  CHECK_THROWS_AS(decode_checkpoint(flipped), ChecksumError);

  json v = m;
  v["schema_version"] = 99;
  CHECK_THROWS_AS(decode_checkpoint(join(v, payload)), SchemaVersionError);

  json arch = m;
  arch["layers"][0]["fan_out"] = 5;
  CHECK_THROWS_AS(decode_checkpoint(join(arch, payload)), ManifestArchitectureError);

  CHECK_THROWS_AS(decode_checkpoint("not a checkpoint"), IoError);
  CHECK_THROWS_AS(decode_dataset(good), IoError);
}

TEST_CASE("dataset files round trip") {
  Dataset d;
  d.inputs = gaussian_inputs(13, 4, 5);
  d.num_classes = 3;
  for (int i = 0; i < 13; ++i) d.labels.push_back(i % 3);
  json meta = {{"source", "unit"}};
  json back_meta;
  Dataset back = decode_dataset(encode_dataset(d, meta), &back_meta);
  CHECK(back.inputs == d.inputs);
  CHECK(back.labels == d.labels);
  CHECK(back.num_classes == 3);
  CHECK_FALSE(back.signed_labels);
  CHECK(back_meta == meta);

  Dataset s;
  s.inputs = sign_inputs(5, 3, 6);
  s.signed_labels = true;
  s.labels = {1, -1, -1, 1, 1};
  const std::string bytes = encode_dataset(s);
  Dataset sb = decode_dataset(bytes);
  CHECK(sb.signed_labels);
  CHECK(sb.labels == s.labels);
  CHECK_THROWS_AS(decode_dataset(bytes.substr(0, bytes.size() - 1)), PayloadLengthError);
}

TEST_CASE("format_number round-trips doubles") {
  CHECK(format_number(0.0) == "0");
  CHECK(format_number(0.5) == "0.5");
  CHECK(format_number(-3.0) == "-3");
  CHECK(format_number(std::nan("")) == "nan");
  Rng rng(7);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 1000; ++i) {
    const double x = u(rng) * std::pow(10.0, (i % 20) - 10);
    CHECK(std::stod(format_number(x)) == x);
  }
}

TEST_CASE("csv table: header, width check, deterministic text") {
  CsvTable t({"a", "b", "c"});
  t.cell("x").cell(0.1).cell(3).end_row();
  t.cell("y,z").cell(1e-20).cell(std::size_t{4}).end_row();
  CHECK(t.rows() == 2);
  CHECK(t.str() == "a,b,c\nx,0.1,3\n\"y,z\",1e-20,4\n");
  t.cell("short");
  CHECK_THROWS(t.end_row());
}
