#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "symnet/network.hpp"

namespace symnet {

inline constexpr int kCheckpointSchemaVersion = 1;

struct CheckpointInfo {
  std::vector<std::uint64_t> seed_lineage;  // master seed first, derived seeds after
  nlohmann::json metadata = nlohmann::json::object();
};

struct LoadedCheckpoint {
  Network net;
  CheckpointInfo info;
};

// Text manifest (JSON) closed by a line "END_MANIFEST", then the little-endian
// float32 payload: per layer the weights (latent weights for binary layers),
// rows contiguous, followed by the bias.
std::string encode_checkpoint(const Network& net, const CheckpointInfo& info = {});
LoadedCheckpoint decode_checkpoint(const std::string& bytes);
void save_checkpoint(const Network& net, const std::filesystem::path& path,
                     const CheckpointInfo& info = {});
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

// Same framing; payload is the float32 input matrix followed by int32 labels.
std::string encode_dataset(const Dataset& data, const nlohmann::json& metadata = nlohmann::json::object());
Dataset decode_dataset(const std::string& bytes, nlohmann::json* metadata = nullptr);
void save_dataset(const Dataset& data, const std::filesystem::path& path,
                  const nlohmann::json& metadata = nlohmann::json::object());
Dataset load_dataset(const std::filesystem::path& path, nlohmann::json* metadata = nullptr);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& bytes);

// Shortest decimal text that parses back to the same double.
std::string format_number(double v);

class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header);

  CsvTable& cell(const std::string& s);
  CsvTable& cell(double v);
  CsvTable& cell(long long v);
  CsvTable& cell(std::size_t v) { return cell(static_cast<long long>(v)); }
  CsvTable& cell(int v) { return cell(static_cast<long long>(v)); }
  CsvTable& cell(const char* s) { return cell(std::string(s)); }
  void end_row();

  const std::vector<std::string>& header() const { return header_; }
  std::size_t rows() const { return rows_.size(); }
  std::string str() const;
  void write(const std::filesystem::path& path) const;

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
  std::vector<std::string> pending_;
};

}  // namespace symnet
