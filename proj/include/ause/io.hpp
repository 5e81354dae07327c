#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "ause/confidence.hpp"
#include "ause/core.hpp"

namespace ause::io {

// On-disk layout (all integers little-endian):
//   magic     8 bytes  "SPARSEV1"
//   dtype     u8       1 = f32, 2 = u8, 3 = u16
//   rank      u32
//   dims      u32 x rank
//   payload   row-major, product(dims) * sizeof(dtype) bytes
//   checksum  u64      FNV-1a 64 over the payload bytes
enum class DType : std::uint8_t { Float32 = 1, UInt8 = 2, UInt16 = 3 };

inline constexpr char kMagic[8] = {'S', 'P', 'A', 'R', 'S', 'E', 'V', '1'};

std::size_t dtype_size(DType dtype);
std::uint64_t fnv1a64(std::span<const std::byte> bytes);

struct TensorContainer {
  DType dtype = DType::Float32;
  std::vector<std::uint32_t> dims;
  std::vector<std::byte> payload;  // little-endian element bytes

  std::size_t element_count() const;
  std::uint64_t checksum() const { return fnv1a64(payload); }

  static TensorContainer from_floats(std::vector<std::uint32_t> dims, std::span<const float> values);
  static TensorContainer from_u8(std::vector<std::uint32_t> dims, std::span<const std::uint8_t> values);
  static TensorContainer from_u16(std::vector<std::uint32_t> dims, std::span<const std::uint16_t> values);

  std::vector<float> to_floats() const;
  std::vector<std::uint32_t> to_unsigned() const;  // dtype 2 or 3

  bool operator==(const TensorContainer&) const = default;
};

std::vector<std::byte> encode_tensor(const TensorContainer& tensor);
// Throws BadMagic, BadHeader, TruncatedFile or ChecksumMismatch.
TensorContainer decode_tensor(std::span<const std::byte> bytes);

TensorContainer read_tensor(const std::filesystem::path& path);
void write_tensor(const TensorContainer& tensor, const std::filesystem::path& path);

// Probabilities stored as u16 fixed point (value / 65535).
TensorContainer quantize_probabilities(const ProbabilityStack& probs);
TensorContainer probabilities_container(const ProbabilityStack& probs);
TensorContainer labels_container(const LabelArray& labels);

inline constexpr std::size_t kDefaultLogitSamples = 5;

enum class FrameKind { Probabilities, Logits };

struct FrameEntry {
  std::string id;
  FrameKind kind = FrameKind::Probabilities;
  std::filesystem::path prediction_path;
  std::filesystem::path labels_path;
  std::optional<std::filesystem::path> stddev_path;
  std::optional<std::size_t> samples;
};

struct Manifest {
  std::filesystem::path base_dir;
  ClassCatalog catalog;
  std::vector<FrameEntry> frames;
  // Config keys overriding the defaults; see config_from_json.
  nlohmann::json config_overrides = nlohmann::json::object();
};

Manifest read_manifest(const std::filesystem::path& path);
void write_manifest(const Manifest& manifest, const std::filesystem::path& path);

nlohmann::json config_to_json(const EvalConfig& config);
// Applies every key present in `j` on top of `base`; unknown keys are rejected.
EvalConfig config_from_json(const nlohmann::json& j, EvalConfig base = {});

struct LoadedFrame {
  std::string id;
  std::variant<ProbabilityStack, LogitTensor> prediction;
  LabelArray labels;
  std::uint64_t prediction_digest = 0;
  std::uint64_t labels_digest = 0;
  // Draws per point when `prediction` holds logits with a stddev.
  std::size_t logit_samples = kDefaultLogitSamples;
};

// Reads and validates one frame. Rank-3 f32/u16 tensors are S x N x K
// probabilities, rank-2 f32 tensors are N x K probabilities (or logits when
// the entry is of logit kind), rank-1 u8/u16 tensors are labels.
LoadedFrame load_frame(const FrameEntry& entry, const ClassCatalog& catalog,
                       const std::filesystem::path& base_dir = {});

}  // namespace ause::io
