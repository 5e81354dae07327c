#include "ause/io.hpp"

#include "ause/random.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <limits>

namespace ause::io {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::size_t kFixedHeader = sizeof(kMagic) + 1 + 4;
constexpr std::uint32_t kMaxRank = 8;
constexpr std::uint64_t kMaxElements = std::uint64_t{1} << 40;

void put_u32(std::vector<std::byte>& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<std::byte>((v >> (8 * b)) & 0xff));
}

void put_u64(std::vector<std::byte>& out, std::uint64_t v) {
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<std::byte>((v >> (8 * b)) & 0xff));
}

std::uint64_t get_le(std::span<const std::byte> bytes, std::size_t offset, int width) {
  std::uint64_t v = 0;
  for (int b = 0; b < width; ++b) {
    v |= static_cast<std::uint64_t>(bytes[offset + b]) << (8 * b);
  }
  return v;
}

bool valid_dtype(std::uint8_t tag) { return tag >= 1 && tag <= 3; }

std::vector<char> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw Error(ErrorKind::IoFailure, "cannot open " + path.string());
  const auto size = static_cast<std::size_t>(in.tellg());
  std::vector<char> data(size);
  in.seekg(0);
  if (size > 0 && !in.read(data.data(), static_cast<std::streamsize>(size))) {
    throw Error(ErrorKind::IoFailure, "cannot read " + path.string());
  }
  return data;
}

// Writes through a sibling temp file so a failed write never leaves a
// partial output behind.
void write_file_atomic(const fs::path& path, std::span<const char> bytes) {
  fs::path tmp = path;
  tmp += ".partial";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::IoFailure, "cannot create " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorKind::IoFailure, "cannot write " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw Error(ErrorKind::IoFailure, "cannot move output into place at " + path.string());
  }
}

}  // namespace

std::size_t dtype_size(DType dtype) {
  switch (dtype) {
    case DType::Float32: return 4;
    case DType::UInt8: return 1;
    case DType::UInt16: return 2;
  }
  throw Error(ErrorKind::BadHeader, "unknown dtype");
}

std::uint64_t fnv1a64(std::span<const std::byte> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::byte b : bytes) {
    h ^= static_cast<std::uint64_t>(b);
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::size_t TensorContainer::element_count() const {
  std::size_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

namespace {

std::size_t checked_count(std::span<const std::uint32_t> dims, std::size_t values) {
  std::size_t n = 1;
  for (auto d : dims) n *= d;
  if (n != values) throw Error(ErrorKind::ShapeMismatch, "dims do not match value count");
  return n;
}

}  // namespace

TensorContainer TensorContainer::from_floats(std::vector<std::uint32_t> dims, std::span<const float> values) {
  checked_count(dims, values.size());
  TensorContainer t{DType::Float32, std::move(dims), {}};
  t.payload.resize(values.size() * 4);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto bits = std::bit_cast<std::uint32_t>(values[i]);
    for (int b = 0; b < 4; ++b) t.payload[4 * i + b] = static_cast<std::byte>((bits >> (8 * b)) & 0xff);
  }
  return t;
}

TensorContainer TensorContainer::from_u8(std::vector<std::uint32_t> dims, std::span<const std::uint8_t> values) {
  checked_count(dims, values.size());
  TensorContainer t{DType::UInt8, std::move(dims), {}};
  t.payload.resize(values.size());
  std::memcpy(t.payload.data(), values.data(), values.size());
  return t;
}

TensorContainer TensorContainer::from_u16(std::vector<std::uint32_t> dims, std::span<const std::uint16_t> values) {
  checked_count(dims, values.size());
  TensorContainer t{DType::UInt16, std::move(dims), {}};
  t.payload.resize(values.size() * 2);
  for (std::size_t i = 0; i < values.size(); ++i) {
    t.payload[2 * i] = static_cast<std::byte>(values[i] & 0xff);
    t.payload[2 * i + 1] = static_cast<std::byte>(values[i] >> 8);
  }
  return t;
}

std::vector<float> TensorContainer::to_floats() const {
  if (dtype != DType::Float32) throw Error(ErrorKind::ShapeMismatch, "tensor is not f32");
  std::vector<float> out(payload.size() / 4);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = std::bit_cast<float>(static_cast<std::uint32_t>(get_le(payload, 4 * i, 4)));
  }
  return out;
}

std::vector<std::uint32_t> TensorContainer::to_unsigned() const {
  if (dtype == DType::Float32) throw Error(ErrorKind::ShapeMismatch, "tensor is not an integer type");
  const std::size_t width = dtype_size(dtype);
  std::vector<std::uint32_t> out(payload.size() / width);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<std::uint32_t>(get_le(payload, width * i, static_cast<int>(width)));
  }
  return out;
}

std::vector<std::byte> encode_tensor(const TensorContainer& tensor) {
  if (tensor.dims.empty() || tensor.dims.size() > kMaxRank) {
    throw Error(ErrorKind::BadHeader, "rank must lie in [1, 8]");
  }
  if (tensor.payload.size() != tensor.element_count() * dtype_size(tensor.dtype)) {
    throw Error(ErrorKind::ShapeMismatch, "payload size does not match dims");
  }
  std::vector<std::byte> out;
  out.reserve(kFixedHeader + 4 * tensor.dims.size() + tensor.payload.size() + 8);
  for (char ch : kMagic) out.push_back(static_cast<std::byte>(ch));
  out.push_back(static_cast<std::byte>(tensor.dtype));
  put_u32(out, static_cast<std::uint32_t>(tensor.dims.size()));
  for (auto d : tensor.dims) put_u32(out, d);
  out.insert(out.end(), tensor.payload.begin(), tensor.payload.end());
  put_u64(out, tensor.checksum());
  return out;
}

TensorContainer decode_tensor(std::span<const std::byte> bytes) {
  if (bytes.size() < sizeof(kMagic)) throw Error(ErrorKind::TruncatedFile, "file shorter than magic");
  if (std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw Error(ErrorKind::BadMagic, "missing SPARSEV1 magic");
  }
  if (bytes.size() < kFixedHeader) throw Error(ErrorKind::TruncatedFile, "file shorter than header");
  const auto tag = static_cast<std::uint8_t>(bytes[sizeof(kMagic)]);
  if (!valid_dtype(tag)) throw Error(ErrorKind::BadHeader, "unknown dtype tag " + std::to_string(tag));
  const auto rank = static_cast<std::uint32_t>(get_le(bytes, sizeof(kMagic) + 1, 4));
  if (rank == 0 || rank > kMaxRank) throw Error(ErrorKind::BadHeader, "rank " + std::to_string(rank));
  const std::size_t header = kFixedHeader + 4 * std::size_t{rank};
  if (bytes.size() < header) throw Error(ErrorKind::TruncatedFile, "file shorter than dims");

  TensorContainer t;
  t.dtype = static_cast<DType>(tag);
  std::uint64_t elements = 1;
  for (std::uint32_t r = 0; r < rank; ++r) {
    const auto d = static_cast<std::uint32_t>(get_le(bytes, kFixedHeader + 4 * r, 4));
    t.dims.push_back(d);
    if (d != 0 && elements > kMaxElements / d) {
      throw Error(ErrorKind::BadHeader, "declared size is implausibly large");
    }
    elements *= d;
  }
  const std::uint64_t payload_size = elements * dtype_size(t.dtype);
  const std::uint64_t expected = header + payload_size + 8;
  if (bytes.size() < expected) {
    throw Error(ErrorKind::TruncatedFile, "file holds " + std::to_string(bytes.size()) +
                                              " bytes, header declares " + std::to_string(expected));
  }
  if (bytes.size() > expected) throw Error(ErrorKind::BadHeader, "trailing bytes after checksum");
  auto payload = bytes.subspan(header, payload_size);
  const std::uint64_t stored = get_le(bytes, header + payload_size, 8);
  if (fnv1a64(payload) != stored) throw Error(ErrorKind::ChecksumMismatch, "payload checksum mismatch");
  t.payload.assign(payload.begin(), payload.end());
  return t;
}

TensorContainer read_tensor(const fs::path& path) {
  const auto data = read_file(path);
  try {
    return decode_tensor(std::as_bytes(std::span(data)));
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.what(), e.index());
  }
}

void write_tensor(const TensorContainer& tensor, const fs::path& path) {
  const auto bytes = encode_tensor(tensor);
  write_file_atomic(path, {reinterpret_cast<const char*>(bytes.data()), bytes.size()});
}

namespace {

std::vector<std::uint32_t> stack_dims(const ProbabilityStack& probs) {
  return {static_cast<std::uint32_t>(probs.samples()), static_cast<std::uint32_t>(probs.points()),
          static_cast<std::uint32_t>(probs.classes())};
}

}  // namespace

TensorContainer probabilities_container(const ProbabilityStack& probs) {
  return TensorContainer::from_floats(stack_dims(probs), probs.data());
}

TensorContainer quantize_probabilities(const ProbabilityStack& probs) {
  std::vector<std::uint16_t> q(probs.data().size());
  for (std::size_t i = 0; i < q.size(); ++i) {
    const double p = std::clamp(static_cast<double>(probs.data()[i]), 0.0, 1.0);
    q[i] = static_cast<std::uint16_t>(std::lround(p * 65535.0));
  }
  return TensorContainer::from_u16(stack_dims(probs), q);
}

TensorContainer labels_container(const LabelArray& labels) {
  const auto values = labels.values();
  ClassIndex peak = 0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] < 0 || values[i] > 65535) {
      throw Error(ErrorKind::LabelOutOfRange, "label not representable as u16", i);
    }
    peak = std::max(peak, values[i]);
  }
  const std::vector<std::uint32_t> dims{static_cast<std::uint32_t>(values.size())};
  if (peak <= 255) {
    std::vector<std::uint8_t> narrow(values.begin(), values.end());
    return TensorContainer::from_u8(dims, narrow);
  }
  std::vector<std::uint16_t> wide(values.begin(), values.end());
  return TensorContainer::from_u16(dims, wide);
}

// ---------------------------------------------------------------------------
// Manifest and config

json config_to_json(const EvalConfig& config) {
  json measures = json::array();
  for (auto m : config.measures) measures.push_back(std::string(to_string(m)));
  return json{{"grid_steps", config.grid_steps},
              {"iou_filter_threshold", config.iou_filter_threshold},
              {"ece_bins", config.ece_bins},
              {"tie_break", std::string(to_string(config.tie_break))},
              {"rng_seed", config.rng_seed},
              {"ranking_domain", std::string(to_string(config.ranking_domain))},
              {"measures", measures},
              {"per_frame", config.per_frame}};
}

EvalConfig config_from_json(const json& j, EvalConfig base) {
  if (!j.is_object()) throw Error(ErrorKind::InvalidConfig, "config must be a JSON object");
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "grid_steps") {
        base.grid_steps = value.get<std::size_t>();
      } else if (key == "iou_filter_threshold") {
        base.iou_filter_threshold = value.get<double>();
      } else if (key == "ece_bins") {
        base.ece_bins = value.get<std::size_t>();
      } else if (key == "tie_break") {
        auto parsed = parse_tie_break(value.get<std::string>());
        if (!parsed) throw Error(ErrorKind::InvalidConfig, "unknown tie_break");
        base.tie_break = *parsed;
      } else if (key == "rng_seed") {
        base.rng_seed = value.get<std::uint64_t>();
      } else if (key == "ranking_domain") {
        auto parsed = parse_ranking_domain(value.get<std::string>());
        if (!parsed) throw Error(ErrorKind::InvalidConfig, "unknown ranking_domain");
        base.ranking_domain = *parsed;
      } else if (key == "measures") {
        base.measures.clear();
        for (const auto& m : value) {
          auto parsed = parse_measure(m.get<std::string>());
          if (!parsed) throw Error(ErrorKind::InvalidConfig, "unknown measure");
          base.measures.push_back(*parsed);
        }
      } else if (key == "per_frame") {
        base.per_frame = value.get<bool>();
      } else {
        throw Error(ErrorKind::InvalidConfig, "unknown config key '" + key + "'");
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::InvalidConfig, std::string("malformed config: ") + e.what());
  }
  base.validate();
  return base;
}

Manifest read_manifest(const fs::path& path) {
  json j;
  {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::IoFailure, "cannot open manifest " + path.string());
    try {
      in >> j;
    } catch (const json::exception& e) {
      throw Error(ErrorKind::ShapeMismatch, "manifest is not valid JSON: " + std::string(e.what()));
    }
  }
  try {
    ClassCatalog catalog(j.at("classes").get<std::vector<std::string>>(),
                         j.value("ignore_index", kDefaultIgnoreIndex));
    Manifest m{path.parent_path(), std::move(catalog), {}, j.value("config", json::object())};
    std::set<std::string> seen;
    for (const auto& f : j.at("frames")) {
      FrameEntry e;
      e.id = f.at("id").get<std::string>();
      if (!seen.insert(e.id).second) throw Error(ErrorKind::ShapeMismatch, "duplicate frame id '" + e.id + "'");
      if (f.contains("logits")) {
        e.kind = FrameKind::Logits;
        e.prediction_path = f.at("logits").get<std::string>();
      } else {
        e.prediction_path = f.at("probabilities").get<std::string>();
      }
      e.labels_path = f.at("labels").get<std::string>();
      if (f.contains("stddev")) e.stddev_path = f.at("stddev").get<std::string>();
      if (f.contains("samples")) e.samples = f.at("samples").get<std::size_t>();
      m.frames.push_back(std::move(e));
    }
    config_from_json(m.config_overrides);
    return m;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ShapeMismatch, "malformed manifest: " + std::string(e.what()));
  }
}

void write_manifest(const Manifest& manifest, const fs::path& path) {
  json frames = json::array();
  for (const auto& e : manifest.frames) {
    json f{{"id", e.id}, {"labels", e.labels_path.generic_string()}};
    f[e.kind == FrameKind::Logits ? "logits" : "probabilities"] = e.prediction_path.generic_string();
    if (e.stddev_path) f["stddev"] = e.stddev_path->generic_string();
    if (e.samples) f["samples"] = *e.samples;
    frames.push_back(std::move(f));
  }
  json j{{"format", "ause-manifest/1"},
         {"classes", manifest.catalog.names()},
         {"ignore_index", manifest.catalog.ignore_index()},
         {"frames", frames},
         {"config", manifest.config_overrides}};
  const std::string text = j.dump(2) + "\n";
  write_file_atomic(path, text);
}

// ---------------------------------------------------------------------------
// Frames

namespace {

fs::path resolve(const fs::path& base, const fs::path& p) {
  return p.is_absolute() || base.empty() ? p : base / p;
}

ProbabilityStack stack_from_container(const TensorContainer& t, const std::string& id) {
  std::size_t s = 1, n = 0, k = 0;
  if (t.dims.size() == 3) {
    s = t.dims[0];
    n = t.dims[1];
    k = t.dims[2];
  } else if (t.dims.size() == 2) {
    n = t.dims[0];
    k = t.dims[1];
  } else {
    throw Error(ErrorKind::ShapeMismatch, id + ": probabilities must be rank 2 or 3");
  }
  if (t.dtype == DType::Float32) return ProbabilityStack(s, n, k, t.to_floats());
  if (t.dtype != DType::UInt16) {
    throw Error(ErrorKind::ShapeMismatch, id + ": probabilities must be f32 or u16");
  }
  const auto raw = t.to_unsigned();
  std::vector<float> values(raw.size());
  for (std::size_t row = 0; row < s * n; ++row) {
    double sum = 0.0;
    for (std::size_t c = 0; c < k; ++c) sum += raw[row * k + c] / 65535.0;
    if (sum <= 0.0) {
      throw Error(ErrorKind::NotADistribution, id + ": all-zero quantized row", row % std::max<std::size_t>(n, 1));
    }
    for (std::size_t c = 0; c < k; ++c) {
      values[row * k + c] = static_cast<float>(raw[row * k + c] / 65535.0 / sum);
    }
  }
  return ProbabilityStack(s, n, k, std::move(values));
}

}  // namespace

LoadedFrame load_frame(const FrameEntry& entry, const ClassCatalog& catalog, const fs::path& base_dir) {
  try {
    const auto pred_t = read_tensor(resolve(base_dir, entry.prediction_path));
    const auto label_t = read_tensor(resolve(base_dir, entry.labels_path));

    if (label_t.dims.size() != 1 || label_t.dtype == DType::Float32) {
      throw Error(ErrorKind::ShapeMismatch, "labels must be a rank-1 u8 or u16 tensor");
    }
    const auto raw_labels = label_t.to_unsigned();
    LabelArray labels(std::vector<ClassIndex>(raw_labels.begin(), raw_labels.end()));

    LoadedFrame frame{entry.id, ProbabilityStack{}, {}, pred_t.checksum(), label_t.checksum()};
    std::size_t points = 0;

    if (entry.kind == FrameKind::Logits) {
      if (pred_t.dims.size() != 2 || pred_t.dtype != DType::Float32) {
        throw Error(ErrorKind::ShapeMismatch, "logits must be a rank-2 f32 tensor");
      }
      std::optional<std::vector<float>> stddev;
      if (entry.stddev_path) {
        const auto sd_t = read_tensor(resolve(base_dir, *entry.stddev_path));
        if (sd_t.dims != pred_t.dims || sd_t.dtype != DType::Float32) {
          throw Error(ErrorKind::ShapeMismatch, "stddev tensor shape differs from logits");
        }
        stddev = sd_t.to_floats();
        frame.prediction_digest = hash_key({pred_t.checksum(), sd_t.checksum()});
      }
      points = pred_t.dims[0];
      if (pred_t.dims[1] != catalog.k()) {
        throw Error(ErrorKind::DimensionMismatch, "logits have " + std::to_string(pred_t.dims[1]) +
                                                      " classes, catalog has " + std::to_string(catalog.k()));
      }
      frame.logit_samples = entry.samples.value_or(kDefaultLogitSamples);
      if (frame.logit_samples < 1) throw Error(ErrorKind::ShapeMismatch, "samples must be >= 1");
      frame.prediction = LogitTensor(pred_t.dims[0], pred_t.dims[1], pred_t.to_floats(), std::move(stddev));
    } else {
      auto stack = stack_from_container(pred_t, entry.id);
      if (entry.samples && *entry.samples != stack.samples()) {
        throw Error(ErrorKind::ShapeMismatch, "manifest declares " + std::to_string(*entry.samples) +
                                                  " samples, file holds " + std::to_string(stack.samples()));
      }
      points = stack.points();
      check_probabilities(stack, catalog.k());
      frame.prediction = std::move(stack);
    }

    if (labels.size() != points) {
      throw Error(ErrorKind::ShapeMismatch, "label file holds " + std::to_string(labels.size()) +
                                                " points, prediction holds " + std::to_string(points));
    }
    if (points == 0) throw Error(ErrorKind::DimensionMismatch, "frame has no points");
    check_labels(labels, catalog);
    frame.labels = std::move(labels);
    return frame;
  } catch (const Error& e) {
    throw Error(e.kind(), "frame '" + entry.id + "': " + e.what(), e.index());
  }
}

}  // namespace ause::io
