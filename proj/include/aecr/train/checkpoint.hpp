#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "aecr/core/errors.hpp"
#include "aecr/nn/param.hpp"

namespace aecr::train {

static_assert(std::endian::native == std::endian::little,
              "checkpoint payloads are written in host order");

/// Named f32 tensor as stored in a checkpoint.
struct TensorRecord {
  std::vector<std::int64_t> shape;
  std::vector<float> data;

  std::size_t numel() const {
    std::size_t n = 1;
    for (auto d : shape) n *= static_cast<std::size_t>(d);
    return n;
  }
  bool operator==(const TensorRecord&) const = default;
};

/// Container layout (all integers little-endian):
///   [0,4)   magic "AECR"
///   [4,8)   u32 version (= 1)
///   [8,16)  u64 header length L
///   [16,16+L) UTF-8 JSON: name -> {dtype, shape, offset, nbytes}, plus "__metadata__"
///   then the raw tensor payloads, concatenated in lexicographic name order.
struct Checkpoint {
  static constexpr char kMagic[4] = {'A', 'E', 'C', 'R'};
  static constexpr std::uint32_t kVersion = 1;
  static constexpr const char* kMetadataKey = "__metadata__";

  std::map<std::string, TensorRecord> tensors;
  nlohmann::json metadata = nlohmann::json::object();

  bool contains(const std::string& name) const { return tensors.count(name) != 0; }

  const TensorRecord& at(const std::string& name) const {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw FormatError("checkpoint is missing tensor '" + name + "'");
    return it->second;
  }

  template <typename T>
  void put(const std::string& name, const nn::Param<T>& p) {
    put(name, p.dims, p.value.vec());
  }

  template <typename T, typename Alloc = std::allocator<T>>
  void put(const std::string& name, const std::vector<int>& dims, const std::vector<T, Alloc>& values) {
    if (name == kMetadataKey) throw FormatError("reserved tensor name '" + name + "'");
    TensorRecord rec;
    rec.shape.assign(dims.begin(), dims.end());
    rec.data.reserve(values.size());
    for (T v : values) rec.data.push_back(static_cast<float>(v));
    if (rec.numel() != rec.data.size()) {
      throw FormatError("tensor '" + name + "' shape does not match its element count");
    }
    tensors[name] = std::move(rec);
  }

  /// Copies the named record into `p`; FormatError names the tensor on mismatch.
  template <typename T>
  void get(const std::string& name, nn::Param<T>& p) const {
    const TensorRecord& rec = at(name);
    std::vector<std::int64_t> want(p.dims.begin(), p.dims.end());
    if (rec.shape != want) {
      throw FormatError("shape mismatch for tensor '" + name + "': file has " +
                        shape_str(rec.shape) + ", expected " + shape_str(want));
    }
    for (std::size_t i = 0; i < rec.data.size(); ++i) p.value[i] = static_cast<T>(rec.data[i]);
  }

  static std::string shape_str(const std::vector<std::int64_t>& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::to_string(s[i]);
    return out + "]";
  }

  bool operator==(const Checkpoint&) const = default;
};

/// Adds every parameter of `module` to the checkpoint under its visit name.
template <typename Module>
void store_params(Checkpoint& ckpt, Module& module, const std::string& prefix = {}) {
  auto put = [&](const std::string& name, auto& p) { ckpt.put(name, p); };
  module.visit(prefix, put);
}

/// Loads every parameter of `module`; throws FormatError naming the first
/// missing or mis-shaped tensor in module order.
template <typename Module>
void load_params(const Checkpoint& ckpt, Module& module, const std::string& prefix = {}) {
  auto get = [&](const std::string& name, auto& p) { ckpt.get(name, p); };
  module.visit(prefix, get);
}

inline std::string serialize(const Checkpoint& ckpt) {
  nlohmann::json header = nlohmann::json::object();
  std::uint64_t offset = 0;
  for (const auto& [name, rec] : ckpt.tensors) {
    const std::uint64_t nbytes = rec.data.size() * sizeof(float);
    header[name] = {{"dtype", "f32"}, {"shape", rec.shape}, {"offset", offset}, {"nbytes", nbytes}};
    offset += nbytes;
  }
  header[Checkpoint::kMetadataKey] = ckpt.metadata;
  const std::string text = header.dump();

  std::string out;
  out.reserve(16 + text.size() + offset);
  out.append(Checkpoint::kMagic, 4);
  const std::uint32_t version = Checkpoint::kVersion;
  const std::uint64_t len = text.size();
  out.append(reinterpret_cast<const char*>(&version), 4);
  out.append(reinterpret_cast<const char*>(&len), 8);
  out += text;
  for (const auto& [name, rec] : ckpt.tensors) {
    out.append(reinterpret_cast<const char*>(rec.data.data()), rec.data.size() * sizeof(float));
  }
  return out;
}

inline Checkpoint deserialize(const std::string& bytes) {
  if (bytes.size() < 16) throw FormatError("checkpoint truncated: missing preamble");
  if (std::memcmp(bytes.data(), Checkpoint::kMagic, 4) != 0) {
    throw FormatError("bad checkpoint magic '" + bytes.substr(0, 4) + "'");
  }
  std::uint32_t version = 0;
  std::uint64_t len = 0;
  std::memcpy(&version, bytes.data() + 4, 4);
  std::memcpy(&len, bytes.data() + 8, 8);
  if (version != Checkpoint::kVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  if (len > bytes.size() - 16) throw FormatError("checkpoint truncated: header");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(len));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint header is not valid JSON: ") + e.what());
  }
  if (!header.is_object()) throw FormatError("checkpoint header must be a JSON object");

  const std::size_t payload_start = 16 + len;
  const std::size_t payload_size = bytes.size() - payload_start;
  Checkpoint ckpt;
  for (const auto& [name, entry] : header.items()) {
    if (name == Checkpoint::kMetadataKey) {
      ckpt.metadata = entry;
      continue;
    }
    try {
      if (entry.at("dtype").get<std::string>() != "f32") {
        throw FormatError("tensor '" + name + "' has unsupported dtype");
      }
      TensorRecord rec;
      rec.shape = entry.at("shape").get<std::vector<std::int64_t>>();
      for (auto d : rec.shape) {
        if (d < 0) throw FormatError("tensor '" + name + "' has a negative dimension");
      }
      const auto offset = entry.at("offset").get<std::uint64_t>();
      const auto nbytes = entry.at("nbytes").get<std::uint64_t>();
      if (nbytes != rec.numel() * sizeof(float)) {
        throw FormatError("tensor '" + name + "' nbytes does not match its shape");
      }
      if (offset > payload_size || nbytes > payload_size - offset) {
        throw FormatError("checkpoint truncated: tensor '" + name + "'");
      }
      rec.data.resize(rec.numel());
      std::memcpy(rec.data.data(), bytes.data() + payload_start + offset, nbytes);
      ckpt.tensors.emplace(name, std::move(rec));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("malformed entry for tensor '" + name + "': " + e.what());
    }
  }
  return ckpt;
}

inline void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const std::string bytes = serialize(ckpt);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write checkpoint " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw FormatError("failed writing checkpoint " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

}  // namespace aecr::train
