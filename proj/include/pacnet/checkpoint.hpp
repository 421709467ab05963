#pragma once

#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "pacnet/common.hpp"
#include "pacnet/optimizer.hpp"
#include "pacnet/tensor.hpp"
#include "pacnet/tensor_io.hpp"

namespace pacnet {

// A checkpoint is a directory: manifest.json plus one PCT1 file per named
// tensor. The manifest records the config block, the training step, and per
// tensor the file name and a content hash, so mismatched or corrupted
// checkpoints are rejected before use.

inline std::string tensor_content_hash(const Tensor& t) {
  const std::string blob = serialize_tensor(t);
  return hex64(fnv1a64(blob.data(), blob.size()));
}

struct Checkpoint {
  nlohmann::json config;
  std::int64_t step = 0;
  std::map<std::string, Tensor> tensors;  // ordered by name

  void put(const std::string& name, const Tensor& t) { tensors[name] = t; }

  const Tensor& get(const std::string& name) const {
    auto it = tensors.find(name);
    require(it != tensors.end(), "checkpoint missing tensor: ", name);
    return it->second;
  }
};

inline std::string sanitize_tensor_file_name(const std::string& name) {
  std::string out;
  for (char ch : name)
    out.push_back((std::isalnum(static_cast<unsigned char>(ch)) != 0 ||
                   ch == '.' || ch == '-' || ch == '_')
                      ? ch
                      : '_');
  return out + ".pct1";
}

inline void save_checkpoint(const Checkpoint& cp,
                            const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json manifest;
  manifest["format"] = "pacnet-checkpoint-v1";
  manifest["step"] = cp.step;
  manifest["config"] = cp.config;
  nlohmann::json files = nlohmann::json::object();
  for (const auto& [name, tensor] : cp.tensors) {
    const std::string file = sanitize_tensor_file_name(name);
    write_tensor_file(dir / file, tensor);
    files[name] = {{"file", file}, {"hash", tensor_content_hash(tensor)}};
  }
  manifest["tensors"] = files;
  std::ofstream out(dir / "manifest.json");
  require(out.good(), "cannot write manifest in ", dir.string());
  out << manifest.dump(2) << "\n";
  out.flush();
  require(out.good(), "manifest write failed in ", dir.string());
}

inline Checkpoint load_checkpoint(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "manifest.json";
  std::ifstream in(manifest_path);
  require(in.good(), "cannot open checkpoint manifest: ",
          manifest_path.string());
  nlohmann::json manifest;
  try {
    in >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(cat("malformed manifest ", manifest_path.string(), ": ",
                        e.what()));
  }
  require(manifest.value("format", "") == "pacnet-checkpoint-v1",
          manifest_path.string(), ": unknown checkpoint format");
  Checkpoint cp;
  cp.step = manifest.value("step", std::int64_t{0});
  cp.config = manifest.value("config", nlohmann::json::object());
  require(manifest.contains("tensors"), manifest_path.string(),
          ": manifest lists no tensors");
  for (const auto& [name, entry] : manifest["tensors"].items()) {
    const std::string file = entry.value("file", "");
    require(!file.empty(), "manifest entry ", name, " has no file");
    Tensor t = read_tensor_file(dir / file);
    const std::string expect = entry.value("hash", "");
    const std::string actual = tensor_content_hash(t);
    require(expect == actual, "checkpoint tensor ", name, " in ",
            (dir / file).string(), " is corrupted (hash ", actual,
            ", manifest says ", expect, ")");
    cp.tensors[name] = std::move(t);
  }
  return cp;
}

// ParamBank round-trip. Loading requires an exact name/shape match so a
// checkpoint from a different architecture is rejected up front.
inline void bank_to_checkpoint(const ParamBank& bank, Checkpoint& cp) {
  for (std::size_t i = 0; i < bank.size(); ++i)
    cp.put(bank.entry(i).name, bank.entry(i).value);
}

inline void bank_from_checkpoint(ParamBank& bank, const Checkpoint& cp) {
  for (std::size_t i = 0; i < bank.size(); ++i) {
    Param& p = bank.entry(i);
    const Tensor& t = cp.get(p.name);
    require(t.shape() == p.value.shape(), "checkpoint tensor ", p.name,
            " has shape ", t.shape_string(), ", model expects ",
            p.value.shape_string());
    p.value = t;
  }
}

}  // namespace pacnet
