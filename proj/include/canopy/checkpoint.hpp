#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "canopy/tensor.hpp"

namespace canopy {

// Versioned binary parameter bundle: magic + schema version + a JSON meta
// blob (configs, provenance) + a named tensor table of f64 row-major
// payloads. Everything is little-endian.
struct Checkpoint {
  nlohmann::json meta = nlohmann::json::object();
  std::map<std::string, Tensor> tensors;

  void put(const std::string& name, const Tensor& t);
  const Tensor& get(const std::string& name) const;  // DataError when absent
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Positional naming for a parameter list ("prefix.0", "prefix.1", ...): save
// and load sites construct the same module code, so indices are stable and
// shape checks catch drift.
void put_params(Checkpoint& ckpt, const std::string& prefix, const std::vector<Tensor>& params);
// Copies stored values into the live parameters; ShapeError on size mismatch.
void load_params(const Checkpoint& ckpt, const std::string& prefix,
                 const std::vector<Tensor>& params);

}  // namespace canopy
