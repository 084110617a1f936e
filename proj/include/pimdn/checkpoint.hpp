#pragma once

#include <filesystem>
#include <string>
#include <variant>

#include <nlohmann/json.hpp>

#include "pimdn/cfm.hpp"
#include "pimdn/config.hpp"
#include "pimdn/mdn.hpp"

namespace pimdn {

// Checkpoint JSON:
//   {"format": "pimdn-checkpoint", "version": 1, "kind": "mdn" | "cfm",
//    "architecture": {...}, "standardization": {...}, "params": [...],
//    "seed": n, "config": {resolved run config}, "training": {...}}
// Parameters are written as shortest round-trip decimals, so a reload is
// value-exact.

struct Checkpoint {
  std::variant<MdnModel, CfmModel> model;
  RunConfig config;
  nlohmann::json training = nlohmann::json::object();

  ModelKind kind() const { return model.index() == 0 ? ModelKind::mdn : ModelKind::cfm; }
  const MdnModel& mdn() const;
  const CfmModel& cfm() const;
};

nlohmann::json to_json(const Checkpoint& ckpt);
Checkpoint checkpoint_from_json(const nlohmann::json& j);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Writes `j` with two-space indentation and a trailing newline.
void write_json(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json(const std::filesystem::path& path);

}  // namespace pimdn
