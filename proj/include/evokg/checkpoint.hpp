#pragma once

// Versioned binary archive of model parameters and, optionally, the
// recurrent state and history tables. Byte-for-byte deterministic.

#include <filesystem>
#include <optional>
#include <string>

#include "evokg/model.hpp"

namespace evokg {

inline constexpr const char* kCheckpointMagic = "EVOKG-CHECKPOINT v1";

std::string serialize_checkpoint(const Model& model, const RecurrentState* state = nullptr);
void save_checkpoint(const std::filesystem::path& path, const Model& model,
                     const RecurrentState* state = nullptr);

struct LoadedCheckpoint {
  Model model;
  std::optional<RecurrentState> state;
};

// Throws ValidationError on a malformed or incompatible archive.
LoadedCheckpoint deserialize_checkpoint(const std::string& bytes);
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace evokg
