#pragma once

#include <filesystem>

#include "lumiswap/model.hpp"
#include "lumiswap/training.hpp"

// A checkpoint is a directory holding manifest.json and raw little-endian
// float32 arrays (params.bin, and adam_m.bin / adam_v.bin when present).
namespace lumiswap {

inline constexpr const char* kCheckpointFormat = "lumiswap-checkpoint";
inline constexpr int kCheckpointVersion = 1;

// Written to a sibling temp directory and renamed into place. An existing
// checkpoint at `dir` is replaced.
void save_checkpoint(const TrainState& state, const std::filesystem::path& dir);
// Parameters only; no optimizer moments.
void save_model(const ModelParams& params, const std::filesystem::path& dir);

// Throws NotFoundError, FormatError naming the offending manifest field, or
// IntegrityError when an array does not match its recorded checksum.
TrainState load_checkpoint(const std::filesystem::path& dir);
// Also throws ConfigurationError when the stored architecture differs from `expected`.
TrainState load_checkpoint(const std::filesystem::path& dir, const ArchSpec& expected);
ModelParams load_model(const std::filesystem::path& dir);

std::filesystem::path checkpoint_name(const std::filesystem::path& out_dir, std::int64_t step);

}  // namespace lumiswap
