#pragma once

// Binary policy checkpoints.
//
//   "SILGPO1" magic, u32 version,
//   u32 length + text header (key=value lines: architecture, hyperparameters),
//   u32 array count, then per array:
//     u32 name length + name, u32 rank, u64 dims[rank], f64 data (row-major).
//
// All integers and floats are little-endian.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "edgeorch/policy.hpp"
#include "edgeorch/sil_gpo.hpp"

namespace edgeorch {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedArray {
  std::string name;
  std::vector<std::uint64_t> shape;
  std::vector<double> data;
};

struct Checkpoint {
  nn::ArchConfig arch;
  Hyperparams hp;
  std::vector<NamedArray> arrays;
};

Checkpoint make_checkpoint(const nn::ArchConfig& arch, const Hyperparams& hp,
                           const std::vector<const nn::ParamStore*>& stores);

std::string encode_checkpoint(const Checkpoint& ckpt);
// Throws CheckpointError on bad magic, version, truncation or trailing bytes.
Checkpoint decode_checkpoint(const std::string& bytes);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Copies arrays into the stores. Everything is checked before anything is
// written: a different architecture, a missing name or a shape mismatch
// throws CheckpointError and leaves the stores untouched.
void apply_checkpoint(const Checkpoint& ckpt, const nn::ArchConfig& arch,
                      const std::vector<nn::ParamStore*>& stores);

void save_trainer(SilGpoTrainer& trainer, const std::filesystem::path& path);
void restore_trainer(SilGpoTrainer& trainer, const Checkpoint& ckpt);

}  // namespace edgeorch
