#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "ucd/dino.hpp"
#include "ucd/nets.hpp"

namespace ucd {

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Everything a run persists: both nets and, for Config C, the self-distillation
// state.
struct Checkpoint {
  GeneratorNet generator;
  DiscriminatorNet discriminator;
  std::optional<DinoState> dino;
};

// Raw tensor table. Format: "UCDG", u32 version, u32 count, then per tensor
// u32 name length, name bytes, u32 rank, u32 dims, little-endian f64 data.
void write_tensor_file(const std::filesystem::path& path, std::span<const NamedTensor> tensors);
std::vector<NamedTensor> read_tensor_file(const std::filesystem::path& path);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
// Throws FormatError naming the offending tensor; nothing is returned on
// failure.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace ucd
