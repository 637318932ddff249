#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "wbc/ensemble.hpp"

namespace wbc::checkpoint {

/// Binary checkpoint format version. Bump whenever the byte layout changes;
/// the decoder rejects any other version outright instead of guessing.
inline constexpr std::uint32_t kFormatVersion = 1;

/// File magic identifying ensemble checkpoints.
inline constexpr std::array<std::uint8_t, 4> kMagic{'D', 'C', 'E', 'N'};

/// Serializes a trained ensemble to the on-disk byte layout: magic, version,
/// training seed, combiner, member weights, standardization stats, input
/// geometry, then per member its id, layer specs and every parameter tensor
/// as little-endian f32. The model is taken by mutable reference because
/// parameter access goes through the graphs' live parameter pointers.
std::vector<std::uint8_t> encode(ensemble::EnsembleModel& model);

/// Reconstructs a model from checkpoint bytes. The graphs are rebuilt from
/// the stored layer specs and their parameters overwritten with the stored
/// values, so predictions are bit-identical to the encoded model's. Throws
/// CheckpointError on bad magic, unknown version, truncation or any
/// structural mismatch.
ensemble::EnsembleModel decode(const std::vector<std::uint8_t>& bytes);

/// encode() + atomic file write.
void save(const std::string& path, ensemble::EnsembleModel& model);

/// Whole-file read + decode().
ensemble::EnsembleModel load(const std::string& path);

}  // namespace wbc::checkpoint
