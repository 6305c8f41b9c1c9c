// SPDX-License-Identifier: Apache-2.0
//
// NPY v1.0 arrays, single-file checkpoints, and the synthetic velocity-map
// dataset used for desk-scale experiments.

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "einv/netgraph.hpp"

namespace einv {

class NpyError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};
class NpyBadMagicError : public NpyError {
public:
    using NpyError::NpyError;
};
class NpyUnsupportedDtypeError : public NpyError {
public:
    using NpyError::NpyError;
};
class NpyFortranOrderError : public NpyError {
public:
    using NpyError::NpyError;
};
class NpyTruncatedError : public NpyError {
public:
    using NpyError::NpyError;
};

class CheckpointError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};
class ChecksumError : public CheckpointError {
public:
    using CheckpointError::CheckpointError;
};

enum class NpyElement { f4, f8 };

/// Reads a little-endian '<f4' or '<f8' C-order array; '<f8' values are
/// rounded to nearest float.
Tensor read_npy(const std::filesystem::path& path);

/// Writes a v1.0 file whose header is space-padded so that magic + header is a
/// multiple of 64 bytes.
void write_npy(const Tensor& tensor, const std::filesystem::path& path, NpyElement element = NpyElement::f4);

/// The exact header block write_npy emits (magic through trailing newline).
std::string npy_header(const Shape& shape, NpyElement element);

inline constexpr std::uint16_t kCheckpointVersion = 1;

/// Layout: "EINV", u16 version, u32 manifest length, UTF-8 JSON manifest,
/// little-endian f4 blobs in manifest order, u32 CRC-32 of all prior bytes.
void save_checkpoint(const NetworkGraph& net, const std::filesystem::path& path);
NetworkGraph load_checkpoint(const std::filesystem::path& path);

std::string encode_checkpoint(const NetworkGraph& net);
NetworkGraph decode_checkpoint(const std::string& bytes);

std::uint32_t crc32(const void* data, std::size_t size);

struct SyntheticTask {
    std::uint64_t seed = 0;
    std::size_t map_h = 16, map_w = 16;
    std::size_t min_layers = 2, max_layers = 5;
    double v_min = 1500.0, v_max = 4500.0;
    double max_tilt = 0.25;  // interface slope in rows per column, drawn in [-max, max]
    std::size_t channels = 3, time = 64, receivers = 16;
    double gain = 1.0;
    double noise = 0.01;

    void validate() const;
    nlohmann::json to_json() const;
    static SyntheticTask from_json(const nlohmann::json& j);
};

struct Dataset {
    Tensor inputs;   // (n, channels, time, receivers)
    Tensor targets;  // (n, 1, map_h, map_w)

    std::size_t size() const { return inputs.rank() == 0 ? 0 : inputs.dim(0); }
    Dataset slice(std::size_t begin, std::size_t end) const;
};

/// Pairs [first, first + count) of the task. Pair k depends only on (seed, k).
Dataset gen_synthetic(const SyntheticTask& task, std::size_t count, std::size_t first = 0);

}  // namespace einv
