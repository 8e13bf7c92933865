// Copyright 2026 The tilebatch Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

namespace tilebatch {

inline constexpr unsigned kDefaultWarpSize = 32;
inline constexpr unsigned kMaxWarpSize = 64;

/// One tiling strategy (task type). Ids in a catalog run 1..K.
struct TilingStrategy {
  int id = 0;
  std::uint32_t tile_m = 0;
  std::uint32_t tile_n = 0;

  friend bool operator==(const TilingStrategy&, const TilingStrategy&) = default;
};

/// Ordered set of tiling strategies with contiguous ids 1..K.
class StrategyCatalog {
 public:
  StrategyCatalog() = default;
  /// Throws ConfigError unless ids are unique, contiguous from 1 and tiles are non-zero.
  explicit StrategyCatalog(std::vector<TilingStrategy> strategies);

  /// Two strategies: 16x64 tiles for small row counts, 128x128 otherwise.
  static StrategyCatalog moe_default();

  const TilingStrategy& at(int id) const;
  bool contains(int id) const noexcept {
    return id >= 1 && static_cast<std::size_t>(id) <= strategies_.size();
  }
  std::size_t size() const noexcept { return strategies_.size(); }
  std::span<const TilingStrategy> strategies() const noexcept { return strategies_; }

 private:
  std::vector<TilingStrategy> strategies_;
};

struct GemmShape {
  std::uint64_t m = 0;  // rows; 0 marks an empty task
  std::uint64_t n = 1;
  std::uint64_t k = 1;

  friend bool operator==(const GemmShape&, const GemmShape&) = default;
};

inline constexpr std::size_t kNoHandle = std::numeric_limits<std::size_t>::max();

/// Handles into whatever buffers the registered task functions operate on.
struct TaskParams {
  std::size_t weight_ref = kNoHandle;
  std::size_t token_index_array_ref = kNoHandle;
  std::size_t output_ref = kNoHandle;

  friend bool operator==(const TaskParams&, const TaskParams&) = default;
};

struct Task {
  std::uint32_t index = 0;  // 1-based position in its batch
  int kind = 0;             // strategy id
  GemmShape shape;
  TaskParams params;
};

struct Batch {
  std::vector<Task> tasks;
  unsigned warp_size = kDefaultWarpSize;
};

bool is_valid_warp_size(unsigned warp_size) noexcept;

/// Throws ConfigError if indices are not 1..N, a kind is unknown, n or k is zero,
/// or the warp size is not a power of two in [1, 64].
void validate_batch(const Batch& batch, const StrategyCatalog& catalog);

/// Tiles needed to cover the m x n output of a task.
std::uint64_t tile_count(const GemmShape& shape, const TilingStrategy& strategy) noexcept;
std::uint64_t tile_count(const Task& task, const StrategyCatalog& catalog);

/// Output rectangle written by tile `tile` of a task, clipped to the matrix bounds.
/// Tiles are enumerated row-major: tile = row_tile * col_tiles + col_tile.
struct TileRect {
  std::uint64_t row_begin = 0;
  std::uint64_t row_end = 0;
  std::uint64_t col_begin = 0;
  std::uint64_t col_end = 0;

  std::uint64_t rows() const noexcept { return row_end - row_begin; }
  std::uint64_t cols() const noexcept { return col_end - col_begin; }
  friend bool operator==(const TileRect&, const TileRect&) = default;
};

TileRect tile_rect(const GemmShape& shape, const TilingStrategy& strategy, std::uint64_t tile);

}  // namespace tilebatch
