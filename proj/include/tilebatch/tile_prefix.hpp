// Copyright 2026 The tilebatch Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "tilebatch/task_model.hpp"

namespace tilebatch {

/// Block indices and prefix entries. Wide enough for 2^32 - 1 tiles per launch.
using BlockIndex = std::uint32_t;

inline constexpr BlockIndex kMaxPrefixValue = std::numeric_limits<BlockIndex>::max();

enum class PaddingMode {
  kRepeatLast,  // pad with the last logical value (= total tiles)
  kMaxValue,    // pad with kMaxPrefixValue
};

/// Inclusive prefix sums of per-task tile counts, padded to a multiple of the warp size.
///
/// For i < logical_len(), values()[i] is the number of tiles owned by tasks 0..i.
/// Padding entries never satisfy `block >= entry` for a valid block index, so a
/// warp scanning past the logical end never counts them.
class TilePrefixArray {
 public:
  TilePrefixArray() = default;

  std::span<const BlockIndex> values() const noexcept { return values_; }
  std::size_t padded_len() const noexcept { return values_.size(); }
  std::size_t logical_len() const noexcept { return logical_len_; }
  BlockIndex total_tiles() const noexcept { return logical_len_ ? values_[logical_len_ - 1] : 0; }
  unsigned warp_size() const noexcept { return warp_size_; }
  PaddingMode padding() const noexcept { return padding_; }

  BlockIndex operator[](std::size_t i) const noexcept { return values_[i]; }

  /// Tiles owned by logical task h (0-based).
  BlockIndex tiles_of(std::size_t h) const noexcept {
    return values_[h] - (h ? values_[h - 1] : 0);
  }

  /// Builds from raw tile counts. Zero counts are allowed here; callers that need
  /// the strictly increasing form go through build_tile_prefix or the non-empty variant.
  static TilePrefixArray from_counts(std::span<const std::uint64_t> counts, unsigned warp_size,
                                     PaddingMode padding = PaddingMode::kRepeatLast);

 private:
  std::vector<BlockIndex> values_;
  std::size_t logical_len_ = 0;
  unsigned warp_size_ = kDefaultWarpSize;
  PaddingMode padding_ = PaddingMode::kRepeatLast;
};

/// Strictly increasing map from non-empty task position (0-based) to real task index (1-based).
class Injection {
 public:
  Injection() = default;
  /// Throws ConfigError unless `sigma` is strictly increasing and starts at >= 1.
  explicit Injection(std::vector<std::uint32_t> sigma);

  static Injection identity(std::size_t n);

  std::uint32_t operator()(std::size_t h) const;
  std::size_t size() const noexcept { return sigma_.size(); }
  std::span<const std::uint32_t> values() const noexcept { return sigma_; }

  friend bool operator==(const Injection&, const Injection&) = default;

 private:
  std::vector<std::uint32_t> sigma_;
};

struct NonEmptyPrefix {
  TilePrefixArray prefix;
  Injection sigma;
};

/// Prefix array over every task. Throws EmptyTaskError if any task needs zero
/// tiles, EmptyBatchError on an empty task list and CapacityError on overflow.
TilePrefixArray build_tile_prefix(std::span<const Task> tasks, const StrategyCatalog& catalog,
                                  unsigned warp_size,
                                  PaddingMode padding = PaddingMode::kRepeatLast);

/// Prefix array over the non-empty tasks only, plus the injection back to real tasks.
/// Throws EmptyBatchError when every task is empty.
NonEmptyPrefix build_nonempty_tile_prefix(std::span<const Task> tasks,
                                          const StrategyCatalog& catalog, unsigned warp_size,
                                          PaddingMode padding = PaddingMode::kRepeatLast);

}  // namespace tilebatch
