// Copyright 2026 The tilebatch Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <bit>
#include <cstdint>
#include <span>

#include "tilebatch/tile_prefix.hpp"

namespace tilebatch {

/// One bit per lane; lane t is bit t.
using LaneMask = std::uint64_t;

/// Ballot: bit t of the result is set iff predicates[t] is true.
LaneMask warp_vote(std::span<const bool> predicates);

inline unsigned popcount(LaneMask mask) noexcept { return static_cast<unsigned>(std::popcount(mask)); }

/// Lockstep warp of `size` lanes. Every lane evaluates the same predicate over its
/// lane id and the results are combined with a ballot.
class WarpEmulation {
 public:
  explicit WarpEmulation(unsigned size);

  unsigned size() const noexcept { return size_; }

  template <typename LanePredicate>
  LaneMask ballot(LanePredicate&& pred) const {
    bool lanes[kMaxWarpSize] = {};
    for (unsigned t = 0; t < size_; ++t) lanes[t] = static_cast<bool>(pred(t));
    return warp_vote(std::span<const bool>(lanes, size_));
  }

 private:
  unsigned size_;
};

/// Decompressed block mapping. task_index is 0-based over the prefix array's
/// logical tasks.
struct MappingResult {
  std::uint32_t task_index = 0;
  std::uint32_t tile_index = 0;
  BlockIndex block_index = 0;

  friend bool operator==(const MappingResult&, const MappingResult&) = default;
};

/// One pass of the warp algorithm: each lane t tests block >= prefix[t], the ballot's
/// population count is the task index, and the tile index is block minus the
/// preceding prefix entry. Requires the padded array to fit in a single warp.
MappingResult map_block_single_warp(const TilePrefixArray& prefix, BlockIndex block);

/// Same algorithm looped over warp-sized chunks of the prefix array, stopping at the
/// first chunk that is not fully voted.
MappingResult map_block_chunked(const TilePrefixArray& prefix, BlockIndex block);

enum class WarpBroadcast {
  kSingleWarp,  // warp 0 computes, the others read the result
  kAllWarps,    // every warp computes independently
};

/// Mapping as seen by a whole thread block of `warps_per_block` warps. With kAllWarps
/// every warp runs the chunked algorithm and the results are checked to agree.
MappingResult map_thread_block(const TilePrefixArray& prefix, BlockIndex block,
                               unsigned warps_per_block, WarpBroadcast mode);

}  // namespace tilebatch
