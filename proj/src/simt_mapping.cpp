// Copyright 2026 The tilebatch Authors
// SPDX-License-Identifier: Apache-2.0

#include "tilebatch/simt_mapping.hpp"

#include <stdexcept>
#include <string>

#include "tilebatch/errors.hpp"

namespace tilebatch {

namespace {

void check_block(const TilePrefixArray& prefix, BlockIndex block) {
  if (block >= prefix.total_tiles()) {
    throw MappingRangeError("block " + std::to_string(block) + " outside [0, " +
                            std::to_string(prefix.total_tiles()) + ")");
  }
}

MappingResult finish(const TilePrefixArray& prefix, BlockIndex block, std::uint32_t h) {
  const BlockIndex base = h > 0 ? prefix[h - 1] : 0;
  return {h, block - base, block};
}

}  // namespace

LaneMask warp_vote(std::span<const bool> predicates) {
  if (predicates.size() > kMaxWarpSize) {
    throw ConfigError("warp vote over " + std::to_string(predicates.size()) + " lanes");
  }
  LaneMask mask = 0;
  for (std::size_t t = 0; t < predicates.size(); ++t) {
    if (predicates[t]) mask |= LaneMask{1} << t;
  }
  return mask;
}

WarpEmulation::WarpEmulation(unsigned size) : size_(size) {
  if (!is_valid_warp_size(size)) {
    throw ConfigError("warp size " + std::to_string(size) +
                      " must be a power of two no larger than 64");
  }
}

MappingResult map_block_single_warp(const TilePrefixArray& prefix, BlockIndex block) {
  if (prefix.padded_len() != prefix.warp_size()) {
    throw ConfigError("single-warp mapping needs at most " + std::to_string(prefix.warp_size()) +
                      " tasks, got " + std::to_string(prefix.logical_len()));
  }
  check_block(prefix, block);
  const WarpEmulation warp(prefix.warp_size());
  const auto values = prefix.values();
  const LaneMask mask = warp.ballot([&](unsigned t) { return block >= values[t]; });
  return finish(prefix, block, popcount(mask));
}

MappingResult map_block_chunked(const TilePrefixArray& prefix, BlockIndex block) {
  check_block(prefix, block);
  const WarpEmulation warp(prefix.warp_size());
  const auto values = prefix.values();
  std::uint32_t h = 0;
  for (std::size_t base = 0; base < values.size(); base += warp.size()) {
    const LaneMask mask = warp.ballot([&](unsigned t) { return block >= values[base + t]; });
    const unsigned votes = popcount(mask);
    h += votes;
    if (votes < warp.size()) break;
  }
  return finish(prefix, block, h);
}

MappingResult map_thread_block(const TilePrefixArray& prefix, BlockIndex block,
                               unsigned warps_per_block, WarpBroadcast mode) {
  if (warps_per_block == 0) throw ConfigError("a thread block needs at least one warp");
  const MappingResult first = map_block_chunked(prefix, block);
  if (mode == WarpBroadcast::kAllWarps) {
    for (unsigned w = 1; w < warps_per_block; ++w) {
      if (map_block_chunked(prefix, block) != first) {
        throw std::logic_error("warps disagree on the mapping of block " + std::to_string(block));
      }
    }
  }
  return first;
}

}  // namespace tilebatch
