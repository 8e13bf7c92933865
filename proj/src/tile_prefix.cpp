// Copyright 2026 The tilebatch Authors
// SPDX-License-Identifier: Apache-2.0

#include "tilebatch/tile_prefix.hpp"

#include <numeric>
#include <string>

#include "tilebatch/errors.hpp"

namespace tilebatch {

TilePrefixArray TilePrefixArray::from_counts(std::span<const std::uint64_t> counts,
                                             unsigned warp_size, PaddingMode padding) {
  if (!is_valid_warp_size(warp_size)) {
    throw ConfigError("warp size " + std::to_string(warp_size) +
                      " must be a power of two no larger than 64");
  }
  if (counts.empty()) throw EmptyBatchError("cannot build a prefix array over zero tasks");

  TilePrefixArray out;
  out.warp_size_ = warp_size;
  out.padding_ = padding;
  out.logical_len_ = counts.size();
  const std::size_t padded = (counts.size() + warp_size - 1) / warp_size * warp_size;
  out.values_.reserve(padded);

  std::uint64_t running = 0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    running += counts[i];
    // The max value is reserved for padding, so a real total must stay below it.
    if (counts[i] >= kMaxPrefixValue || running >= kMaxPrefixValue) {
      throw CapacityError("tile prefix overflows the block index type at task " +
                          std::to_string(i + 1));
    }
    out.values_.push_back(static_cast<BlockIndex>(running));
  }
  const BlockIndex pad =
      padding == PaddingMode::kRepeatLast ? out.values_.back() : kMaxPrefixValue;
  out.values_.resize(padded, pad);
  return out;
}

Injection::Injection(std::vector<std::uint32_t> sigma) : sigma_(std::move(sigma)) {
  for (std::size_t i = 0; i < sigma_.size(); ++i) {
    if (sigma_[i] == 0) throw ConfigError("injection values are 1-based task indices");
    if (i > 0 && sigma_[i] <= sigma_[i - 1]) {
      throw ConfigError("injection must be strictly increasing");
    }
  }
}

Injection Injection::identity(std::size_t n) {
  std::vector<std::uint32_t> s(n);
  std::iota(s.begin(), s.end(), 1u);
  return Injection(std::move(s));
}

std::uint32_t Injection::operator()(std::size_t h) const {
  if (h >= sigma_.size()) {
    throw MappingRangeError("non-empty task " + std::to_string(h) + " outside injection of size " +
                            std::to_string(sigma_.size()));
  }
  return sigma_[h];
}

TilePrefixArray build_tile_prefix(std::span<const Task> tasks, const StrategyCatalog& catalog,
                                  unsigned warp_size, PaddingMode padding) {
  std::vector<std::uint64_t> counts;
  counts.reserve(tasks.size());
  for (const Task& t : tasks) {
    const std::uint64_t c = tile_count(t, catalog);
    if (c == 0) {
      throw EmptyTaskError(t.index, "task " + std::to_string(t.index) +
                                        " needs zero tiles; use the non-empty prefix");
    }
    counts.push_back(c);
  }
  return TilePrefixArray::from_counts(counts, warp_size, padding);
}

NonEmptyPrefix build_nonempty_tile_prefix(std::span<const Task> tasks,
                                          const StrategyCatalog& catalog, unsigned warp_size,
                                          PaddingMode padding) {
  std::vector<std::uint64_t> counts;
  std::vector<std::uint32_t> sigma;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    const std::uint64_t c = tile_count(tasks[i], catalog);
    if (c == 0) continue;
    counts.push_back(c);
    sigma.push_back(static_cast<std::uint32_t>(i + 1));
  }
  if (counts.empty()) throw EmptyBatchError("every task in the batch is empty");
  return {TilePrefixArray::from_counts(counts, warp_size, padding), Injection(std::move(sigma))};
}

}  // namespace tilebatch
