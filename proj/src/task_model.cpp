// Copyright 2026 The tilebatch Authors
// SPDX-License-Identifier: Apache-2.0

#include "tilebatch/task_model.hpp"

#include <algorithm>
#include <bit>
#include <string>

#include "tilebatch/errors.hpp"

namespace tilebatch {

namespace {

std::uint64_t ceil_div(std::uint64_t a, std::uint64_t b) noexcept { return a / b + (a % b != 0); }

}  // namespace

StrategyCatalog::StrategyCatalog(std::vector<TilingStrategy> strategies) {
  std::vector<TilingStrategy> by_id(strategies.size());
  std::vector<bool> seen(strategies.size(), false);
  for (const auto& s : strategies) {
    if (s.id < 1 || static_cast<std::size_t>(s.id) > strategies.size()) {
      throw ConfigError("strategy id " + std::to_string(s.id) + " outside 1.." +
                        std::to_string(strategies.size()));
    }
    if (seen[s.id - 1]) throw ConfigError("duplicate strategy id " + std::to_string(s.id));
    if (s.tile_m == 0 || s.tile_n == 0) {
      throw ConfigError("strategy " + std::to_string(s.id) + " has a zero tile extent");
    }
    seen[s.id - 1] = true;
    by_id[s.id - 1] = s;
  }
  strategies_ = std::move(by_id);
}

StrategyCatalog StrategyCatalog::moe_default() {
  return StrategyCatalog({{1, 16, 64}, {2, 128, 128}});
}

const TilingStrategy& StrategyCatalog::at(int id) const {
  if (!contains(id)) throw ConfigError("unknown strategy id " + std::to_string(id));
  return strategies_[id - 1];
}

bool is_valid_warp_size(unsigned warp_size) noexcept {
  return warp_size >= 1 && warp_size <= kMaxWarpSize && std::has_single_bit(warp_size);
}

void validate_batch(const Batch& batch, const StrategyCatalog& catalog) {
  if (!is_valid_warp_size(batch.warp_size)) {
    throw ConfigError("warp size " + std::to_string(batch.warp_size) +
                      " must be a power of two no larger than 64");
  }
  for (std::size_t i = 0; i < batch.tasks.size(); ++i) {
    const Task& t = batch.tasks[i];
    if (t.index != i + 1) {
      throw ConfigError("task at position " + std::to_string(i) + " has index " +
                        std::to_string(t.index));
    }
    if (!catalog.contains(t.kind)) {
      throw ConfigError("task " + std::to_string(t.index) + " has unknown kind " +
                        std::to_string(t.kind));
    }
    if (t.shape.n == 0 || t.shape.k == 0) {
      throw ConfigError("task " + std::to_string(t.index) + " has n or k equal to zero");
    }
  }
}

std::uint64_t tile_count(const GemmShape& shape, const TilingStrategy& strategy) noexcept {
  return ceil_div(shape.m, strategy.tile_m) * ceil_div(shape.n, strategy.tile_n);
}

std::uint64_t tile_count(const Task& task, const StrategyCatalog& catalog) {
  return tile_count(task.shape, catalog.at(task.kind));
}

TileRect tile_rect(const GemmShape& shape, const TilingStrategy& strategy, std::uint64_t tile) {
  const std::uint64_t col_tiles = ceil_div(shape.n, strategy.tile_n);
  if (tile >= tile_count(shape, strategy)) {
    throw MappingRangeError("tile " + std::to_string(tile) + " out of range");
  }
  const std::uint64_t row_tile = tile / col_tiles;
  const std::uint64_t col_tile = tile % col_tiles;
  TileRect r;
  r.row_begin = row_tile * strategy.tile_m;
  r.row_end = std::min<std::uint64_t>(r.row_begin + strategy.tile_m, shape.m);
  r.col_begin = col_tile * strategy.tile_n;
  r.col_end = std::min<std::uint64_t>(r.col_begin + strategy.tile_n, shape.n);
  return r;
}

}  // namespace tilebatch
