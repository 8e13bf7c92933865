// Copyright 2026 The tilebatch Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "tilebatch/simt_mapping.hpp"
#include "tilebatch/task_model.hpp"
#include "tilebatch/tile_prefix.hpp"

namespace tilebatch {

/// Resources one block consumes, as reported by its task function.
struct TileDemand {
  double flops = 0.0;         // useful arithmetic on the clipped tile
  double issued_flops = 0.0;  // arithmetic on the full tile shape
  double bytes = 0.0;

  friend bool operator==(const TileDemand&, const TileDemand&) = default;
};

/// Device-function stand-in: performs tile `tile` of `task` and reports its demand
/// (or nullopt when the function has nothing to report).
using TaskFunc = std::function<std::optional<TileDemand>(std::uint32_t tile, const Task& task)>;

/// One task function per strategy id 1..K.
class TaskFuncRegistry {
 public:
  TaskFuncRegistry() = default;

  void add(int kind, TaskFunc fn);
  const TaskFunc* find(int kind) const noexcept;
  std::size_t size() const noexcept;

  /// Throws ConfigError unless there is exactly one entry for each catalog id.
  void check_covers(const StrategyCatalog& catalog) const;

 private:
  std::vector<TaskFunc> funcs_;  // slot kind - 1
};

struct DispatchRecord {
  BlockIndex block = 0;
  std::uint32_t nonempty_index = 0;  // h: position in the prefix array
  std::uint32_t task_index = 0;      // real task index, 1-based
  int kind = 0;
  std::uint32_t tile = 0;
  std::optional<TileDemand> demand;

  friend bool operator==(const DispatchRecord&, const DispatchRecord&) = default;
};

struct ExecutionTrace {
  std::vector<DispatchRecord> records;  // sorted by block

  friend bool operator==(const ExecutionTrace&, const ExecutionTrace&) = default;
};

/// Maps block -> (task, tile) over a batch with no empty tasks and runs the task's function.
DispatchRecord dispatch_block(const Batch& batch, const TilePrefixArray& prefix,
                              const TaskFuncRegistry& registry, BlockIndex block);

/// Two-stage mapping: block -> non-empty task -> real task through sigma.
DispatchRecord dispatch_block_extended(const Batch& batch, const TilePrefixArray& nonempty_prefix,
                                       const Injection& sigma, const TaskFuncRegistry& registry,
                                       BlockIndex block);

struct ExecutionPolicy {
  enum class Kind { kSequential, kParallel };
  Kind kind = Kind::kSequential;
  unsigned threads = 0;  // parallel only; 0 picks hardware concurrency

  static ExecutionPolicy sequential() { return {}; }
  static ExecutionPolicy parallel(unsigned threads = 0) { return {Kind::kParallel, threads}; }
};

/// Runs every block of a prepared plan. The returned trace is sorted by block index
/// regardless of policy. Per-block failures surface as BlockDispatchError.
ExecutionTrace launch(const Batch& batch, const NonEmptyPrefix& plan,
                      const TaskFuncRegistry& registry, const ExecutionPolicy& policy = {});

/// Builds the non-empty prefix for `batch` and launches it. Throws EmptyBatchError
/// when no task has any tiles.
ExecutionTrace launch(const Batch& batch, const StrategyCatalog& catalog,
                      const TaskFuncRegistry& registry, const ExecutionPolicy& policy = {});

}  // namespace tilebatch
