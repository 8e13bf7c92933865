// Copyright 2026 The tilebatch Authors
// SPDX-License-Identifier: Apache-2.0

#include "tilebatch/dispatch.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <string>
#include <thread>

#include "tilebatch/errors.hpp"

namespace tilebatch {

void TaskFuncRegistry::add(int kind, TaskFunc fn) {
  if (kind < 1) throw ConfigError("task function kinds start at 1");
  if (!fn) throw ConfigError("empty task function for kind " + std::to_string(kind));
  if (funcs_.size() < static_cast<std::size_t>(kind)) funcs_.resize(kind);
  if (funcs_[kind - 1]) throw ConfigError("kind " + std::to_string(kind) + " registered twice");
  funcs_[kind - 1] = std::move(fn);
}

const TaskFunc* TaskFuncRegistry::find(int kind) const noexcept {
  if (kind < 1 || static_cast<std::size_t>(kind) > funcs_.size() || !funcs_[kind - 1]) {
    return nullptr;
  }
  return &funcs_[kind - 1];
}

std::size_t TaskFuncRegistry::size() const noexcept {
  return static_cast<std::size_t>(
      std::count_if(funcs_.begin(), funcs_.end(), [](const TaskFunc& f) { return bool(f); }));
}

void TaskFuncRegistry::check_covers(const StrategyCatalog& catalog) const {
  if (funcs_.size() > catalog.size()) {
    throw ConfigError("registry has kinds beyond the catalog's " + std::to_string(catalog.size()));
  }
  for (const auto& s : catalog.strategies()) {
    if (!find(s.id)) throw ConfigError("no task function for kind " + std::to_string(s.id));
  }
}

namespace {

DispatchRecord invoke(const Batch& batch, const TaskFuncRegistry& registry,
                      const MappingResult& m, std::uint32_t real_index) {
  if (real_index == 0 || real_index > batch.tasks.size()) {
    throw DispatchError("mapped task " + std::to_string(real_index) + " not in batch");
  }
  const Task& task = batch.tasks[real_index - 1];
  const TaskFunc* fn = registry.find(task.kind);
  if (!fn) throw DispatchError("no task function registered for kind " + std::to_string(task.kind));

  DispatchRecord rec;
  rec.block = m.block_index;
  rec.nonempty_index = m.task_index;
  rec.task_index = real_index;
  rec.kind = task.kind;
  rec.tile = m.tile_index;
  rec.demand = (*fn)(m.tile_index, task);
  return rec;
}

}  // namespace

DispatchRecord dispatch_block(const Batch& batch, const TilePrefixArray& prefix,
                              const TaskFuncRegistry& registry, BlockIndex block) {
  const MappingResult m = map_block_chunked(prefix, block);
  return invoke(batch, registry, m, m.task_index + 1);
}

DispatchRecord dispatch_block_extended(const Batch& batch, const TilePrefixArray& nonempty_prefix,
                                       const Injection& sigma, const TaskFuncRegistry& registry,
                                       BlockIndex block) {
  const MappingResult m = map_block_chunked(nonempty_prefix, block);
  return invoke(batch, registry, m, sigma(m.task_index));
}

ExecutionTrace launch(const Batch& batch, const NonEmptyPrefix& plan,
                      const TaskFuncRegistry& registry, const ExecutionPolicy& policy) {
  const BlockIndex total = plan.prefix.total_tiles();
  if (total == 0) throw EmptyBatchError("launch over zero blocks");
  if (plan.sigma.size() != plan.prefix.logical_len()) {
    throw ConfigError("injection size does not match the prefix array");
  }

  ExecutionTrace trace;
  trace.records.resize(total);
  auto run_one = [&](BlockIndex b) {
    try {
      trace.records[b] = dispatch_block_extended(batch, plan.prefix, plan.sigma, registry, b);
    } catch (const BlockDispatchError&) {
      throw;
    } catch (const std::exception& e) {
      throw BlockDispatchError(b, e.what());
    }
  };

  if (policy.kind == ExecutionPolicy::Kind::kSequential) {
    for (BlockIndex b = 0; b < total; ++b) run_one(b);
    return trace;
  }

  unsigned threads = policy.threads ? policy.threads : std::thread::hardware_concurrency();
  threads = std::clamp<unsigned>(threads, 1, std::max<BlockIndex>(total, 1));

  // Blocks are handed out dynamically, so evaluation order differs from run to run;
  // results land in their own slot so the trace order does not.
  std::atomic<BlockIndex> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr first_error;
  BlockIndex first_error_block = total;
  std::mutex error_mu;
  auto worker = [&] {
    for (;;) {
      if (failed.load(std::memory_order_relaxed)) return;
      const BlockIndex b = next.fetch_add(1, std::memory_order_relaxed);
      if (b >= total) return;
      try {
        run_one(b);
      } catch (...) {
        std::lock_guard lock(error_mu);
        if (b < first_error_block) {
          first_error_block = b;
          first_error = std::current_exception();
        }
        failed.store(true, std::memory_order_relaxed);
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (unsigned i = 0; i < threads; ++i) pool.emplace_back(worker);
  }
  if (first_error) std::rethrow_exception(first_error);
  return trace;
}

ExecutionTrace launch(const Batch& batch, const StrategyCatalog& catalog,
                      const TaskFuncRegistry& registry, const ExecutionPolicy& policy) {
  validate_batch(batch, catalog);
  const NonEmptyPrefix plan =
      build_nonempty_tile_prefix(batch.tasks, catalog, batch.warp_size);
  return launch(batch, plan, registry, policy);
}

}  // namespace tilebatch
