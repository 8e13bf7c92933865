// Copyright 2026 The tilebatch Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "tilebatch/cost_model.hpp"
#include "tilebatch/task_model.hpp"
#include "tilebatch/tile_prefix.hpp"

namespace tilebatch {

/// Operand element size assumed when converting element counts to bytes (FP16/BF16).
inline constexpr double kModelElementBytes = 2.0;

/// Per-token expert choices. Expert ids are 1-based, token indices 0-based.
struct RoutingTable {
  std::uint32_t num_tokens = 0;
  std::uint32_t num_experts = 0;
  std::uint32_t top_k = 0;
  std::vector<std::uint32_t> choices;  // row-major, num_tokens x top_k
  std::vector<double> gates;           // same shape as choices, or empty for 1/top_k

  static RoutingTable from_lists(std::uint32_t num_experts,
                                 const std::vector<std::vector<std::uint32_t>>& per_token);

  std::span<const std::uint32_t> choices_of(std::uint32_t token) const {
    return std::span<const std::uint32_t>(choices).subspan(std::size_t{token} * top_k, top_k);
  }
  double gate(std::uint32_t token, std::uint32_t slot) const {
    return gates.empty() ? 1.0 / top_k : gates[std::size_t{token} * top_k + slot];
  }

  /// Throws RoutingError on out-of-range or repeated expert ids, bad table sizes or
  /// top_k outside [1, num_experts].
  void validate() const;
};

enum class BucketMode {
  kStable,   // each bucket ascending by token index
  kScatter,  // atomic-counter scatter; bucket order follows token arrival
};

struct BucketOptions {
  BucketMode mode = BucketMode::kStable;
  std::uint64_t scatter_seed = 0;  // arrival order is a seeded shuffle of the tokens
  unsigned scatter_threads = 1;    // >1 races real atomics; order is then unspecified
};

/// Per-expert lists of routed token indices.
struct TokenIndexArrays {
  std::vector<std::vector<std::uint32_t>> buckets;  // slot expert_id - 1

  std::span<const std::uint32_t> bucket(std::uint32_t expert_id) const {
    return buckets.at(expert_id - 1);
  }
  std::size_t num_experts() const noexcept { return buckets.size(); }
  std::size_t total_entries() const noexcept;
};

TokenIndexArrays build_token_index_arrays(const RoutingTable& routing,
                                          const BucketOptions& options = {});

/// Scatter with an explicit token arrival order (a permutation of 0..num_tokens-1).
/// Counts are histogrammed first; each arriving token then claims one slot per chosen
/// expert with an atomic fetch-add on that expert's cursor.
TokenIndexArrays scatter_token_index_arrays(const RoutingTable& routing,
                                            std::span<const std::uint32_t> arrival_order,
                                            unsigned threads = 1);

struct WeightShape {
  std::uint64_t k = 1;
  std::uint64_t n = 1;
};

enum class Boundedness { kCompute, kMemory };

struct ExpertWorkload {
  std::uint32_t expert_id = 0;
  std::uint64_t load = 0;
  Boundedness boundedness = Boundedness::kMemory;
};

/// 2mnk over the bytes of A (m x k), B (k x n) and C (m x n).
double arithmetic_intensity(const GemmShape& shape, double element_bytes = kModelElementBytes);

/// Loads per expert; an expert is memory-bound when its intensity is below the
/// profile's machine balance.
std::vector<ExpertWorkload> expert_workloads(const TokenIndexArrays& arrays, WeightShape weight,
                                             const DeviceProfile& profile,
                                             double element_bytes = kModelElementBytes);

/// Threshold rule choosing a tiling strategy from the row count.
struct StrategyRule {
  std::uint64_t small_max_m = 64;
  int small_kind = 1;
  int large_kind = 2;

  int select(std::uint64_t m) const noexcept { return m <= small_max_m ? small_kind : large_kind; }
};

/// One task per expert in expert-id order (task index = expert id). All three
/// parameter handles point at slot expert_id - 1.
std::vector<Task> plan_expert_tasks(const TokenIndexArrays& arrays, WeightShape weight,
                                    const StrategyCatalog& catalog, const StrategyRule& rule = {});

enum class ExpertOrdering { kNatural, kAlternating, kHalfInterval };

/// Permutation of expert ids. Alternating and half-interval sort by descending
/// load first (ties: lower id first).
std::vector<std::uint32_t> order_experts(std::span<const ExpertWorkload> workloads,
                                         ExpertOrdering strategy);

struct MoePlanOptions {
  ExpertOrdering ordering = ExpertOrdering::kNatural;
  BucketOptions buckets;
  StrategyRule rule;
  unsigned warp_size = kDefaultWarpSize;
  PaddingMode padding = PaddingMode::kRepeatLast;
  DeviceProfile profile = DeviceProfile::h800_like();  // for boundedness tags only
};

struct MoeBatch {
  TokenIndexArrays arrays;
  std::vector<ExpertWorkload> workloads;    // by expert id
  std::vector<std::uint32_t> expert_order;  // expert id at batch position i
  Batch batch;                              // tasks in expert_order, re-indexed 1..N
  NonEmptyPrefix plan;
  WeightShape weight;
  std::uint32_t top_k = 0;
};

/// Buckets, strategy selection, ordering and the non-empty prefix for one MoE step.
/// Throws EmptyBatchError when no token is routed anywhere.
MoeBatch build_moe_batch(const RoutingTable& routing, WeightShape weight,
                         const StrategyCatalog& catalog, const MoePlanOptions& options = {});

}  // namespace tilebatch
