// Copyright 2026 The tilebatch Authors
// SPDX-License-Identifier: Apache-2.0

#include "tilebatch/moe_planner.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <numeric>
#include <random>
#include <string>
#include <thread>

#include "tilebatch/errors.hpp"

namespace tilebatch {

RoutingTable RoutingTable::from_lists(std::uint32_t num_experts,
                                      const std::vector<std::vector<std::uint32_t>>& per_token) {
  RoutingTable r;
  r.num_experts = num_experts;
  r.num_tokens = static_cast<std::uint32_t>(per_token.size());
  r.top_k = per_token.empty() ? 0 : static_cast<std::uint32_t>(per_token.front().size());
  for (const auto& row : per_token) {
    if (row.size() != r.top_k) throw RoutingError("every token needs the same number of choices");
    r.choices.insert(r.choices.end(), row.begin(), row.end());
  }
  return r;
}

void RoutingTable::validate() const {
  if (num_experts == 0) throw RoutingError("routing needs at least one expert");
  if (top_k == 0 || top_k > num_experts) {
    throw RoutingError("top_k " + std::to_string(top_k) + " outside [1, " +
                       std::to_string(num_experts) + "]");
  }
  if (choices.size() != std::size_t{num_tokens} * top_k) {
    throw RoutingError("choice table has " + std::to_string(choices.size()) + " entries, expected " +
                       std::to_string(std::size_t{num_tokens} * top_k));
  }
  if (!gates.empty() && gates.size() != choices.size()) {
    throw RoutingError("gate table does not match the choice table");
  }
  std::vector<std::uint32_t> last_seen(num_experts, UINT32_MAX);
  for (std::uint32_t t = 0; t < num_tokens; ++t) {
    for (std::uint32_t e : choices_of(t)) {
      if (e < 1 || e > num_experts) {
        throw RoutingError("token " + std::to_string(t) + " routed to expert " + std::to_string(e) +
                           " outside [1, " + std::to_string(num_experts) + "]");
      }
      if (last_seen[e - 1] == t) {
        throw RoutingError("token " + std::to_string(t) + " chooses expert " + std::to_string(e) +
                           " twice");
      }
      last_seen[e - 1] = t;
    }
  }
}

std::size_t TokenIndexArrays::total_entries() const noexcept {
  std::size_t total = 0;
  for (const auto& b : buckets) total += b.size();
  return total;
}

TokenIndexArrays build_token_index_arrays(const RoutingTable& routing,
                                          const BucketOptions& options) {
  routing.validate();
  if (options.mode == BucketMode::kScatter) {
    std::vector<std::uint32_t> arrival(routing.num_tokens);
    std::iota(arrival.begin(), arrival.end(), 0u);
    std::mt19937_64 rng(options.scatter_seed);
    std::shuffle(arrival.begin(), arrival.end(), rng);
    return scatter_token_index_arrays(routing, arrival, options.scatter_threads);
  }
  TokenIndexArrays out;
  out.buckets.resize(routing.num_experts);
  for (std::uint32_t t = 0; t < routing.num_tokens; ++t) {
    for (std::uint32_t e : routing.choices_of(t)) out.buckets[e - 1].push_back(t);
  }
  return out;
}

TokenIndexArrays scatter_token_index_arrays(const RoutingTable& routing,
                                            std::span<const std::uint32_t> arrival_order,
                                            unsigned threads) {
  routing.validate();
  if (arrival_order.size() != routing.num_tokens) {
    throw RoutingError("arrival order must list every token once");
  }
  std::vector<bool> seen(routing.num_tokens, false);
  for (std::uint32_t t : arrival_order) {
    if (t >= routing.num_tokens || seen[t]) {
      throw RoutingError("arrival order is not a permutation of the tokens");
    }
    seen[t] = true;
  }

  std::vector<std::uint32_t> counts(routing.num_experts, 0);
  for (std::uint32_t e : routing.choices) ++counts[e - 1];

  TokenIndexArrays out;
  out.buckets.resize(routing.num_experts);
  for (std::size_t e = 0; e < counts.size(); ++e) out.buckets[e].resize(counts[e]);
  std::vector<std::atomic<std::uint32_t>> cursor(routing.num_experts);

  auto scatter_range = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const std::uint32_t t = arrival_order[i];
      for (std::uint32_t e : routing.choices_of(t)) {
        const std::uint32_t slot = cursor[e - 1].fetch_add(1, std::memory_order_relaxed);
        out.buckets[e - 1][slot] = t;
      }
    }
  };

  threads = std::max(1u, threads);
  if (threads == 1) {
    scatter_range(0, arrival_order.size());
    return out;
  }
  const std::size_t per = (arrival_order.size() + threads - 1) / threads;
  std::vector<std::jthread> pool;
  for (unsigned i = 0; i < threads; ++i) {
    const std::size_t begin = std::min(arrival_order.size(), i * per);
    const std::size_t end = std::min(arrival_order.size(), begin + per);
    pool.emplace_back(scatter_range, begin, end);
  }
  return out;
}

double arithmetic_intensity(const GemmShape& shape, double element_bytes) {
  const double m = static_cast<double>(shape.m);
  const double n = static_cast<double>(shape.n);
  const double k = static_cast<double>(shape.k);
  const double bytes = (m * k + k * n + m * n) * element_bytes;
  return 2.0 * m * n * k / bytes;
}

std::vector<ExpertWorkload> expert_workloads(const TokenIndexArrays& arrays, WeightShape weight,
                                             const DeviceProfile& profile, double element_bytes) {
  std::vector<ExpertWorkload> out;
  out.reserve(arrays.num_experts());
  const double balance = profile.machine_balance();
  for (std::size_t e = 0; e < arrays.num_experts(); ++e) {
    ExpertWorkload w;
    w.expert_id = static_cast<std::uint32_t>(e + 1);
    w.load = arrays.buckets[e].size();
    const GemmShape shape{w.load, weight.n, weight.k};
    w.boundedness = arithmetic_intensity(shape, element_bytes) < balance ? Boundedness::kMemory
                                                                          : Boundedness::kCompute;
    out.push_back(w);
  }
  return out;
}

std::vector<Task> plan_expert_tasks(const TokenIndexArrays& arrays, WeightShape weight,
                                    const StrategyCatalog& catalog, const StrategyRule& rule) {
  if (catalog.size() < 2) throw ConfigError("expert planning needs a small and a large strategy");
  if (!catalog.contains(rule.small_kind) || !catalog.contains(rule.large_kind)) {
    throw ConfigError("strategy rule refers to a kind outside the catalog");
  }
  if (weight.k == 0 || weight.n == 0) throw ConfigError("weight shape must be non-zero");
  std::vector<Task> tasks;
  tasks.reserve(arrays.num_experts());
  for (std::size_t e = 0; e < arrays.num_experts(); ++e) {
    Task t;
    t.index = static_cast<std::uint32_t>(e + 1);
    t.shape = {arrays.buckets[e].size(), weight.n, weight.k};
    t.kind = rule.select(t.shape.m);
    t.params = {e, e, e};
    tasks.push_back(t);
  }
  return tasks;
}

namespace {

std::vector<std::uint32_t> by_descending_load(std::span<const ExpertWorkload> workloads) {
  std::vector<ExpertWorkload> sorted(workloads.begin(), workloads.end());
  std::stable_sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
    return a.load != b.load ? a.load > b.load : a.expert_id < b.expert_id;
  });
  std::vector<std::uint32_t> ids;
  ids.reserve(sorted.size());
  for (const auto& w : sorted) ids.push_back(w.expert_id);
  return ids;
}

std::uint32_t reverse_bits(std::uint32_t v, unsigned width) {
  std::uint32_t r = 0;
  for (unsigned i = 0; i < width; ++i) r |= ((v >> i) & 1u) << (width - 1 - i);
  return r;
}

}  // namespace

std::vector<std::uint32_t> order_experts(std::span<const ExpertWorkload> workloads,
                                         ExpertOrdering strategy) {
  const std::size_t n = workloads.size();
  switch (strategy) {
    case ExpertOrdering::kNatural: {
      std::vector<std::uint32_t> ids;
      for (const auto& w : workloads) ids.push_back(w.expert_id);
      std::sort(ids.begin(), ids.end());
      return ids;
    }
    case ExpertOrdering::kAlternating: {
      const auto sorted = by_descending_load(workloads);
      const std::size_t busy = (n + 1) / 2;
      std::vector<std::uint32_t> out;
      out.reserve(n);
      for (std::size_t i = 0; i < busy; ++i) {
        out.push_back(sorted[i]);
        if (busy + i < n) out.push_back(sorted[busy + i]);
      }
      return out;
    }
    case ExpertOrdering::kHalfInterval: {
      const auto sorted = by_descending_load(workloads);
      const unsigned width = n > 1 ? static_cast<unsigned>(std::bit_width(n - 1)) : 0;
      std::vector<std::uint32_t> out(n);
      std::size_t rank = 0;
      for (std::uint32_t i = 0; rank < n; ++i) {
        const std::uint32_t slot = reverse_bits(i, width);
        if (slot < n) out[slot] = sorted[rank++];
      }
      return out;
    }
  }
  throw ConfigError("unknown expert ordering");
}

MoeBatch build_moe_batch(const RoutingTable& routing, WeightShape weight,
                         const StrategyCatalog& catalog, const MoePlanOptions& options) {
  MoeBatch mb;
  mb.weight = weight;
  mb.top_k = routing.top_k;
  mb.arrays = build_token_index_arrays(routing, options.buckets);
  if (mb.arrays.total_entries() == 0) throw EmptyBatchError("no token is routed to any expert");

  const std::vector<Task> by_expert = plan_expert_tasks(mb.arrays, weight, catalog, options.rule);
  mb.workloads = expert_workloads(mb.arrays, weight, options.profile);
  mb.expert_order = order_experts(mb.workloads, options.ordering);

  mb.batch.warp_size = options.warp_size;
  mb.batch.tasks.reserve(by_expert.size());
  for (std::size_t pos = 0; pos < mb.expert_order.size(); ++pos) {
    Task t = by_expert[mb.expert_order[pos] - 1];
    t.index = static_cast<std::uint32_t>(pos + 1);
    mb.batch.tasks.push_back(t);
  }
  validate_batch(mb.batch, catalog);
  mb.plan = build_nonempty_tile_prefix(mb.batch.tasks, catalog, mb.batch.warp_size,
                                       options.padding);
  return mb;
}

}  // namespace tilebatch
