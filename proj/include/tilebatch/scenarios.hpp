// Copyright 2026 The tilebatch Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "tilebatch/cost_model.hpp"
#include "tilebatch/moe_planner.hpp"

namespace tilebatch {

/// Dimensions of one MoE step. Defaults: 4096 tokens, 64 experts, top-8, weight 3584 x 2560.
struct MoeShape {
  std::uint32_t num_tokens = 4096;
  std::uint32_t num_experts = 64;
  std::uint32_t top_k = 8;
  WeightShape weight{3584, 2560};
};

enum class Scenario {
  kBalanced,  // loads differ by at most one token
  kBest,      // every token goes to experts 1..top_k
  kWorst,     // like best, but each remaining expert takes exactly one token
  kRandom,    // top_k distinct experts per token, uniformly at random
};

std::optional<Scenario> parse_scenario(std::string_view name);
std::string_view scenario_name(Scenario s);

/// Routing table for a scenario. kWorst needs num_tokens >= num_experts - top_k;
/// kRandom uses `seed`. Throws SpecError on impossible shapes.
RoutingTable make_scenario_routing(const MoeShape& shape, Scenario scenario,
                                   std::uint64_t seed = 0);

struct ScenarioResult {
  Scenario scenario;
  std::uint32_t nonempty_experts = 0;
  std::uint32_t total_tiles = 0;
  CostReport cost;
};

/// Plans balanced, best and worst on the same shape, runs a demand-only launch and
/// prices each trace on `profile`.
std::vector<ScenarioResult> scenario_compare(const MoeShape& shape, const DeviceProfile& profile,
                                             const StrategyCatalog& catalog,
                                             const MoePlanOptions& options = {});

/// Demand-only launch of a planned MoE step followed by the wave model.
CostReport estimate_moe(const MoeBatch& mb, const StrategyCatalog& catalog,
                        const DeviceProfile& profile);

}  // namespace tilebatch
