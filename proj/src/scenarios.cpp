// Copyright 2026 The tilebatch Authors
// SPDX-License-Identifier: Apache-2.0

#include "tilebatch/scenarios.hpp"

#include <numeric>
#include <random>
#include <string>

#include "tilebatch/errors.hpp"
#include "tilebatch/executor.hpp"

namespace tilebatch {

std::optional<Scenario> parse_scenario(std::string_view name) {
  if (name == "balanced") return Scenario::kBalanced;
  if (name == "best") return Scenario::kBest;
  if (name == "worst") return Scenario::kWorst;
  if (name == "random") return Scenario::kRandom;
  return std::nullopt;
}

std::string_view scenario_name(Scenario s) {
  switch (s) {
    case Scenario::kBalanced: return "balanced";
    case Scenario::kBest: return "best";
    case Scenario::kWorst: return "worst";
    case Scenario::kRandom: return "random";
  }
  return "?";
}

RoutingTable make_scenario_routing(const MoeShape& shape, Scenario scenario, std::uint64_t seed) {
  const std::uint32_t n = shape.num_experts;
  const std::uint32_t k = shape.top_k;
  if (n == 0 || k == 0 || k > n) {
    throw SpecError("top_k " + std::to_string(k) + " must lie in [1, num_experts = " +
                    std::to_string(n) + "]");
  }
  RoutingTable r;
  r.num_tokens = shape.num_tokens;
  r.num_experts = n;
  r.top_k = k;
  r.choices.resize(std::size_t{shape.num_tokens} * k);
  auto row = [&](std::uint32_t t) { return r.choices.begin() + std::size_t{t} * k; };

  switch (scenario) {
    case Scenario::kBalanced:
      // Round-robin over the flattened (token, slot) sequence; k <= n keeps a row distinct.
      for (std::uint32_t t = 0; t < shape.num_tokens; ++t) {
        for (std::uint32_t j = 0; j < k; ++j) {
          row(t)[j] = static_cast<std::uint32_t>((std::uint64_t{t} * k + j) % n) + 1;
        }
      }
      break;
    case Scenario::kBest:
    case Scenario::kWorst:
      for (std::uint32_t t = 0; t < shape.num_tokens; ++t) std::iota(row(t), row(t) + k, 1u);
      if (scenario == Scenario::kWorst) {
        const std::uint32_t idle = n - k;
        if (shape.num_tokens < idle) {
          throw SpecError("worst case needs at least " + std::to_string(idle) + " tokens");
        }
        // Token i hands its last busy slot to idle expert k + 1 + i.
        for (std::uint32_t i = 0; i < idle; ++i) row(i)[k - 1] = k + 1 + i;
      }
      break;
    case Scenario::kRandom: {
      std::mt19937_64 rng(seed);
      std::vector<std::uint32_t> experts(n);
      for (std::uint32_t t = 0; t < shape.num_tokens; ++t) {
        std::iota(experts.begin(), experts.end(), 1u);
        for (std::uint32_t j = 0; j < k; ++j) {
          std::uniform_int_distribution<std::uint32_t> pick(j, n - 1);
          std::swap(experts[j], experts[pick(rng)]);
          row(t)[j] = experts[j];
        }
      }
      break;
    }
  }
  return r;
}

CostReport estimate_moe(const MoeBatch& mb, const StrategyCatalog& catalog,
                        const DeviceProfile& profile) {
  const TaskFuncRegistry registry = make_demand_registry(catalog);
  const ExecutionTrace trace = launch(mb.batch, mb.plan, registry);
  return estimate(trace, profile);
}

std::vector<ScenarioResult> scenario_compare(const MoeShape& shape, const DeviceProfile& profile,
                                             const StrategyCatalog& catalog,
                                             const MoePlanOptions& options) {
  std::vector<ScenarioResult> out;
  for (Scenario s : {Scenario::kBalanced, Scenario::kBest, Scenario::kWorst}) {
    const RoutingTable routing = make_scenario_routing(shape, s);
    MoePlanOptions opts = options;
    opts.profile = profile;
    const MoeBatch mb = build_moe_batch(routing, shape.weight, catalog, opts);
    ScenarioResult res{s, static_cast<std::uint32_t>(mb.plan.sigma.size()),
                       mb.plan.prefix.total_tiles(), estimate_moe(mb, catalog, profile)};
    out.push_back(std::move(res));
  }
  return out;
}

}  // namespace tilebatch
