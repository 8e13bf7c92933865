// Copyright 2026 The tilebatch Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "tilebatch/cost_model.hpp"
#include "tilebatch/errors.hpp"
#include "tilebatch/scenarios.hpp"

namespace tilebatch {
namespace {

ExecutionTrace trace_of(const std::vector<TileDemand>& demands) {
  ExecutionTrace t;
  for (std::size_t i = 0; i < demands.size(); ++i) {
    DispatchRecord r;
    r.block = static_cast<BlockIndex>(i);
    r.task_index = 1;
    r.kind = 1;
    r.tile = static_cast<std::uint32_t>(i);
    r.demand = demands[i];
    t.records.push_back(r);
  }
  return t;
}

/// Wave sum computed directly from the list of demands.
double wave_sum_oracle(const std::vector<TileDemand>& d, const DeviceProfile& p) {
  double total = 0;
  for (std::size_t start = 0; start < d.size(); start += p.sm_count) {
    double f = 0, b = 0;
    for (std::size_t i = start; i < std::min(d.size(), start + p.sm_count); ++i) {
      f += d[i].issued_flops;
      b += d[i].bytes;
    }
    total += std::max(f / p.peak_flops, b / p.peak_bandwidth);
  }
  return total;
}

std::vector<TileDemand> random_demands(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(1.0, 1e6);
  std::vector<TileDemand> d(n);
  for (auto& x : d) {
    x.flops = u(rng);
    x.issued_flops = x.flops * (1.0 + (rng() % 3));
    x.bytes = u(rng);
  }
  return d;
}

const DeviceProfile kToy{"toy", 1, 1e9, 1e9};

TEST(Estimate, SingleBlockClosedForm) {
  const auto rep = estimate(trace_of({{2e6, 2e6, 1e3}}), kToy);
  EXPECT_DOUBLE_EQ(rep.total_time, 2e-3);
  ASSERT_EQ(rep.waves.size(), 1u);
  EXPECT_EQ(rep.waves[0].binding, Binding::kCompute);
  EXPECT_DOUBLE_EQ(rep.achieved_flops, 1e9);
  EXPECT_DOUBLE_EQ(rep.peak_fraction, 1.0);

  const auto mem = estimate(trace_of({{2e3, 2e3, 1e6}}), kToy);
  EXPECT_DOUBLE_EQ(mem.total_time, 1e-3);
  EXPECT_EQ(mem.waves[0].binding, Binding::kMemory);
}

TEST(Estimate, MatchesWaveSumOracle) {
  std::mt19937_64 rng(4);
  for (int iter = 0; iter < 100; ++iter) {
    const DeviceProfile p{"p", static_cast<std::uint32_t>(1 + rng() % 9), 1e9 * (1 + rng() % 5),
                          1e8 * (1 + rng() % 50)};
    const auto d = random_demands(rng, 1 + rng() % 60);
    const auto rep = estimate(trace_of(d), p);
    EXPECT_NEAR(rep.total_time, wave_sum_oracle(d, p), 1e-12 * rep.total_time);
    EXPECT_EQ(rep.waves.size(), (d.size() + p.sm_count - 1) / p.sm_count);
  }
}

TEST(Estimate, HomogeneousBlocksIgnoreOrder) {
  std::vector<TileDemand> d(37, TileDemand{5e5, 6e5, 3e4});
  const DeviceProfile p{"p", 8, 1e9, 1e8};
  const auto base = estimate(trace_of(d), p).total_time;
  std::mt19937_64 rng(1);
  for (int i = 0; i < 5; ++i) {
    std::shuffle(d.begin(), d.end(), rng);
    EXPECT_DOUBLE_EQ(estimate(trace_of(d), p).total_time, base);
  }
}

TEST(Estimate, BoundedBelowByAggregateRoofline) {
  std::mt19937_64 rng(6);
  for (int iter = 0; iter < 50; ++iter) {
    const DeviceProfile p{"p", 4, 2e9, 5e8};
    const auto d = random_demands(rng, 1 + rng() % 40);
    const auto rep = estimate(trace_of(d), p);
    EXPECT_GE(rep.total_time * (1 + 1e-12),
              std::max(rep.issued_flops / p.peak_flops, rep.bytes / p.peak_bandwidth));
    EXPECT_LE(rep.peak_fraction, 1.0 + 1e-12);
  }
}

TEST(Estimate, AddingBlocksNeverReducesTime) {
  std::mt19937_64 rng(9);
  const DeviceProfile p{"p", 3, 1e9, 1e9};
  auto d = random_demands(rng, 1);
  double prev = estimate(trace_of(d), p).total_time;
  for (int i = 0; i < 30; ++i) {
    d.push_back(random_demands(rng, 1).front());
    const double now = estimate(trace_of(d), p).total_time;
    EXPECT_GE(now, prev);
    prev = now;
  }
}

TEST(Estimate, Deterministic) {
  std::mt19937_64 rng(2);
  const auto t = trace_of(random_demands(rng, 50));
  const auto a = estimate(t, DeviceProfile::h20_like());
  const auto b = estimate(t, DeviceProfile::h20_like());
  EXPECT_EQ(a.total_time, b.total_time);
  EXPECT_EQ(a.waves.size(), b.waves.size());
}

TEST(Estimate, UnlimitedBandwidthGivesUsefulOverIssued) {
  const DeviceProfile p{"p", 4, 1e12, 1e300};
  std::mt19937_64 rng(3);
  const auto d = random_demands(rng, 23);
  const auto rep = estimate(trace_of(d), p);
  EXPECT_NEAR(rep.peak_fraction, rep.useful_flops / rep.issued_flops, 1e-12);
}

TEST(Estimate, RejectsBadInput) {
  EXPECT_THROW(estimate(ExecutionTrace{}, kToy), ModelError);
  auto t = trace_of({{1, 1, 1}});
  t.records[0].demand.reset();
  EXPECT_THROW(estimate(t, kToy), ModelError);
  EXPECT_THROW(estimate(trace_of({{2, 1, 1}}), kToy), ModelError);
  EXPECT_THROW(estimate(trace_of({{-1, 1, 1}}), kToy), ModelError);
  EXPECT_THROW(estimate(trace_of({{1, NAN, 1}}), kToy), ModelError);
  EXPECT_THROW(estimate(trace_of({{1, 1, 1}}), DeviceProfile{"bad", 0, 1, 1}), ModelError);
  EXPECT_THROW(estimate(trace_of({{1, 1, 1}}), DeviceProfile{"bad", 1, 1, -1}), ModelError);
}

TEST(Profiles, Bundled) {
  const auto all = DeviceProfile::bundled();
  ASSERT_EQ(all.size(), 2u);
  EXPECT_EQ(all[0].name, "h20-like");
  EXPECT_EQ(all[0].sm_count, 78u);
  EXPECT_EQ(all[1].name, "h800-like");
  EXPECT_EQ(all[1].sm_count, 132u);
  EXPECT_GT(all[1].machine_balance(), all[0].machine_balance());
}

TEST(Scenarios, BestAtLeastBalancedAtLeastWorst) {
  const MoeShape shape;
  for (const auto& p : DeviceProfile::bundled()) {
    const auto res = scenario_compare(shape, p, StrategyCatalog::moe_default());
    ASSERT_EQ(res.size(), 3u);
    const double balanced = res[0].cost.peak_fraction;
    const double best = res[1].cost.peak_fraction;
    const double worst = res[2].cost.peak_fraction;
    EXPECT_GE(best, balanced * (1 - 1e-9)) << p.name;
    EXPECT_GE(balanced, worst) << p.name;
    EXPECT_EQ(res[1].nonempty_experts, 8u);
    EXPECT_EQ(res[2].nonempty_experts, 64u);
  }
}

TEST(Scenarios, HalfIntervalNoSlowerThanNaturalOnSkewedLoad) {
  const MoeShape shape;
  const auto routing = make_scenario_routing(shape, Scenario::kWorst);
  const auto& cat = StrategyCatalog::moe_default();
  for (const auto& p : DeviceProfile::bundled()) {
    MoePlanOptions natural, half;
    half.ordering = ExpertOrdering::kHalfInterval;
    const auto nat = estimate_moe(build_moe_batch(routing, shape.weight, cat, natural), cat, p);
    const auto hi = estimate_moe(build_moe_batch(routing, shape.weight, cat, half), cat, p);
    ASSERT_GE(nat.waves.size(), 2u);
    EXPECT_LE(hi.total_time, nat.total_time) << p.name;
  }
}

TEST(Scenarios, WorstNeedsEnoughTokens) {
  EXPECT_THROW(make_scenario_routing({10, 64, 8, {8, 8}}, Scenario::kWorst), SpecError);
}

TEST(Scenarios, RandomIsSeeded) {
  const MoeShape s{64, 16, 4, {8, 8}};
  EXPECT_EQ(make_scenario_routing(s, Scenario::kRandom, 3).choices,
            make_scenario_routing(s, Scenario::kRandom, 3).choices);
  EXPECT_NE(make_scenario_routing(s, Scenario::kRandom, 3).choices,
            make_scenario_routing(s, Scenario::kRandom, 4).choices);
}

TEST(Scenarios, BalancedLoadsDifferByAtMostOne) {
  const auto r = make_scenario_routing({1000, 24, 5, {8, 8}}, Scenario::kBalanced);
  EXPECT_NO_THROW(r.validate());
  const auto arrays = build_token_index_arrays(r);
  std::size_t lo = SIZE_MAX, hi = 0;
  for (const auto& b : arrays.buckets) {
    lo = std::min(lo, b.size());
    hi = std::max(hi, b.size());
  }
  EXPECT_LE(hi - lo, 1u);
}

}  // namespace
}  // namespace tilebatch
