// Copyright 2026 The tilebatch Authors
// SPDX-License-Identifier: Apache-2.0

#include "tilebatch/report.hpp"

#include <iomanip>

namespace tilebatch {

using nlohmann::json;

namespace {

const char* binding_name(Binding b) { return b == Binding::kCompute ? "compute" : "memory"; }

json demand_json(const std::optional<TileDemand>& d) {
  if (!d) return nullptr;
  return {{"flops", d->flops}, {"issued_flops", d->issued_flops}, {"bytes", d->bytes}};
}

}  // namespace

std::string_view ordering_name(ExpertOrdering o) {
  switch (o) {
    case ExpertOrdering::kNatural: return "natural";
    case ExpertOrdering::kAlternating: return "alternating";
    case ExpertOrdering::kHalfInterval: return "half_interval";
  }
  return "?";
}

std::optional<ExpertOrdering> parse_ordering(std::string_view name) {
  if (name == "natural") return ExpertOrdering::kNatural;
  if (name == "alternating") return ExpertOrdering::kAlternating;
  if (name == "half_interval") return ExpertOrdering::kHalfInterval;
  return std::nullopt;
}

json to_json(const TilePrefixArray& prefix) {
  return {{"values", std::vector<BlockIndex>(prefix.values().begin(), prefix.values().end())},
          {"logical_len", prefix.logical_len()},
          {"total_tiles", prefix.total_tiles()},
          {"warp_size", prefix.warp_size()},
          {"padding", prefix.padding() == PaddingMode::kRepeatLast ? "repeat_last" : "max_value"}};
}

json to_json(const Injection& sigma) {
  return std::vector<std::uint32_t>(sigma.values().begin(), sigma.values().end());
}

json to_json(const ExecutionTrace& trace) {
  json arr = json::array();
  for (const auto& r : trace.records) {
    arr.push_back({{"block", r.block},
                   {"nonempty_index", r.nonempty_index},
                   {"task", r.task_index},
                   {"kind", r.kind},
                   {"tile", r.tile},
                   {"demand", demand_json(r.demand)}});
  }
  return arr;
}

json to_json(const CostReport& report) {
  json waves = json::array();
  for (const auto& w : report.waves) {
    waves.push_back({{"first_block", w.first_block},
                     {"blocks", w.blocks},
                     {"compute_time", w.compute_time},
                     {"memory_time", w.memory_time},
                     {"binding", binding_name(w.binding)}});
  }
  return {{"profile", report.profile},
          {"total_time", report.total_time},
          {"useful_flops", report.useful_flops},
          {"issued_flops", report.issued_flops},
          {"bytes", report.bytes},
          {"achieved_flops", report.achieved_flops},
          {"peak_fraction", report.peak_fraction},
          {"waves", std::move(waves)}};
}

json to_json(const VerificationReport& report) {
  return {{"max_abs_diff", report.max_abs_diff},
          {"max_rel_diff", report.max_rel_diff},
          {"exact_match", report.exact_match},
          {"tiles_executed", report.tiles_executed},
          {"nonempty_tasks", report.nonempty_tasks}};
}

json to_json(std::span<const ScenarioResult> rows) {
  json arr = json::array();
  for (const auto& r : rows) {
    arr.push_back({{"scenario", scenario_name(r.scenario)},
                   {"nonempty_experts", r.nonempty_experts},
                   {"total_tiles", r.total_tiles},
                   {"tflops", r.cost.achieved_flops / 1e12},
                   {"peak_fraction", r.cost.peak_fraction},
                   {"total_time", r.cost.total_time}});
  }
  return arr;
}

json plan_json(const Batch& batch, const StrategyCatalog& catalog, const NonEmptyPrefix& plan) {
  json tasks = json::array();
  for (const Task& t : batch.tasks) {
    tasks.push_back({{"index", t.index},
                     {"kind", t.kind},
                     {"m", t.shape.m},
                     {"n", t.shape.n},
                     {"k", t.shape.k},
                     {"tiles", tile_count(t, catalog)}});
  }
  return {{"num_tasks", batch.tasks.size()},
          {"nonempty_tasks", plan.sigma.size()},
          {"empty_tasks", batch.tasks.size() - plan.sigma.size()},
          {"tasks", std::move(tasks)},
          {"tile_prefix", to_json(plan.prefix)},
          {"sigma", to_json(plan.sigma)}};
}

json plan_json(const MoeBatch& mb, const StrategyCatalog& catalog) {
  json j = plan_json(mb.batch, catalog, mb.plan);
  json experts = json::array();
  for (const auto& w : mb.workloads) {
    experts.push_back({{"expert", w.expert_id},
                       {"load", w.load},
                       {"boundedness", w.boundedness == Boundedness::kCompute ? "compute" : "memory"}});
  }
  json tasks = j.at("tasks");
  for (std::size_t i = 0; i < tasks.size(); ++i) tasks[i]["expert"] = mb.expert_order[i];
  j["tasks"] = std::move(tasks);
  j["experts"] = std::move(experts);
  j["expert_order"] = mb.expert_order;
  return j;
}

void write_trace_csv(std::ostream& os, const ExecutionTrace& trace) {
  os << "block,nonempty_index,task,kind,tile,flops,issued_flops,bytes\n";
  os << std::setprecision(17);
  for (const auto& r : trace.records) {
    os << r.block << ',' << r.nonempty_index << ',' << r.task_index << ',' << r.kind << ','
       << r.tile << ',';
    if (r.demand) {
      os << r.demand->flops << ',' << r.demand->issued_flops << ',' << r.demand->bytes;
    } else {
      os << ",,";
    }
    os << '\n';
  }
}

void write_cost_csv(std::ostream& os, const CostReport& report) {
  os << "wave,first_block,blocks,compute_time,memory_time,binding\n";
  os << std::setprecision(17);
  for (std::size_t i = 0; i < report.waves.size(); ++i) {
    const auto& w = report.waves[i];
    os << i << ',' << w.first_block << ',' << w.blocks << ',' << w.compute_time << ','
       << w.memory_time << ',' << binding_name(w.binding) << '\n';
  }
}

void write_scenarios_csv(std::ostream& os, std::span<const ScenarioResult> rows) {
  os << "scenario,nonempty_experts,total_tiles,tflops,peak_percent,total_time\n";
  os << std::setprecision(17);
  for (const auto& r : rows) {
    os << scenario_name(r.scenario) << ',' << r.nonempty_experts << ',' << r.total_tiles << ','
       << r.cost.achieved_flops / 1e12 << ',' << r.cost.peak_fraction * 100.0 << ','
       << r.cost.total_time << '\n';
  }
}

}  // namespace tilebatch
