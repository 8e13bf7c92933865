// Copyright 2026 The tilebatch Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <ostream>
#include <span>

#include <json.hpp>

#include "tilebatch/cost_model.hpp"
#include "tilebatch/dispatch.hpp"
#include "tilebatch/executor.hpp"
#include "tilebatch/moe_planner.hpp"
#include "tilebatch/scenarios.hpp"

namespace tilebatch {

/// Version tag written into every report; bump on incompatible layout changes.
inline constexpr const char* kReportSchema = "tilebatch.report/v1";

nlohmann::json to_json(const TilePrefixArray& prefix);
nlohmann::json to_json(const Injection& sigma);
nlohmann::json to_json(const ExecutionTrace& trace);
nlohmann::json to_json(const CostReport& report);
nlohmann::json to_json(const VerificationReport& report);
nlohmann::json to_json(std::span<const ScenarioResult> rows);

/// Plan of a generic batch: per-task tile counts, prefix array and injection.
nlohmann::json plan_json(const Batch& batch, const StrategyCatalog& catalog,
                         const NonEmptyPrefix& plan);
/// Plan of an MoE step: the above plus loads, boundedness and the expert order.
nlohmann::json plan_json(const MoeBatch& mb, const StrategyCatalog& catalog);

void write_trace_csv(std::ostream& os, const ExecutionTrace& trace);
void write_cost_csv(std::ostream& os, const CostReport& report);
void write_scenarios_csv(std::ostream& os, std::span<const ScenarioResult> rows);

std::string_view ordering_name(ExpertOrdering o);
std::optional<ExpertOrdering> parse_ordering(std::string_view name);

}  // namespace tilebatch
