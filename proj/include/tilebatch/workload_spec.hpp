// Copyright 2026 The tilebatch Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <variant>

#include <json.hpp>

#include "tilebatch/dispatch.hpp"
#include "tilebatch/executor.hpp"
#include "tilebatch/scenarios.hpp"

namespace tilebatch {

/// Arbitrary GEMM tasks with their own strategy catalog.
struct GenericWorkload {
  StrategyCatalog catalog;
  Batch batch;
};

struct MoeWorkload {
  MoeShape shape;
  std::optional<RoutingTable> routing;  // explicit choices, if given
  Scenario scenario = Scenario::kBalanced;
  std::optional<std::uint64_t> seed;
  StrategyCatalog catalog = StrategyCatalog::moe_default();
  StrategyRule rule;
  unsigned warp_size = kDefaultWarpSize;
};

using WorkloadSpec = std::variant<GenericWorkload, MoeWorkload>;

/// Validates and converts a workload description. Throws SpecError on any schema or
/// value violation (unknown keys included).
WorkloadSpec parse_workload_spec(const nlohmann::json& j);
WorkloadSpec load_workload_spec(const std::filesystem::path& path);

/// Explicit routing, or the scenario generated from the spec's seed (or `seed_override`).
/// The random scenario without any seed is a SpecError.
RoutingTable resolve_routing(const MoeWorkload& spec,
                             std::optional<std::uint64_t> seed_override = std::nullopt);

/// Device profile by bundled name ("h20", "h800", with or without "-like") or JSON file path.
DeviceProfile resolve_profile(const std::string& name_or_path);

/// Reads `count` little-endian float64 values.
std::vector<double> read_f64_file(const std::filesystem::path& path, std::size_t count);

struct GenericRun {
  ExecutionTrace trace;
  VerificationReport report;
};

/// Executes every task of a generic workload as a GEMM on seeded integer data and checks
/// each output against a plain matrix product.
GenericRun run_generic(const GenericWorkload& spec, std::uint64_t data_seed,
                       const ExecOptions& options = {});

}  // namespace tilebatch
