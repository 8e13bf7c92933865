// Copyright 2026 The tilebatch Authors
// SPDX-License-Identifier: Apache-2.0

// tilebatch: plan, run, price and compare statically batched tile workloads.
//
// Exit codes: 0 success, 1 verification failure, 2 input error.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "tilebatch/cost_model.hpp"
#include "tilebatch/errors.hpp"
#include "tilebatch/executor.hpp"
#include "tilebatch/moe_planner.hpp"
#include "tilebatch/report.hpp"
#include "tilebatch/scenarios.hpp"
#include "tilebatch/workload_spec.hpp"

namespace {

using nlohmann::json;
using namespace tilebatch;

constexpr int kExitVerify = 1;
constexpr int kExitInput = 2;
constexpr const char* kProfileEnv = "TILEBATCH_PROFILE";

struct CommonOptions {
  std::string spec_path;
  std::string out_path;
  std::string ordering = "natural";
  std::string bucket_mode = "stable";
  std::string padding = "repeat_last";
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> warp_size;
};

struct RunOptions {
  bool verify = false;
  std::string exec = "sequential";
  unsigned threads = 0;
  bool wide = false;
  std::uint64_t data_seed = 0;
  std::string tokens_path;
  std::string weights_path;
  std::optional<double> tolerance;
  std::string trace_csv;
};

struct CostOptions {
  std::string profile;
  std::string csv;
};

DeviceProfile pick_profile(const std::string& flag) {
  if (!flag.empty()) return resolve_profile(flag);
  if (const char* env = std::getenv(kProfileEnv); env && *env) return resolve_profile(env);
  return DeviceProfile::h800_like();
}

MoePlanOptions plan_options(const CommonOptions& c, const MoeWorkload& spec) {
  MoePlanOptions o;
  const auto ordering = parse_ordering(c.ordering);
  if (!ordering) throw SpecError("unknown ordering '" + c.ordering + "'");
  o.ordering = *ordering;
  if (c.bucket_mode == "stable") {
    o.buckets.mode = BucketMode::kStable;
  } else if (c.bucket_mode == "scatter") {
    o.buckets.mode = BucketMode::kScatter;
    o.buckets.scatter_seed = c.seed.value_or(0);
  } else {
    throw SpecError("unknown bucket mode '" + c.bucket_mode + "'");
  }
  o.rule = spec.rule;
  o.warp_size = c.warp_size.value_or(spec.warp_size);
  o.padding = c.padding == "max_value" ? PaddingMode::kMaxValue : PaddingMode::kRepeatLast;
  return o;
}

void emit(const json& j, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << j.dump(2) << '\n';
    return;
  }
  std::ofstream out(out_path);
  if (!out) throw SpecError("cannot write " + out_path);
  out << j.dump(2) << '\n';
}

template <typename Fn>
void write_file(const std::string& path, Fn&& fn) {
  std::ofstream out(path);
  if (!out) throw SpecError("cannot write " + path);
  fn(out);
}

json header(const char* command) { return {{"schema", kReportSchema}, {"command", command}}; }

GenericWorkload with_warp(GenericWorkload g, const CommonOptions& c) {
  if (c.warp_size) g.batch.warp_size = *c.warp_size;
  validate_batch(g.batch, g.catalog);
  return g;
}

NonEmptyPrefix generic_plan(const GenericWorkload& g, const CommonOptions& c) {
  return build_nonempty_tile_prefix(
      g.batch.tasks, g.catalog, g.batch.warp_size,
      c.padding == "max_value" ? PaddingMode::kMaxValue : PaddingMode::kRepeatLast);
}

json routing_json(const RoutingTable& r) {
  return {{"num_tokens", r.num_tokens}, {"num_experts", r.num_experts}, {"top_k", r.top_k}};
}

int cmd_plan(const CommonOptions& c) {
  const WorkloadSpec spec = load_workload_spec(c.spec_path);
  json j = header("plan");
  if (const auto* g = std::get_if<GenericWorkload>(&spec)) {
    const GenericWorkload gw = with_warp(*g, c);
    j["workload"] = "generic";
    j["plan"] = plan_json(gw.batch, gw.catalog, generic_plan(gw, c));
  } else {
    const auto& m = std::get<MoeWorkload>(spec);
    const RoutingTable routing = resolve_routing(m, c.seed);
    const MoeBatch mb = build_moe_batch(routing, m.shape.weight, m.catalog, plan_options(c, m));
    j["workload"] = "moe";
    j["routing"] = routing_json(routing);
    j["ordering"] = c.ordering;
    j["plan"] = plan_json(mb, m.catalog);
  }
  emit(j, c.out_path);
  return 0;
}

MoeBuffers load_or_generate(const RoutingTable& routing, const MoeWorkload& m,
                            const RunOptions& r) {
  if (r.tokens_path.empty() != r.weights_path.empty()) {
    throw SpecError("--tokens and --weights must be given together");
  }
  if (r.tokens_path.empty()) return make_integer_buffers(routing, m.shape.weight, r.data_seed);
  const auto [k, n] = m.shape.weight;
  MoeBuffers b;
  b.tokens = Matrix(routing.num_tokens, k);
  b.tokens.data = read_f64_file(r.tokens_path, routing.num_tokens * k);
  const auto all = read_f64_file(r.weights_path, std::size_t{routing.num_experts} * k * n);
  for (std::uint32_t e = 0; e < routing.num_experts; ++e) {
    Matrix w(k, n);
    std::copy_n(all.begin() + static_cast<std::ptrdiff_t>(e * k * n), k * n, w.data.begin());
    b.weights.push_back(std::move(w));
  }
  return b;
}

int cmd_run(const CommonOptions& c, const RunOptions& r) {
  const WorkloadSpec spec = load_workload_spec(c.spec_path);
  ExecOptions exec;
  if (r.exec == "parallel") {
    exec.policy = ExecutionPolicy::parallel(r.threads);
  } else if (r.exec != "sequential") {
    throw SpecError("unknown execution policy '" + r.exec + "'");
  }
  exec.accumulator = r.wide ? AccumulatorMode::kWide : AccumulatorMode::kDouble;
  exec.track_writes = r.verify;

  json j = header("run");
  ExecutionTrace trace;
  if (const auto* g = std::get_if<GenericWorkload>(&spec)) {
    const GenericWorkload gw = with_warp(*g, c);
    const GenericRun run = run_generic(gw, r.data_seed, exec);
    j["workload"] = "generic";
    if (r.verify) j["verification"] = to_json(run.report);
    trace = run.trace;
  } else {
    const auto& m = std::get<MoeWorkload>(spec);
    const RoutingTable routing = resolve_routing(m, c.seed);
    const MoeBuffers buffers = load_or_generate(routing, m, r);
    const MoePlanOptions opts = plan_options(c, m);
    j["workload"] = "moe";
    j["routing"] = routing_json(routing);
    j["ordering"] = c.ordering;
    if (r.verify) {
      const double tol = r.tolerance.value_or(r.tokens_path.empty() ? 0.0 : 1e-12);
      j["verification"] =
          to_json(run_and_verify(routing, m.shape.weight, buffers, m.catalog, opts, exec, tol, &trace));
    } else {
      const MoeBatch mb = build_moe_batch(routing, m.shape.weight, m.catalog, opts);
      trace = execute_moe(mb, routing, buffers, m.catalog, exec).trace;
    }
  }
  j["tiles"] = trace.records.size();
  j["trace"] = to_json(trace);
  if (!r.trace_csv.empty()) write_file(r.trace_csv, [&](std::ostream& os) { write_trace_csv(os, trace); });
  emit(j, c.out_path);
  return 0;
}

int cmd_cost(const CommonOptions& c, const CostOptions& co) {
  const WorkloadSpec spec = load_workload_spec(c.spec_path);
  const DeviceProfile profile = pick_profile(co.profile);
  json j = header("cost");
  CostReport report;
  if (const auto* g = std::get_if<GenericWorkload>(&spec)) {
    const GenericWorkload gw = with_warp(*g, c);
    const ExecutionTrace trace =
        launch(gw.batch, generic_plan(gw, c), make_demand_registry(gw.catalog));
    report = estimate(trace, profile);
    j["workload"] = "generic";
  } else {
    const auto& m = std::get<MoeWorkload>(spec);
    const RoutingTable routing = resolve_routing(m, c.seed);
    MoePlanOptions opts = plan_options(c, m);
    opts.profile = profile;
    const MoeBatch mb = build_moe_batch(routing, m.shape.weight, m.catalog, opts);
    report = estimate_moe(mb, m.catalog, profile);
    j["workload"] = "moe";
    j["routing"] = routing_json(routing);
    j["ordering"] = c.ordering;
  }
  j["cost"] = to_json(report);
  if (!co.csv.empty()) write_file(co.csv, [&](std::ostream& os) { write_cost_csv(os, report); });
  emit(j, c.out_path);
  return 0;
}

int cmd_scenarios(const CommonOptions& c, const CostOptions& co) {
  MoeWorkload m;
  if (!c.spec_path.empty()) {
    const WorkloadSpec spec = load_workload_spec(c.spec_path);
    if (!std::holds_alternative<MoeWorkload>(spec)) {
      throw SpecError("scenarios needs an moe spec");
    }
    m = std::get<MoeWorkload>(spec);
  }
  const DeviceProfile profile = pick_profile(co.profile);
  const auto rows = scenario_compare(m.shape, profile, m.catalog, plan_options(c, m));
  json j = header("scenarios");
  j["profile"] = profile.name;
  j["ordering"] = c.ordering;
  j["shape"] = {{"num_tokens", m.shape.num_tokens},
                {"num_experts", m.shape.num_experts},
                {"top_k", m.shape.top_k},
                {"weight_shape", {m.shape.weight.k, m.shape.weight.n}}};
  j["scenarios"] = to_json(rows);
  if (!co.csv.empty()) write_file(co.csv, [&](std::ostream& os) { write_scenarios_csv(os, rows); });
  emit(j, c.out_path);
  return 0;
}

void add_common(CLI::App* sub, CommonOptions& c, bool spec_required = true) {
  auto* spec = sub->add_option("spec", c.spec_path, "Workload spec (JSON)");
  if (spec_required) spec->required();
  sub->add_option("-o,--out", c.out_path, "Write the JSON report here instead of stdout");
  sub->add_option("--ordering", c.ordering, "Expert ordering")
      ->check(CLI::IsMember({"natural", "alternating", "half_interval"}));
  sub->add_option("--bucket-mode", c.bucket_mode, "Token bucket construction")
      ->check(CLI::IsMember({"stable", "scatter"}));
  sub->add_option("--padding", c.padding, "Prefix padding")
      ->check(CLI::IsMember({"repeat_last", "max_value"}));
  sub->add_option("--seed", c.seed, "Routing seed (random scenario, scatter arrival order)");
  sub->add_option("--warp-size", c.warp_size, "Override the spec's warp size");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Static batching of irregular tile workloads"};
  app.require_subcommand(1);

  CommonOptions common;
  RunOptions run;
  CostOptions cost;

  auto* plan = app.add_subcommand("plan", "Build the tile prefix array, injection and ordering");
  add_common(plan, common);

  auto* runc = app.add_subcommand("run", "Execute the batch on the CPU and optionally verify");
  add_common(runc, common);
  runc->add_flag("--verify", run.verify, "Compare against the naive per-expert loop");
  runc->add_option("--exec", run.exec, "Block execution policy")
      ->check(CLI::IsMember({"sequential", "parallel"}));
  runc->add_option("--threads", run.threads, "Worker threads for --exec parallel");
  runc->add_flag("--wide", run.wide, "Accumulate dot products in long double");
  runc->add_option("--data-seed", run.data_seed, "Seed for generated integer tokens and weights");
  runc->add_option("--tokens", run.tokens_path, "num_tokens x k float64 little-endian file");
  runc->add_option("--weights", run.weights_path, "num_experts x k x n float64 little-endian file");
  runc->add_option("--tolerance", run.tolerance, "Relative tolerance for --verify");
  runc->add_option("--trace-csv", run.trace_csv, "Also write the trace as CSV");

  auto* costc = app.add_subcommand("cost", "Price the batch with the wave cost model");
  add_common(costc, common);
  costc->add_option("--profile", cost.profile, "h20, h800 or a profile JSON path");
  costc->add_option("--csv", cost.csv, "Also write the per-wave table as CSV");

  auto* scen = app.add_subcommand("scenarios", "Compare balanced, best and worst routing");
  add_common(scen, common, false);
  scen->add_option("--profile", cost.profile, "h20, h800 or a profile JSON path");
  scen->add_option("--csv", cost.csv, "Also write the comparison table as CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitInput;
  }

  try {
    if (*plan) return cmd_plan(common);
    if (*runc) return cmd_run(common, run);
    if (*costc) return cmd_cost(common, cost);
    if (*scen) return cmd_scenarios(common, cost);
  } catch (const VerificationFailure& e) {
    std::cerr << "verification failed: " << e.what() << '\n';
    return kExitVerify;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  }
  return 0;
}
