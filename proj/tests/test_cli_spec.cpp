// Copyright 2026 The tilebatch Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "tilebatch/errors.hpp"
#include "tilebatch/report.hpp"
#include "tilebatch/workload_spec.hpp"

namespace tilebatch {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

TEST(WorkloadSpec, GenericBatch) {
  const auto spec = parse_workload_spec(json::parse(R"({
    "type": "generic",
    "strategies": [{"id": 1, "tile_m": 2, "tile_n": 2}],
    "tasks": [{"kind": 1, "m": 3, "n": 4, "k": 5}],
    "warp_size": 8})"));
  const auto& g = std::get<GenericWorkload>(spec);
  EXPECT_EQ(g.batch.warp_size, 8u);
  ASSERT_EQ(g.batch.tasks.size(), 1u);
  EXPECT_EQ(g.batch.tasks[0].index, 1u);
  EXPECT_EQ(tile_count(g.batch.tasks[0], g.catalog), 4u);
}

TEST(WorkloadSpec, MoeDefaultsAndExplicitRouting) {
  const auto spec = parse_workload_spec(json::parse(R"({
    "num_tokens": 2, "num_experts": 3, "top_k": 2, "weight_shape": [4, 6],
    "routing": [[1, 3], [2, 3]], "gates": [[0.25, 0.75], [0.5, 0.5]]})"));
  const auto& m = std::get<MoeWorkload>(spec);
  ASSERT_TRUE(m.routing.has_value());
  EXPECT_EQ(m.shape.weight.k, 4u);
  EXPECT_EQ(m.shape.weight.n, 6u);
  const auto r = resolve_routing(m);
  EXPECT_DOUBLE_EQ(r.gate(0, 1), 0.75);
  EXPECT_EQ(r.choices, (std::vector<std::uint32_t>{1, 3, 2, 3}));
}

TEST(WorkloadSpec, SchemaErrors) {
  const char* bad[] = {
      R"({"num_experts": 4, "top_k": 5})",
      R"({"num_tokens": 4, "num_experts": 4, "top_k": 1, "colour": "red"})",
      R"({"num_tokens": -4, "num_experts": 4, "top_k": 1})",
      R"({"num_tokens": 2, "num_experts": 3, "top_k": 1, "routing": [[4], [1]]})",
      R"({"num_tokens": 2, "num_experts": 3, "top_k": 1, "routing": [[1]]})",
      R"({"num_tokens": 2, "num_experts": 3, "top_k": 1, "routing": {"scenario": "chaotic"}})",
      R"({"type": "generic", "strategies": [{"id": 2, "tile_m": 2, "tile_n": 2}], "tasks": []})",
      R"({"type": "generic", "strategies": [{"id": 1, "tile_m": 2, "tile_n": 2}],
          "tasks": [{"kind": 3, "m": 1, "n": 1, "k": 1}]})",
      R"({"num_tokens": 1, "num_experts": 3, "top_k": 1, "routing": [[2]], "gates": [[1, 2]]})",
      R"({"num_tokens": 1, "num_experts": 3, "top_k": 1, "gates": [[1]]})",
      R"([1, 2, 3])",
  };
  for (const char* text : bad) {
    EXPECT_THROW(parse_workload_spec(json::parse(text)), Error) << text;
  }
}

TEST(WorkloadSpec, RandomScenarioNeedsSeed) {
  const auto spec = parse_workload_spec(json::parse(
      R"({"num_tokens": 8, "num_experts": 4, "top_k": 2, "routing": {"scenario": "random"}})"));
  const auto& m = std::get<MoeWorkload>(spec);
  EXPECT_THROW(resolve_routing(m), SpecError);
  EXPECT_EQ(resolve_routing(m, 5).choices, resolve_routing(m, 5).choices);
}

TEST(WorkloadSpec, ProfilesByNameOrFile) {
  EXPECT_EQ(resolve_profile("h20").sm_count, 78u);
  EXPECT_EQ(resolve_profile("h800-like").sm_count, 132u);
  EXPECT_THROW(resolve_profile("no-such-profile"), SpecError);
}

TEST(WorkloadSpec, GenericRunVerifies) {
  GenericWorkload g{StrategyCatalog({{1, 3, 4}, {2, 5, 2}}), {}};
  g.batch.tasks = {{1, 1, {7, 9, 3}, {}}, {2, 2, {0, 4, 4}, {}}, {3, 2, {11, 5, 6}, {}}};
  const auto run = run_generic(g, 3);
  EXPECT_TRUE(run.report.exact_match);
  EXPECT_EQ(run.report.nonempty_tasks, 2u);
  EXPECT_EQ(run.report.tiles_executed, 9u + 9u);
}

TEST(Report, NamesRoundTrip) {
  for (auto o : {ExpertOrdering::kNatural, ExpertOrdering::kAlternating,
                 ExpertOrdering::kHalfInterval}) {
    EXPECT_EQ(parse_ordering(ordering_name(o)), o);
  }
  EXPECT_FALSE(parse_ordering("sideways").has_value());
}

TEST(Report, TraceCsv) {
  ExecutionTrace t;
  t.records.push_back({0, 0, 2, 1, 3, TileDemand{1, 2, 3}});
  std::ostringstream os;
  write_trace_csv(os, t);
  std::string header, row;
  std::istringstream is(os.str());
  std::getline(is, header);
  std::getline(is, row);
  EXPECT_NE(header.find("block"), std::string::npos);
  EXPECT_EQ(row.substr(0, 2), "0,");
}

// Command-line behaviour, exercised through the installed binary.

struct Result {
  int status = -1;
  std::string out;
};

Result run_cli(const std::string& args) {
  const std::string cmd = std::string(TILEBATCH_CLI_PATH) + " " + args + " 2>/dev/null";
  FILE* pipe = popen(cmd.c_str(), "r");
  Result r;
  if (!pipe) return r;
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
  const int st = pclose(pipe);
  r.status = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  return r;
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("tilebatch_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string write(const std::string& name, const std::string& text) {
    const fs::path p = dir_ / name;
    std::ofstream(p) << text;
    return p.string();
  }

  fs::path dir_;
};

TEST_F(Cli, PlanPrintsPrefix) {
  const auto spec = write("g.json", R"({"type": "generic",
    "strategies": [{"id": 1, "tile_m": 1, "tile_n": 1}],
    "tasks": [{"kind": 1, "m": 3, "n": 1, "k": 1}, {"kind": 1, "m": 1, "n": 1, "k": 1},
              {"kind": 1, "m": 4, "n": 1, "k": 1}, {"kind": 1, "m": 0, "n": 1, "k": 1}],
    "warp_size": 4})");
  const auto r = run_cli("plan " + spec);
  ASSERT_EQ(r.status, 0);
  const auto j = json::parse(r.out);
  EXPECT_EQ(j["schema"], kReportSchema);
  EXPECT_EQ(j["plan"]["tile_prefix"]["values"], json::parse("[3, 4, 8, 8]"));
  EXPECT_EQ(j["plan"]["sigma"], json::parse("[1, 2, 3]"));
}

TEST_F(Cli, ExitCodes) {
  EXPECT_EQ(run_cli("plan " + write("bad.json", R"({"num_experts": 4, "top_k": 5})")).status, 2);
  EXPECT_EQ(run_cli("plan " + (dir_ / "missing.json").string()).status, 2);
  EXPECT_EQ(run_cli("frobnicate").status, 2);
  const auto moe = write("m.json", R"({"num_tokens": 64, "num_experts": 4, "top_k": 2,
    "weight_shape": [16, 8], "routing": {"scenario": "balanced"}})");
  EXPECT_EQ(run_cli("run " + moe + " --verify").status, 0);
}

TEST_F(Cli, ParallelRunIsByteIdentical) {
  const auto moe = write("m.json", R"({"num_tokens": 300, "num_experts": 8, "top_k": 2,
    "weight_shape": [32, 200], "routing": {"scenario": "random", "seed": 11}})");
  const auto seq = run_cli("run " + moe + " --verify --exec sequential");
  const auto par = run_cli("run " + moe + " --verify --exec parallel --threads 4");
  ASSERT_EQ(seq.status, 0);
  ASSERT_EQ(par.status, 0);
  EXPECT_EQ(seq.out, par.out);
  EXPECT_TRUE(json::parse(seq.out)["verification"]["exact_match"].get<bool>());
}

TEST_F(Cli, SingleBlockCost) {
  const auto spec = write("one.json", R"({"type": "generic",
    "strategies": [{"id": 1, "tile_m": 1, "tile_n": 1}],
    "tasks": [{"kind": 1, "m": 1, "n": 1, "k": 1}]})");
  const auto prof = write("p.json",
                          R"({"name": "toy", "sm_count": 1, "peak_flops": 1e9, "peak_bandwidth": 1e9})");
  const auto r = run_cli("cost " + spec + " --profile " + prof);
  ASSERT_EQ(r.status, 0);
  const auto c = json::parse(r.out)["cost"];
  // 2 flops against 6 bytes: memory bound at 6 ns
  EXPECT_DOUBLE_EQ(c["total_time"].get<double>(), 6e-9);
  EXPECT_EQ(c["profile"], "toy");
}

TEST_F(Cli, SeedsChangeOnlyRoutingDependentFields) {
  const auto moe = write("m.json", R"({"num_tokens": 128, "num_experts": 16, "top_k": 2,
    "weight_shape": [16, 8], "routing": {"scenario": "random"}})");
  const auto a = run_cli("plan " + moe + " --seed 1");
  const auto b = run_cli("plan " + moe + " --seed 2");
  ASSERT_EQ(a.status, 0);
  ASSERT_EQ(b.status, 0);
  auto ja = json::parse(a.out), jb = json::parse(b.out);
  EXPECT_NE(ja["plan"]["experts"], jb["plan"]["experts"]);
  ja.erase("plan");
  jb.erase("plan");
  EXPECT_EQ(ja, jb);
  EXPECT_EQ(run_cli("plan " + moe).status, 2);  // random without a seed
}

TEST_F(Cli, ScenariosTable) {
  const auto r = run_cli("scenarios --profile h20");
  ASSERT_EQ(r.status, 0);
  const auto rows = json::parse(r.out)["scenarios"];
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0]["scenario"], "balanced");
  EXPECT_EQ(rows[1]["nonempty_experts"], 8);
}

}  // namespace
}  // namespace tilebatch
