// Copyright 2026 The tilebatch Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tilebatch/dispatch.hpp"
#include "tilebatch/errors.hpp"
#include "tilebatch/moe_planner.hpp"

namespace tilebatch {

/// Dense row-major matrix of doubles.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  friend bool operator==(const Matrix&, const Matrix&) = default;
};

/// Uniform integers in [lo, hi] stored as doubles; products and sums stay exact.
Matrix random_integer_matrix(std::size_t rows, std::size_t cols, int lo, int hi,
                             std::uint64_t seed);
Matrix random_real_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed);

enum class AccumulatorMode {
  kDouble,
  kWide,  // long double dot products, rounded once on store
};

/// Per-element write counts for a set of output matrices.
class WriteShadow {
 public:
  explicit WriteShadow(std::span<const Matrix> outputs);

  void mark(std::size_t output, std::size_t row_begin, std::size_t row_end, std::size_t col_begin,
            std::size_t col_end);
  /// True when every element of every output was written exactly once.
  bool exactly_once() const;
  /// Description of the first element not written exactly once, if any.
  std::optional<std::string> first_violation() const;
  std::uint32_t count(std::size_t output, std::size_t row, std::size_t col) const;

 private:
  struct Counts {
    std::size_t cols = 0;
    std::size_t size = 0;
    std::unique_ptr<std::atomic<std::uint32_t>[]> n;
  };
  std::vector<Counts> outputs_;
};

/// Buffers a GEMM task function reads and writes, indexed by the task's parameter handles.
/// Output `o` has one row per entry of the row index used with it.
struct GemmWorkspace {
  std::vector<const Matrix*> lhs;                          // by token_index_array_ref
  std::vector<std::span<const std::uint32_t>> row_index;   // by token_index_array_ref
  std::vector<const Matrix*> weights;                      // by weight_ref
  std::vector<Matrix*> outputs;                            // by output_ref
  WriteShadow* shadow = nullptr;
};

struct GemmFuncOptions {
  AccumulatorMode accumulator = AccumulatorMode::kDouble;
  double element_bytes = kModelElementBytes;
};

/// Demand of one GEMM tile: flops over the clipped tile, issued flops over the full
/// tile shape and bytes for the clipped A rows, B columns and C tile.
TileDemand gemm_tile_demand(const GemmShape& shape, const TilingStrategy& strategy,
                            std::uint64_t tile, double element_bytes = kModelElementBytes);

/// Computes one output tile: out[r, c] = sum_k lhs[row_index[r], k] * weight[k, c]
/// for the tile's clipped rectangle, gathering lhs rows through the row index.
TaskFunc make_gemm_taskfunc(const StrategyCatalog& catalog, int kind, const GemmWorkspace& ws,
                            GemmFuncOptions options = {});

/// Reports the tile demand without touching any buffer.
TaskFunc make_gemm_demand_taskfunc(const StrategyCatalog& catalog, int kind,
                                   double element_bytes = kModelElementBytes);

TaskFuncRegistry make_gemm_registry(const StrategyCatalog& catalog, const GemmWorkspace& ws,
                                    GemmFuncOptions options = {});
TaskFuncRegistry make_demand_registry(const StrategyCatalog& catalog,
                                      double element_bytes = kModelElementBytes);

/// Contiguous copy of the selected rows.
Matrix gather_rows(const Matrix& source, std::span<const std::uint32_t> rows);
Matrix matmul(const Matrix& a, const Matrix& b, AccumulatorMode mode = AccumulatorMode::kDouble);

struct MoeBuffers {
  Matrix tokens;                // num_tokens x k
  std::vector<Matrix> weights;  // per expert, k x n
};

/// Integer-valued tokens and weights in [-8, 8] derived from `seed`.
MoeBuffers make_integer_buffers(const RoutingTable& routing, WeightShape weight,
                                std::uint64_t seed);

/// Throws ConfigError if the buffers do not match the routing and weight shape.
void check_buffers(const MoeBuffers& buffers, const RoutingTable& routing, WeightShape weight);

/// Reference MoE layer: experts one after another in ascending id order, each gathering
/// its tokens, multiplying and accumulating gate-weighted rows into the combined output.
Matrix naive_moe_oracle(const RoutingTable& routing, std::span<const Matrix> weights,
                        const Matrix& tokens, AccumulatorMode mode = AccumulatorMode::kDouble);

struct ExecOptions {
  ExecutionPolicy policy;
  AccumulatorMode accumulator = AccumulatorMode::kDouble;
  bool track_writes = false;
};

struct MoeExecution {
  ExecutionTrace trace;
  std::vector<Matrix> expert_outputs;  // by expert id - 1; row r is token bucket[r]
  Matrix combined;                     // num_tokens x n
  std::optional<bool> writes_exactly_once;  // set when writes are tracked
  std::optional<std::string> write_violation;
};

/// Runs the batched kernel over a planned MoE step, then combines expert rows per token
/// in ascending expert order.
MoeExecution execute_moe(const MoeBatch& mb, const RoutingTable& routing,
                         const MoeBuffers& buffers, const StrategyCatalog& catalog,
                         const ExecOptions& options = {});

struct Mismatch {
  std::size_t row = 0;
  std::size_t col = 0;
  double expected = 0.0;
  double actual = 0.0;
};

class VerificationFailure : public Error {
 public:
  VerificationFailure(const Mismatch& at, double max_abs_diff);
  explicit VerificationFailure(const std::string& what) : Error(what), at_{}, max_abs_diff_(0.0) {}
  const Mismatch& where() const noexcept { return at_; }
  double max_abs_diff() const noexcept { return max_abs_diff_; }

 private:
  Mismatch at_;
  double max_abs_diff_;
};

struct VerificationReport {
  double max_abs_diff = 0.0;
  double max_rel_diff = 0.0;
  bool exact_match = true;
  std::uint64_t tiles_executed = 0;
  std::uint64_t nonempty_tasks = 0;
};

/// Compares two equally shaped matrices. A coordinate fails when
/// |actual - expected| > rel_tolerance * max(1, |expected|); the first failure is thrown.
VerificationReport compare_outputs(const Matrix& expected, const Matrix& actual,
                                   double rel_tolerance = 0.0);

/// Plans, executes and checks one MoE step against naive_moe_oracle. A step with no
/// routed tokens yields an empty, vacuously matching report.
VerificationReport run_and_verify(const RoutingTable& routing, WeightShape weight,
                                  const MoeBuffers& buffers, const StrategyCatalog& catalog,
                                  const MoePlanOptions& plan_options = {},
                                  const ExecOptions& exec_options = {},
                                  double rel_tolerance = 0.0,
                                  ExecutionTrace* trace_out = nullptr);

}  // namespace tilebatch
