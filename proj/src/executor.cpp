// Copyright 2026 The tilebatch Authors
// SPDX-License-Identifier: Apache-2.0

#include "tilebatch/executor.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>

namespace tilebatch {

Matrix random_integer_matrix(std::size_t rows, std::size_t cols, int lo, int hi,
                             std::uint64_t seed) {
  Matrix m(rows, cols);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> dist(lo, hi);
  for (double& v : m.data) v = dist(rng);
  return m;
}

Matrix random_real_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  Matrix m(rows, cols);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  for (double& v : m.data) v = dist(rng);
  return m;
}

WriteShadow::WriteShadow(std::span<const Matrix> outputs) {
  outputs_.reserve(outputs.size());
  for (const Matrix& m : outputs) {
    Counts c;
    c.cols = m.cols;
    c.size = m.rows * m.cols;
    c.n = std::make_unique<std::atomic<std::uint32_t>[]>(c.size);
    for (std::size_t i = 0; i < c.size; ++i) c.n[i].store(0, std::memory_order_relaxed);
    outputs_.push_back(std::move(c));
  }
}

void WriteShadow::mark(std::size_t output, std::size_t row_begin, std::size_t row_end,
                       std::size_t col_begin, std::size_t col_end) {
  Counts& c = outputs_.at(output);
  for (std::size_t r = row_begin; r < row_end; ++r) {
    for (std::size_t col = col_begin; col < col_end; ++col) {
      c.n[r * c.cols + col].fetch_add(1, std::memory_order_relaxed);
    }
  }
}

bool WriteShadow::exactly_once() const {
  for (const Counts& c : outputs_) {
    for (std::size_t i = 0; i < c.size; ++i) {
      if (c.n[i].load(std::memory_order_relaxed) != 1) return false;
    }
  }
  return true;
}

std::optional<std::string> WriteShadow::first_violation() const {
  for (std::size_t o = 0; o < outputs_.size(); ++o) {
    const Counts& c = outputs_[o];
    for (std::size_t i = 0; i < c.size; ++i) {
      const std::uint32_t n = c.n[i].load(std::memory_order_relaxed);
      if (n != 1) {
        return "output " + std::to_string(o) + " element (" + std::to_string(i / c.cols) + ", " +
               std::to_string(i % c.cols) + ") written " + std::to_string(n) + " times";
      }
    }
  }
  return std::nullopt;
}

std::uint32_t WriteShadow::count(std::size_t output, std::size_t row, std::size_t col) const {
  const Counts& c = outputs_.at(output);
  return c.n[row * c.cols + col].load(std::memory_order_relaxed);
}

TileDemand gemm_tile_demand(const GemmShape& shape, const TilingStrategy& strategy,
                            std::uint64_t tile, double element_bytes) {
  const TileRect rect = tile_rect(shape, strategy, tile);
  const double rows = static_cast<double>(rect.rows());
  const double cols = static_cast<double>(rect.cols());
  const double k = static_cast<double>(shape.k);
  TileDemand d;
  d.flops = 2.0 * rows * cols * k;
  d.issued_flops = 2.0 * strategy.tile_m * static_cast<double>(strategy.tile_n) * k;
  d.bytes = (rows * k + k * cols + rows * cols) * element_bytes;
  return d;
}

namespace {

template <typename Acc>
void compute_tile(const Matrix& lhs, std::span<const std::uint32_t> rows, const Matrix& rhs,
                  Matrix& out, const TileRect& rect) {
  const std::size_t k = rhs.rows;
  for (std::size_t r = rect.row_begin; r < rect.row_end; ++r) {
    const double* a = &lhs.data[std::size_t{rows[r]} * lhs.cols];
    for (std::size_t c = rect.col_begin; c < rect.col_end; ++c) {
      Acc acc = 0;
      for (std::size_t kk = 0; kk < k; ++kk) {
        acc += static_cast<Acc>(a[kk]) * static_cast<Acc>(rhs.data[kk * rhs.cols + c]);
      }
      out(r, c) = static_cast<double>(acc);
    }
  }
}

template <typename T>
const T& slot(const std::vector<T>& v, std::size_t i, const char* what) {
  if (i >= v.size()) throw std::logic_error(std::string("dangling ") + what + " handle");
  return v[i];
}

template <typename Acc>
Matrix matmul_impl(const Matrix& a, const Matrix& b) {
  Matrix c(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i) {
    for (std::size_t j = 0; j < b.cols; ++j) {
      Acc acc = 0;
      for (std::size_t kk = 0; kk < a.cols; ++kk) {
        acc += static_cast<Acc>(a(i, kk)) * static_cast<Acc>(b(kk, j));
      }
      c(i, j) = static_cast<double>(acc);
    }
  }
  return c;
}

}  // namespace

TaskFunc make_gemm_taskfunc(const StrategyCatalog& catalog, int kind, const GemmWorkspace& ws,
                            GemmFuncOptions options) {
  const TilingStrategy strategy = catalog.at(kind);
  return [strategy, &ws, options](std::uint32_t tile, const Task& task) -> std::optional<TileDemand> {
    if (task.kind != strategy.id) {
      throw std::logic_error("task of kind " + std::to_string(task.kind) +
                             " routed to the function for kind " + std::to_string(strategy.id));
    }
    const TileRect rect = tile_rect(task.shape, strategy, tile);
    const Matrix* lhs = slot(ws.lhs, task.params.token_index_array_ref, "lhs");
    const auto rows = slot(ws.row_index, task.params.token_index_array_ref, "row index");
    const Matrix* rhs = slot(ws.weights, task.params.weight_ref, "weight");
    Matrix* out = slot(ws.outputs, task.params.output_ref, "output");
    if (rows.size() != task.shape.m || rhs->rows != task.shape.k || rhs->cols != task.shape.n ||
        lhs->cols != task.shape.k || out->rows != task.shape.m || out->cols != task.shape.n) {
      throw std::logic_error("buffers for task " + std::to_string(task.index) +
                             " do not match its shape");
    }
    for (std::size_t r = rect.row_begin; r < rect.row_end; ++r) {
      if (rows[r] >= lhs->rows) throw std::logic_error("row index beyond the lhs matrix");
    }
    if (options.accumulator == AccumulatorMode::kWide) {
      compute_tile<long double>(*lhs, rows, *rhs, *out, rect);
    } else {
      compute_tile<double>(*lhs, rows, *rhs, *out, rect);
    }
    if (ws.shadow) {
      ws.shadow->mark(task.params.output_ref, rect.row_begin, rect.row_end, rect.col_begin,
                      rect.col_end);
    }
    return gemm_tile_demand(task.shape, strategy, tile, options.element_bytes);
  };
}

TaskFunc make_gemm_demand_taskfunc(const StrategyCatalog& catalog, int kind,
                                   double element_bytes) {
  const TilingStrategy strategy = catalog.at(kind);
  return [strategy, element_bytes](std::uint32_t tile,
                                   const Task& task) -> std::optional<TileDemand> {
    return gemm_tile_demand(task.shape, strategy, tile, element_bytes);
  };
}

TaskFuncRegistry make_gemm_registry(const StrategyCatalog& catalog, const GemmWorkspace& ws,
                                    GemmFuncOptions options) {
  TaskFuncRegistry reg;
  for (const auto& s : catalog.strategies()) reg.add(s.id, make_gemm_taskfunc(catalog, s.id, ws, options));
  return reg;
}

TaskFuncRegistry make_demand_registry(const StrategyCatalog& catalog, double element_bytes) {
  TaskFuncRegistry reg;
  for (const auto& s : catalog.strategies()) {
    reg.add(s.id, make_gemm_demand_taskfunc(catalog, s.id, element_bytes));
  }
  return reg;
}

Matrix gather_rows(const Matrix& source, std::span<const std::uint32_t> rows) {
  Matrix out(rows.size(), source.cols);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    std::copy_n(&source.data[std::size_t{rows[r]} * source.cols], source.cols,
                &out.data[r * source.cols]);
  }
  return out;
}

Matrix matmul(const Matrix& a, const Matrix& b, AccumulatorMode mode) {
  if (a.cols != b.rows) throw ConfigError("matmul inner dimensions differ");
  return mode == AccumulatorMode::kWide ? matmul_impl<long double>(a, b) : matmul_impl<double>(a, b);
}

MoeBuffers make_integer_buffers(const RoutingTable& routing, WeightShape weight,
                                std::uint64_t seed) {
  MoeBuffers b;
  b.tokens = random_integer_matrix(routing.num_tokens, weight.k, -8, 8, seed);
  b.weights.reserve(routing.num_experts);
  for (std::uint32_t e = 0; e < routing.num_experts; ++e) {
    b.weights.push_back(random_integer_matrix(weight.k, weight.n, -8, 8, seed + 1 + e));
  }
  return b;
}

void check_buffers(const MoeBuffers& buffers, const RoutingTable& routing, WeightShape weight) {
  if (buffers.tokens.rows != routing.num_tokens || buffers.tokens.cols != weight.k) {
    throw ConfigError("token matrix must be num_tokens x k");
  }
  if (buffers.weights.size() != routing.num_experts) {
    throw ConfigError("need one weight matrix per expert");
  }
  for (const Matrix& w : buffers.weights) {
    if (w.rows != weight.k || w.cols != weight.n) throw ConfigError("weight matrices must be k x n");
  }
}

Matrix naive_moe_oracle(const RoutingTable& routing, std::span<const Matrix> weights,
                        const Matrix& tokens, AccumulatorMode mode) {
  routing.validate();
  const std::size_t n = weights.empty() ? 0 : weights.front().cols;
  Matrix combined(routing.num_tokens, n);
  for (std::uint32_t e = 1; e <= routing.num_experts; ++e) {
    std::vector<std::uint32_t> routed;
    std::vector<double> gate;
    for (std::uint32_t t = 0; t < routing.num_tokens; ++t) {
      const auto chosen = routing.choices_of(t);
      for (std::uint32_t s = 0; s < routing.top_k; ++s) {
        if (chosen[s] == e) {
          routed.push_back(t);
          gate.push_back(routing.gate(t, s));
        }
      }
    }
    if (routed.empty()) continue;
    const Matrix out = matmul(gather_rows(tokens, routed), weights[e - 1], mode);
    for (std::size_t r = 0; r < routed.size(); ++r) {
      for (std::size_t c = 0; c < n; ++c) combined(routed[r], c) += gate[r] * out(r, c);
    }
  }
  return combined;
}

MoeExecution execute_moe(const MoeBatch& mb, const RoutingTable& routing,
                         const MoeBuffers& buffers, const StrategyCatalog& catalog,
                         const ExecOptions& options) {
  check_buffers(buffers, routing, mb.weight);
  const std::size_t experts = mb.arrays.num_experts();
  MoeExecution ex;
  ex.expert_outputs.reserve(experts);
  for (std::size_t e = 0; e < experts; ++e) {
    ex.expert_outputs.emplace_back(mb.arrays.buckets[e].size(), mb.weight.n);
  }

  std::optional<WriteShadow> shadow;
  if (options.track_writes) shadow.emplace(ex.expert_outputs);

  GemmWorkspace ws;
  for (std::size_t e = 0; e < experts; ++e) {
    ws.lhs.push_back(&buffers.tokens);
    ws.row_index.emplace_back(mb.arrays.buckets[e]);
    ws.weights.push_back(&buffers.weights[e]);
    ws.outputs.push_back(&ex.expert_outputs[e]);
  }
  ws.shadow = shadow ? &*shadow : nullptr;

  const TaskFuncRegistry registry =
      make_gemm_registry(catalog, ws, {options.accumulator, kModelElementBytes});
  ex.trace = launch(mb.batch, mb.plan, registry, options.policy);
  if (shadow) {
    ex.write_violation = shadow->first_violation();
    ex.writes_exactly_once = !ex.write_violation.has_value();
  }

  ex.combined = Matrix(routing.num_tokens, mb.weight.n);
  for (std::uint32_t e = 1; e <= experts; ++e) {
    const auto bucket = mb.arrays.bucket(e);
    const Matrix& out = ex.expert_outputs[e - 1];
    for (std::size_t r = 0; r < bucket.size(); ++r) {
      const std::uint32_t t = bucket[r];
      const auto chosen = routing.choices_of(t);
      const auto s = static_cast<std::uint32_t>(std::find(chosen.begin(), chosen.end(), e) -
                                                chosen.begin());
      const double g = routing.gate(t, s);
      for (std::size_t c = 0; c < out.cols; ++c) ex.combined(t, c) += g * out(r, c);
    }
  }
  return ex;
}

namespace {

std::string describe(const Mismatch& at, double max_abs) {
  std::ostringstream os;
  os.precision(17);
  os << "output mismatch at (" << at.row << ", " << at.col << "): expected " << at.expected
     << ", got " << at.actual << " (max abs diff " << max_abs << ")";
  return os.str();
}

}  // namespace

VerificationFailure::VerificationFailure(const Mismatch& at, double max_abs_diff)
    : Error(describe(at, max_abs_diff)), at_(at), max_abs_diff_(max_abs_diff) {}

VerificationReport compare_outputs(const Matrix& expected, const Matrix& actual,
                                   double rel_tolerance) {
  if (expected.rows != actual.rows || expected.cols != actual.cols) {
    throw VerificationFailure({expected.rows, expected.cols, 0.0, 0.0}, INFINITY);
  }
  VerificationReport rep;
  std::optional<Mismatch> first;
  for (std::size_t r = 0; r < expected.rows; ++r) {
    for (std::size_t c = 0; c < expected.cols; ++c) {
      const double e = expected(r, c);
      const double a = actual(r, c);
      const double diff = std::fabs(a - e);
      if (!(diff == 0.0)) rep.exact_match = false;
      rep.max_abs_diff = std::max(rep.max_abs_diff, diff);
      rep.max_rel_diff = std::max(rep.max_rel_diff, diff / std::max(1.0, std::fabs(e)));
      if (!first && !(diff <= rel_tolerance * std::max(1.0, std::fabs(e)))) {
        first = Mismatch{r, c, e, a};
      }
    }
  }
  if (first) throw VerificationFailure(*first, rep.max_abs_diff);
  return rep;
}

VerificationReport run_and_verify(const RoutingTable& routing, WeightShape weight,
                                  const MoeBuffers& buffers, const StrategyCatalog& catalog,
                                  const MoePlanOptions& plan_options,
                                  const ExecOptions& exec_options, double rel_tolerance,
                                  ExecutionTrace* trace_out) {
  routing.validate();
  check_buffers(buffers, routing, weight);
  if (std::size_t{routing.num_tokens} * routing.top_k == 0) {
    if (trace_out) trace_out->records.clear();
    return {};
  }
  const MoeBatch mb = build_moe_batch(routing, weight, catalog, plan_options);
  MoeExecution ex = execute_moe(mb, routing, buffers, catalog, exec_options);
  if (ex.write_violation) throw VerificationFailure("tile cover broken: " + *ex.write_violation);
  const Matrix expected =
      naive_moe_oracle(routing, buffers.weights, buffers.tokens, exec_options.accumulator);
  VerificationReport rep = compare_outputs(expected, ex.combined, rel_tolerance);
  rep.tiles_executed = ex.trace.records.size();
  rep.nonempty_tasks = mb.plan.sigma.size();
  if (trace_out) *trace_out = std::move(ex.trace);
  return rep;
}

}  // namespace tilebatch
