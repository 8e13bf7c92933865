// Copyright 2026 The tilebatch Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tilebatch/dispatch.hpp"

namespace tilebatch {

struct DeviceProfile {
  std::string name;
  std::uint32_t sm_count = 1;   // blocks per wave
  double peak_flops = 1.0;      // flop/s
  double peak_bandwidth = 1.0;  // byte/s

  /// flop per byte at which a block is equally compute- and memory-limited.
  double machine_balance() const noexcept { return peak_flops / peak_bandwidth; }

  /// Throws ModelError unless every field is positive.
  void validate() const;

  // Peak throughput figures are the vendor dense FP16/BF16 Tensor Core numbers.
  // SM count and bandwidth are public spec-sheet estimates, not measurements.
  static DeviceProfile h20_like();
  static DeviceProfile h800_like();
  static std::vector<DeviceProfile> bundled();
};

enum class Binding { kCompute, kMemory };

struct WaveCost {
  std::uint32_t first_block = 0;
  std::uint32_t blocks = 0;
  double compute_time = 0.0;
  double memory_time = 0.0;
  Binding binding = Binding::kCompute;

  double time() const noexcept { return compute_time > memory_time ? compute_time : memory_time; }
};

struct CostReport {
  std::string profile;
  double total_time = 0.0;     // seconds
  double useful_flops = 0.0;
  double issued_flops = 0.0;
  double bytes = 0.0;
  double achieved_flops = 0.0; // useful flops / total time
  double peak_fraction = 0.0;
  std::vector<WaveCost> waves;
};

/// Wave model: blocks are taken in trace order, sm_count at a time; a wave lasts
/// max(sum issued flops / peak_flops, sum bytes / peak_bandwidth).
/// Throws ModelError on an empty trace or a record without demand data.
CostReport estimate(const ExecutionTrace& trace, const DeviceProfile& profile);

}  // namespace tilebatch
