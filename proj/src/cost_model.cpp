// Copyright 2026 The tilebatch Authors
// SPDX-License-Identifier: Apache-2.0

#include "tilebatch/cost_model.hpp"

#include <algorithm>
#include <cmath>

#include "tilebatch/errors.hpp"

namespace tilebatch {

void DeviceProfile::validate() const {
  if (sm_count == 0 || !(peak_flops > 0.0) || !(peak_bandwidth > 0.0)) {
    throw ModelError("device profile '" + name + "' needs positive sm_count, flops and bandwidth");
  }
}

DeviceProfile DeviceProfile::h20_like() { return {"h20-like", 78, 146e12, 4.0e12}; }

DeviceProfile DeviceProfile::h800_like() { return {"h800-like", 132, 989e12, 3.35e12}; }

std::vector<DeviceProfile> DeviceProfile::bundled() { return {h20_like(), h800_like()}; }

CostReport estimate(const ExecutionTrace& trace, const DeviceProfile& profile) {
  profile.validate();
  if (trace.records.empty()) throw ModelError("cannot estimate an empty trace");

  CostReport report;
  report.profile = profile.name;
  const std::size_t n = trace.records.size();
  for (std::size_t begin = 0; begin < n; begin += profile.sm_count) {
    const std::size_t end = std::min<std::size_t>(begin + profile.sm_count, n);
    double issued = 0.0;
    double bytes = 0.0;
    for (std::size_t i = begin; i < end; ++i) {
      const auto& rec = trace.records[i];
      if (!rec.demand) {
        throw ModelError("block " + std::to_string(rec.block) + " carries no demand data");
      }
      const TileDemand& d = *rec.demand;
      if (!std::isfinite(d.flops) || !std::isfinite(d.issued_flops) || !std::isfinite(d.bytes) ||
          d.flops < 0 || d.issued_flops < d.flops || d.bytes < 0) {
        throw ModelError("block " + std::to_string(rec.block) + " has invalid demand data");
      }
      issued += d.issued_flops;
      bytes += d.bytes;
      report.useful_flops += d.flops;
    }
    WaveCost w;
    w.first_block = static_cast<std::uint32_t>(begin);
    w.blocks = static_cast<std::uint32_t>(end - begin);
    w.compute_time = issued / profile.peak_flops;
    w.memory_time = bytes / profile.peak_bandwidth;
    w.binding = w.compute_time >= w.memory_time ? Binding::kCompute : Binding::kMemory;
    report.issued_flops += issued;
    report.bytes += bytes;
    report.total_time += w.time();
    report.waves.push_back(w);
  }
  if (report.total_time > 0.0) {
    report.achieved_flops = report.useful_flops / report.total_time;
    report.peak_fraction = report.achieved_flops / profile.peak_flops;
  }
  return report;
}

}  // namespace tilebatch
