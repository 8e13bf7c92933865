// Copyright 2026 The tilebatch Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace tilebatch {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad strategy catalog, unknown strategy id, malformed batch.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A task with zero tiles reached a path that requires every task to be non-empty.
class EmptyTaskError : public Error {
 public:
  EmptyTaskError(std::size_t task_index, const std::string& what)
      : Error(what), task_index_(task_index) {}
  std::size_t task_index() const noexcept { return task_index_; }

 private:
  std::size_t task_index_;
};

/// Nothing to launch: no tasks, or every task is empty.
class EmptyBatchError : public Error {
 public:
  using Error::Error;
};

/// Prefix sums no longer fit in the block index type.
class CapacityError : public Error {
 public:
  using Error::Error;
};

class MappingRangeError : public Error {
 public:
  using Error::Error;
};

class DispatchError : public Error {
 public:
  using Error::Error;
};

/// A per-block failure during launch, tagged with the offending block index.
class BlockDispatchError : public DispatchError {
 public:
  BlockDispatchError(std::uint32_t block, const std::string& what)
      : DispatchError("block " + std::to_string(block) + ": " + what), block_(block) {}
  std::uint32_t block_index() const noexcept { return block_; }

 private:
  std::uint32_t block_;
};

class RoutingError : public Error {
 public:
  using Error::Error;
};

class ModelError : public Error {
 public:
  using Error::Error;
};

/// Invalid workload description (schema or value violation).
class SpecError : public Error {
 public:
  using Error::Error;
};

}  // namespace tilebatch
