// Copyright 2026 The tsca Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace tsca {

// Bad user-supplied configuration or input. CLI maps these to exit code 2.
struct InvalidConfig : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct InvalidOffset : InvalidConfig {
  using InvalidConfig::InvalidConfig;
};

struct ChunkSizeMismatch : InvalidConfig {
  using InvalidConfig::InvalidConfig;
};

struct HeterogeneousConfig : InvalidConfig {
  using InvalidConfig::InvalidConfig;
};

struct DegenerateInput : InvalidConfig {
  using InvalidConfig::InvalidConfig;
};

struct ShapeMismatch : InvalidConfig {
  using InvalidConfig::InvalidConfig;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Broken internal invariant. CLI maps these to exit code 3.
struct InternalError : std::logic_error {
  using std::logic_error::logic_error;
};

struct EmptyRow : InternalError {
  using InternalError::InternalError;
};

struct DistanceOutOfTable : InternalError {
  using InternalError::InternalError;
};

struct CacheDesync : InternalError {
  using InternalError::InternalError;
};

struct SessionClosed : InternalError {
  using InternalError::InternalError;
};

struct SessionOpen : InternalError {
  using InternalError::InternalError;
};

}  // namespace tsca
