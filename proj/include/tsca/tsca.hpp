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

// Umbrella header: the whole streaming-encoder engine.

#pragma once

#include "tsca/attention.hpp"   // IWYU pragma: export
#include "tsca/context.hpp"     // IWYU pragma: export
#include "tsca/conv.hpp"        // IWYU pragma: export
#include "tsca/encoder.hpp"     // IWYU pragma: export
#include "tsca/errors.hpp"      // IWYU pragma: export
#include "tsca/io.hpp"          // IWYU pragma: export
#include "tsca/mask.hpp"        // IWYU pragma: export
#include "tsca/mat.hpp"         // IWYU pragma: export
#include "tsca/oracle.hpp"      // IWYU pragma: export
#include "tsca/rng.hpp"         // IWYU pragma: export
#include "tsca/streaming.hpp"   // IWYU pragma: export
