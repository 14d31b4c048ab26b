// Copyright 2026 The septrack Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

/// @file septrack.hpp
/// Umbrella header.

#pragma once

#include "septrack/analysis.hpp"
#include "septrack/config.hpp"
#include "septrack/dataset.hpp"
#include "septrack/harness.hpp"
#include "septrack/io.hpp"
#include "septrack/linalg.hpp"
#include "septrack/loss.hpp"
#include "septrack/plot.hpp"
#include "septrack/rng.hpp"
#include "septrack/sampler.hpp"
#include "septrack/sgd.hpp"
#include "septrack/svm.hpp"
