/*
 * Copyright 2026 The RC-Flow Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include "rcflow/analysis.hpp"
#include "rcflow/baselines.hpp"
#include "rcflow/binary_io.hpp"
#include "rcflow/channelgen.hpp"
#include "rcflow/core.hpp"
#include "rcflow/experiment.hpp"
#include "rcflow/fixtures.hpp"
#include "rcflow/linalg.hpp"
#include "rcflow/measurement.hpp"
#include "rcflow/network.hpp"
#include "rcflow/prior.hpp"
#include "rcflow/rng.hpp"
#include "rcflow/solver.hpp"
