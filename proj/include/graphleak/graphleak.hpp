/*
 * Copyright 2026 The graphleak Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */


#pragma once

#include "graphleak/adam.hpp"
#include "graphleak/attack.hpp"
#include "graphleak/autodiff.hpp"
#include "graphleak/constraints.hpp"
#include "graphleak/experiment.hpp"
#include "graphleak/federation.hpp"
#include "graphleak/gcn.hpp"
#include "graphleak/graph_data.hpp"
#include "graphleak/hash.hpp"
#include "graphleak/metrics.hpp"
#include "graphleak/mgae.hpp"
#include "graphleak/random.hpp"
#include "graphleak/tensor.hpp"
