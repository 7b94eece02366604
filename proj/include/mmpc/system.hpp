/*
 * Copyright 2026 The mmpc Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include "mmpc/grid.hpp"

namespace mmpc {

/// Link-level constants shared by the SE kernel and the solver.
struct SystemParams {
    int num_antennas = 200;
    int coherence_symbols = 200;
    double noise_power_mw = 0.0;
    /// Per-symbol power budget P, indexed [cell][slot], mW.
    SlotMatrix max_power_mw;
};

}  // namespace mmpc
