// SPDX-License-Identifier: Apache-2.0
//
// iosim - link-level simulation and beamforming for intelligent omni-surfaces
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

// Random element circuits drawn log-uniformly over a box of plausible
// component values for a sub-wavelength element near 3.6 GHz.

#pragma once

#include "ios/element.hpp"

#include <cmath>
#include <random>

namespace ios::testing {

inline CircuitParams random_circuit(std::mt19937_64 &rng, bool lossless = false)
{
    std::uniform_real_distribution<double> u(0.0, 1.0);
    auto log_uniform = [&](double lo, double hi) { return lo * std::pow(hi / lo, u(rng)); };
    auto branch = [&] {
        return SeriesRlc{lossless ? 0.0 : 5.0 * u(rng), log_uniform(0.1e-9, 2e-9), log_uniform(0.1e-12, 1e-12)};
    };
    CircuitParams p;
    p.patch = branch();
    p.substrate = branch();
    p.feedline = branch();
    p.ys1 = {lossless ? 0.0 : 0.01 * u(rng), log_uniform(0.005, 0.05)};
    p.ys2 = {lossless ? 0.0 : 0.01 * u(rng), log_uniform(0.005, 0.05)};
    p.diode.r_on = lossless ? 0.0 : log_uniform(0.5, 5.0);
    p.diode.l_on = log_uniform(0.1e-9, 1e-9);
    p.diode.c_off = log_uniform(0.05e-12, 0.5e-12);
    p.diode.r_off = lossless ? 0.0 : 2.0 * u(rng);
    return p;
}

} // namespace ios::testing
