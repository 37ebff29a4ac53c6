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


// Line-of-sight training geometry: a 2 x 32 aperture with quarter-wave
// horizontal pitch, the BS far away at an oblique angle and one user per
// entry of `users`, each placed at direction u on the given side.

#pragma once

#include "ios/channel.hpp"

#include <cmath>
#include <limits>
#include <utility>
#include <vector>

namespace ios::testing {

struct LosUser
{
    double u = 0.0;
    Side side = Side::reflect;
};

inline Scenario los_training_scenario(const std::vector<LosUser> &users, double u_in = 0.9375,
                                      double bs_range = 100.0, double user_range = 50.0)
{
    Scenario sc;
    sc.kappa = std::numeric_limits<double>::infinity();
    sc.noise_power_w = 1e-18;
    sc.ios.rows = 2;
    sc.ios.cols = 32;
    sc.ios.pitch_x = 0.25 * sc.lambda();
    sc.bs.n_antennas = 4;
    const auto f = surface_frame(sc.ios);
    sc.bs.position = f.center + bs_range * (u_in * f.horizontal + std::sqrt(1.0 - u_in * u_in) * f.normal);
    for (const auto &lu : users)
    {
        const Vec3 n = lu.side == Side::reflect ? f.normal : Vec3(-f.normal);
        UserConfig uc;
        uc.position = f.center + user_range * (lu.u * f.horizontal + std::sqrt(1.0 - lu.u * lu.u) * n);
        uc.blocked = true;
        sc.users.push_back(uc);
    }
    return sc;
}

} // namespace ios::testing
