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

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>

namespace ios {

inline constexpr const char *kVersion = "0.3.1";

using Complex = std::complex<double>;
using Vec3 = Eigen::Vector3d;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RowCVector = Eigen::RowVectorXcd;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;
inline constexpr double kSpeedOfLight = 299792458.0;

// Exception hierarchy. The CLI maps these onto exit codes 1, 2 and 3.
struct ConfigError : std::invalid_argument
{
    using std::invalid_argument::invalid_argument;
};

struct NumericalError : std::runtime_error
{
    using std::runtime_error::runtime_error;
};

struct InfeasibleError : std::runtime_error
{
    using std::runtime_error::runtime_error;
};

inline double deg2rad(double deg) { return deg * kPi / 180.0; }
inline double rad2deg(double rad) { return rad * 180.0 / kPi; }

// Maps any angle onto [0, 2*pi).
inline double wrap_2pi(double rad)
{
    double r = std::fmod(rad, kTwoPi);
    if (r < 0.0)
        r += kTwoPi;
    if (r >= kTwoPi) // fmod rounding can land exactly on 2*pi
        r = 0.0;
    return r;
}

inline double wavelength(double carrier_hz)
{
    if (!(carrier_hz > 0.0))
        throw ConfigError("carrier frequency must be positive");
    return kSpeedOfLight / carrier_hz;
}

// Stream splitter for per-restart and per-worker RNG seeds.
inline std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream)
{
    return splitmix64(seed ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
}

inline double db2lin(double db) { return std::pow(10.0, db / 10.0); }
inline double lin2db(double lin) { return 10.0 * std::log10(lin); }
inline double watts_to_dbm(double w) { return 10.0 * std::log10(std::max(w, 1e-300) / 1e-3); }

} // namespace ios
