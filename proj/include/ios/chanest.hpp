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

// Grouped linear estimation of the effective channel: an all-OFF baseline
// plus one delta per element group, identified by single-group-ON probes.

#pragma once

#include "channel.hpp"

#include <cstdio>
#include <functional>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

namespace ios {

struct Grouping
{
    int rows = 0, cols = 0;
    int tile_rows = 0, tile_cols = 0;
    std::vector<std::vector<std::size_t>> groups; // element indices, row-major tiles
    std::vector<std::size_t> group_of;            // per element

    std::size_t size() const { return groups.size(); }
    std::size_t elements() const { return group_of.size(); }
};

inline Grouping make_groups(int rows, int cols, int tile_rows, int tile_cols)
{
    if (rows < 1 || cols < 1 || tile_rows < 1 || tile_cols < 1)
        throw ConfigError("panel and tile dimensions must be >= 1");
    if (rows % tile_rows || cols % tile_cols)
        throw ConfigError("tile " + std::to_string(tile_rows) + "x" + std::to_string(tile_cols) +
                          " does not divide panel " + std::to_string(rows) + "x" + std::to_string(cols));
    Grouping g{rows, cols, tile_rows, tile_cols, {}, {}};
    const int gr = rows / tile_rows, gc = cols / tile_cols;
    g.groups.resize(static_cast<std::size_t>(gr * gc));
    g.group_of.resize(static_cast<std::size_t>(rows * cols));
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
        {
            const auto grp = static_cast<std::size_t>((r / tile_rows) * gc + c / tile_cols);
            const auto m = static_cast<std::size_t>(r * cols + c);
            g.groups[grp].push_back(m);
            g.group_of[m] = grp;
        }
    return g;
}

using GroupStates = std::vector<std::uint8_t>; // one bit per group

// Element configuration with every element of group g in state s_g.
inline PhaseConfig expand_group_states(const Grouping &g, const GroupStates &s)
{
    if (s.size() != g.size())
        throw ConfigError("expected " + std::to_string(g.size()) + " group states, got " + std::to_string(s.size()));
    PhaseConfig cfg = PhaseConfig::uniform(g.elements());
    for (std::size_t m = 0; m < g.elements(); ++m)
        cfg.states[m] = s[g.group_of[m]];
    return cfg;
}

struct LinearChannelModel
{
    CMatrix base;               // K x N, all groups OFF
    std::vector<CMatrix> delta; // per group, K x N
    Grouping grouping;
};

// Measured effective channel (K x N) for one group-state vector.
using Probe = std::function<CMatrix(const GroupStates &)>;

struct EstimateResult
{
    LinearChannelModel model;
    std::size_t probes = 0;
};

inline EstimateResult estimate(const Probe &probe, const Grouping &g, int repeats)
{
    if (repeats < 1)
        throw ConfigError("repeats must be >= 1");
    if (g.size() == 0)
        throw ConfigError("grouping is empty");
    EstimateResult r;
    r.model.grouping = g;
    const GroupStates off(g.size(), 0);
    auto averaged = [&](const GroupStates &s) {
        CMatrix acc = probe(s);
        ++r.probes;
        for (int i = 1; i < repeats; ++i)
        {
            acc += probe(s);
            ++r.probes;
        }
        return CMatrix(acc / static_cast<double>(repeats));
    };
    r.model.base = averaged(off);
    for (std::size_t grp = 0; grp < g.size(); ++grp)
    {
        GroupStates on = off;
        on[grp] = 1;
        r.model.delta.push_back(averaged(on) - r.model.base);
    }
    return r;
}

inline CMatrix predict(const LinearChannelModel &m, const GroupStates &s)
{
    if (s.size() != m.delta.size())
        throw ConfigError("expected " + std::to_string(m.delta.size()) + " group states, got " +
                          std::to_string(s.size()));
    CMatrix h = m.base;
    for (std::size_t g = 0; g < s.size(); ++g)
        if (s[g])
            h += m.delta[g];
    return h;
}

// Probe on a synthesized channel, with optional additive CN(0, sigma^2)
// measurement noise per entry.
class CascadeProbe
{
  public:
    CascadeProbe(ChannelSet &&, const Grouping &, double = 0.0, std::uint64_t = 0) = delete;
    CascadeProbe(const ChannelSet &ch, const Grouping &g, double sigma = 0.0, std::uint64_t seed = 0)
        : ch_(ch), g_(g), sigma_(sigma), rng_(seed)
    {
        if (g.elements() != ch.elements())
            throw ConfigError("grouping does not cover the surface");
        if (ch.table->size() != 2)
            throw InfeasibleError("grouped estimation supports two-state elements only");
    }

    CMatrix operator()(const GroupStates &s)
    {
        ++calls_;
        CMatrix h = cascaded_channel(ch_, expand_group_states(g_, s));
        if (sigma_ > 0.0)
            for (Eigen::Index i = 0; i < h.size(); ++i)
                h.data()[i] += sigma_ * detail::cn01(rng_);
        return h;
    }

    std::size_t calls() const { return calls_; }

  private:
    const ChannelSet &ch_;
    Grouping g_;
    double sigma_;
    std::mt19937_64 rng_;
    std::size_t calls_ = 0;
};

// CSV rows `user,antenna,group,re,im`, optionally led by a seed column; the
// baseline uses group `base`.
inline void write_model_csv(std::ostream &os, const LinearChannelModel &m, std::optional<std::uint64_t> seed = {},
                            bool header = true)
{
    if (header)
        os << (seed ? "seed," : "") << "user,antenna,group,re,im\n";
    const std::string lead = seed ? std::to_string(*seed) + "," : "";
    char buf[160];
    auto row = [&](Eigen::Index k, Eigen::Index n, const std::string &grp, Complex v) {
        os << lead;
        std::snprintf(buf, sizeof buf, "%lld,%lld,%s,%.17g,%.17g\n", static_cast<long long>(k),
                      static_cast<long long>(n), grp.c_str(), v.real(), v.imag());
        os << buf;
    };
    for (Eigen::Index k = 0; k < m.base.rows(); ++k)
        for (Eigen::Index n = 0; n < m.base.cols(); ++n)
        {
            row(k, n, "base", m.base(k, n));
            for (std::size_t g = 0; g < m.delta.size(); ++g)
                row(k, n, std::to_string(g), m.delta[g](k, n));
        }
}

} // namespace ios
