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

// ios_sim: one subcommand per experiment kind.
//
//   ios_sim hybrid --config scenarios/two_side.cfg --seeds 1-50 --out hybrid.csv
//
// Exit codes: 0 success, 1 configuration error, 2 numerical failure,
// 3 infeasible instance.

#include "ios/ios.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <string>
#include <vector>

namespace {

// "7", "1-50" or "1,4,9-12".
std::vector<std::uint64_t> parse_seed_list(const std::string &s)
{
    std::vector<std::uint64_t> out;
    std::size_t pos = 0;
    while (pos <= s.size())
    {
        const auto comma = s.find(',', pos);
        const std::string item = s.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
        const auto dash = item.find('-');
        try
        {
            std::size_t used = 0;
            if (dash == std::string::npos)
            {
                out.push_back(std::stoull(item, &used));
                if (used != item.size())
                    throw std::invalid_argument(item);
            }
            else
            {
                const auto lo = std::stoull(item.substr(0, dash), &used);
                if (used != dash)
                    throw std::invalid_argument(item);
                const auto hi = std::stoull(item.substr(dash + 1), &used);
                if (used != item.size() - dash - 1 || hi < lo || hi - lo > 1000000)
                    throw std::invalid_argument(item);
                for (auto v = lo; v <= hi; ++v)
                    out.push_back(v);
            }
        }
        catch (const std::exception &)
        {
            throw ios::ConfigError("malformed seed list '" + s + "'");
        }
        if (comma == std::string::npos)
            break;
        pos = comma + 1;
    }
    return out;
}

} // namespace

int main(int argc, char **argv)
{
    CLI::App app{"Link-level simulator for intelligent omni-surfaces"};
    app.set_version_flag("--version", std::string(ios::kVersion));
    app.require_subcommand(1);

    struct Args
    {
        std::string config;
        std::vector<std::uint64_t> seed;
        std::string seeds;
        std::string out = "-";
        bool quiet = false;
        bool timing = false;
        std::vector<std::string> set;
    };
    Args args;

    const std::vector<std::pair<ios::Kind, const char *>> kinds = {
        {ios::Kind::pattern, "Steer the surface toward a target and scan the far-field pattern"},
        {ios::Kind::hybrid, "Hybrid beamforming with known channels"},
        {ios::Kind::train, "Codebook beam training pipeline"},
        {ios::Kind::multicell, "Negotiated surface configuration across access points"},
        {ios::Kind::estimate, "Grouped channel estimation"},
        {ios::Kind::compare, "Sum rate of IOS, IRS, RRS and no surface"},
        {ios::Kind::coverage, "Probe-user rate map over a planar grid"},
    };
    for (const auto &[kind, help] : kinds)
    {
        auto *sub = app.add_subcommand(ios::to_string(kind), help);
        sub->add_option("--config", args.config, "Scenario file")->required()->check(CLI::ExistingFile);
        sub->add_option("--seed", args.seed, "Seed (repeatable)");
        sub->add_option("--seeds", args.seeds, "Seed list, e.g. 1-50 or 1,3,7");
        sub->add_option("--out", args.out, "Output CSV path, - for stdout");
        sub->add_option("--set", args.set, "Experiment option override key=value (repeatable)");
        sub->add_flag("--quiet", args.quiet, "Suppress progress messages");
        sub->add_flag("--timing", args.timing, "Record wallclock_ms per seed");
    }

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::ParseError &e)
    {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try
    {
        ios::ExperimentSpec spec;
        for (auto *sub : app.get_subcommands())
            spec.kind = ios::parse_kind(sub->get_name());
        spec.config_path = args.config;
        spec.seeds = args.seed;
        if (!args.seeds.empty())
        {
            const auto more = parse_seed_list(args.seeds);
            spec.seeds.insert(spec.seeds.end(), more.begin(), more.end());
        }
        if (spec.seeds.empty())
            spec.seeds.push_back(1);
        spec.out_path = args.out;
        spec.timing = args.timing;
        for (const auto &kv : args.set)
        {
            const auto eq = kv.find('=');
            if (eq == std::string::npos || eq == 0)
                throw ios::ConfigError("--set expects key=value, got '" + kv + "'");
            std::string key = kv.substr(0, eq);
            if (key.rfind("run.", 0) == 0)
                key = key.substr(4);
            spec.overrides[key] = kv.substr(eq + 1);
        }
        if (!args.quiet)
            std::cerr << "ios_sim " << ios::to_string(spec.kind) << ": " << spec.seeds.size() << " seed(s), "
                      << ios::worker_count() << " worker(s)\n";
        ios::run(spec);
        if (!args.quiet && spec.out_path != "-")
            std::cerr << "wrote " << spec.out_path << "\n";
        return 0;
    }
    catch (const ios::ConfigError &e)
    {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    }
    catch (const std::out_of_range &e)
    {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    }
    catch (const ios::NumericalError &e)
    {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 2;
    }
    catch (const ios::InfeasibleError &e)
    {
        std::cerr << "infeasible: " << e.what() << "\n";
        return 3;
    }
    catch (const std::exception &e)
    {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
