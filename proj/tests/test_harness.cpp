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


#include "ios/ios.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace ios;
namespace fs = std::filesystem;

namespace {

const std::string kScenarios = IOSIM_SCENARIO_DIR;

const char *kMinimal = "carrier_hz = 3.6e9\n"
                       "bs.position = -1 2 0\n"
                       "ios.center = 0 0 0\n"
                       "users[0].position = 1 2 0\n";

ConfigFile parse(const std::string &text)
{
    std::istringstream in(text);
    return parse_config(in);
}

std::string run_to_string(Kind kind, const ConfigFile &cfg, const std::vector<std::uint64_t> &seeds)
{
    std::ostringstream os;
    run_experiment(kind, cfg, seeds, false, os);
    return os.str();
}

// Data lines of a CSV output, header block stripped.
std::vector<std::string> body_lines(const std::string &out)
{
    std::vector<std::string> lines;
    std::istringstream is(out);
    std::string l;
    while (std::getline(is, l))
        if (!l.empty() && l[0] != '#')
            lines.push_back(l);
    return lines;
}

class TempDir
{
  public:
    TempDir() : path_(fs::temp_directory_path() / ("iosim_test_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "_" +
                                                    ::testing::UnitTest::GetInstance()->current_test_info()->name()))
    {
        fs::create_directories(path_);
    }
    ~TempDir() { fs::remove_all(path_); }
    fs::path file(const std::string &name, const std::string &content) const
    {
        std::ofstream(path_ / name) << content;
        return path_ / name;
    }
    const fs::path &path() const { return path_; }

  private:
    fs::path path_;
};

int sim(const std::string &args)
{
    const std::string cmd = std::string(IOSIM_SIM_BINARY) + " " + args + " --quiet > /dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

} // namespace

TEST(Config, MinimalDefaults)
{
    const auto cf = parse(kMinimal);
    const auto &sc = cf.scenario;
    EXPECT_EQ(sc.ios.rows, 8);
    EXPECT_EQ(sc.ios.cols, 8);
    EXPECT_DOUBLE_EQ(sc.pitch_x(), 0.5 * sc.lambda());
    EXPECT_DOUBLE_EQ(sc.kappa, 4.0);
    EXPECT_DOUBLE_EQ(sc.noise_power_w, 1e-12);
    EXPECT_EQ(sc.bs.n_antennas, 4);
    EXPECT_EQ(sc.pathloss, PathlossMode::scatter);
    EXPECT_EQ(sc.ios.table->size(), 2u);
    ASSERT_EQ(sc.users.size(), 1u);
    EXPECT_EQ(sc.users[0].n_antennas, 1);
    EXPECT_TRUE(cf.options.empty());
}

TEST(Config, RejectsBadInput)
{
    EXPECT_THROW(parse("bs.position = 0 1 0\nios.center = 0 0 0\n"), ConfigError);
    EXPECT_THROW(parse(std::string(kMinimal) + "ios.colums = 4\n"), ConfigError);
    EXPECT_THROW(parse(std::string(kMinimal) + "ios.rows = 4\nios.rows = 5\n"), ConfigError);
    EXPECT_THROW(parse(std::string(kMinimal) + "ios.rows = four\n"), ConfigError);
    EXPECT_THROW(parse(std::string(kMinimal) + "users[2].position = 1 1 0\n"), ConfigError);
    EXPECT_THROW(parse(std::string(kMinimal) + "users[x].position = 1 1 0\n"), ConfigError);
    EXPECT_THROW(parse(std::string(kMinimal) + "pathloss_mode = free\n"), ConfigError);
    EXPECT_THROW(parse(std::string(kMinimal) + "kappa\n"), ConfigError);
}

TEST(Config, UserOnSurfacePlaneIsAnError)
{
    const std::string text = "carrier_hz = 3.6e9\nbs.position = -1 2 0\nios.center = 0 0 0\nusers[0].position = 1 0 0\n";
    EXPECT_THROW(parse(text), ConfigError);
}

TEST(Config, RoundTripThroughSerializer)
{
    for (const char *name : {"two_side.cfg", "two_room.cfg", "pattern_layout.cfg", "los_training.cfg"})
    {
        const auto a = load_config(kScenarios + "/" + name).scenario;
        std::istringstream in(serialize_scenario(a));
        const auto b = parse_config(in, name, kScenarios).scenario;
        EXPECT_EQ(serialize_scenario(b), serialize_scenario(a)) << name;
        EXPECT_EQ(b.users.size(), a.users.size());
        EXPECT_EQ(b.aps.size(), a.aps.size());
        EXPECT_EQ(b.ios.table->size(), a.ios.table->size());
    }
}

TEST(Options, TypedAccessAndRejection)
{
    OptionReader r({{"restarts", "3"}, {"noisy", "true"}, {"sigma", "x"}, {"bogus", "1"}});
    EXPECT_EQ(r.get("restarts", 4), 3);
    EXPECT_TRUE(r.get("noisy", false));
    EXPECT_EQ(r.get("max_sweeps", 20), 20);
    EXPECT_THROW(r.get("sigma", 0.0), ConfigError);
    EXPECT_EQ(r.resolved().at("max_sweeps"), "20");
    EXPECT_THROW(r.reject_unknown(known_options()), ConfigError);
    OptionReader ok(Options{{"rho", "2"}});
    EXPECT_NO_THROW(ok.reject_unknown(known_options()));
}

TEST(Kinds, NamesRoundTrip)
{
    for (Kind k : {Kind::pattern, Kind::hybrid, Kind::train, Kind::multicell, Kind::estimate, Kind::compare,
                   Kind::coverage})
        EXPECT_EQ(parse_kind(to_string(k)), k);
    EXPECT_THROW(parse_kind("sweep"), ConfigError);
}

TEST(Workers, OrderedResultsAndFirstError)
{
    const auto v = parallel_map<int>(20, [](std::size_t i) { return static_cast<int>(i * i); }, 3);
    for (std::size_t i = 0; i < v.size(); ++i)
        EXPECT_EQ(v[i], static_cast<int>(i * i));
    try
    {
        parallel_map<int>(10, [](std::size_t i) -> int {
            if (i == 4 || i == 7)
                throw ConfigError("fail " + std::to_string(i));
            return 0;
        }, 2);
        FAIL() << "expected an exception";
    }
    catch (const ConfigError &e)
    {
        EXPECT_STREQ(e.what(), "fail 4");
    }
}

TEST(Run, TenSeedsGiveRowsAndAggregates)
{
    auto cf = load_config(kScenarios + "/two_side.cfg");
    cf.scenario.ios.rows = 2;
    cf.scenario.ios.cols = 2;
    cf.options["restarts"] = "1";
    const auto lines = body_lines(run_to_string(Kind::hybrid, cf, {1, 2, 3, 4, 5, 6, 7, 8, 9, 10}));
    ASSERT_EQ(lines.size(), 13u);
    EXPECT_EQ(lines[0].rfind("seed,M,K,method,sum_rate_bpshz", 0), 0u);
    EXPECT_EQ(lines[1].rfind("1,", 0), 0u);
    EXPECT_EQ(lines[10].rfind("10,", 0), 0u);
    EXPECT_EQ(lines[11].rfind("mean,", 0), 0u);
    EXPECT_EQ(lines[12].rfind("std,", 0), 0u);
}

TEST(Run, HeaderEchoesScenarioAndOptions)
{
    auto cf = load_config(kScenarios + "/two_side.cfg");
    cf.options["restarts"] = "1";
    cf.scenario.ios.rows = 2;
    cf.scenario.ios.cols = 2;
    const auto out = run_to_string(Kind::hybrid, cf, {3});
    EXPECT_NE(out.find("# kind = hybrid\n"), std::string::npos);
    EXPECT_NE(out.find("# seeds = 3\n"), std::string::npos);
    EXPECT_NE(out.find("# ios.rows = 2\n"), std::string::npos);
    EXPECT_NE(out.find("# run.restarts = 1\n"), std::string::npos);
    EXPECT_NE(out.find("# run.max_sweeps = 20\n"), std::string::npos);
}

TEST(Run, DeterministicAcrossRuns)
{
    auto cf = load_config(kScenarios + "/two_side.cfg");
    cf.scenario.ios.rows = 2;
    cf.scenario.ios.cols = 4;
    EXPECT_EQ(run_to_string(Kind::compare, cf, {1, 2}), run_to_string(Kind::compare, cf, {1, 2}));
    const auto train = load_config(kScenarios + "/los_training.cfg");
    EXPECT_EQ(run_to_string(Kind::train, train, {5}), run_to_string(Kind::train, train, {5}));
}

TEST(Run, EmitModes)
{
    auto cf = load_config(kScenarios + "/los_training.cfg");
    cf.options["emit"] = "trace";
    auto lines = body_lines(run_to_string(Kind::train, cf, {1, 2}));
    EXPECT_EQ(lines[0], "seed,round,codeword_id,user,rx_power_dbm");
    EXPECT_EQ(lines.size(), 1u + 2u * 9u);
    cf.options["emit"] = "selection";
    lines = body_lines(run_to_string(Kind::train, cf, {1}));
    EXPECT_EQ(lines[0], "user,section,lobe,combiner");
    EXPECT_EQ(lines.size(), 2u);
    cf.options["emit"] = "final";
    EXPECT_THROW(run_to_string(Kind::train, cf, {1}), ConfigError);

    auto room = load_config(kScenarios + "/two_room.cfg");
    room.options["emit"] = "final";
    lines = body_lines(run_to_string(Kind::multicell, room, {1}));
    EXPECT_EQ(lines[0], "user,cell,rate_bpshz,interference_dbm");
    EXPECT_EQ(lines.size(), 5u);
    room.options["emit"] = "trace";
    lines = body_lines(run_to_string(Kind::multicell, room, {1}));
    EXPECT_EQ(lines[0], "iter,ap,local_sum_rate,residual");

    auto est = load_config(kScenarios + "/two_side.cfg");
    est.options["emit"] = "model";
    lines = body_lines(run_to_string(Kind::estimate, est, {1}));
    EXPECT_EQ(lines[0], "user,antenna,group,re,im");
}

TEST(Run, UnknownOptionRejected)
{
    auto cf = load_config(kScenarios + "/two_side.cfg");
    cf.options["restart"] = "2";
    EXPECT_THROW(run_to_string(Kind::hybrid, cf, {1}), ConfigError);
}

TEST(Cli, ExitCodes)
{
    TempDir dir;
    const std::string out = (dir.path() / "out.csv").string();
    const std::string cfg = kScenarios + "/los_training.cfg";
    EXPECT_EQ(sim("train --config " + cfg + " --seed 1 --out " + out), 0);
    EXPECT_TRUE(fs::exists(out));
    EXPECT_EQ(sim("--version"), 0);
    EXPECT_EQ(sim("train --config " + cfg + " --seeds 3-1"), 1);
    EXPECT_EQ(sim("train --config " + cfg + " --set restarts"), 1);
    EXPECT_EQ(sim("train --config " + cfg + " --set emit=everything"), 1);
    EXPECT_EQ(sim("train --config " + dir.path().string() + "/missing.cfg"), 1);
    EXPECT_EQ(sim("sweep --config " + cfg), 1);

    const auto bad = dir.file("bad.cfg", std::string(kMinimal) + "ios.rows = -2\n");
    EXPECT_EQ(sim("hybrid --config " + bad.string()), 1);

    const auto two = dir.file("two.cfg", "carrier_hz = 3.6e9\nbs.position = -1 2 0\nios.center = 0 0 0\n"
                                         "users[0].position = 1 2 0\nusers[1].position = 1 -2 0\n");
    EXPECT_EQ(sim("train --config " + two.string() + " --set n_b=1"), 3);

    dir.file("dark.txt", "0 0 0 0\n0 90 0 90\n");
    const auto dark = dir.file("dark.cfg", std::string(kMinimal) + "ios.state_table = dark.txt\n");
    EXPECT_EQ(sim("pattern --config " + dark.string()), 2);
}
