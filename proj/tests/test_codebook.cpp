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


#include "ios/codebook.hpp"
#include "support/los_scenario.hpp"

#include <gtest/gtest.h>

#include <bit>
#include <cmath>
#include <set>
#include <sstream>

using namespace ios;
using ios::testing::LosUser;
using ios::testing::los_training_scenario;

namespace {

// Sum over elements of the per-element nearest-state residual.
double projection_residual(const CVector &g, const CVector &h, const ElementStateTable &t, Side side)
{
    double total = 0.0;
    for (Eigen::Index m = 0; m < g.size(); ++m)
    {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t s = 0; s < t.size(); ++s)
            best = std::min(best, std::norm(g[m] - coefficient(t, s, side) * h[m]));
        total += best;
    }
    return total;
}

// Modeled far-field contrast over lobe centers, evaluated with plain loops.
double center_contrast(const PhaseConfig &q, const LobeCodebook &cb, const std::vector<int> &covered,
                       const ApertureGeometry &g, const CVector &h, const ElementStateTable &t, Side side)
{
    const double k = kTwoPi / g.lambda;
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (int p = 1; p <= cb.n_g; ++p)
    {
        Complex f = 0.0;
        for (std::size_t m = 0; m < g.elements.size(); ++m)
        {
            const double x = (g.elements[m] - g.frame.center).dot(g.frame.horizontal);
            f += coefficient(t, q.states[m], side) * h[static_cast<Eigen::Index>(m)] *
                 std::exp(Complex(0.0, k * x * cb.direction(p)));
        }
        const bool in = std::find(covered.begin(), covered.end(), p) != covered.end();
        if (in)
            lo = std::min(lo, std::norm(f));
        else
            hi = std::max(hi, std::norm(f));
    }
    return std::log(lo) - std::log(hi);
}

struct Rig
{
    Scenario sc;
    ChannelSet ch;
    ApertureGeometry geom;
    SectorCodebook sectors;
    std::vector<Side> sides;

    explicit Rig(Scenario s, int n_b = 1)
        : sc(std::move(s)), ch(synthesize_channels(sc, 1)), geom(aperture_geometry(sc)),
          sectors(build_sector_codebook(sector_region(sc, sc.bs), bs_antenna_positions(sc.bs, sc), sc.lambda(), n_b)),
          sides(user_sides(sc, sc.bs))
    {
    }
};

} // namespace

TEST(LobeCodebook, DirectionsAndDepth)
{
    const auto cb = build_lobe_codebook(8);
    EXPECT_EQ(cb.depth, 4);
    EXPECT_EQ(cb.training_layers(), 3);
    EXPECT_DOUBLE_EQ(cb.direction(1), -0.875);
    EXPECT_DOUBLE_EQ(cb.direction(8), 0.875);
    EXPECT_DOUBLE_EQ(cb.coverage(3).first, -0.5);
    EXPECT_DOUBLE_EQ(cb.coverage(3).second, -0.25);
}

TEST(LobeCodebook, RejectsNonPowerOfTwo)
{
    EXPECT_THROW(build_lobe_codebook(6), ConfigError);
    EXPECT_THROW(build_lobe_codebook(1), ConfigError);
    EXPECT_NO_THROW(build_lobe_codebook(2));
}

TEST(LobeCodebook, BranchesPartitionEveryLayer)
{
    for (int n : {4, 8, 16})
    {
        const auto cb = build_lobe_codebook(n);
        for (int s = 1; s < cb.depth; ++s)
        {
            const auto a = cb.lobes(s, 0), b = cb.lobes(s, 1);
            EXPECT_EQ(a.size(), static_cast<std::size_t>(n / 2));
            EXPECT_EQ(b.size(), static_cast<std::size_t>(n / 2));
            std::set<int> all(a.begin(), a.end());
            all.insert(b.begin(), b.end());
            EXPECT_EQ(all.size(), static_cast<std::size_t>(n));
        }
    }
    EXPECT_THROW(build_lobe_codebook(8).lobes(4, 0), std::out_of_range);
    EXPECT_THROW(build_lobe_codebook(8).lobes(1, 2), std::out_of_range);
}

TEST(LobeCodebook, BranchPathIdentifiesLobe)
{
    const auto cb = build_lobe_codebook(16);
    for (int p = 1; p <= 16; ++p)
    {
        int index = 0;
        for (int s = 1; s < cb.depth; ++s)
        {
            const auto one = cb.lobes(s, 1);
            if (std::find(one.begin(), one.end(), p) != one.end())
                index |= 1 << (s - 1);
        }
        EXPECT_EQ(index + 1, p);
    }
}

TEST(LobeCodebook, LobeOfCoverage)
{
    const auto cb = build_lobe_codebook(8);
    EXPECT_EQ(cb.lobe_of(-1.0), 1);
    EXPECT_EQ(cb.lobe_of(-0.75), 2);
    EXPECT_EQ(cb.lobe_of(0.0), 5);
    EXPECT_EQ(cb.lobe_of(0.999), 8);
    EXPECT_EQ(cb.lobe_of(1.0), 8);
}

TEST(SectorCodebook, GridShape)
{
    EXPECT_EQ(sector_grid_shape(4, 10.0, 10.0), std::make_pair(2, 2));
    EXPECT_EQ(sector_grid_shape(4, 10.0, 0.0), std::make_pair(4, 1));
    EXPECT_EQ(sector_grid_shape(4, 0.0, 3.0), std::make_pair(1, 4));
    EXPECT_EQ(sector_grid_shape(6, 30.0, 10.0), std::make_pair(3, 2));
}

TEST(SectorCodebook, MidpointsAndModulus)
{
    const SectorRegion r{0.0, 10.0, 0.0, 0.0, 1.0};
    const std::vector<Vec3> ant{{0, -5, 1}, {0.05, -5, 1}, {0.1, -5, 1}, {0.15, -5, 1}};
    const auto cb = build_sector_codebook(r, ant, 0.1, 2);
    ASSERT_EQ(cb.size(), 2u);
    EXPECT_DOUBLE_EQ(cb.centers[0].x(), 2.5);
    EXPECT_DOUBLE_EQ(cb.centers[1].x(), 7.5);
    for (const auto &w : cb.codewords)
        for (Eigen::Index i = 0; i < w.size(); ++i)
            EXPECT_NEAR(std::abs(w[i]), 0.5, 1e-15);
    EXPECT_THROW(build_sector_codebook(r, ant, 0.1, 0), ConfigError);
    EXPECT_THROW(build_sector_codebook(r, {}, 0.1, 2), ConfigError);
}

TEST(SectorCodebook, CoPhasesAtCenter)
{
    const std::vector<Vec3> ant{{0, 0, 0}, {0.03, 0.01, 0}, {0.07, -0.02, 0.01}};
    const Vec3 target(1.0, 2.0, 0.5);
    const double lambda = 0.083;
    const CVector w = steering_toward(ant, target, lambda);
    Complex y = 0.0;
    for (std::size_t i = 0; i < ant.size(); ++i)
        y += w[static_cast<Eigen::Index>(i)] * std::polar(1.0, -kTwoPi * (ant[i] - target).norm() / lambda);
    EXPECT_NEAR(std::abs(y), std::sqrt(3.0), 1e-12);
}

TEST(Codewords, BasicCodewordLinearRamp)
{
    const auto sc = los_training_scenario({});
    const auto g = aperture_geometry(sc);
    const auto cb = build_lobe_codebook(8);
    const CVector c = basic_codeword(cb, 3, g);
    const double step = -kTwoPi / sc.lambda() * sc.pitch_x() * cb.direction(3);
    for (Eigen::Index m = 0; m + 1 < 32; ++m)
    {
        EXPECT_NEAR(std::abs(c[m]), 1.0, 1e-15);
        EXPECT_NEAR(std::arg(c[m + 1] / c[m]), std::remainder(step, kTwoPi), 1e-9);
    }
    EXPECT_THROW(basic_codeword(cb, 0, g), std::out_of_range);
}

TEST(Codewords, MultiLobeUnitRms)
{
    const auto sc = los_training_scenario({});
    const auto g = aperture_geometry(sc);
    const auto cb = build_lobe_codebook(16);
    for (int s = 1; s < cb.depth; ++s)
        for (int b = 0; b < 2; ++b)
        {
            const CVector c = multi_lobe_codeword(cb, s, b, g);
            EXPECT_NEAR(c.norm() / std::sqrt(static_cast<double>(c.size())), 1.0, 1e-12);
        }
}

TEST(Steering, MatchesDistanceFormula)
{
    const std::vector<Vec3> el{{0, 0, 0}, {0.04, 0, 0}, {0, 0, 0.04}};
    const std::vector<Vec3> centers{{1, 3, 0}, {-2, 1, 1}};
    const double lambda = 0.0833;
    const CMatrix h = estimate_steering(centers, el, lambda);
    ASSERT_EQ(h.rows(), 3);
    ASSERT_EQ(h.cols(), 2);
    for (int k = 0; k < 2; ++k)
        for (int m = 0; m < 3; ++m)
        {
            const Vec3 d = el[static_cast<std::size_t>(m)] - centers[static_cast<std::size_t>(k)];
            const double dist = std::sqrt(d.x() * d.x() + d.y() * d.y() + d.z() * d.z());
            const double ph = -2.0 * kPi * dist / lambda;
            EXPECT_NEAR(h(m, k).real(), std::cos(ph), 1e-12);
            EXPECT_NEAR(h(m, k).imag(), std::sin(ph), 1e-12);
        }
}

TEST(Projection, TieGoesToLowestState)
{
    const ElementStateTable t({{0.5, 0.0, 0.5, 0.0}, {0.5, kPi, 0.5, kPi}});
    CMatrix g(1, 1), h(1, 1);
    g(0, 0) = 0.0;
    h(0, 0) = 1.0;
    EXPECT_EQ(construct_Q(g, h, t, {Side::reflect}).states[0], 0);
    g(0, 0) = -1.0;
    EXPECT_EQ(construct_Q(g, h, t, {Side::reflect}).states[0], 1);
}

TEST(Projection, MatchesEnumerationOracle)
{
    const auto t = measured_prototype_table();
    std::mt19937_64 rng(17);
    std::normal_distribution<double> n;
    const std::vector<Side> sides{Side::reflect, Side::refract};
    for (int trial = 0; trial < 20; ++trial)
    {
        CMatrix g(5, 2), h(5, 2);
        for (int m = 0; m < 5; ++m)
            for (int k = 0; k < 2; ++k)
            {
                g(m, k) = Complex(n(rng), n(rng));
                h(m, k) = Complex(n(rng), n(rng));
            }
        double best = std::numeric_limits<double>::infinity();
        unsigned arg = 0;
        for (unsigned code = 0; code < 32; ++code)
        {
            double cost = 0.0;
            for (int m = 0; m < 5; ++m)
                for (int k = 0; k < 2; ++k)
                    cost += std::norm(g(m, k) - coefficient(t, (code >> m) & 1u, sides[static_cast<std::size_t>(k)]) * h(m, k));
            if (cost < best)
            {
                best = cost;
                arg = code;
            }
        }
        const auto q = construct_Q(g, h, t, sides);
        for (int m = 0; m < 5; ++m)
            EXPECT_EQ(q.states[static_cast<std::size_t>(m)], (arg >> m) & 1u);
    }
    EXPECT_THROW(construct_Q(CMatrix(5, 2), CMatrix(5, 1), t, sides), ConfigError);
}

TEST(Projection, AlignmentNeverIncreasesResidual)
{
    const auto t = measured_prototype_table();
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> ph(0.0, kTwoPi);
    for (int trial = 0; trial < 20; ++trial)
    {
        CVector g(16), h(16);
        for (int m = 0; m < 16; ++m)
        {
            g[m] = std::polar(1.0, ph(rng));
            h[m] = std::polar(1.0, ph(rng));
        }
        const Side side = trial % 2 ? Side::refract : Side::reflect;
        const CMatrix a = align_targets(g, h, t, {side});
        EXPECT_NEAR(a.col(0).norm(), g.norm(), 1e-12);
        EXPECT_LE(projection_residual(a.col(0), h, t, side), projection_residual(g, h, t, side) + 1e-12);
    }
}

TEST(Projection, AlignmentRemovesGridPhase)
{
    const auto t = measured_prototype_table();
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> ph(0.0, kTwoPi);
    CVector g(16), h(16);
    for (int m = 0; m < 16; ++m)
    {
        g[m] = std::polar(1.0, ph(rng));
        h[m] = std::polar(1.0, ph(rng));
    }
    const auto base = construct_Q(align_targets(g, h, t, {Side::reflect}), h, t, {Side::reflect});
    const CVector rotated = g * std::polar(1.0, kTwoPi * 5.0 / 32.0);
    EXPECT_EQ(construct_Q(align_targets(rotated, h, t, {Side::reflect}), h, t, {Side::reflect}), base);
}

TEST(Refinement, ContrastNeverDecreases)
{
    const auto sc = los_training_scenario({});
    const auto g = aperture_geometry(sc);
    const auto cb = build_lobe_codebook(16);
    const auto t = measured_prototype_table();
    const CMatrix h = estimate_steering({sc.bs.position}, g.elements, sc.lambda());
    for (int s = 1; s < cb.depth; ++s)
    {
        const CVector target = multi_lobe_codeword(cb, s, 0, g);
        PhaseConfig q = construct_Q(align_targets(target, h, t, {Side::reflect}), h, t, {Side::reflect});
        const double before = center_contrast(q, cb, cb.lobes(s, 0), g, h.col(0), t, Side::reflect);
        refine_lobe_contrast(q, cb, cb.lobes(s, 0), g, h.col(0), t, Side::reflect);
        const double after = center_contrast(q, cb, cb.lobes(s, 0), g, h.col(0), t, Side::reflect);
        EXPECT_GE(after, before - 1e-9);
        EXPECT_GT(after, 0.0);
    }
    PhaseConfig q = PhaseConfig::uniform(g.elements.size());
    EXPECT_THROW(refine_lobe_contrast(q, cb, cb.lobes(1, 0), g, h.col(0), t, Side::reflect, 0), ConfigError);
}

TEST(Combiners, IdentityAndOrthogonalGrid)
{
    const auto one = combiner_set(1);
    ASSERT_EQ(one.size(), 1u);
    EXPECT_NEAR(std::abs(one[0][0] - Complex(1.0, 0.0)), 0.0, 1e-15);
    const auto four = combiner_set(4);
    ASSERT_EQ(four.size(), 4u);
    for (std::size_t a = 0; a < 4; ++a)
        for (std::size_t b = 0; b < 4; ++b)
            EXPECT_NEAR(std::abs(four[a].dot(four[b])), a == b ? 1.0 : 0.0, 1e-12);
}

TEST(Sections, GreedyDistinctAssignment)
{
    const std::vector<std::vector<double>> power{{5.0, 4.0}, {1.0, 3.0}, {0.5, 0.1}};
    EXPECT_EQ(assign_sections(power, 2), (std::vector<std::size_t>{0, 1}));
    const std::vector<std::vector<double>> shared{{5.0, 6.0}, {1.0, 3.0}};
    EXPECT_EQ(assign_sections(shared, 2), (std::vector<std::size_t>{1, 0}));
}

TEST(Training, MatchesExhaustiveAtLobeCenters)
{
    const auto t = measured_prototype_table();
    for (int n_g : {4, 8})
    {
        const auto cb = build_lobe_codebook(n_g);
        for (Side side : {Side::reflect, Side::refract})
            for (int p = 1; p <= n_g; ++p)
            {
                Rig rig(los_training_scenario({{cb.direction(p), side}}));
                ChannelSounder snd(rig.ch, 1.0, rig.sc.noise_power_w, false, 1);
                const auto tr = beam_train(snd, rig.sectors, cb, rig.geom, t, rig.sides, 1);
                EXPECT_EQ(tr.lobe[0], p);
                EXPECT_EQ(exhaustive_lobe_search(snd, tr, 0, cb, rig.geom, t, rig.sides[0]), p);
            }
    }
}

TEST(Training, CountIsSectorsPlusTwoPerLayerPerUser)
{
    Rig rig(los_training_scenario({{-0.4, Side::reflect}, {0.3, Side::refract}}), 4);
    const auto cb = build_lobe_codebook(16);
    ChannelSounder snd(rig.ch, 1.0, rig.sc.noise_power_w, false, 1);
    const auto tr = beam_train(snd, rig.sectors, cb, rig.geom, *rig.ch.table, rig.sides, 3);
    EXPECT_EQ(tr.training_count, 4u + 2u * 2u * 4u);
    EXPECT_EQ(snd.soundings(), tr.training_count);
    EXPECT_EQ(tr.trace.size(), 4u * 2u + 2u * 2u * 4u);
    EXPECT_NE(tr.section[0], tr.section[1]);
}

TEST(Training, TooFewSectionsIsInfeasible)
{
    Rig rig(los_training_scenario({{-0.4, Side::reflect}, {0.3, Side::refract}}), 1);
    ChannelSounder snd(rig.ch, 1.0, rig.sc.noise_power_w, false, 1);
    EXPECT_THROW(beam_train(snd, rig.sectors, build_lobe_codebook(4), rig.geom, *rig.ch.table, rig.sides, 1),
                 InfeasibleError);
}

TEST(Training, Deterministic)
{
    Rig rig(los_training_scenario({{0.2, Side::refract}}));
    const auto cb = build_lobe_codebook(8);
    ChannelSounder a(rig.ch, 1.0, 1e-12, true, 4), b(rig.ch, 1.0, 1e-12, true, 4);
    const auto ta = beam_train(a, rig.sectors, cb, rig.geom, *rig.ch.table, rig.sides, 7);
    const auto tb = beam_train(b, rig.sectors, cb, rig.geom, *rig.ch.table, rig.sides, 7);
    ASSERT_EQ(ta.trace.size(), tb.trace.size());
    for (std::size_t i = 0; i < ta.trace.size(); ++i)
        EXPECT_EQ(ta.trace[i].rx_power_dbm, tb.trace[i].rx_power_dbm);
    EXPECT_EQ(ta.lobe, tb.lobe);
}

TEST(Pipeline, ReportsCountsAndRates)
{
    const auto sc = los_training_scenario({{-0.3, Side::reflect}});
    PipelineOptions po;
    po.n_b = 1;
    const auto r = codebook_pipeline(sc, 2, po);
    EXPECT_EQ(r.training_count, 1u + 2u * 4u);
    EXPECT_EQ(r.pilot_count, 1u);
    EXPECT_GT(r.sum_rate, 0.0);
    EXPECT_NEAR(r.rates.sum(), r.sum_rate, 1e-12);
    EXPECT_EQ(r.train.lobe[0], build_lobe_codebook(16).lobe_of(-0.3));
}

TEST(Csv, TraceAndSelection)
{
    std::vector<TrainingRecord> trace{{0, "S0", 0, -50.0}, {1, "L1B1", 0, -48.5}};
    std::ostringstream a;
    write_training_trace_csv(a, trace);
    EXPECT_EQ(a.str(), "round,codeword_id,user,rx_power_dbm\n0,S0,0,-50\n1,L1B1,0,-48.5\n");
    std::ostringstream b;
    write_training_trace_csv(b, trace, 9, false);
    EXPECT_EQ(b.str(), "9,0,S0,0,-50\n9,1,L1B1,0,-48.5\n");
}

TEST(Csv, SelectionRows)
{
    PipelineResult r;
    r.train.section = {1, 0};
    r.train.lobe = {3, 12};
    r.combiner = {0, 2};
    std::ostringstream os;
    write_selection_csv(os, r, 4);
    EXPECT_EQ(os.str(), "seed,user,section,lobe,combiner\n4,0,1,3,0\n4,1,0,12,2\n");
}
