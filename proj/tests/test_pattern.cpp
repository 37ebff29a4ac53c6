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


#include "ios/pattern.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

using namespace ios;

namespace {

// A 1 x n line of elements lit by a single antenna far away on the normal.
Scenario line_array(int n, double exponent = 0.0, double bs_range = 1000.0)
{
    Scenario sc;
    sc.ios.rows = 1;
    sc.ios.cols = n;
    sc.radiation_exponent = exponent;
    sc.bs.n_antennas = 1;
    sc.bs.position = bs_range * Vec3::UnitY();
    return sc;
}

CVector unit_weight() { return CVector::Ones(1); }

} // namespace

TEST(AngleGrid, InclusiveEnds)
{
    const auto g = angle_grid(0.0, 180.0, 1.0);
    ASSERT_EQ(g.size(), 181u);
    EXPECT_DOUBLE_EQ(g.back(), 180.0);
    EXPECT_EQ(angle_grid(10.0, 10.0, 2.0).size(), 1u);
    EXPECT_THROW(angle_grid(0.0, 10.0, 0.0), ConfigError);
    EXPECT_THROW(angle_grid(10.0, 0.0, 1.0), ConfigError);
}

TEST(Frame, DirectionConvention)
{
    const auto sc = line_array(4);
    const auto f = pattern_frame(sc);
    EXPECT_NEAR((pattern_direction(f, 90.0, 0.0) - f.normal).norm(), 0.0, 1e-12);
    EXPECT_NEAR((pattern_direction(f, 0.0, 0.0) - f.horizontal).norm(), 0.0, 1e-12);
    EXPECT_NEAR((pattern_direction(f, 270.0, 0.0) + f.normal).norm(), 0.0, 1e-12);
    EXPECT_NEAR((pattern_direction(f, 37.0, 90.0) - f.vertical).norm(), 0.0, 1e-12);
    auto flipped = sc;
    flipped.bs.position = -flipped.bs.position;
    EXPECT_NEAR((pattern_frame(flipped).normal + f.normal).norm(), 0.0, 1e-12);
}

TEST(BeamPattern, MatchesArrayFactorOracle)
{
    const auto sc = line_array(8);
    const auto il = illumination(sc);
    PhaseConfig cfg{{0, 1, 1, 0, 1, 0, 0, 1}};
    const auto psi = angle_grid(5.0, 355.0, 10.0);
    const auto g = beam_pattern(il, cfg, unit_weight(), psi, {0.0});
    const double tol = 1e-9 * g.power.maxCoeff();
    const auto els = element_positions(sc);
    const double k = kTwoPi / sc.lambda();
    const auto t = measured_prototype_table();
    for (std::size_t j = 0; j < psi.size(); ++j)
    {
        const double a = deg2rad(psi[j]);
        const Side side = std::sin(a) > 0.0 ? Side::reflect : Side::refract;
        Complex e = 0.0;
        for (std::size_t m = 0; m < els.size(); ++m)
        {
            const double d_in = (sc.bs.position - els[m]).norm();
            const double along = (els[m] - sc.ios.center).dot(Vec3::UnitZ().cross(Vec3::UnitY()));
            const double amp = std::abs(il.los.h_bi(static_cast<Eigen::Index>(m), 0));
            e += coefficient(t, cfg.states[m], side) * amp * std::polar(1.0, -k * d_in) *
                 std::polar(1.0, k * along * std::cos(a));
        }
        EXPECT_NEAR(g.power(0, static_cast<Eigen::Index>(j)), std::norm(e), tol);
    }
}

TEST(BeamPattern, ConsistentWithElementField)
{
    const auto sc = line_array(6, 3.0, 5.0);
    const auto il = illumination(sc);
    const PhaseConfig cfg{{1, 0, 1, 1, 0, 0}};
    const auto g = beam_pattern(il, cfg, unit_weight(), {60.0, 250.0}, {0.0, 20.0});
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
        {
            const double psi = j == 0 ? 60.0 : 250.0, phi = i == 0 ? 0.0 : 20.0;
            const CVector e = element_field(il, cfg, pattern_direction(il.frame, psi, phi));
            EXPECT_NEAR(g.power(i, j), std::norm(e[0]), 1e-12 * std::norm(e[0]));
        }
}

TEST(BeamPattern, NonNegativeAndPhaseInvariant)
{
    auto sc = line_array(8, 3.0, 3.0);
    sc.bs.n_antennas = 3;
    const auto il = illumination(sc);
    const PhaseConfig cfg{{0, 1, 0, 0, 1, 1, 0, 1}};
    CVector w(3);
    w << Complex(0.3, 0.1), Complex(-0.5, 0.2), Complex(0.1, -0.7);
    const auto psi = angle_grid(0.0, 359.0, 1.0);
    const auto a = beam_pattern(il, cfg, w, psi, {0.0, 15.0});
    const auto b = beam_pattern(il, cfg, CVector(w * std::polar(1.0, 1.234)), psi, {0.0, 15.0});
    EXPECT_GE(a.power.minCoeff(), 0.0);
    EXPECT_LT((a.power - b.power).cwiseAbs().maxCoeff(), 1e-12 * a.power.maxCoeff());
    EXPECT_EQ(a.power(0, 0), 0.0);
    EXPECT_EQ(a.power(0, 180), 0.0);
    EXPECT_THROW(beam_pattern(il, cfg, CVector::Ones(2), psi, {0.0}), ConfigError);
}

TEST(BeamPattern, ReflectOnlyTableLeavesRefractHalfDark)
{
    auto sc = line_array(8, 3.0, 3.0);
    sc.ios.table = std::make_shared<const ElementStateTable>(measured_prototype_table().without_refraction());
    const auto g = beam_pattern(sc, PhaseConfig::uniform(8), unit_weight(), angle_grid(181.0, 359.0, 1.0));
    EXPECT_EQ(g.power.maxCoeff(), 0.0);
}

TEST(BeamPattern, BroadsideHalfPowerWidth)
{
    // Uniform line of 32 half-wave elements: 0.886 lambda / (N d) radians.
    const auto sc = line_array(32);
    const auto psi = angle_grid(80.0, 100.0, 0.01);
    const auto g = beam_pattern(sc, PhaseConfig::uniform(32), unit_weight(), psi);
    const auto m = pattern_metrics(g);
    EXPECT_NEAR(m.main_lobe_deg, 90.0, 0.01);
    EXPECT_NEAR(m.hpbw_deg, rad2deg(0.886 * 2.0 / 32.0), 0.05);
    EXPECT_NEAR(m.sll_db, -13.26, 0.3);
}

TEST(NearField, ApproachesFarFieldShape)
{
    const auto sc = line_array(8, 3.0, 1000.0);
    const auto il = illumination(sc);
    const PhaseConfig cfg{{0, 1, 1, 0, 0, 0, 1, 0}};
    const auto psi = angle_grid(30.0, 150.0, 5.0);
    const auto far = beam_pattern(il, cfg, unit_weight(), psi, {0.0}).azimuth_cut();
    const auto near = near_field_cut(il, cfg, unit_weight(), psi, 2000.0);
    const double fmax = *std::max_element(far.begin(), far.end());
    const double nmax = *std::max_element(near.begin(), near.end());
    for (std::size_t j = 0; j < psi.size(); ++j)
        EXPECT_NEAR(near[j] / nmax, far[j] / fmax, 1e-3);
    EXPECT_THROW(near_field_cut(il, cfg, unit_weight(), psi, 0.0), ConfigError);
}

TEST(Metrics, DeltaPattern)
{
    const auto a = angle_grid(0.0, 9.0, 1.0);
    std::vector<double> f(10, 0.0);
    f[4] = 1.0;
    const auto m = pattern_metrics(a, f);
    EXPECT_DOUBLE_EQ(m.main_lobe_deg, 4.0);
    EXPECT_DOUBLE_EQ(m.hpbw_deg, 1.0);
    EXPECT_TRUE(std::isinf(m.sll_db));
}

TEST(Metrics, EqualSideLobeIsZeroDb)
{
    const auto a = angle_grid(0.0, 9.0, 1.0);
    const std::vector<double> f{0.0, 1.0, 0.1, 0.0, 0.0, 0.0, 0.1, 1.0, 0.1, 0.0};
    const auto m = pattern_metrics(a, f);
    EXPECT_DOUBLE_EQ(m.main_lobe_deg, 1.0);
    EXPECT_NEAR(m.sll_db, 0.0, 1e-12);
}

TEST(Metrics, CircularCutWraps)
{
    const auto a = angle_grid(0.0, 350.0, 10.0);
    std::vector<double> f(36, 0.01);
    f[0] = 1.0;
    f[35] = 0.8;
    f[1] = 0.6;
    f[18] = 0.1;
    const auto m = pattern_metrics(a, f);
    EXPECT_DOUBLE_EQ(m.main_lobe_deg, 0.0);
    EXPECT_DOUBLE_EQ(m.hpbw_deg, 30.0);
    EXPECT_NEAR(m.sll_db, -10.0, 1e-12);
}

TEST(Metrics, RejectsFlatAndMismatched)
{
    EXPECT_THROW(pattern_metrics({0.0, 1.0}, {1.0, 1.0}), NumericalError);
    EXPECT_THROW(pattern_metrics({0.0, 1.0}, {1.0}), ConfigError);
}

TEST(Steer, PeaksAtTargetOnBothSides)
{
    Scenario sc;
    sc.ios.rows = 4;
    sc.ios.cols = 16;
    sc.bs.n_antennas = 1;
    sc.bs.position = {-3.0, 4.0, 0.0};
    const auto il = illumination(sc);
    for (double target : {85.0, 100.0, 265.0, 280.0})
    {
        const auto r = steer(il, target);
        const auto psi = target < 180.0 ? angle_grid(1.0, 179.0, 0.5) : angle_grid(181.0, 359.0, 0.5);
        const auto g = beam_pattern(il, r.config, r.w, psi, {0.0});
        const auto m = pattern_metrics(g);
        EXPECT_NEAR(m.main_lobe_deg, target, 2.0) << target;
        EXPECT_NEAR(r.w.norm(), 1.0, 1e-12);
        const CVector e = element_field(il, r.config, pattern_direction(il.frame, target, 0.0));
        EXPECT_NEAR(r.gain, e.squaredNorm(), 1e-9 * r.gain);
    }
    EXPECT_THROW(steer(il, 180.0), ConfigError);
}

TEST(Csv, PeakNormalized)
{
    PatternGrid g{{0.0, 10.0}, {0.0}, Eigen::MatrixXd(1, 2)};
    g.power << 2.0, 0.2;
    std::ostringstream os;
    write_pattern_csv(os, g);
    EXPECT_EQ(os.str(), "psi_deg,phi_deg,power_db\n0,0,0.000000\n10,0,-10.000000\n");
}
