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

// Far-field beam patterns of a surface illuminated by the BS array, and the
// usual pattern metrics.
//
// Angles: psi is measured in the horizontal plane from the surface's
// horizontal axis toward the transmitter-side normal, so psi in (0, 180)
// is the reflection half-space and (180, 360) the refraction half-space.
// phi is the elevation above the horizontal plane.

#pragma once

#include "beamform.hpp"

#include <cstdio>
#include <limits>
#include <ostream>
#include <vector>

namespace ios {

struct PatternFrame
{
    Vec3 center;
    Vec3 horizontal;
    Vec3 vertical;
    Vec3 normal; // toward the transmitter
};

inline PatternFrame pattern_frame(const Scenario &sc)
{
    const auto f = surface_frame(sc.ios);
    PatternFrame p{f.center, f.horizontal, f.vertical, f.normal};
    if (plane_offset(sc.ios, sc.bs.position) < 0.0)
        p.normal = -p.normal;
    return p;
}

inline Vec3 pattern_direction(const PatternFrame &f, double psi_deg, double phi_deg)
{
    const double psi = deg2rad(psi_deg), phi = deg2rad(phi_deg);
    return std::cos(phi) * (std::cos(psi) * f.horizontal + std::sin(psi) * f.normal) + std::sin(phi) * f.vertical;
}

// Per-element, per-antenna far-field contributions toward one direction,
// without the element coefficient: a(m, n) = inc(m, n) sqrt(G_in G_out)
// exp(+j k (r_m - c) . u). Rows of inactive elements are zero.
struct DirectionalBasis
{
    CMatrix a; // M x N
    Side side = Side::reflect;
    bool on_plane = false;
};

// Illumination of the surface by the BS (LoS only).
struct Illumination
{
    ChannelSet los;
    std::vector<Vec3> elements;
    PatternFrame frame;
    double lambda = 0.0;
    double exponent = 3.0;
};

inline Illumination illumination(const Scenario &sc)
{
    Scenario s = sc;
    s.users.clear();
    return {synthesize_channels(s, 0, {.los_only = true}), element_positions(sc), pattern_frame(sc), sc.lambda(),
            sc.radiation_exponent};
}

inline DirectionalBasis directional_basis(const Illumination &il, const Vec3 &u)
{
    DirectionalBasis b;
    const double c = u.dot(il.frame.normal);
    const auto M = static_cast<Eigen::Index>(il.elements.size());
    b.a = CMatrix::Zero(M, il.los.h_bi.cols());
    if (std::abs(c) < 1e-12)
    {
        b.on_plane = true;
        return b;
    }
    b.side = c > 0.0 ? Side::reflect : Side::refract;
    const double g_out = std::pow(std::abs(c), il.exponent);
    const double k = kTwoPi / il.lambda;
    for (Eigen::Index m = 0; m < M; ++m)
    {
        if (!il.los.active[static_cast<std::size_t>(m)])
            continue;
        const double amp = std::sqrt(il.los.incident_gain[m] * g_out);
        const Complex dep = std::polar(amp, k * (il.elements[static_cast<std::size_t>(m)] - il.frame.center).dot(u));
        b.a.row(m) = dep * il.los.h_bi.row(m);
    }
    return b;
}

// E_n for every BS antenna n toward direction u.
inline CVector element_field(const Illumination &il, const PhaseConfig &cfg, const Vec3 &u)
{
    check_config(il.los, cfg);
    const auto b = directional_basis(il, u);
    if (b.on_plane)
        throw ConfigError("pattern direction lies in the surface plane");
    CVector e = CVector::Zero(b.a.cols());
    for (Eigen::Index m = 0; m < b.a.rows(); ++m)
        e += coefficient(*il.los.table, cfg.states[static_cast<std::size_t>(m)], b.side) * b.a.row(m).transpose();
    return e;
}

inline CVector element_field(const Scenario &sc, const PhaseConfig &cfg, double psi_deg, double phi_deg)
{
    const auto il = illumination(sc);
    return element_field(il, cfg, pattern_direction(il.frame, psi_deg, phi_deg));
}

struct PatternGrid
{
    std::vector<double> psi_deg;
    std::vector<double> phi_deg;
    Eigen::MatrixXd power; // rows: phi, cols: psi; linear, unnormalized

    // Azimuth cut at the elevation sample closest to phi.
    std::vector<double> azimuth_cut(double phi = 0.0) const
    {
        std::size_t best = 0;
        for (std::size_t i = 1; i < phi_deg.size(); ++i)
            if (std::abs(phi_deg[i] - phi) < std::abs(phi_deg[best] - phi))
                best = i;
        std::vector<double> out(psi_deg.size());
        for (std::size_t j = 0; j < psi_deg.size(); ++j)
            out[j] = power(static_cast<Eigen::Index>(best), static_cast<Eigen::Index>(j));
        return out;
    }
};

inline std::vector<double> angle_grid(double start, double stop, double step)
{
    if (!(step > 0.0) || stop < start)
        throw ConfigError("angle grid needs step > 0 and stop >= start");
    std::vector<double> g;
    const auto n = static_cast<long>(std::floor((stop - start) / step + 1e-9));
    for (long i = 0; i <= n; ++i)
        g.push_back(start + static_cast<double>(i) * step);
    return g;
}

// F(psi, phi) = |sum_n E_n w_n|^2 over the grid; in-plane directions give 0.
inline PatternGrid beam_pattern(const Illumination &il, const PhaseConfig &cfg, const CVector &w,
                                const std::vector<double> &psi_deg, const std::vector<double> &phi_deg)
{
    if (psi_deg.empty() || phi_deg.empty())
        throw ConfigError("pattern grid is empty");
    check_config(il.los, cfg);
    if (w.size() != il.los.h_bi.cols())
        throw ConfigError("precoder length does not match the BS array");
    PatternGrid g{psi_deg, phi_deg, Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(phi_deg.size()),
                                                          static_cast<Eigen::Index>(psi_deg.size()))};
    const auto &t = *il.los.table;
    const CVector ar = il.los.h_bi * w; // incident field per element
    for (std::size_t i = 0; i < phi_deg.size(); ++i)
        for (std::size_t j = 0; j < psi_deg.size(); ++j)
        {
            const Vec3 u = pattern_direction(il.frame, psi_deg[j], phi_deg[i]);
            const double c = u.dot(il.frame.normal);
            if (std::abs(c) < 1e-12)
                continue;
            const Side side = c > 0.0 ? Side::reflect : Side::refract;
            const double g_out = std::pow(std::abs(c), il.exponent);
            const double k = kTwoPi / il.lambda;
            Complex e{};
            for (std::size_t m = 0; m < il.elements.size(); ++m)
            {
                if (!il.los.active[m])
                    continue;
                const auto mi = static_cast<Eigen::Index>(m);
                e += coefficient(t, cfg.states[m], side) * std::sqrt(il.los.incident_gain[mi] * g_out) *
                     std::polar(1.0, k * (il.elements[m] - il.frame.center).dot(u)) * ar[mi];
            }
            g.power(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = std::norm(e);
        }
    return g;
}

inline PatternGrid beam_pattern(const Scenario &sc, const PhaseConfig &cfg, const CVector &w,
                                const std::vector<double> &psi_deg, const std::vector<double> &phi_deg = {0.0})
{
    return beam_pattern(illumination(sc), cfg, w, psi_deg, phi_deg);
}

// Near-field scan on a circle of radius `distance` around the surface
// center, with exact element-to-point distances.
inline std::vector<double> near_field_cut(const Illumination &il, const PhaseConfig &cfg, const CVector &w,
                                          const std::vector<double> &psi_deg, double distance)
{
    if (!(distance > 0.0))
        throw ConfigError("scan distance must be positive");
    check_config(il.los, cfg);
    const CVector ar = il.los.h_bi * w;
    const double k = kTwoPi / il.lambda;
    std::vector<double> out;
    for (double psi : psi_deg)
    {
        const Vec3 p = il.frame.center + distance * pattern_direction(il.frame, psi, 0.0);
        Complex e{};
        for (std::size_t m = 0; m < il.elements.size(); ++m)
        {
            if (!il.los.active[m])
                continue;
            const Vec3 d = p - il.elements[m];
            const double c = d.normalized().dot(il.frame.normal);
            if (std::abs(c) < 1e-12)
                continue;
            const Side side = c > 0.0 ? Side::reflect : Side::refract;
            const auto mi = static_cast<Eigen::Index>(m);
            e += coefficient(*il.los.table, cfg.states[m], side) *
                 std::sqrt(il.los.incident_gain[mi] * std::pow(std::abs(c), il.exponent)) *
                 std::polar(1.0, -k * (d.norm() - distance)) * ar[mi];
        }
        out.push_back(std::norm(e));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Steering

struct SteeringResult
{
    PhaseConfig config;
    CVector w;            // unit-norm BS weights (MRT toward the target)
    double gain = 0.0;    // |E . w|^2 at the target
};

// Maximizes ||E(target)||^2 (the MRT gain) by coordinate ascent over element
// states, from a phase-aligned start.
inline SteeringResult steer(const Illumination &il, double psi_deg, double phi_deg = 0.0, int max_sweeps = 20)
{
    const Vec3 u = pattern_direction(il.frame, psi_deg, phi_deg);
    const auto b = directional_basis(il, u);
    if (b.on_plane)
        throw ConfigError("steering target lies in the surface plane");
    const auto &t = *il.los.table;
    const std::size_t M = il.elements.size(), S = t.size();
    std::vector<Complex> coef(S);
    for (std::size_t s = 0; s < S; ++s)
        coef[s] = coefficient(t, s, b.side);

    // Start: align every element with the uniform-weight reference.
    PhaseConfig cfg = PhaseConfig::uniform(M);
    for (std::size_t m = 0; m < M; ++m)
    {
        const Complex am = b.a.row(static_cast<Eigen::Index>(m)).sum();
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t s = 0; s < S; ++s)
        {
            const double v = std::real(coef[s] * am);
            if (v > best)
            {
                best = v;
                cfg.states[m] = static_cast<std::uint16_t>(s);
            }
        }
    }
    CVector e = CVector::Zero(b.a.cols());
    for (std::size_t m = 0; m < M; ++m)
        e += coef[cfg.states[m]] * b.a.row(static_cast<Eigen::Index>(m)).transpose();
    double best = e.squaredNorm();
    for (int sweep = 0; sweep < max_sweeps; ++sweep)
    {
        bool changed = false;
        for (std::size_t m = 0; m < M; ++m)
        {
            const auto mi = static_cast<Eigen::Index>(m);
            const std::size_t cur = cfg.states[m];
            for (std::size_t s = 0; s < S; ++s)
            {
                if (s == cur || b.a.row(mi).squaredNorm() == 0.0)
                    continue;
                const CVector cand = e + (coef[s] - coef[cfg.states[m]]) * b.a.row(mi).transpose();
                const double f = cand.squaredNorm();
                if (f > best * (1.0 + 1e-12))
                {
                    best = f;
                    e = cand;
                    cfg.states[m] = static_cast<std::uint16_t>(s);
                    changed = true;
                }
            }
        }
        if (!changed)
            break;
    }
    SteeringResult r;
    r.config = std::move(cfg);
    r.gain = best;
    r.w = best > 0.0 ? CVector(e.conjugate() / e.norm()) : CVector(CVector::Zero(e.size()));
    return r;
}

// ---------------------------------------------------------------------------
// Metrics

struct PatternMetrics
{
    double main_lobe_deg = 0.0;
    double hpbw_deg = 0.0;
    double sll_db = -std::numeric_limits<double>::infinity();
};

// Metrics of a 1-D cut sampled on a uniform grid. A cut covering the full
// circle wraps around.
inline PatternMetrics pattern_metrics(const std::vector<double> &angle_deg, const std::vector<double> &f)
{
    const std::size_t n = f.size();
    if (n == 0 || angle_deg.size() != n)
        throw ConfigError("pattern cut and angle grid disagree");
    const double step = n > 1 ? angle_deg[1] - angle_deg[0] : 1.0;
    const bool circular = n > 1 && std::abs(step * static_cast<double>(n) - 360.0) < 1e-6;
    std::size_t peak = 0;
    for (std::size_t i = 1; i < n; ++i)
        if (f[i] > f[peak])
            peak = i;
    const double fmax = f[peak];
    const double fmin = *std::min_element(f.begin(), f.end());
    if (!(fmax > 0.0) || fmax == fmin)
        throw NumericalError("pattern is flat; metrics are undefined");

    auto at = [&](long i) -> double {
        if (circular)
            return f[static_cast<std::size_t>(((i % static_cast<long>(n)) + static_cast<long>(n)) % static_cast<long>(n))];
        return (i < 0 || i >= static_cast<long>(n)) ? -1.0 : f[static_cast<std::size_t>(i)];
    };
    const long p = static_cast<long>(peak);
    const long lim = static_cast<long>(n);

    PatternMetrics out;
    out.main_lobe_deg = angle_deg[peak];
    long lo = p, hi = p;
    while (hi - lo + 1 < lim && at(lo - 1) >= 0.5 * fmax)
        --lo;
    while (hi - lo + 1 < lim && at(hi + 1) >= 0.5 * fmax)
        ++hi;
    out.hpbw_deg = static_cast<double>(hi - lo + 1) * step;

    // Main lobe extends down to the first local minimum on each side.
    long a = p, b = p;
    while (b - a + 1 < lim && at(a - 1) >= 0.0 && at(a - 1) <= at(a))
        --a;
    while (b - a + 1 < lim && at(b + 1) >= 0.0 && at(b + 1) <= at(b))
        ++b;
    double side = -1.0;
    for (long i = b + 1; i < a + lim && (circular || i < lim); ++i)
        side = std::max(side, at(i));
    if (!circular)
        for (long i = 0; i < a; ++i)
            side = std::max(side, at(i));
    if (side > 0.0)
        out.sll_db = 10.0 * std::log10(side / fmax);
    return out;
}

inline PatternMetrics pattern_metrics(const PatternGrid &g, double phi = 0.0)
{
    return pattern_metrics(g.psi_deg, g.azimuth_cut(phi));
}

// CSV `psi_deg,phi_deg,power_db`, normalized to a 0 dB peak.
inline void write_pattern_csv(std::ostream &os, const PatternGrid &g)
{
    const double peak = g.power.maxCoeff();
    os << "psi_deg,phi_deg,power_db\n";
    char buf[128];
    for (std::size_t i = 0; i < g.phi_deg.size(); ++i)
        for (std::size_t j = 0; j < g.psi_deg.size(); ++j)
        {
            const double v = g.power(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
            const double db = (peak > 0.0 && v > 0.0) ? 10.0 * std::log10(v / peak) : -300.0;
            std::snprintf(buf, sizeof buf, "%.6g,%.6g,%.6f\n", g.psi_deg[j], g.phi_deg[i], db);
            os << buf;
        }
}

} // namespace ios
