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

// Propagation links of a surface-aided downlink: geometry, radiation pattern,
// path loss, effective-area masking and Rician channel synthesis.
//
// Conventions
//   - H_BI (M x N) holds the physical BS-antenna -> element coefficients,
//     with LoS phase exp(-j 2 pi d / lambda).
//   - h_IU[k] (M x Nr) and h_D[k] (N x Nr) are stored conjugated, so that the
//     effective row channel of a single-antenna user reads
//         h_eff = h_D^H + h_IU^H Q H_BI
//     and conj(h_IU) carries the physical exp(-j 2 pi d / lambda) phase.
//   - Radiation gains and the effective-area mask live in Q, not in the hop
//     channels.

#pragma once

#include "common.hpp"
#include "element.hpp"

#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace ios {

enum class PathlossMode
{
    scatter,
    lens
};

inline const char *to_string(PathlossMode m) { return m == PathlossMode::scatter ? "scatter" : "lens"; }

struct BaseStation
{
    Vec3 position = Vec3::Zero();
    int n_antennas = 4;
    double antenna_spacing = 0.0; // m, 0 selects lambda/2
    double tx_power_w = 1.0;
    double beamwidth_deg = 180.0; // full width of the main-lobe cone
    std::optional<Vec3> array_axis;
};

struct SurfaceConfig
{
    Vec3 center = Vec3::Zero();
    Vec3 normal = Vec3::UnitY();
    int rows = 8;
    int cols = 8;
    double pitch_x = 0.0; // m, horizontal; 0 selects lambda/2
    double pitch_y = 0.0; // m, vertical; 0 selects lambda/2
    int active_row_begin = 0;
    int active_row_count = -1; // -1: all rows
    std::string table_source = "prototype";
    std::shared_ptr<const ElementStateTable> table =
        std::make_shared<const ElementStateTable>(measured_prototype_table());

    int elements() const { return rows * cols; }
};

struct UserConfig
{
    Vec3 position = Vec3::Zero();
    int n_antennas = 1;
    bool blocked = false;
    double direct_loss_db = 0.0;
    int cell = 0;
};

struct Scenario
{
    BaseStation bs;
    SurfaceConfig ios;
    std::vector<UserConfig> users;
    std::vector<BaseStation> aps; // multi-cell deployments only
    double carrier_hz = 3.6e9;
    double noise_power_w = 1e-12;
    double kappa = 4.0;
    double radiation_exponent = 3.0;
    PathlossMode pathloss = PathlossMode::scatter;
    double wall_loss_db = 0.0; // extra loss of direct links crossing the surface plane

    double lambda() const { return wavelength(carrier_hz); }
    double pitch_x() const { return ios.pitch_x > 0.0 ? ios.pitch_x : 0.5 * lambda(); }
    double pitch_y() const { return ios.pitch_y > 0.0 ? ios.pitch_y : 0.5 * lambda(); }
};

// ---------------------------------------------------------------------------
// Geometry

struct SurfaceFrame
{
    Vec3 center;
    Vec3 normal;     // unit
    Vec3 horizontal; // unit, in-plane
    Vec3 vertical;   // unit, in-plane
};

inline SurfaceFrame surface_frame(const SurfaceConfig &s)
{
    SurfaceFrame f;
    f.center = s.center;
    const double nn = s.normal.norm();
    if (!(nn > 0.0) || !std::isfinite(nn))
        throw ConfigError("ios.normal must be a nonzero vector");
    f.normal = s.normal / nn;
    Vec3 h = Vec3::UnitZ().cross(f.normal);
    if (h.norm() < 1e-9) // horizontal surface
        h = Vec3::UnitX();
    f.horizontal = h.normalized();
    f.vertical = f.normal.cross(f.horizontal);
    return f;
}

// Element m = row * cols + col, row-major, centered on the surface center.
inline std::vector<Vec3> element_positions(const Scenario &sc)
{
    const auto f = surface_frame(sc.ios);
    const double px = sc.pitch_x(), py = sc.pitch_y();
    std::vector<Vec3> pos;
    pos.reserve(static_cast<std::size_t>(sc.ios.elements()));
    for (int r = 0; r < sc.ios.rows; ++r)
        for (int c = 0; c < sc.ios.cols; ++c)
            pos.push_back(f.center + (c - 0.5 * (sc.ios.cols - 1)) * px * f.horizontal +
                          (0.5 * (sc.ios.rows - 1) - r) * py * f.vertical);
    return pos;
}

inline Vec3 default_array_axis(const BaseStation &bs, const SurfaceFrame &f)
{
    if (bs.array_axis)
        return bs.array_axis->normalized();
    Vec3 to = f.center - bs.position;
    to.z() = 0.0;
    Vec3 ax = Vec3::UnitZ().cross(to);
    if (ax.norm() < 1e-9)
        return f.horizontal;
    return ax.normalized();
}

inline std::vector<Vec3> bs_antenna_positions(const BaseStation &bs, const Scenario &sc)
{
    const auto f = surface_frame(sc.ios);
    const Vec3 ax = default_array_axis(bs, f);
    const double d = bs.antenna_spacing > 0.0 ? bs.antenna_spacing : 0.5 * sc.lambda();
    std::vector<Vec3> pos;
    for (int n = 0; n < bs.n_antennas; ++n)
        pos.push_back(bs.position + (n - 0.5 * (bs.n_antennas - 1)) * d * ax);
    return pos;
}

inline std::vector<Vec3> user_antenna_positions(const UserConfig &u, const Scenario &sc)
{
    const auto f = surface_frame(sc.ios);
    std::vector<Vec3> pos;
    for (int r = 0; r < u.n_antennas; ++r)
        pos.push_back(u.position + (r - 0.5 * (u.n_antennas - 1)) * 0.5 * sc.lambda() * f.horizontal);
    return pos;
}

// Signed distance of a point from the surface plane (positive along normal).
inline double plane_offset(const SurfaceConfig &s, const Vec3 &p)
{
    return (p - s.center).dot(surface_frame(s).normal);
}

// A receiver on the transmitter's side of the plane is served by reflection,
// one on the opposite side by refraction.
inline Side side_of(const SurfaceConfig &s, const Vec3 &tx, const Vec3 &rx)
{
    const double a = plane_offset(s, tx), b = plane_offset(s, rx);
    if (a == 0.0 || b == 0.0)
        throw ConfigError("point lies on the surface plane; side is undefined");
    return (a > 0.0) == (b > 0.0) ? Side::reflect : Side::refract;
}

inline void validate_transmitter(const BaseStation &bs, const std::string &name)
{
    if (bs.n_antennas < 1)
        throw ConfigError(name + ".n_antennas must be >= 1");
    if (!(bs.tx_power_w > 0.0))
        throw ConfigError(name + ".tx_power_w must be positive");
    if (bs.antenna_spacing < 0.0)
        throw ConfigError(name + ".antenna_spacing must be non-negative");
    if (!(bs.beamwidth_deg > 0.0) || bs.beamwidth_deg > 360.0)
        throw ConfigError(name + ".beamwidth_deg must be in (0, 360]");
}

inline void validate(const Scenario &sc)
{
    (void)sc.lambda();
    if (!(sc.noise_power_w > 0.0))
        throw ConfigError("noise_power_w must be positive");
    if (!(sc.kappa >= 0.0))
        throw ConfigError("kappa must be >= 0");
    if (!(sc.radiation_exponent >= 0.0))
        throw ConfigError("radiation_exponent must be >= 0");
    if (sc.ios.rows < 1 || sc.ios.cols < 1)
        throw ConfigError("ios.rows and ios.cols must be >= 1");
    if (sc.ios.pitch_x < 0.0 || sc.ios.pitch_y < 0.0)
        throw ConfigError("ios pitch must be non-negative");
    if (sc.ios.active_row_begin < 0 || sc.ios.active_row_begin >= sc.ios.rows ||
        (sc.ios.active_row_count >= 0 && sc.ios.active_row_begin + sc.ios.active_row_count > sc.ios.rows))
        throw ConfigError("ios active row stripe outside the panel");
    if (!sc.ios.table)
        throw ConfigError("ios.state_table missing");
    (void)surface_frame(sc.ios);
    validate_transmitter(sc.bs, "bs");
    if (plane_offset(sc.ios, sc.bs.position) == 0.0)
        throw ConfigError("bs lies on the surface plane");
    for (std::size_t j = 0; j < sc.aps.size(); ++j)
    {
        validate_transmitter(sc.aps[j], "aps[" + std::to_string(j) + "]");
        if (plane_offset(sc.ios, sc.aps[j].position) == 0.0)
            throw ConfigError("aps[" + std::to_string(j) + "] lies on the surface plane");
    }
    for (std::size_t k = 0; k < sc.users.size(); ++k)
    {
        const auto &u = sc.users[k];
        const std::string name = "users[" + std::to_string(k) + "]";
        if (u.n_antennas < 1)
            throw ConfigError(name + ".n_antennas must be >= 1");
        if (plane_offset(sc.ios, u.position) == 0.0)
            throw ConfigError(name + ".position lies on the surface plane");
        if (!sc.aps.empty() && (u.cell < 0 || u.cell >= static_cast<int>(sc.aps.size())))
            throw ConfigError(name + ".cell does not name an access point");
    }
}

// ---------------------------------------------------------------------------
// Closed-form link laws

// Normalized power pattern |cos(angle)|^exponent; zero beyond grazing.
inline double radiation_gain(double incident_angle, double exponent)
{
    if (std::abs(incident_angle) >= kPi / 2.0)
        return 0.0;
    return std::pow(std::abs(std::cos(incident_angle)), exponent);
}

// Radiation gain of a surface element toward point p.
inline double radiation_gain_toward(const Vec3 &element, const Vec3 &normal, const Vec3 &p, double exponent)
{
    const Vec3 d = p - element;
    const double c = std::abs(d.dot(normal)) / d.norm();
    return std::pow(std::min(1.0, c), exponent);
}

// Amplitude attenuation of the transmitter -> surface -> receiver link.
// Scatter: (lambda/4pi)^2 / (d1 d2); lens: (lambda/4pi) / (d1 + d2).
inline double path_loss(PathlossMode mode, double d1, double d2, double lambda)
{
    if (!(d1 > 0.0) || !(d2 > 0.0))
        throw ConfigError("path-loss distances must be positive");
    const double ref = lambda / (4.0 * kPi);
    return mode == PathlossMode::scatter ? ref * ref / (d1 * d2) : ref / (d1 + d2);
}

inline double rayleigh_distance(double aperture, double lambda)
{
    if (!(aperture > 0.0) || !(lambda > 0.0))
        throw ConfigError("aperture and wavelength must be positive");
    return 2.0 * aperture * aperture / lambda;
}

// Relative focal-spot area behind the surface at distance z.
inline double near_field_beam_area(double z, double aperture, double lambda)
{
    return lambda * lambda * (1.0 + 4.0 * (z / aperture) * (z / aperture));
}

enum class FieldRegion
{
    near,
    boundary,
    far
};

inline FieldRegion classify_field(double z, double aperture, double lambda)
{
    const double r = rayleigh_distance(aperture, lambda);
    if (std::abs(z - r) <= 1e-9 * r)
        return FieldRegion::boundary;
    return z < r ? FieldRegion::near : FieldRegion::far;
}

inline double surface_aperture(const Scenario &sc)
{
    const double w = sc.ios.cols * sc.pitch_x(), h = sc.ios.rows * sc.pitch_y();
    return std::max(w, h);
}

// Elements illuminated by the transmitter's main-lobe cone. When the
// transmitter is farther than 2 * border / lambda the whole panel is lit.
inline std::vector<bool> effective_area_mask(const Scenario &sc, const BaseStation &tx, double beamwidth_rad)
{
    const auto pos = element_positions(sc);
    std::vector<bool> mask(pos.size(), true);
    const Vec3 axis = sc.ios.center - tx.position;
    const double d1 = axis.norm();
    const double border = surface_aperture(sc);
    if (d1 > 2.0 * border / sc.lambda())
        return mask;
    const double half = 0.5 * beamwidth_rad;
    const Vec3 ax = axis / d1;
    for (std::size_t m = 0; m < pos.size(); ++m)
    {
        const Vec3 d = (pos[m] - tx.position).normalized();
        const double ang = std::acos(std::clamp(d.dot(ax), -1.0, 1.0));
        mask[m] = ang <= half + 1e-12;
    }
    return mask;
}

inline std::vector<bool> effective_area_mask(const Scenario &sc, double beamwidth_rad)
{
    return effective_area_mask(sc, sc.bs, beamwidth_rad);
}

// Rows left uncovered by absorber.
inline std::vector<bool> stripe_mask(const SurfaceConfig &s)
{
    std::vector<bool> mask(static_cast<std::size_t>(s.elements()), false);
    const int count = s.active_row_count < 0 ? s.rows - s.active_row_begin : s.active_row_count;
    for (int r = s.active_row_begin; r < s.active_row_begin + count; ++r)
        for (int c = 0; c < s.cols; ++c)
            mask[static_cast<std::size_t>(r * s.cols + c)] = true;
    return mask;
}

// ---------------------------------------------------------------------------
// Channel set

struct PhaseConfig
{
    std::vector<std::uint16_t> states;

    std::size_t size() const { return states.size(); }
    bool operator==(const PhaseConfig &) const = default;

    static PhaseConfig uniform(std::size_t m, std::uint16_t s = 0) { return {std::vector<std::uint16_t>(m, s)}; }
};

struct ChannelSet
{
    CMatrix h_bi;                               // M x N
    std::vector<CMatrix> h_iu;                  // per user, M x Nr (conjugated)
    std::vector<CMatrix> h_d;                   // per user, N x Nr (conjugated)
    Eigen::VectorXd incident_gain;              // per element
    std::vector<Eigen::VectorXd> departure_gain; // per user, per element
    std::vector<Side> sides;                    // per user
    std::vector<bool> active;                   // per element
    std::shared_ptr<const ElementStateTable> table;

    std::size_t elements() const { return static_cast<std::size_t>(h_bi.rows()); }
    std::size_t antennas() const { return static_cast<std::size_t>(h_bi.cols()); }
    std::size_t users() const { return h_iu.size(); }

    bool single_antenna_users() const
    {
        for (const auto &h : h_iu)
            if (h.cols() != 1)
                return false;
        return true;
    }

    // sqrt(G_in * G_out) gated by the active mask, per (element, user).
    double q_scale(std::size_t m, std::size_t k) const
    {
        return active[m] ? std::sqrt(incident_gain[static_cast<Eigen::Index>(m)] *
                                     departure_gain[k][static_cast<Eigen::Index>(m)])
                         : 0.0;
    }

    // Diagonal entry of Q seen by user k for element m in the given state.
    Complex q_entry(std::size_t m, std::size_t k, std::size_t state) const
    {
        return q_scale(m, k) * coefficient(*table, state, sides[k]);
    }

    ChannelSet with_table(const ElementStateTable &t) const
    {
        ChannelSet c = *this;
        c.table = std::make_shared<const ElementStateTable>(t);
        return c;
    }

    // Subset of users, in the given order.
    ChannelSet select_users(const std::vector<std::size_t> &idx) const
    {
        ChannelSet c;
        c.h_bi = h_bi;
        c.incident_gain = incident_gain;
        c.active = active;
        c.table = table;
        for (auto k : idx)
        {
            c.h_iu.push_back(h_iu.at(k));
            c.h_d.push_back(h_d.at(k));
            c.departure_gain.push_back(departure_gain.at(k));
            c.sides.push_back(sides.at(k));
        }
        return c;
    }

    // Collapses multi-antenna users with receive combiners w_k (Nr each).
    ChannelSet combined(const std::vector<CVector> &w) const
    {
        if (w.size() != users())
            throw ConfigError("one combiner per user required");
        ChannelSet c = *this;
        for (std::size_t k = 0; k < users(); ++k)
        {
            if (w[k].size() != h_iu[k].cols())
                throw ConfigError("combiner length does not match user antenna count");
            c.h_iu[k] = h_iu[k] * w[k];
            c.h_d[k] = h_d[k] * w[k];
        }
        return c;
    }

    bool operator==(const ChannelSet &o) const
    {
        if (h_iu.size() != o.h_iu.size() || sides != o.sides || active != o.active)
            return false;
        if (h_bi.rows() != o.h_bi.rows() || h_bi.cols() != o.h_bi.cols() || h_bi != o.h_bi ||
            incident_gain != o.incident_gain)
            return false;
        for (std::size_t k = 0; k < h_iu.size(); ++k)
            if (h_iu[k].rows() != o.h_iu[k].rows() || h_iu[k].cols() != o.h_iu[k].cols() || h_iu[k] != o.h_iu[k] ||
                h_d[k] != o.h_d[k] || departure_gain[k] != o.departure_gain[k])
                return false;
        return *table == *o.table;
    }
};

struct SynthesisOptions
{
    bool los_only = false; // drop the NLoS part regardless of kappa
};

namespace detail {

inline Complex cn01(std::mt19937_64 &rng)
{
    std::normal_distribution<double> g(0.0, 1.0);
    const double re = g(rng);
    const double im = g(rng);
    return {re * std::sqrt(0.5), im * std::sqrt(0.5)};
}

struct RicianWeights
{
    double los;
    double nlos;
};

inline RicianWeights rician_weights(double kappa, bool los_only)
{
    if (los_only || std::isinf(kappa))
        return {1.0, 0.0};
    return {std::sqrt(kappa / (kappa + 1.0)), std::sqrt(1.0 / (kappa + 1.0))};
}

inline Complex los_phasor(double d, double lambda) { return std::polar(1.0, -kTwoPi * d / lambda); }

} // namespace detail

// Links of one transmitter toward the surface and every user. A pure
// function of (scenario, transmitter, seed).
inline ChannelSet synthesize_channels(const Scenario &sc, const BaseStation &tx, std::uint64_t seed,
                                      SynthesisOptions opt = {})
{
    validate(sc);
    const double lambda = sc.lambda();
    const double ref = lambda / (4.0 * kPi);
    const auto frame = surface_frame(sc.ios);
    const auto el = element_positions(sc);
    const auto ant = bs_antenna_positions(tx, sc);
    const auto M = static_cast<Eigen::Index>(el.size());
    const auto N = static_cast<Eigen::Index>(ant.size());
    const auto w = detail::rician_weights(sc.kappa, opt.los_only);
    std::mt19937_64 rng(seed);

    ChannelSet cs;
    cs.table = sc.ios.table;
    cs.h_bi.resize(M, N);
    for (Eigen::Index m = 0; m < M; ++m)
        for (Eigen::Index n = 0; n < N; ++n)
        {
            const double d = (el[static_cast<std::size_t>(m)] - ant[static_cast<std::size_t>(n)]).norm();
            const double amp = sc.pathloss == PathlossMode::scatter ? ref / d : 1.0;
            const Complex g = detail::cn01(rng);
            cs.h_bi(m, n) = amp * (w.los * detail::los_phasor(d, lambda) + w.nlos * g);
        }

    cs.incident_gain.resize(M);
    for (Eigen::Index m = 0; m < M; ++m)
        cs.incident_gain[m] =
            radiation_gain_toward(el[static_cast<std::size_t>(m)], frame.normal, tx.position, sc.radiation_exponent);

    const auto area = effective_area_mask(sc, tx, deg2rad(tx.beamwidth_deg));
    const auto stripe = stripe_mask(sc.ios);
    cs.active.resize(el.size());
    for (std::size_t m = 0; m < el.size(); ++m)
        cs.active[m] = area[m] && stripe[m];

    for (const auto &u : sc.users)
    {
        const auto rx = user_antenna_positions(u, sc);
        const auto R = static_cast<Eigen::Index>(rx.size());
        CMatrix hiu(M, R);
        for (Eigen::Index m = 0; m < M; ++m)
            for (Eigen::Index r = 0; r < R; ++r)
            {
                const Vec3 &pm = el[static_cast<std::size_t>(m)];
                const double d2 = (rx[static_cast<std::size_t>(r)] - pm).norm();
                double amp;
                if (sc.pathloss == PathlossMode::scatter)
                    amp = ref / d2;
                else
                    amp = ref / ((pm - tx.position).norm() + d2);
                const Complex g = detail::cn01(rng);
                hiu(m, r) = std::conj(amp * (w.los * detail::los_phasor(d2, lambda) + w.nlos * g));
            }
        cs.h_iu.push_back(std::move(hiu));

        Eigen::VectorXd gout(M);
        for (Eigen::Index m = 0; m < M; ++m)
            gout[m] = radiation_gain_toward(el[static_cast<std::size_t>(m)], frame.normal, u.position,
                                            sc.radiation_exponent);
        cs.departure_gain.push_back(std::move(gout));
        cs.sides.push_back(side_of(sc.ios, tx.position, u.position));
    }

    for (const auto &u : sc.users)
    {
        const auto rx = user_antenna_positions(u, sc);
        const auto R = static_cast<Eigen::Index>(rx.size());
        const bool crosses = side_of(sc.ios, tx.position, u.position) == Side::refract;
        const double loss_db = u.direct_loss_db + (crosses ? sc.wall_loss_db : 0.0);
        const double extra = std::pow(10.0, -loss_db / 20.0);
        CMatrix hd(N, R);
        for (Eigen::Index n = 0; n < N; ++n)
            for (Eigen::Index r = 0; r < R; ++r)
            {
                const double d = (rx[static_cast<std::size_t>(r)] - ant[static_cast<std::size_t>(n)]).norm();
                const Complex g = detail::cn01(rng);
                hd(n, r) = u.blocked ? Complex{}
                                     : std::conj(ref / d * extra * (w.los * detail::los_phasor(d, lambda) + w.nlos * g));
            }
        cs.h_d.push_back(std::move(hd));
    }
    return cs;
}

inline ChannelSet synthesize_channels(const Scenario &sc, std::uint64_t seed, SynthesisOptions opt = {})
{
    return synthesize_channels(sc, sc.bs, seed, opt);
}

// ---------------------------------------------------------------------------
// Cascaded channel

inline void check_config(const ChannelSet &ch, const PhaseConfig &cfg)
{
    if (cfg.size() != ch.elements())
        throw ConfigError("phase configuration has " + std::to_string(cfg.size()) + " entries, surface has " +
                          std::to_string(ch.elements()));
    for (auto s : cfg.states)
        if (s >= ch.table->size())
            throw ConfigError("phase configuration references state " + std::to_string(s) + " of a " +
                              std::to_string(ch.table->size()) + "-state table");
}

// Nr x N effective channel of user k: h_D^H + h_IU^H Q H_BI.
inline CMatrix cascaded_channel_user(const ChannelSet &ch, const PhaseConfig &cfg, std::size_t k)
{
    check_config(ch, cfg);
    const auto M = static_cast<Eigen::Index>(ch.elements());
    CMatrix out = ch.h_d[k].adjoint();
    for (Eigen::Index m = 0; m < M; ++m)
    {
        const Complex q = ch.q_entry(static_cast<std::size_t>(m), k, cfg.states[static_cast<std::size_t>(m)]);
        if (q == Complex{})
            continue;
        out += q * ch.h_iu[k].row(m).adjoint() * ch.h_bi.row(m);
    }
    return out;
}

// K x N matrix whose rows are the effective channels of single-antenna users.
inline CMatrix cascaded_channel(const ChannelSet &ch, const PhaseConfig &cfg)
{
    if (!ch.single_antenna_users())
        throw InfeasibleError("cascaded_channel needs single-antenna users; combine first");
    CMatrix H(static_cast<Eigen::Index>(ch.users()), static_cast<Eigen::Index>(ch.antennas()));
    for (std::size_t k = 0; k < ch.users(); ++k)
        H.row(static_cast<Eigen::Index>(k)) = cascaded_channel_user(ch, cfg, k);
    return H;
}

// Per-element contribution rows, B_k(m, :) = conj(h_IU,k[m]) * q_scale(m, k) * H_BI(m, :),
// so that h_eff,k = h_D,k^H + sum_m coef(state_m, side_k) * B_k(m, :).
// Single-antenna users only.
struct CascadeBasis
{
    std::vector<CMatrix> rows; // per user, M x N
    CMatrix direct;            // K x N
    std::vector<std::vector<Complex>> coef; // [side][state]

    Complex coefficient_of(std::size_t k_side, std::size_t state) const { return coef[k_side][state]; }
};

inline CascadeBasis cascade_basis(const ChannelSet &ch)
{
    if (!ch.single_antenna_users())
        throw InfeasibleError("optimization needs single-antenna users; combine first");
    CascadeBasis b;
    const auto M = static_cast<Eigen::Index>(ch.elements());
    const auto N = static_cast<Eigen::Index>(ch.antennas());
    const auto K = static_cast<Eigen::Index>(ch.users());
    b.direct.resize(K, N);
    for (Eigen::Index k = 0; k < K; ++k)
    {
        const auto ku = static_cast<std::size_t>(k);
        b.direct.row(k) = ch.h_d[ku].col(0).adjoint();
        CMatrix r(M, N);
        for (Eigen::Index m = 0; m < M; ++m)
            r.row(m) = std::conj(ch.h_iu[ku](m, 0)) * ch.q_scale(static_cast<std::size_t>(m), ku) * ch.h_bi.row(m);
        b.rows.push_back(std::move(r));
    }
    b.coef.resize(2);
    for (std::size_t s = 0; s < ch.table->size(); ++s)
    {
        b.coef[0].push_back(coefficient(*ch.table, s, Side::reflect));
        b.coef[1].push_back(coefficient(*ch.table, s, Side::refract));
    }
    return b;
}

inline std::size_t side_index(Side s) { return s == Side::reflect ? 0 : 1; }

} // namespace ios
