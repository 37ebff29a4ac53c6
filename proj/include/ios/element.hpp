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

// Element-level response of an omni-surface element: a measured state table
// and the two-port equivalent-circuit model that can generate one.

#pragma once

#include "common.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace ios {

enum class Side
{
    reflect,
    refract
};

inline const char *to_string(Side s) { return s == Side::reflect ? "reflect" : "refract"; }

struct ElementState
{
    double refl_amp = 0.0;
    double refl_phase = 0.0; // rad, [0, 2pi)
    double refr_amp = 0.0;
    double refr_phase = 0.0; // rad, [0, 2pi)
};

// Ordered list of element states. Immutable once constructed; the
// insertion-loss bound refl_amp^2 + refr_amp^2 <= 1 holds for every state.
class ElementStateTable
{
  public:
    static constexpr double kBoundSlack = 1e-12;

    explicit ElementStateTable(std::vector<ElementState> states) : states_(std::move(states))
    {
        if (states_.size() < 2)
            throw ConfigError("element state table needs at least 2 states");
        for (std::size_t i = 0; i < states_.size(); ++i)
        {
            auto &s = states_[i];
            if (!std::isfinite(s.refl_amp) || !std::isfinite(s.refr_amp) || !std::isfinite(s.refl_phase) ||
                !std::isfinite(s.refr_phase))
                throw ConfigError("element state " + std::to_string(i) + " has non-finite values");
            if (s.refl_amp < 0.0 || s.refr_amp < 0.0 || s.refl_amp > 1.0 || s.refr_amp > 1.0)
                throw ConfigError("element state " + std::to_string(i) + " amplitude outside [0, 1]");
            if (s.refl_amp * s.refl_amp + s.refr_amp * s.refr_amp > 1.0 + kBoundSlack)
                throw ConfigError("element state " + std::to_string(i) +
                                  " violates the insertion-loss bound |refl|^2 + |refr|^2 <= 1");
            s.refl_phase = wrap_2pi(s.refl_phase);
            s.refr_phase = wrap_2pi(s.refr_phase);
        }
    }

    std::size_t size() const { return states_.size(); }
    const ElementState &state(std::size_t i) const
    {
        if (i >= states_.size())
            throw std::out_of_range("element state index " + std::to_string(i) + " out of range (table has " +
                                    std::to_string(states_.size()) + " states)");
        return states_[i];
    }
    const std::vector<ElementState> &states() const { return states_; }

    // Largest |refl|^2 + |refr|^2 over all states.
    double max_total_power() const
    {
        double m = 0.0;
        for (const auto &s : states_)
            m = std::max(m, s.refl_amp * s.refl_amp + s.refr_amp * s.refr_amp);
        return m;
    }

    // Reflect-only (IRS) and refract-only (RRS) degenerations.
    ElementStateTable without_refraction() const
    {
        auto st = states_;
        for (auto &s : st)
            s.refr_amp = 0.0;
        return ElementStateTable(std::move(st));
    }
    ElementStateTable without_reflection() const
    {
        auto st = states_;
        for (auto &s : st)
            s.refl_amp = 0.0;
        return ElementStateTable(std::move(st));
    }
    ElementStateTable switched_off() const
    {
        auto st = states_;
        for (auto &s : st)
            s.refl_amp = s.refr_amp = 0.0;
        return ElementStateTable(std::move(st));
    }

    bool operator==(const ElementStateTable &o) const
    {
        if (states_.size() != o.states_.size())
            return false;
        for (std::size_t i = 0; i < states_.size(); ++i)
        {
            const auto &a = states_[i], &b = o.states_[i];
            if (a.refl_amp != b.refl_amp || a.refl_phase != b.refl_phase || a.refr_amp != b.refr_amp ||
                a.refr_phase != b.refr_phase)
                return false;
        }
        return true;
    }

  private:
    std::vector<ElementState> states_;
};

// Complex response amp * exp(j phase) of one state on the requested side.
inline Complex coefficient(const ElementStateTable &table, std::size_t state, Side side)
{
    const auto &s = table.state(state);
    return side == Side::reflect ? std::polar(s.refl_amp, s.refl_phase) : std::polar(s.refr_amp, s.refr_phase);
}

// Measured two-state prototype element at 3.6 GHz. Index 0 is both diodes
// OFF, index 1 both diodes ON.
inline ElementStateTable measured_prototype_table()
{
    return ElementStateTable({
        {0.46, deg2rad(20.0), 0.58, deg2rad(300.0)},
        {0.55, deg2rad(215.0), 0.81, deg2rad(123.0)},
    });
}

// Plain-text table: one state per line, `refl_amp refl_phase_deg refr_amp
// refr_phase_deg`. Blank lines and `#` comments are ignored.
inline ElementStateTable parse_state_table(std::istream &in, const std::string &origin = "<stream>")
{
    std::vector<ElementState> states;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line))
    {
        ++lineno;
        if (auto h = line.find('#'); h != std::string::npos)
            line.erase(h);
        std::istringstream ls(line);
        std::vector<double> v;
        double x;
        while (ls >> x)
            v.push_back(x);
        if (!ls.eof())
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": non-numeric field");
        if (v.empty())
            continue;
        if (v.size() != 4)
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected 4 fields, got " +
                              std::to_string(v.size()));
        states.push_back({v[0], deg2rad(v[1]), v[2], deg2rad(v[3])});
    }
    return ElementStateTable(std::move(states));
}

inline ElementStateTable load_state_table(const std::string &path)
{
    std::ifstream f(path);
    if (!f)
        throw ConfigError("cannot open element table '" + path + "'");
    return parse_state_table(f, path);
}

inline std::string format_state_table(const ElementStateTable &t)
{
    std::ostringstream os;
    os.precision(17);
    for (const auto &s : t.states())
        os << s.refl_amp << ' ' << rad2deg(s.refl_phase) << ' ' << s.refr_amp << ' ' << rad2deg(s.refr_phase)
           << '\n';
    return os.str();
}

// ---------------------------------------------------------------------------
// Discrete phase sets

struct DiscretePhaseSet
{
    unsigned bits = 1;
    std::vector<double> phases; // s * pi / 2^(bits-1), s = 0 .. 2^bits - 1

    double spacing() const { return kPi / std::ldexp(1.0, static_cast<int>(bits) - 1); }
};

inline DiscretePhaseSet discrete_phase_set(unsigned bits)
{
    if (bits == 0)
        throw ConfigError("discrete phase set needs at least 1 bit");
    if (bits > 16)
        throw ConfigError("discrete phase set limited to 16 bits");
    DiscretePhaseSet set;
    set.bits = bits;
    const std::size_t n = std::size_t{1} << bits;
    const double step = kPi / std::ldexp(1.0, static_cast<int>(bits) - 1);
    set.phases.reserve(n);
    for (std::size_t s = 0; s < n; ++s)
        set.phases.push_back(static_cast<double>(s) * step);
    return set;
}

// Element whose reflection phase walks the discrete grid and whose refraction
// phase trails it by a fixed coupling offset: refr = refl + coupling.
inline ElementStateTable table_from_phase_set(const DiscretePhaseSet &set, double refl_amp, double refr_amp,
                                              double coupling)
{
    std::vector<ElementState> st;
    st.reserve(set.phases.size());
    for (double p : set.phases)
        st.push_back({refl_amp, p, refr_amp, p + coupling});
    return ElementStateTable(std::move(st));
}

// ---------------------------------------------------------------------------
// Design-principle report

struct DesignReport
{
    std::vector<double> amp_gap;       // per state |refl_amp - refr_amp|
    double phase_sep_refl = 0.0;       // min pairwise |theta_i - theta_j| over canonical phases, rad
    double phase_sep_refr = 0.0;
    double circular_sep_refl = 0.0;    // min pairwise distance on the circle, rad
    double circular_sep_refr = 0.0;
    std::vector<double> coupling_const; // per state (refr_phase - refl_phase) mod 2pi
    std::vector<double> coupling_gap;   // per state |refl_phase - refr_phase| mod pi
};

inline DesignReport validate_design_principles(const ElementStateTable &table)
{
    DesignReport r;
    const auto &st = table.states();
    auto circ = [](double a, double b) {
        double d = std::abs(a - b);
        return std::min(d, kTwoPi - d);
    };
    r.phase_sep_refl = r.phase_sep_refr = r.circular_sep_refl = r.circular_sep_refr =
        std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < st.size(); ++i)
    {
        r.amp_gap.push_back(std::abs(st[i].refl_amp - st[i].refr_amp));
        r.coupling_const.push_back(wrap_2pi(st[i].refr_phase - st[i].refl_phase));
        r.coupling_gap.push_back(std::fmod(std::abs(st[i].refl_phase - st[i].refr_phase), kPi));
        for (std::size_t j = i + 1; j < st.size(); ++j)
        {
            r.phase_sep_refl = std::min(r.phase_sep_refl, std::abs(st[i].refl_phase - st[j].refl_phase));
            r.phase_sep_refr = std::min(r.phase_sep_refr, std::abs(st[i].refr_phase - st[j].refr_phase));
            r.circular_sep_refl = std::min(r.circular_sep_refl, circ(st[i].refl_phase, st[j].refl_phase));
            r.circular_sep_refr = std::min(r.circular_sep_refr, circ(st[i].refr_phase, st[j].refr_phase));
        }
    }
    return r;
}

// ---------------------------------------------------------------------------
// Equivalent circuit (two symmetric layers, feedline in the middle)

// Series R-L-C branch. A missing capacitor is expressed as C = +inf (short),
// and a missing branch as std::nullopt at the call site (open circuit).
struct SeriesRlc
{
    double r = 0.0; // ohm
    double l = 0.0; // H
    double c = std::numeric_limits<double>::infinity(); // F

    Complex impedance(double omega) const
    {
        if (r < 0.0 || l < 0.0 || !(c > 0.0))
            throw NumericalError("series RLC branch needs R >= 0, L >= 0, C > 0");
        Complex z(r, omega * l);
        if (std::isfinite(c))
            z += Complex(0.0, -1.0 / (omega * c));
        return z;
    }

    Complex admittance(double omega) const
    {
        const Complex z = impedance(omega);
        if (std::abs(z) == 0.0 || !std::isfinite(z.real()) || !std::isfinite(z.imag()))
            throw NumericalError("series RLC branch has zero or non-finite impedance");
        return 1.0 / z;
    }
};

enum class DiodeState
{
    off,
    on
};

// PIN diode: ON is a small resistance with package inductance, OFF a
// junction capacitance (optionally with a series resistance).
struct DiodeModel
{
    double r_on = 2.0;       // ohm
    double l_on = 0.4e-9;    // H
    double c_off = 0.15e-12; // F
    double r_off = 0.0;      // ohm

    SeriesRlc branch(DiodeState s) const
    {
        if (s == DiodeState::on)
            return {r_on, l_on, std::numeric_limits<double>::infinity()};
        return {r_off, 0.0, c_off};
    }
};

struct CircuitParams
{
    SeriesRlc patch{0.5, 1.2e-9, 0.25e-12};     // R1, L1, C1 (metallic patch)
    SeriesRlc substrate{0.3, 0.8e-9, 0.6e-12};  // R2, L2, C2 (substrate to ground)
    SeriesRlc feedline{0.2, 2.0e-9, 0.9e-12};   // R3, L3, C3
    Complex ys1{0.0, 0.02};                     // substrate-metal coupling, S
    Complex ys2{0.0, 0.015};                    // inter-layer coupling, S
    DiodeModel diode;
    double z0 = 376.730313668; // free-space wave impedance, ohm
    double d1 = 0.0;           // m
    double d2 = 0.0;           // m
    double beta = kTwoPi * 3.6e9 / kSpeedOfLight; // rad/m

    void validate() const
    {
        for (const auto *b : {&patch, &substrate, &feedline})
            if (b->r < 0.0 || b->l < 0.0 || !(b->c > 0.0))
                throw ConfigError("circuit branch needs R >= 0, L >= 0, C > 0");
        if (!(z0 > 0.0))
            throw ConfigError("characteristic impedance Z0 must be positive");
        if (!(beta > 0.0))
            throw ConfigError("propagation constant must be positive");
        if (ys1.real() < 0.0 || ys2.real() < 0.0)
            throw ConfigError("coupling admittances must be passive (Re >= 0)");
        if (d1 < 0.0 || d2 < 0.0)
            throw ConfigError("reference-plane distances must be non-negative");
    }
};

using Abcd = Eigen::Matrix2cd;

inline Abcd shunt_admittance(Complex y)
{
    Abcd m;
    m << 1.0, 0.0, y, 1.0;
    return m;
}

inline Abcd series_impedance(Complex z)
{
    Abcd m;
    m << 1.0, z, 0.0, 1.0;
    return m;
}

// Feedline section between the two coupling admittances.
inline Abcd feedline_section(Complex yf, Complex zs2)
{
    Abcd m;
    const Complex a = 1.0 + yf * zs2;
    m << a, zs2, 2.0 * yf + yf * yf * zs2, a;
    return m;
}

// Cascade upper pattern | coupling | feedline | coupling | lower pattern,
// given the branch admittances and the coupling impedances zs = 1/Ys.
inline Abcd abcd_cascade(Complex y_upper, Complex zs1, Complex yf, Complex zs2, Complex y_lower)
{
    for (Complex v : {y_upper, zs1, yf, zs2, y_lower})
        if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
            throw NumericalError("non-finite admittance in the element circuit");
    return shunt_admittance(y_upper) * series_impedance(zs1) * feedline_section(yf, zs2) *
           series_impedance(zs1) * shunt_admittance(y_lower);
}

// Parallel admittance of one metallic pattern: patch, substrate and diode
// branches in parallel.
inline Complex pattern_admittance(const CircuitParams &p, DiodeState s, double omega)
{
    return p.patch.admittance(omega) + p.substrate.admittance(omega) + p.diode.branch(s).admittance(omega);
}

inline Abcd abcd_matrix(const CircuitParams &p, DiodeState s, double frequency_hz)
{
    if (!(frequency_hz > 0.0))
        throw ConfigError("frequency must be positive");
    p.validate();
    const double omega = kTwoPi * frequency_hz;
    if (std::abs(p.ys1) == 0.0 || std::abs(p.ys2) == 0.0)
        throw NumericalError("coupling admittance must be nonzero");
    const Complex ym = pattern_admittance(p, s, omega);
    const Complex yf = p.feedline.admittance(omega);
    return abcd_cascade(ym, 1.0 / p.ys1, yf, 1.0 / p.ys2, ym);
}

struct CircuitCoefficients
{
    Complex reflect;
    Complex refract;
};

inline CircuitCoefficients circuit_coefficients(const Abcd &m, double z0, double d1, double d2, double beta)
{
    if (!(z0 > 0.0))
        throw ConfigError("characteristic impedance Z0 must be positive");
    const Complex a = m(0, 0), b = m(0, 1), c = m(1, 0), d = m(1, 1);
    const Complex lhs = a + b / z0;
    const Complex rhs = z0 * (c + d / z0);
    const Complex den = lhs + rhs;
    if (!(std::abs(den) > 1e-300) || !std::isfinite(den.real()) || !std::isfinite(den.imag()))
        throw NumericalError("singular network: A + B/Z0 + Z0 (C + D/Z0) vanishes");
    const Complex j(0.0, 1.0);
    return {(lhs - rhs) / den * std::exp(-j * 2.0 * beta * d1), 2.0 / den * std::exp(-j * beta * (d1 + d2))};
}

// Two-state table (OFF, ON) generated from the circuit model.
inline ElementStateTable table_from_circuit(const CircuitParams &p, double frequency_hz)
{
    std::vector<ElementState> st;
    for (DiodeState s : {DiodeState::off, DiodeState::on})
    {
        const auto cc = circuit_coefficients(abcd_matrix(p, s, frequency_hz), p.z0, p.d1, p.d2, p.beta);
        st.push_back({std::abs(cc.reflect), std::arg(cc.reflect), std::abs(cc.refract), std::arg(cc.refract)});
    }
    return ElementStateTable(std::move(st));
}

} // namespace ios
