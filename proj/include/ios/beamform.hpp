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

// Digital precoding and discrete surface-state optimization with known CSI.

#pragma once

#include "channel.hpp"

#include <optional>
#include <random>
#include <string>
#include <vector>

namespace ios {

enum class Precoder
{
    zf,
    mmse
};

inline const char *to_string(Precoder p) { return p == Precoder::zf ? "zf" : "mmse"; }

struct Beamformer
{
    CMatrix v; // N x K

    double power() const { return v.squaredNorm(); }
};

namespace detail {

inline Beamformer normalize_power(CMatrix v, double p_t)
{
    const double p = v.squaredNorm();
    if (p > 0.0)
        v *= std::sqrt(p_t / p);
    return {std::move(v)};
}

// ZF without throwing; empty when H H^H is numerically singular.
inline std::optional<Beamformer> try_zero_forcing(const CMatrix &h, double p_t)
{
    if (h.rows() > h.cols())
        return std::nullopt;
    const CMatrix gram = h * h.adjoint();
    Eigen::LLT<CMatrix> llt(gram);
    if (llt.info() != Eigen::Success || !(llt.rcond() > 1e-13))
        return std::nullopt;
    CMatrix v = h.adjoint() * llt.solve(CMatrix::Identity(h.rows(), h.rows()));
    if (!v.allFinite())
        return std::nullopt;
    return normalize_power(std::move(v), p_t);
}

} // namespace detail

inline Beamformer zero_forcing(const CMatrix &h, double p_t)
{
    if (!(p_t > 0.0))
        throw ConfigError("transmit power must be positive");
    if (h.rows() > h.cols())
        throw InfeasibleError("zero forcing needs K <= N, got K=" + std::to_string(h.rows()) +
                              " N=" + std::to_string(h.cols()));
    auto bf = detail::try_zero_forcing(h, p_t);
    if (!bf)
    {
        Eigen::JacobiSVD<CMatrix> svd(h);
        svd.setThreshold(1e-12);
        throw NumericalError("zero forcing: effective channel is rank deficient (rank " +
                             std::to_string(svd.rank()) + " < K=" + std::to_string(h.rows()) + ")");
    }
    return *bf;
}

inline Beamformer mmse_precoder(const CMatrix &h, double p_t, double noise)
{
    if (!(p_t > 0.0))
        throw ConfigError("transmit power must be positive");
    if (!(noise >= 0.0))
        throw ConfigError("noise power must be non-negative");
    const auto k = h.rows();
    const double reg = static_cast<double>(k) * noise / p_t;
    CMatrix gram = h * h.adjoint();
    gram.diagonal().array() += reg;
    CMatrix v = h.adjoint() * gram.ldlt().solve(CMatrix::Identity(k, k));
    if (!v.allFinite())
        throw NumericalError("mmse precoder produced non-finite weights");
    return detail::normalize_power(std::move(v), p_t);
}

// ZF with an MMSE fallback for rank-deficient channels.
inline Beamformer make_precoder(const CMatrix &h, Precoder kind, double p_t, double noise)
{
    if (kind == Precoder::zf)
        if (auto bf = detail::try_zero_forcing(h, p_t))
            return *bf;
    return mmse_precoder(h, p_t, noise);
}

struct RateReport
{
    Eigen::VectorXd sinr;
    Eigen::VectorXd rate; // bit/s/Hz
    double sum_rate = 0.0;
};

// `extra` adds per-user interference power from outside this precoder.
inline RateReport rates_from_effective(const CMatrix &h, const CMatrix &v, double noise,
                                       const Eigen::VectorXd *extra = nullptr)
{
    if (h.cols() != v.rows() || h.rows() != v.cols())
        throw ConfigError("channel and precoder dimensions disagree");
    const CMatrix g = h * v;
    const auto k = h.rows();
    RateReport r;
    r.sinr.resize(k);
    r.rate.resize(k);
    for (Eigen::Index i = 0; i < k; ++i)
    {
        const double sig = std::norm(g(i, i));
        const double tot = g.row(i).squaredNorm();
        const double ext = extra ? (*extra)[i] : 0.0;
        r.sinr[i] = sig / (tot - sig + noise + ext);
        r.rate[i] = std::log2(1.0 + r.sinr[i]);
        r.sum_rate += r.rate[i];
    }
    return r;
}

inline RateReport sinr_and_rates(const ChannelSet &ch, const PhaseConfig &cfg, const Beamformer &bf, double noise)
{
    return rates_from_effective(cascaded_channel(ch, cfg), bf.v, noise);
}

struct AoOptions
{
    int max_sweeps = 20;
    int restarts = 4;
    Precoder precoder = Precoder::zf;
    bool refresh_per_sweep = false; // hold V_D fixed within a sweep
    std::optional<PhaseConfig> initial; // replaces the first random start
};

struct AoResult
{
    PhaseConfig config;
    Beamformer bf;
    double sum_rate = 0.0;
    std::vector<double> trace; // objective after start and after every sweep, best restart
    int sweeps = 0;            // sweeps of the best restart
    int best_restart = 0;
};

struct OptimProblem
{
    double p_t;
    double noise;
    Precoder precoder;
};

inline double objective(const CMatrix &h, const OptimProblem &pb)
{
    const auto bf = make_precoder(h, pb.precoder, pb.p_t, pb.noise);
    return rates_from_effective(h, bf.v, pb.noise).sum_rate;
}

inline CMatrix effective_from_basis(const CascadeBasis &b, const std::vector<Side> &sides, const PhaseConfig &cfg)
{
    CMatrix h = b.direct;
    for (std::size_t k = 0; k < b.rows.size(); ++k)
    {
        const auto si = side_index(sides[k]);
        for (std::size_t m = 0; m < cfg.size(); ++m)
            h.row(static_cast<Eigen::Index>(k)) +=
                b.coef[si][cfg.states[m]] * b.rows[k].row(static_cast<Eigen::Index>(m));
    }
    return h;
}

inline PhaseConfig random_config(std::size_t m, std::size_t states, std::mt19937_64 &rng)
{
    std::uniform_int_distribution<std::size_t> pick(0, states - 1);
    PhaseConfig c;
    c.states.resize(m);
    for (auto &s : c.states)
        s = static_cast<std::uint16_t>(pick(rng));
    return c;
}

namespace detail {

inline void apply_delta(CMatrix &h, const CascadeBasis &b, const std::vector<Side> &sides, std::size_t m,
                        std::size_t from, std::size_t to)
{
    for (std::size_t k = 0; k < b.rows.size(); ++k)
    {
        const auto si = side_index(sides[k]);
        const Complex d = b.coef[si][to] - b.coef[si][from];
        h.row(static_cast<Eigen::Index>(k)) += d * b.rows[k].row(static_cast<Eigen::Index>(m));
    }
}

// Generic coordinate ascent over discrete element states. `value(h, cfg)`
// scores an effective channel. Returns the final configuration and the
// objective trace (one entry at start, one per sweep).
template <class Score>
std::pair<PhaseConfig, std::vector<double>> coordinate_ascent(const CascadeBasis &b, const std::vector<Side> &sides,
                                                              PhaseConfig cfg, std::size_t n_states, int max_sweeps,
                                                              Score &&value, int *sweeps_out = nullptr)
{
    CMatrix h = effective_from_basis(b, sides, cfg);
    double best = value(h, cfg);
    std::vector<double> trace{best};
    int sweeps = 0;
    for (; sweeps < max_sweeps;)
    {
        ++sweeps;
        bool changed = false;
        for (std::size_t m = 0; m < cfg.size(); ++m)
        {
            const std::size_t cur = cfg.states[m];
            std::size_t arg = cur;
            for (std::size_t s = 0; s < n_states; ++s)
            {
                if (s == cur)
                    continue;
                CMatrix hc = h;
                apply_delta(hc, b, sides, m, cur, s);
                cfg.states[m] = static_cast<std::uint16_t>(s);
                const double f = value(hc, cfg);
                cfg.states[m] = static_cast<std::uint16_t>(cur);
                if (f > best + 1e-12 * std::abs(best))
                {
                    best = f;
                    arg = s;
                }
            }
            if (arg != cur)
            {
                apply_delta(h, b, sides, m, cur, arg);
                cfg.states[m] = static_cast<std::uint16_t>(arg);
                changed = true;
            }
        }
        trace.push_back(best);
        if (!changed)
            break;
    }
    if (sweeps_out)
        *sweeps_out = sweeps;
    return {std::move(cfg), std::move(trace)};
}

} // namespace detail

// Coordinate ascent over element states, each candidate scored with its own
// re-computed precoder, best of several random restarts.
inline AoResult alternating_optimize(const ChannelSet &ch, const OptimProblem &pb, const AoOptions &opt,
                                     std::uint64_t seed)
{
    if (opt.restarts < 1 || opt.max_sweeps < 1)
        throw ConfigError("restarts and max_sweeps must be >= 1");
    if (pb.precoder == Precoder::zf && ch.users() > ch.antennas())
        throw InfeasibleError("zero forcing needs K <= N");
    if (opt.initial)
        check_config(ch, *opt.initial);
    const auto basis = cascade_basis(ch);
    const std::size_t n_states = ch.table->size();
    const std::size_t M = ch.elements();

    AoResult best;
    best.sum_rate = -1.0;
    for (int r = 0; r < opt.restarts; ++r)
    {
        std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(r)));
        PhaseConfig start = (r == 0 && opt.initial) ? *opt.initial : random_config(M, n_states, rng);
        int sweeps = 0;
        std::pair<PhaseConfig, std::vector<double>> run;
        if (!opt.refresh_per_sweep)
        {
            run = detail::coordinate_ascent(
                basis, ch.sides, std::move(start), n_states, opt.max_sweeps,
                [&](const CMatrix &h, const PhaseConfig &) { return objective(h, pb); }, &sweeps);
        }
        else
        {
            PhaseConfig cfg = std::move(start);
            CMatrix v = make_precoder(effective_from_basis(basis, ch.sides, cfg), pb.precoder, pb.p_t, pb.noise).v;
            std::vector<double> trace;
            for (sweeps = 0; sweeps < opt.max_sweeps;)
            {
                ++sweeps;
                auto fixed_v = [&](const CMatrix &h, const PhaseConfig &) {
                    return rates_from_effective(h, v, pb.noise).sum_rate;
                };
                auto step = detail::coordinate_ascent(basis, ch.sides, cfg, n_states, 1, fixed_v);
                const bool changed = !(step.first == cfg);
                cfg = std::move(step.first);
                const CMatrix h = effective_from_basis(basis, ch.sides, cfg);
                const double held = rates_from_effective(h, v, pb.noise).sum_rate;
                const CMatrix v_new = make_precoder(h, pb.precoder, pb.p_t, pb.noise).v;
                const double fresh = rates_from_effective(h, v_new, pb.noise).sum_rate;
                if (trace.empty())
                    trace.push_back(step.second.front());
                if (fresh >= held)
                    v = v_new;
                trace.push_back(std::max(fresh, held));
                if (!changed)
                    break;
            }
            run = {std::move(cfg), std::move(trace)};
        }
        const CMatrix h = cascaded_channel(ch, run.first);
        Beamformer bf = make_precoder(h, pb.precoder, pb.p_t, pb.noise);
        const double rate = rates_from_effective(h, bf.v, pb.noise).sum_rate;
        if (rate > best.sum_rate)
        {
            best.config = std::move(run.first);
            best.bf = std::move(bf);
            best.sum_rate = rate;
            best.trace = std::move(run.second);
            best.sweeps = sweeps;
            best.best_restart = r;
        }
    }
    return best;
}

inline OptimProblem problem_of(const Scenario &sc, Precoder p)
{
    return {sc.bs.tx_power_w, sc.noise_power_w, p};
}

inline AoResult alternating_optimize(const ChannelSet &ch, const Scenario &sc, const AoOptions &opt,
                                     std::uint64_t seed)
{
    return alternating_optimize(ch, problem_of(sc, opt.precoder), opt, seed);
}

struct OracleResult
{
    PhaseConfig config;
    double sum_rate = 0.0;
    std::uint64_t evaluated = 0;
};

inline constexpr std::uint64_t kOracleLimit = std::uint64_t{1} << 20;

// Enumerates all configurations; `score(h, cfg)` is maximized.
template <class Score>
OracleResult exhaustive_search(const ChannelSet &ch, Score &&score)
{
    const std::size_t M = ch.elements();
    const std::size_t S = ch.table->size();
    double count = std::pow(static_cast<double>(S), static_cast<double>(M));
    if (count > static_cast<double>(kOracleLimit))
        throw InfeasibleError("exhaustive search over " + std::to_string(S) + "^" + std::to_string(M) +
                              " configurations exceeds the 2^20 bound");
    const auto basis = cascade_basis(ch);
    PhaseConfig cfg = PhaseConfig::uniform(M);
    CMatrix h = effective_from_basis(basis, ch.sides, cfg);
    OracleResult best;
    best.sum_rate = -std::numeric_limits<double>::infinity();
    while (true)
    {
        const double f = score(h, cfg);
        ++best.evaluated;
        if (f > best.sum_rate)
        {
            best.sum_rate = f;
            best.config = cfg;
        }
        std::size_t m = 0;
        for (; m < M; ++m)
        {
            const std::size_t cur = cfg.states[m];
            const std::size_t nxt = (cur + 1) % S;
            detail::apply_delta(h, basis, ch.sides, m, cur, nxt);
            cfg.states[m] = static_cast<std::uint16_t>(nxt);
            if (nxt != 0)
                break;
        }
        if (m == M)
            break;
    }
    // Rescore the winner on a freshly assembled channel.
    const CMatrix hw = cascaded_channel(ch, best.config);
    best.sum_rate = score(hw, best.config);
    return best;
}

inline OracleResult exhaustive_oracle(const ChannelSet &ch, const OptimProblem &pb)
{
    return exhaustive_search(ch, [&](const CMatrix &h, const PhaseConfig &) { return objective(h, pb); });
}

inline OracleResult exhaustive_oracle(const ChannelSet &ch, const Scenario &sc, Precoder p)
{
    return exhaustive_oracle(ch, problem_of(sc, p));
}

} // namespace ios
