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

// Distributed multi-AP negotiation of a shared surface configuration.
//
// Every AP owns the CSI of its own users only. Interference from a peer is
// estimated from geometry (peer position, own user positions, LoS links)
// and the peer's reported digital beamformer. Agreement on the discrete
// configuration is reached with scaled ADMM on the unit phasors of the
// reflection phases; local steps are coordinate ascent over the state grid.

#pragma once

#include "beamform.hpp"
#include "csv.hpp"

#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

namespace ios {

inline std::vector<std::vector<std::size_t>> users_by_cell(const Scenario &sc)
{
    std::vector<std::vector<std::size_t>> out(std::max<std::size_t>(sc.aps.size(), 1));
    for (std::size_t k = 0; k < sc.users.size(); ++k)
        out[sc.aps.empty() ? 0 : static_cast<std::size_t>(sc.users[k].cell)].push_back(k);
    return out;
}

inline const BaseStation &access_point(const Scenario &sc, std::size_t j)
{
    return sc.aps.empty() ? sc.bs : sc.aps.at(j);
}

inline std::size_t ap_count(const Scenario &sc) { return std::max<std::size_t>(sc.aps.size(), 1); }

// True channels from every AP to every user.
inline std::vector<ChannelSet> multicell_channels(const Scenario &sc, std::uint64_t seed)
{
    std::vector<ChannelSet> out;
    for (std::size_t j = 0; j < ap_count(sc); ++j)
        out.push_back(synthesize_channels(sc, access_point(sc, j), derive_seed(seed, j)));
    return out;
}

// What AP j may know: its own users' channels and LoS estimates of every
// peer's links toward those users.
struct LocalView
{
    std::size_t ap = 0;
    std::vector<std::size_t> users; // global user indices
    ChannelSet own;
    std::vector<ChannelSet> peer_estimate; // indexed by AP; own slot unused
};

inline LocalView local_view(const Scenario &sc, const std::vector<ChannelSet> &truth, std::size_t j)
{
    LocalView v;
    v.ap = j;
    v.users = users_by_cell(sc)[j];
    v.own = truth.at(j).select_users(v.users);
    Scenario mine = sc;
    mine.users.clear();
    for (auto k : v.users)
        mine.users.push_back(sc.users[k]);
    for (std::size_t i = 0; i < ap_count(sc); ++i)
        v.peer_estimate.push_back(i == j ? ChannelSet{}
                                         : synthesize_channels(mine, access_point(sc, i), 0, {.los_only = true}));
    return v;
}

struct ApState
{
    std::size_t id = 0;
    PhaseConfig proposal;
    Beamformer bf;
    CVector dual; // scaled multipliers, one per element
    double local_sum_rate = 0.0;
};

struct LocalUpdateOptions
{
    double rho = 1.0;
    int max_sweeps = 5;
    Precoder precoder = Precoder::zf;
};

// Unit phasor of the reflection phase of each state.
inline std::vector<Complex> consensus_phasors(const ElementStateTable &t)
{
    std::vector<Complex> p;
    for (const auto &s : t.states())
        p.push_back(std::polar(1.0, s.refl_phase));
    return p;
}

inline CVector phasor_vector(const PhaseConfig &cfg, const std::vector<Complex> &ph)
{
    CVector v(static_cast<Eigen::Index>(cfg.size()));
    for (std::size_t m = 0; m < cfg.size(); ++m)
        v[static_cast<Eigen::Index>(m)] = ph[cfg.states[m]];
    return v;
}

namespace detail {

struct LocalEvaluator
{
    const LocalView &view;
    const std::vector<Beamformer> &peer_bf;
    OptimProblem pb;

    Eigen::VectorXd interference(const std::vector<CMatrix> &h_peer) const
    {
        Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(view.users.size()));
        for (std::size_t i = 0; i < h_peer.size(); ++i)
            if (i != view.ap && peer_bf[i].v.size() > 0)
                out += (h_peer[i] * peer_bf[i].v).rowwise().squaredNorm();
        return out;
    }

    std::pair<double, Beamformer> rate(const CMatrix &h_own, const std::vector<CMatrix> &h_peer) const
    {
        Beamformer bf = make_precoder(h_own, pb.precoder, pb.p_t, pb.noise);
        const Eigen::VectorXd extra = interference(h_peer);
        const double r = rates_from_effective(h_own, bf.v, pb.noise, &extra).sum_rate;
        return {r, std::move(bf)};
    }
};

} // namespace detail

// One ADMM x-step for AP j: coordinate ascent on
//   own sum rate - rho * sum_m |phasor(state_m) - z_m + u_m|^2
// with the precoder recomputed for every candidate and peer interference
// from the LoS estimates and the peers' reported beamformers.
inline ApState local_update(const ApState &ap, const LocalView &view, const CVector &z,
                            const std::vector<Beamformer> &peer_bf, const LocalUpdateOptions &opt, double p_t,
                            double noise)
{
    if (!(opt.rho >= 0.0))
        throw ConfigError("penalty weight must be >= 0");
    const auto &table = *view.own.table;
    const auto ph = consensus_phasors(table);
    const std::size_t M = view.own.elements();
    const std::size_t S = table.size();
    const detail::LocalEvaluator eval{view, peer_bf, {p_t, noise, opt.precoder}};

    const auto own_basis = cascade_basis(view.own);
    std::vector<CascadeBasis> peer_basis(view.peer_estimate.size());
    for (std::size_t i = 0; i < view.peer_estimate.size(); ++i)
        if (i != view.ap)
            peer_basis[i] = cascade_basis(view.peer_estimate[i]);

    ApState out = ap;
    PhaseConfig &cfg = out.proposal;
    CMatrix h_own = effective_from_basis(own_basis, view.own.sides, cfg);
    std::vector<CMatrix> h_peer(view.peer_estimate.size());
    for (std::size_t i = 0; i < h_peer.size(); ++i)
        if (i != view.ap)
            h_peer[i] = effective_from_basis(peer_basis[i], view.peer_estimate[i].sides, cfg);

    auto penalty = [&](std::size_t m, std::size_t s) {
        return opt.rho * std::norm(ph[s] - z[static_cast<Eigen::Index>(m)] + ap.dual[static_cast<Eigen::Index>(m)]);
    };
    double pen = 0.0;
    for (std::size_t m = 0; m < M; ++m)
        pen += penalty(m, cfg.states[m]);
    auto [rate, bf] = eval.rate(h_own, h_peer);
    double best = rate - pen;

    for (int sweep = 0; sweep < opt.max_sweeps; ++sweep)
    {
        bool changed = false;
        for (std::size_t m = 0; m < M; ++m)
        {
            const std::size_t cur = cfg.states[m];
            std::size_t arg = cur;
            for (std::size_t s = 0; s < S; ++s)
            {
                if (s == cur)
                    continue;
                CMatrix ho = h_own;
                detail::apply_delta(ho, own_basis, view.own.sides, m, cur, s);
                std::vector<CMatrix> hp = h_peer;
                for (std::size_t i = 0; i < hp.size(); ++i)
                    if (i != view.ap)
                        detail::apply_delta(hp[i], peer_basis[i], view.peer_estimate[i].sides, m, cur, s);
                const double f = eval.rate(ho, hp).first - (pen - penalty(m, cur) + penalty(m, s));
                if (f > best + 1e-12 * std::abs(best))
                {
                    best = f;
                    arg = s;
                }
            }
            if (arg != cur)
            {
                detail::apply_delta(h_own, own_basis, view.own.sides, m, cur, arg);
                for (std::size_t i = 0; i < h_peer.size(); ++i)
                    if (i != view.ap)
                        detail::apply_delta(h_peer[i], peer_basis[i], view.peer_estimate[i].sides, m, cur, arg);
                pen += penalty(m, arg) - penalty(m, cur);
                cfg.states[m] = static_cast<std::uint16_t>(arg);
                changed = true;
            }
        }
        if (!changed)
            break;
    }
    std::tie(out.local_sum_rate, out.bf) = eval.rate(h_own, h_peer);
    return out;
}

// ---------------------------------------------------------------------------
// Evaluation with true channels

struct MulticellEval
{
    std::vector<Beamformer> bf;  // per AP
    Eigen::VectorXd rate;        // per user
    Eigen::VectorXd interference; // per user, inter-cell power (W)
    double sum_rate = 0.0;
};

// Per-AP precoding on own users, rates with true inter-cell interference.
inline MulticellEval evaluate_multicell(const Scenario &sc, const std::vector<ChannelSet> &truth, const PhaseConfig &cfg,
                                        Precoder precoder)
{
    const auto cells = users_by_cell(sc);
    const std::size_t J = ap_count(sc);
    const std::size_t K = sc.users.size();
    MulticellEval ev;
    ev.rate = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(K));
    ev.interference = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(K));
    std::vector<CMatrix> h(J);
    for (std::size_t j = 0; j < J; ++j)
    {
        h[j] = cascaded_channel(truth[j], cfg); // K x N_j, all users
        CMatrix own(static_cast<Eigen::Index>(cells[j].size()), h[j].cols());
        for (std::size_t a = 0; a < cells[j].size(); ++a)
            own.row(static_cast<Eigen::Index>(a)) = h[j].row(static_cast<Eigen::Index>(cells[j][a]));
        ev.bf.push_back(cells[j].empty() ? Beamformer{}
                                         : make_precoder(own, precoder, access_point(sc, j).tx_power_w, sc.noise_power_w));
    }
    for (std::size_t j = 0; j < J; ++j)
    {
        if (cells[j].empty())
            continue;
        CMatrix own(static_cast<Eigen::Index>(cells[j].size()), h[j].cols());
        Eigen::VectorXd extra = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(cells[j].size()));
        for (std::size_t a = 0; a < cells[j].size(); ++a)
        {
            const auto k = static_cast<Eigen::Index>(cells[j][a]);
            own.row(static_cast<Eigen::Index>(a)) = h[j].row(k);
            for (std::size_t i = 0; i < J; ++i)
                if (i != j && ev.bf[i].v.size() > 0)
                    extra[static_cast<Eigen::Index>(a)] += (h[i].row(k) * ev.bf[i].v).squaredNorm();
        }
        const auto r = rates_from_effective(own, ev.bf[j].v, sc.noise_power_w, &extra);
        for (std::size_t a = 0; a < cells[j].size(); ++a)
        {
            ev.rate[static_cast<Eigen::Index>(cells[j][a])] = r.rate[static_cast<Eigen::Index>(a)];
            ev.interference[static_cast<Eigen::Index>(cells[j][a])] = extra[static_cast<Eigen::Index>(a)];
        }
        ev.sum_rate += r.sum_rate;
    }
    return ev;
}

// ---------------------------------------------------------------------------
// Negotiation

struct NegotiateOptions
{
    double rho = 1.0;
    double rho_growth = 1.5;
    int patience = 10; // non-improving iterations before rho grows
    int max_iter = 50;
    double tol = 0.0;
    int local_sweeps = 5;
    bool final_vote = true; // pick the agreed configuration by reported local rates
    int refine_sweeps = 3;  // coordinate-ascent rounds on the reported rates after agreement
    AoOptions ao;           // initial proposals
};

struct NegotiationRecord
{
    int iter = 0;
    std::size_t ap = 0;
    double local_sum_rate = 0.0;
    double residual = 0.0;
};

struct NegotiationResult
{
    PhaseConfig consensus;
    std::vector<Beamformer> bf;
    Eigen::VectorXd rate;
    Eigen::VectorXd interference;
    double sum_rate = 0.0;
    std::vector<double> residual_trace;
    std::vector<NegotiationRecord> trace;
    bool converged = false;
    int iterations = 0;
    std::size_t candidates = 0; // configurations put to the final vote
    int refine_rounds = 0;
};

// Fraction of elements on which the proposals do not all agree.
inline double consensus_residual(const std::vector<ApState> &aps)
{
    if (aps.empty())
        return 0.0;
    const std::size_t M = aps.front().proposal.size();
    if (M == 0)
        return 0.0;
    std::size_t diff = 0;
    for (std::size_t m = 0; m < M; ++m)
        for (const auto &a : aps)
            if (a.proposal.states[m] != aps.front().proposal.states[m])
            {
                ++diff;
                break;
            }
    return static_cast<double>(diff) / static_cast<double>(M);
}

// Element-wise majority, ties to the lowest state index.
inline PhaseConfig majority_config(const std::vector<ApState> &aps, std::size_t n_states)
{
    const std::size_t M = aps.front().proposal.size();
    PhaseConfig out = PhaseConfig::uniform(M);
    for (std::size_t m = 0; m < M; ++m)
    {
        std::vector<int> votes(n_states, 0);
        for (const auto &a : aps)
            ++votes[a.proposal.states[m]];
        out.states[m] = static_cast<std::uint16_t>(std::max_element(votes.begin(), votes.end()) - votes.begin());
    }
    return out;
}

// Sum over APs of the locally estimated own sum rate under configuration
// cfg. Each AP contributes a scalar computed from its own view and the
// beamformers its peers would report for cfg.
inline double reported_sum_rate(const Scenario &sc, const std::vector<LocalView> &views, const PhaseConfig &cfg,
                                Precoder precoder)
{
    std::vector<Beamformer> bf;
    std::vector<CMatrix> own;
    for (const auto &v : views)
    {
        own.push_back(cascaded_channel(v.own, cfg));
        bf.push_back(v.users.empty() ? Beamformer{}
                                     : make_precoder(own.back(), precoder, access_point(sc, v.ap).tx_power_w,
                                                     sc.noise_power_w));
    }
    double total = 0.0;
    for (std::size_t j = 0; j < views.size(); ++j)
    {
        if (views[j].users.empty())
            continue;
        Eigen::VectorXd extra = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(views[j].users.size()));
        for (std::size_t i = 0; i < views.size(); ++i)
            if (i != j && bf[i].v.size() > 0)
                extra += (cascaded_channel(views[j].peer_estimate[i], cfg) * bf[i].v).rowwise().squaredNorm();
        total += rates_from_effective(own[j], bf[j].v, sc.noise_power_w, &extra).sum_rate;
    }
    return total;
}

inline NegotiationResult negotiate(const Scenario &sc, const std::vector<ChannelSet> &truth,
                                   const NegotiateOptions &opt, std::uint64_t seed)
{
    if (opt.max_iter < 1)
        throw ConfigError("max_iter must be >= 1");
    if (!(opt.rho >= 0.0) || !(opt.rho_growth >= 1.0))
        throw ConfigError("rho must be >= 0 and rho_growth >= 1");
    const std::size_t J = ap_count(sc);
    if (truth.size() != J)
        throw ConfigError("one channel set per access point required");
    const auto &table = *truth.front().table;
    const auto ph = consensus_phasors(table);
    const std::size_t M = truth.front().elements();

    std::vector<LocalView> views;
    for (std::size_t j = 0; j < J; ++j)
        views.push_back(local_view(sc, truth, j));

    NegotiationResult res;
    std::vector<ApState> aps(J);
    for (std::size_t j = 0; j < J; ++j)
    {
        const auto &tx = access_point(sc, j);
        const auto ao = alternating_optimize(views[j].own, OptimProblem{tx.tx_power_w, sc.noise_power_w, opt.ao.precoder},
                                             opt.ao, seed);
        aps[j] = {j, ao.config, ao.bf, CVector::Zero(static_cast<Eigen::Index>(M)), ao.sum_rate};
    }

    auto exchange = [&]() {
        CVector z = CVector::Zero(static_cast<Eigen::Index>(M));
        for (const auto &a : aps)
            z += phasor_vector(a.proposal, ph) + a.dual;
        z /= static_cast<double>(J);
        for (auto &a : aps)
            a.dual += phasor_vector(a.proposal, ph) - z;
        return z;
    };

    std::vector<PhaseConfig> seen;
    auto remember = [&]() {
        for (const auto &a : aps)
            if (std::find(seen.begin(), seen.end(), a.proposal) == seen.end())
                seen.push_back(a.proposal);
    };
    remember();

    double rho = opt.rho;
    int iter = 1;
    CVector z = exchange();
    double residual = consensus_residual(aps);
    double best_residual = residual;
    int stale = 0;
    res.residual_trace.push_back(residual);
    for (const auto &a : aps)
        res.trace.push_back({iter, a.id, a.local_sum_rate, residual});

    while (residual > opt.tol && iter < opt.max_iter)
    {
        ++iter;
        std::vector<Beamformer> reported;
        for (const auto &a : aps)
            reported.push_back(a.bf);
        std::vector<ApState> next;
        for (std::size_t j = 0; j < J; ++j)
        {
            const auto &tx = access_point(sc, j);
            next.push_back(local_update(aps[j], views[j], z, reported, {rho, opt.local_sweeps, opt.ao.precoder},
                                        tx.tx_power_w, sc.noise_power_w));
        }
        aps = std::move(next);
        remember();
        z = exchange();
        residual = consensus_residual(aps);
        res.residual_trace.push_back(residual);
        for (const auto &a : aps)
            res.trace.push_back({iter, a.id, a.local_sum_rate, residual});
        if (residual < best_residual)
        {
            best_residual = residual;
            stale = 0;
        }
        else if (++stale >= opt.patience)
        {
            rho *= opt.rho_growth;
            stale = 0;
        }
    }
    res.iterations = iter;
    res.converged = residual <= opt.tol;
    res.consensus = residual == 0.0 ? aps.front().proposal : majority_config(aps, table.size());
    if (opt.final_vote && J > 1)
    {
        if (std::find(seen.begin(), seen.end(), res.consensus) == seen.end())
            seen.push_back(res.consensus);
        double best = reported_sum_rate(sc, views, res.consensus, opt.ao.precoder);
        for (const auto &c : seen)
        {
            const double f = reported_sum_rate(sc, views, c, opt.ao.precoder);
            if (f > best)
            {
                best = f;
                res.consensus = c;
            }
        }
        res.candidates = seen.size();
        for (int sweep = 0; sweep < opt.refine_sweeps; ++sweep)
        {
            bool changed = false;
            for (std::size_t m = 0; m < M; ++m)
            {
                const auto cur = res.consensus.states[m];
                for (std::size_t st = 0; st < table.size(); ++st)
                {
                    if (st == cur)
                        continue;
                    PhaseConfig c = res.consensus;
                    c.states[m] = static_cast<std::uint16_t>(st);
                    const double f = reported_sum_rate(sc, views, c, opt.ao.precoder);
                    if (f > best + 1e-12 * std::abs(best))
                    {
                        best = f;
                        res.consensus = std::move(c);
                        changed = true;
                    }
                }
            }
            ++res.refine_rounds;
            if (!changed)
                break;
        }
    }

    if (J == 1)
    {
        // Single cell: the AP's own optimum stands as is.
        const auto own = cascaded_channel(views[0].own, res.consensus);
        const auto r = rates_from_effective(own, aps[0].bf.v, sc.noise_power_w);
        res.bf = {aps[0].bf};
        res.rate = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(sc.users.size()));
        for (std::size_t a = 0; a < views[0].users.size(); ++a)
            res.rate[static_cast<Eigen::Index>(views[0].users[a])] = r.rate[static_cast<Eigen::Index>(a)];
        res.interference = Eigen::VectorXd::Zero(res.rate.size());
        res.sum_rate = r.sum_rate;
        return res;
    }
    const auto ev = evaluate_multicell(sc, truth, res.consensus, opt.ao.precoder);
    res.bf = ev.bf;
    res.rate = ev.rate;
    res.interference = ev.interference;
    res.sum_rate = ev.sum_rate;
    return res;
}

inline NegotiationResult negotiate(const Scenario &sc, const NegotiateOptions &opt, std::uint64_t seed)
{
    return negotiate(sc, multicell_channels(sc, seed), opt, seed);
}

// Centralized reference: exhaustive search over the shared configuration.
inline OracleResult centralized_optimum(const Scenario &sc, const std::vector<ChannelSet> &truth, Precoder precoder)
{
    const std::size_t M = truth.front().elements();
    const std::size_t S = truth.front().table->size();
    if (std::pow(static_cast<double>(S), static_cast<double>(M)) > static_cast<double>(kOracleLimit))
        throw InfeasibleError("centralized search exceeds the 2^20 configuration bound");
    PhaseConfig cfg = PhaseConfig::uniform(M);
    OracleResult best;
    best.sum_rate = -1.0;
    while (true)
    {
        const double f = evaluate_multicell(sc, truth, cfg, precoder).sum_rate;
        ++best.evaluated;
        if (f > best.sum_rate)
        {
            best.sum_rate = f;
            best.config = cfg;
        }
        std::size_t m = 0;
        for (; m < M; ++m)
        {
            cfg.states[m] = static_cast<std::uint16_t>((cfg.states[m] + 1) % S);
            if (cfg.states[m] != 0)
                break;
        }
        if (m == M)
            break;
    }
    return best;
}

// Sum rate under one random shared configuration.
inline double random_config_rate(const Scenario &sc, const std::vector<ChannelSet> &truth, Precoder precoder,
                                 std::uint64_t seed)
{
    std::mt19937_64 rng(derive_seed(seed, 0x7a2d));
    const auto cfg = random_config(truth.front().elements(), truth.front().table->size(), rng);
    return evaluate_multicell(sc, truth, cfg, precoder).sum_rate;
}

// ---------------------------------------------------------------------------
// Interference statistics

struct InterferenceCdf
{
    std::vector<double> samples_on;  // dBm, sorted
    std::vector<double> samples_off; // dBm, sorted
    std::vector<double> levels;      // dBm
    std::vector<double> cdf_on;
    std::vector<double> cdf_off;
};

inline double empirical_cdf(const std::vector<double> &sorted, double x)
{
    return static_cast<double>(std::upper_bound(sorted.begin(), sorted.end(), x) - sorted.begin()) /
           static_cast<double>(sorted.size());
}

// Per-user inter-cell interference with the negotiated surface (on) and
// with the surface switched off, over `trials` channel seeds. Levels are
// the 5 %, 10 %, ..., 95 % quantiles of the pooled samples.
inline InterferenceCdf interference_cdf(const Scenario &sc, int trials, std::uint64_t seed,
                                        const NegotiateOptions &opt = {})
{
    if (trials < 1)
        throw ConfigError("trials must be >= 1");
    InterferenceCdf out;
    for (int t = 0; t < trials; ++t)
    {
        const std::uint64_t s = derive_seed(seed, static_cast<std::uint64_t>(t));
        const auto truth = multicell_channels(sc, s);
        const auto on = negotiate(sc, truth, opt, s);
        std::vector<ChannelSet> dark;
        for (const auto &c : truth)
            dark.push_back(c.with_table(c.table->switched_off()));
        const auto off = evaluate_multicell(sc, dark, PhaseConfig::uniform(truth.front().elements()), opt.ao.precoder);
        for (Eigen::Index k = 0; k < on.interference.size(); ++k)
        {
            out.samples_on.push_back(watts_to_dbm(on.interference[k]));
            out.samples_off.push_back(watts_to_dbm(off.interference[k]));
        }
    }
    std::sort(out.samples_on.begin(), out.samples_on.end());
    std::sort(out.samples_off.begin(), out.samples_off.end());
    std::vector<double> pooled = out.samples_on;
    pooled.insert(pooled.end(), out.samples_off.begin(), out.samples_off.end());
    std::sort(pooled.begin(), pooled.end());
    for (int q = 1; q < 20; ++q)
    {
        const double pos = q / 20.0 * static_cast<double>(pooled.size() - 1);
        const auto lo = static_cast<std::size_t>(std::floor(pos));
        const auto hi = std::min(lo + 1, pooled.size() - 1);
        const double x = pooled[lo] + (pos - static_cast<double>(lo)) * (pooled[hi] - pooled[lo]);
        out.levels.push_back(x);
        out.cdf_on.push_back(empirical_cdf(out.samples_on, x));
        out.cdf_off.push_back(empirical_cdf(out.samples_off, x));
    }
    return out;
}

// CDF of `a` at least that of `b` at every level, strictly above at one.
inline bool cdf_dominates(const std::vector<double> &a, const std::vector<double> &b)
{
    bool strict = false;
    for (std::size_t i = 0; i < a.size(); ++i)
    {
        if (a[i] < b[i])
            return false;
        strict = strict || a[i] > b[i];
    }
    return strict;
}

// Negotiation trace as `iter,ap,local_sum_rate,residual`, optionally led by a
// seed column.
inline void write_negotiation_trace_csv(std::ostream &os, const std::vector<NegotiationRecord> &trace,
                                        std::optional<std::uint64_t> seed = {}, bool header = true)
{
    const std::string lead = seed ? std::to_string(*seed) + "," : "";
    if (header)
        os << (seed ? "seed," : "") << "iter,ap,local_sum_rate,residual\n";
    for (const auto &r : trace)
        os << lead << r.iter << "," << r.ap << "," << format_cell(r.local_sum_rate) << "," << format_cell(r.residual)
           << "\n";
}

// Final per-user outcome as `user,cell,rate_bpshz,interference_dbm`; zero
// inter-cell power is written as NA.
inline void write_final_csv(std::ostream &os, const Scenario &sc, const NegotiationResult &r,
                            std::optional<std::uint64_t> seed = {}, bool header = true)
{
    const std::string lead = seed ? std::to_string(*seed) + "," : "";
    if (header)
        os << (seed ? "seed," : "") << "user,cell,rate_bpshz,interference_dbm\n";
    for (Eigen::Index k = 0; k < r.rate.size(); ++k)
    {
        const double w = r.interference[k];
        os << lead << k << "," << sc.users[static_cast<std::size_t>(k)].cell << "," << format_cell(r.rate[k]) << ","
           << format_cell(w > 0.0 ? watts_to_dbm(w) : kNA) << "\n";
    }
}

} // namespace ios
