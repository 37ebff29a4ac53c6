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

// Seeded experiment runners. Every runner writes one CSV: a header block
// with the resolved scenario, options and seeds, then one row per seed (or
// grid point) and aggregate rows.

#pragma once

#include "chanest.hpp"
#include "codebook.hpp"
#include "config.hpp"
#include "csv.hpp"
#include "multicell.hpp"
#include "pattern.hpp"

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <thread>

namespace ios {

enum class Kind
{
    pattern,
    hybrid,
    train,
    multicell,
    estimate,
    compare,
    coverage
};

inline const char *to_string(Kind k)
{
    switch (k)
    {
    case Kind::pattern: return "pattern";
    case Kind::hybrid: return "hybrid";
    case Kind::train: return "train";
    case Kind::multicell: return "multicell";
    case Kind::estimate: return "estimate";
    case Kind::compare: return "compare";
    case Kind::coverage: return "coverage";
    }
    return "?";
}

inline Kind parse_kind(const std::string &s)
{
    for (Kind k : {Kind::pattern, Kind::hybrid, Kind::train, Kind::multicell, Kind::estimate, Kind::compare,
                   Kind::coverage})
        if (s == to_string(k))
            return k;
    throw ConfigError("unknown experiment kind '" + s + "'");
}

struct ExperimentSpec
{
    Kind kind = Kind::hybrid;
    std::string config_path;
    std::vector<std::uint64_t> seeds;
    std::string out_path; // "-" or empty writes to stdout
    bool timing = false;  // record wallclock_ms instead of NA
    Options overrides;    // applied on top of the file's `run.` keys
};

// ---------------------------------------------------------------------------
// Worker pool

// Worker count from IOS_WORKERS, else the hardware concurrency.
inline unsigned worker_count()
{
    if (const char *env = std::getenv("IOS_WORKERS"); env && *env)
    {
        char *end = nullptr;
        const long n = std::strtol(env, &end, 10);
        if (*end != '\0' || n < 1 || n > 1024)
            throw ConfigError("IOS_WORKERS must be an integer in [1, 1024], got '" + std::string(env) + "'");
        return static_cast<unsigned>(n);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

// Runs fn(i) for i in [0, n) on the pool; results are ordered by i. The
// first exception (lowest index) is rethrown after all workers stop.
template <class T, class Fn>
std::vector<T> parallel_map(std::size_t n, Fn &&fn, unsigned workers = worker_count())
{
    std::vector<std::optional<T>> out(n);
    std::vector<std::exception_ptr> errors(n);
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < n;)
        {
            try
            {
                out[i].emplace(fn(i));
            }
            catch (...)
            {
                errors[i] = std::current_exception();
            }
        }
    };
    const unsigned w = static_cast<unsigned>(std::min<std::size_t>(std::max(1u, workers), std::max<std::size_t>(n, 1)));
    if (w <= 1)
        work();
    else
    {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < w; ++t)
            pool.emplace_back(work);
        for (auto &t : pool)
            t.join();
    }
    for (auto &e : errors)
        if (e)
            std::rethrow_exception(e);
    std::vector<T> res;
    res.reserve(n);
    for (auto &o : out)
        res.push_back(std::move(*o));
    return res;
}

// ---------------------------------------------------------------------------
// Library-level experiments

inline Precoder parse_precoder(const std::string &s)
{
    if (s == "zf")
        return Precoder::zf;
    if (s == "mmse")
        return Precoder::mmse;
    throw ConfigError("precoder must be zf or mmse, got '" + s + "'");
}

enum class SurfaceKind
{
    ios,
    irs,
    rrs,
    none
};

inline ChannelSet with_surface(const ChannelSet &ch, SurfaceKind k)
{
    switch (k)
    {
    case SurfaceKind::ios: return ch;
    case SurfaceKind::irs: return ch.with_table(ch.table->without_refraction());
    case SurfaceKind::rrs: return ch.with_table(ch.table->without_reflection());
    case SurfaceKind::none: return ch.with_table(ch.table->switched_off());
    }
    return ch;
}

struct CompareRow
{
    std::uint64_t seed = 0;
    double ios = 0.0, irs = 0.0, rrs = 0.0, none = 0.0;
};

// Sum rate of each surface variant on the same channel draw, each optimized
// with alternating_optimize.
inline CompareRow compare_surfaces_seed(const Scenario &sc, std::uint64_t seed, const AoOptions &opt)
{
    const auto ch = synthesize_channels(sc, seed);
    const auto pb = problem_of(sc, opt.precoder);
    CompareRow r{seed};
    r.ios = alternating_optimize(with_surface(ch, SurfaceKind::ios), pb, opt, seed).sum_rate;
    r.irs = alternating_optimize(with_surface(ch, SurfaceKind::irs), pb, opt, seed).sum_rate;
    r.rrs = alternating_optimize(with_surface(ch, SurfaceKind::rrs), pb, opt, seed).sum_rate;
    r.none = alternating_optimize(with_surface(ch, SurfaceKind::none), pb, opt, seed).sum_rate;
    return r;
}

inline std::vector<CompareRow> compare_surfaces(const Scenario &sc, const std::vector<std::uint64_t> &seeds,
                                                const AoOptions &opt = {})
{
    validate(sc);
    bool reflect = false, refract = false;
    for (const auto &u : sc.users)
        (side_of(sc.ios, sc.bs.position, u.position) == Side::reflect ? reflect : refract) = true;
    if (!reflect || !refract)
        throw ConfigError("surface comparison needs users on both sides of the surface");
    return parallel_map<CompareRow>(seeds.size(), [&](std::size_t i) { return compare_surfaces_seed(sc, seeds[i], opt); });
}

struct CoverageGrid
{
    double x0 = -3.0, x1 = 3.0;
    int nx = 13;
    double y0 = -3.0, y1 = 3.0;
    int ny = 13;
    double z = 1.5;

    std::vector<Vec3> points() const
    {
        if (nx < 1 || ny < 1)
            throw ConfigError("coverage grid needs nx, ny >= 1");
        std::vector<Vec3> p;
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < nx; ++i)
                p.emplace_back(nx == 1 ? x0 : x0 + (x1 - x0) * i / (nx - 1), ny == 1 ? y0 : y0 + (y1 - y0) * j / (ny - 1),
                               z);
        return p;
    }
};

struct CoveragePoint
{
    Vec3 position;
    double ios = kNA, irs = kNA, off = kNA; // probe rate, mean over seeds
};

// Probe user appended to the scenario's users at every grid point; the
// configuration is re-optimized per point and seed. Points on the surface
// plane are reported as NA.
inline std::vector<CoveragePoint> coverage_map(const Scenario &sc, const CoverageGrid &grid,
                                               const std::vector<std::uint64_t> &seeds, const AoOptions &opt = {})
{
    validate(sc);
    if (seeds.empty())
        throw ConfigError("coverage map needs at least one seed");
    const auto pts = grid.points();
    return parallel_map<CoveragePoint>(pts.size(), [&](std::size_t i) {
        CoveragePoint cp{pts[i]};
        if (std::abs(plane_offset(sc.ios, pts[i])) < 1e-9)
            return cp;
        Scenario s = sc;
        s.users.push_back(UserConfig{pts[i]});
        const auto probe = static_cast<Eigen::Index>(s.users.size() - 1);
        const auto pb = problem_of(s, opt.precoder);
        cp.ios = cp.irs = cp.off = 0.0;
        for (auto seed : seeds)
        {
            const auto ch = synthesize_channels(s, seed);
            auto rate = [&](SurfaceKind k) {
                const auto c = with_surface(ch, k);
                const auto r = alternating_optimize(c, pb, opt, seed);
                return sinr_and_rates(c, r.config, r.bf, s.noise_power_w).rate[probe];
            };
            cp.ios += rate(SurfaceKind::ios);
            cp.irs += rate(SurfaceKind::irs);
            cp.off += rate(SurfaceKind::none);
        }
        const double n = static_cast<double>(seeds.size());
        cp.ios /= n;
        cp.irs /= n;
        cp.off /= n;
        return cp;
    });
}

// ---------------------------------------------------------------------------
// Experiment runners

// Every `run.` option understood by some experiment kind.
inline const std::set<std::string> &known_options()
{
    static const std::set<std::string> k = {
        "restarts",   "max_sweeps",  "precoder",   "refresh_per_sweep", "n_b",         "n_g",
        "noisy",      "region_pad",  "focal_distance", "rho",           "rho_growth",  "patience",
        "max_iter",   "local_sweeps", "final_vote", "refine_sweeps",    "centralized", "tile_rows",
        "tile_cols",  "repeats",     "sigma",      "checks",            "target_psi",  "target_phi",
        "psi_step",   "phi_min",     "phi_max",    "phi_step",          "near_field_distance", "x0",
        "x1",         "nx",          "y0",         "y1",                "ny",          "z",         "emit"};
    return k;
}

struct RunContext
{
    const ConfigFile &cfg;
    const std::vector<std::uint64_t> &seeds;
    OptionReader &opts;
    bool timing = false;
    std::vector<std::string> notes; // extra header lines
};

namespace detail {

inline AoOptions ao_options(OptionReader &o)
{
    AoOptions a;
    a.restarts = o.get("restarts", a.restarts);
    a.max_sweeps = o.get("max_sweeps", a.max_sweeps);
    a.precoder = parse_precoder(o.get("precoder", "zf"));
    a.refresh_per_sweep = o.get("refresh_per_sweep", false);
    return a;
}

inline std::string emit_option(OptionReader &o, std::initializer_list<const char *> allowed)
{
    const std::string v = o.get("emit", "summary");
    std::string list;
    for (const char *a : allowed)
    {
        if (v == a)
            return v;
        list += list.empty() ? a : std::string(", ") + a;
    }
    throw ConfigError("option 'run.emit' must be one of " + list + ", got '" + v + "'");
}

template <class Fn>
auto timed(bool timing, Fn &&fn)
{
    const auto t0 = std::chrono::steady_clock::now();
    auto r = fn();
    const double ms =
        timing ? std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count() : kNA;
    return std::make_pair(std::move(r), ms);
}

inline Table run_hybrid(RunContext &ctx)
{
    const auto &sc = ctx.cfg.scenario;
    const auto ao = ao_options(ctx.opts);
    ctx.opts.reject_unknown(known_options());
    Table t;
    t.columns = {"M", "K", "method", "sum_rate_bpshz", "iterations", "wallclock_ms", "best_restart"};
    for (std::size_t k = 0; k < sc.users.size(); ++k)
        t.columns.push_back("rate_user" + std::to_string(k));
    const std::string method = std::string("ao_") + to_string(ao.precoder);
    const auto rows = parallel_map<std::vector<Cell>>(ctx.seeds.size(), [&](std::size_t i) {
        const auto seed = ctx.seeds[i];
        auto [r, ms] = timed(ctx.timing, [&] {
            const auto ch = synthesize_channels(sc, seed);
            auto res = alternating_optimize(ch, sc, ao, seed);
            return std::make_pair(res, sinr_and_rates(ch, res.config, res.bf, sc.noise_power_w));
        });
        std::vector<Cell> row{static_cast<double>(sc.ios.elements()),
                              static_cast<double>(sc.users.size()),
                              method,
                              r.first.sum_rate,
                              static_cast<double>(r.first.sweeps),
                              ms,
                              static_cast<double>(r.first.best_restart)};
        for (Eigen::Index k = 0; k < r.second.rate.size(); ++k)
            row.push_back(r.second.rate[k]);
        return row;
    });
    for (std::size_t i = 0; i < rows.size(); ++i)
        t.add(std::to_string(ctx.seeds[i]), rows[i]);
    return t;
}

inline Table run_compare(RunContext &ctx)
{
    const auto ao = ao_options(ctx.opts);
    ctx.opts.reject_unknown(known_options());
    Table t;
    t.columns = {"ios_bps_hz", "irs_bps_hz", "rrs_bps_hz", "none_bps_hz"};
    for (const auto &r : compare_surfaces(ctx.cfg.scenario, ctx.seeds, ao))
        t.add(std::to_string(r.seed), std::vector<double>{r.ios, r.irs, r.rrs, r.none});
    return t;
}

inline void run_train(RunContext &ctx, std::ostream &body)
{
    const auto &sc = ctx.cfg.scenario;
    PipelineOptions po;
    po.n_b = ctx.opts.get("n_b", po.n_b);
    po.n_g = ctx.opts.get("n_g", po.n_g);
    po.noisy_feedback = ctx.opts.get("noisy", false);
    po.region_pad = ctx.opts.get("region_pad", po.region_pad);
    po.train.focal_distance = ctx.opts.get("focal_distance", 0.0);
    const auto ao = ao_options(ctx.opts);
    po.precoder = ao.precoder;
    const std::string emit = emit_option(ctx.opts, {"summary", "trace", "selection"});
    ctx.opts.reject_unknown(known_options());
    struct Out
    {
        PipelineResult pr;
        double csi = kNA;
        double ms = kNA;
    };
    const auto res = parallel_map<Out>(ctx.seeds.size(), [&](std::size_t i) {
        const auto seed = ctx.seeds[i];
        const auto ch = synthesize_channels(sc, seed);
        auto [pr, ms] = timed(ctx.timing, [&] { return codebook_pipeline(sc, ch, seed, po); });
        const double csi = emit == "summary" ? alternating_optimize(ch, sc, ao, seed).sum_rate : kNA;
        return Out{std::move(pr), csi, ms};
    });
    const bool many = ctx.seeds.size() > 1;
    for (std::size_t i = 0; i < res.size() && emit != "summary"; ++i)
    {
        const auto seed = many ? std::optional<std::uint64_t>(ctx.seeds[i]) : std::nullopt;
        if (emit == "trace")
            write_training_trace_csv(body, res[i].pr.train.trace, seed, i == 0);
        else
            write_selection_csv(body, res[i].pr, seed, i == 0);
    }
    if (emit != "summary")
        return;
    Table t;
    t.columns = {"sum_rate_bps_hz", "csi_sum_rate_bps_hz", "ratio", "training_count", "pilot_count", "wallclock_ms"};
    for (std::size_t i = 0; i < res.size(); ++i)
    {
        const auto &o = res[i];
        t.add(std::to_string(ctx.seeds[i]),
              std::vector<double>{o.pr.sum_rate, o.csi, o.pr.sum_rate / o.csi, static_cast<double>(o.pr.training_count),
                                  static_cast<double>(o.pr.pilot_count), o.ms});
    }
    write_table(body, t, true);
}

inline double mean_dbm(const Eigen::VectorXd &w)
{
    if (w.size() == 0)
        return kNA;
    double s = 0.0;
    for (Eigen::Index i = 0; i < w.size(); ++i)
        s += watts_to_dbm(w[i]);
    return s / static_cast<double>(w.size());
}

inline void run_multicell(RunContext &ctx, std::ostream &body)
{
    const auto &sc = ctx.cfg.scenario;
    NegotiateOptions no;
    no.rho = ctx.opts.get("rho", no.rho);
    no.rho_growth = ctx.opts.get("rho_growth", no.rho_growth);
    no.patience = ctx.opts.get("patience", no.patience);
    no.max_iter = ctx.opts.get("max_iter", no.max_iter);
    no.local_sweeps = ctx.opts.get("local_sweeps", no.local_sweeps);
    no.final_vote = ctx.opts.get("final_vote", no.final_vote);
    no.refine_sweeps = ctx.opts.get("refine_sweeps", no.refine_sweeps);
    no.ao = ao_options(ctx.opts);
    const std::string emit = emit_option(ctx.opts, {"summary", "trace", "final"});
    const std::string central = ctx.opts.get("centralized", "auto");
    if (central != "auto" && central != "true" && central != "false")
        throw ConfigError("option 'run.centralized' must be auto, true or false");
    ctx.opts.reject_unknown(known_options());
    const double space = std::pow(static_cast<double>(sc.ios.table->size()), sc.ios.elements());
    const bool feasible = space <= static_cast<double>(kOracleLimit);
    if (central == "true" && !feasible)
        throw InfeasibleError("centralized search exceeds the 2^20 configuration bound");
    const bool do_central = emit == "summary" && (central == "true" || (central == "auto" && feasible));

    if (emit != "summary")
    {
        const auto res = parallel_map<NegotiationResult>(ctx.seeds.size(), [&](std::size_t i) {
            return negotiate(sc, multicell_channels(sc, ctx.seeds[i]), no, ctx.seeds[i]);
        });
        const bool many = ctx.seeds.size() > 1;
        for (std::size_t i = 0; i < res.size(); ++i)
        {
            const auto seed = many ? std::optional<std::uint64_t>(ctx.seeds[i]) : std::nullopt;
            if (emit == "trace")
                write_negotiation_trace_csv(body, res[i].trace, seed, i == 0);
            else
                write_final_csv(body, sc, res[i], seed, i == 0);
        }
        return;
    }

    Table t;
    t.columns = {"negotiated_bps_hz", "random_bps_hz", "centralized_bps_hz", "ratio_to_centralized",
                 "iterations", "converged", "interference_on_dbm", "interference_off_dbm", "wallclock_ms"};
    const auto rows = parallel_map<std::vector<double>>(ctx.seeds.size(), [&](std::size_t i) {
        const auto seed = ctx.seeds[i];
        const auto truth = multicell_channels(sc, seed);
        auto [neg, ms] = timed(ctx.timing, [&] { return negotiate(sc, truth, no, seed); });
        const double rnd = random_config_rate(sc, truth, no.ao.precoder, seed);
        const double opt = do_central ? centralized_optimum(sc, truth, no.ao.precoder).sum_rate : kNA;
        std::vector<ChannelSet> dark;
        for (const auto &c : truth)
            dark.push_back(with_surface(c, SurfaceKind::none));
        const auto off =
            evaluate_multicell(sc, dark, PhaseConfig::uniform(truth.front().elements()), no.ao.precoder);
        return std::vector<double>{neg.sum_rate,
                                   rnd,
                                   opt,
                                   neg.sum_rate / opt,
                                   static_cast<double>(neg.iterations),
                                   neg.converged ? 1.0 : 0.0,
                                   mean_dbm(neg.interference),
                                   mean_dbm(off.interference),
                                   ms};
    });
    for (std::size_t i = 0; i < rows.size(); ++i)
        t.add(std::to_string(ctx.seeds[i]), rows[i]);
    write_table(body, t, true);
}

inline void run_estimate(RunContext &ctx, std::ostream &body)
{
    const auto &sc = ctx.cfg.scenario;
    const int tile_rows = ctx.opts.get("tile_rows", 1);
    const int tile_cols = ctx.opts.get("tile_cols", 1);
    const int repeats = ctx.opts.get("repeats", 1);
    const double sigma = ctx.opts.get("sigma", 0.0);
    const int checks = ctx.opts.get("checks", 64);
    const std::string emit = emit_option(ctx.opts, {"summary", "model"});
    ctx.opts.reject_unknown(known_options());
    if (checks < 1)
        throw ConfigError("option 'run.checks' must be >= 1");
    const auto g = make_groups(sc.ios.rows, sc.ios.cols, tile_rows, tile_cols);
    if (emit == "model")
    {
        const auto models = parallel_map<LinearChannelModel>(ctx.seeds.size(), [&](std::size_t i) {
            const auto seed = ctx.seeds[i];
            const auto ch = synthesize_channels(sc, seed);
            CascadeProbe probe(ch, g, sigma, derive_seed(seed, 0xe5));
            return estimate(std::ref(probe), g, repeats).model;
        });
        const bool many = ctx.seeds.size() > 1;
        for (std::size_t i = 0; i < models.size(); ++i)
            write_model_csv(body, models[i], many ? std::optional<std::uint64_t>(ctx.seeds[i]) : std::nullopt, i == 0);
        return;
    }
    Table t;
    t.columns = {"groups", "probes", "max_abs_error", "nmse", "wallclock_ms"};
    const auto rows = parallel_map<std::vector<double>>(ctx.seeds.size(), [&](std::size_t i) {
        const auto seed = ctx.seeds[i];
        const auto ch = synthesize_channels(sc, seed);
        CascadeProbe probe(ch, g, sigma, derive_seed(seed, 0xe5));
        auto [est, ms] = timed(ctx.timing, [&] { return estimate(std::ref(probe), g, repeats); });
        // Exhaustive check for small G, random group configurations otherwise.
        const bool all = g.size() < 31 && (std::size_t{1} << g.size()) <= static_cast<std::size_t>(checks);
        const std::size_t n = all ? (std::size_t{1} << g.size()) : static_cast<std::size_t>(checks);
        std::mt19937_64 rng(derive_seed(seed, 0xc4ec));
        std::bernoulli_distribution coin(0.5);
        double max_err = 0.0, err2 = 0.0, ref2 = 0.0;
        for (std::size_t c = 0; c < n; ++c)
        {
            GroupStates s(g.size());
            for (std::size_t b = 0; b < g.size(); ++b)
                s[b] = all ? static_cast<std::uint8_t>((c >> b) & 1u) : static_cast<std::uint8_t>(coin(rng));
            const CMatrix truth = cascaded_channel(ch, expand_group_states(g, s));
            const CMatrix diff = predict(est.model, s) - truth;
            max_err = std::max(max_err, diff.cwiseAbs().maxCoeff());
            err2 += diff.squaredNorm();
            ref2 += truth.squaredNorm();
        }
        return std::vector<double>{static_cast<double>(g.size()), static_cast<double>(est.probes), max_err,
                                   ref2 > 0.0 ? err2 / ref2 : kNA, ms};
    });
    for (std::size_t i = 0; i < rows.size(); ++i)
        t.add(std::to_string(ctx.seeds[i]), rows[i]);
    write_table(body, t, true);
}

} // namespace detail

// Pattern experiment: steer toward the target, then scan. The scan does not
// depend on the seeds (LoS illumination only). Emits `psi_deg, phi_deg,
// power_db` rather than a per-seed table.
inline void run_pattern(RunContext &ctx, std::ostream &body)
{
    const auto &sc = ctx.cfg.scenario;
    const double target_psi = ctx.opts.get("target_psi", 120.0);
    const double target_phi = ctx.opts.get("target_phi", 0.0);
    const double psi_step = ctx.opts.get("psi_step", 1.0);
    const double phi_min = ctx.opts.get("phi_min", 0.0);
    const double phi_max = ctx.opts.get("phi_max", 0.0);
    const double phi_step = ctx.opts.get("phi_step", 1.0);
    const double near = ctx.opts.get("near_field_distance", 0.0);
    ctx.opts.reject_unknown(known_options());
    if (near < 0.0)
        throw ConfigError("option 'run.near_field_distance' must be >= 0");
    const auto il = illumination(sc);
    const auto st = steer(il, target_psi, target_phi);
    const auto psi = angle_grid(0.0, 360.0 - psi_step, psi_step);
    PatternGrid g;
    if (near > 0.0)
    {
        const auto cut = near_field_cut(il, st.config, st.w, psi, near);
        g = PatternGrid{psi, {0.0}, Eigen::MatrixXd(1, static_cast<Eigen::Index>(psi.size()))};
        for (std::size_t j = 0; j < cut.size(); ++j)
            g.power(0, static_cast<Eigen::Index>(j)) = cut[j];
    }
    else
        g = beam_pattern(il, st.config, st.w, psi, angle_grid(phi_min, phi_max, phi_step));
    const auto m = pattern_metrics(g.psi_deg, g.azimuth_cut(target_phi));
    ctx.notes.push_back("main_lobe_deg = " + format_cell(m.main_lobe_deg));
    ctx.notes.push_back("hpbw_deg = " + format_cell(m.hpbw_deg));
    ctx.notes.push_back("sll_db = " + format_cell(m.sll_db));
    // Peak within the target's half-space (reflect: 0-180, refract: 180-360).
    const auto cut = g.azimuth_cut(target_phi);
    const bool reflect_target = std::fmod(std::fmod(target_psi, 360.0) + 360.0, 360.0) < 180.0;
    std::size_t best = cut.size();
    for (std::size_t j = 0; j < cut.size(); ++j)
        if ((g.psi_deg[j] < 180.0) == reflect_target && (best == cut.size() || cut[j] > cut[best]))
            best = j;
    ctx.notes.push_back("target_side_peak_deg = " + (best < cut.size() ? format_cell(g.psi_deg[best]) : "NA"));
    write_pattern_csv(body, g);
}

inline void run_coverage(RunContext &ctx, std::ostream &body)
{
    CoverageGrid grid;
    grid.x0 = ctx.opts.get("x0", grid.x0);
    grid.x1 = ctx.opts.get("x1", grid.x1);
    grid.nx = ctx.opts.get("nx", grid.nx);
    grid.y0 = ctx.opts.get("y0", grid.y0);
    grid.y1 = ctx.opts.get("y1", grid.y1);
    grid.ny = ctx.opts.get("ny", grid.ny);
    grid.z = ctx.opts.get("z", ctx.cfg.scenario.ios.center.z());
    const auto ao = detail::ao_options(ctx.opts);
    ctx.opts.reject_unknown(known_options());
    Table t;
    t.label_column = "point";
    t.columns = {"x_m", "y_m", "z_m", "rate_ios_bps_hz", "rate_irs_bps_hz", "rate_off_bps_hz"};
    const auto pts = coverage_map(ctx.cfg.scenario, grid, ctx.seeds, ao);
    for (std::size_t i = 0; i < pts.size(); ++i)
    {
        const auto &p = pts[i];
        t.add(std::to_string(i), std::vector<double>{p.position.x(), p.position.y(), p.position.z(), p.ios, p.irs, p.off});
    }
    write_table(body, t, false);
}

// Writes the complete output of one experiment to `out`.
inline void run_experiment(Kind kind, const ConfigFile &cfg, const std::vector<std::uint64_t> &seeds, bool timing,
                           std::ostream &out)
{
    if (seeds.empty())
        throw ConfigError("seed list is empty");
    OptionReader opts(cfg.options);
    RunContext ctx{cfg, seeds, opts, timing, {}};
    std::ostringstream body;
    switch (kind)
    {
    case Kind::hybrid: write_table(body, detail::run_hybrid(ctx), true); break;
    case Kind::compare: write_table(body, detail::run_compare(ctx), true); break;
    case Kind::train: detail::run_train(ctx, body); break;
    case Kind::multicell: detail::run_multicell(ctx, body); break;
    case Kind::estimate: detail::run_estimate(ctx, body); break;
    case Kind::pattern: run_pattern(ctx, body); break;
    case Kind::coverage: run_coverage(ctx, body); break;
    }
    std::vector<std::string> header{std::string("iosim ") + kVersion, std::string("kind = ") + to_string(kind)};
    std::string s = "seeds =";
    for (auto v : seeds)
        s += " " + std::to_string(v);
    header.push_back(s);
    for (const auto &l : split_lines(serialize_scenario(cfg.scenario)))
        header.push_back(l);
    for (const auto &[k, v] : opts.resolved())
        header.push_back("run." + k + " = " + v);
    header.insert(header.end(), ctx.notes.begin(), ctx.notes.end());
    write_header_block(out, header);
    out << body.str();
}

// Loads the config, applies overrides and writes the output file.
inline void run(const ExperimentSpec &spec)
{
    if (spec.seeds.empty())
        throw ConfigError("seed list is empty");
    ConfigFile cfg = load_config(spec.config_path);
    for (const auto &[k, v] : spec.overrides)
        cfg.options[k] = v;
    std::ostringstream buf;
    run_experiment(spec.kind, cfg, spec.seeds, spec.timing, buf);
    if (spec.out_path.empty() || spec.out_path == "-")
    {
        std::cout << buf.str();
        return;
    }
    std::ofstream f(spec.out_path, std::ios::binary);
    if (!f)
        throw ConfigError("cannot open output file '" + spec.out_path + "'");
    f << buf.str();
    if (!f)
        throw NumericalError("failed writing '" + spec.out_path + "'");
}

} // namespace ios
