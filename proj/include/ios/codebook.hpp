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

// Beam training without CSI: BS sector codebook, single- and multi-lobe
// surface codebooks, hierarchical lobe search, steering estimation and
// projection of continuous codewords onto discrete element states.

#pragma once

#include "beamform.hpp"
#include "csv.hpp"

#include <algorithm>
#include <bit>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

namespace ios {

// ---------------------------------------------------------------------------
// BS sector codebook

struct SectorRegion
{
    double x0 = 0.0, x1 = 0.0;
    double y0 = 0.0, y1 = 0.0;
    double z = 0.0;
};

struct SectorCodebook
{
    std::vector<Vec3> centers;
    std::vector<CVector> codewords; // unit norm, entries of modulus 1/sqrt(N)
    int nx = 1;
    int ny = 1;

    std::size_t size() const { return centers.size(); }
};

// Grid shape nx * ny = n whose cells are closest to square.
inline std::pair<int, int> sector_grid_shape(int n, double lx, double ly)
{
    if (ly <= 0.0)
        return {n, 1};
    if (lx <= 0.0)
        return {1, n};
    std::pair<int, int> best{n, 1};
    double best_cost = std::numeric_limits<double>::infinity();
    for (int nx = 1; nx <= n; ++nx)
    {
        if (n % nx)
            continue;
        const int ny = n / nx;
        const double cost = std::abs(std::log((lx / nx) / (ly / ny)));
        if (cost < best_cost - 1e-12)
        {
            best_cost = cost;
            best = {nx, ny};
        }
    }
    return best;
}

// Codeword i co-phases the array at section center i.
inline CVector steering_toward(const std::vector<Vec3> &antennas, const Vec3 &target, double lambda)
{
    const auto n = static_cast<Eigen::Index>(antennas.size());
    CVector w(n);
    for (Eigen::Index i = 0; i < n; ++i)
        w[i] = std::polar(1.0 / std::sqrt(static_cast<double>(n)),
                          kTwoPi * (antennas[static_cast<std::size_t>(i)] - target).norm() / lambda);
    return w;
}

inline SectorCodebook build_sector_codebook(const SectorRegion &region, const std::vector<Vec3> &antennas,
                                            double lambda, int n_b)
{
    if (n_b < 1)
        throw ConfigError("sector count must be >= 1");
    if (antennas.empty())
        throw ConfigError("sector codebook needs at least one antenna");
    const double lx = region.x1 - region.x0, ly = region.y1 - region.y0;
    if (lx < 0.0 || ly < 0.0)
        throw ConfigError("sector region bounds are inverted");
    SectorCodebook cb;
    std::tie(cb.nx, cb.ny) = sector_grid_shape(n_b, lx, ly);
    for (int iy = 0; iy < cb.ny; ++iy)
        for (int ix = 0; ix < cb.nx; ++ix)
        {
            const Vec3 c(region.x0 + (ix + 0.5) * lx / cb.nx, region.y0 + (iy + 0.5) * ly / cb.ny, region.z);
            cb.centers.push_back(c);
            cb.codewords.push_back(steering_toward(antennas, c, lambda));
        }
    return cb;
}

// Bounding box of the BS and the surface center, widened sideways by
// `pad` times its diagonal.
inline SectorRegion sector_region(const Scenario &sc, const BaseStation &tx, double pad = 0.25)
{
    const Vec3 a = tx.position, b = sc.ios.center;
    const double diag = std::hypot(a.x() - b.x(), a.y() - b.y());
    SectorRegion r;
    r.x0 = std::min(a.x(), b.x()) - pad * diag;
    r.x1 = std::max(a.x(), b.x()) + pad * diag;
    r.y0 = std::min(a.y(), b.y()) - pad * diag;
    r.y1 = std::max(a.y(), b.y()) + pad * diag;
    r.z = 0.5 * (a.z() + b.z());
    return r;
}

// ---------------------------------------------------------------------------
// Surface lobe codebook

struct LobeCodebook
{
    int n_g = 0;
    int depth = 0; // log2(n_g) + 1 layers; layers 1 .. depth-1 hold multi-lobe pairs

    // Lobe index p is 1-based.
    double direction(int p) const { return -1.0 + (2.0 * p - 1.0) / n_g; }
    std::pair<double, double> coverage(int p) const
    {
        return {-1.0 + (2.0 * p - 2.0) / n_g, -1.0 + 2.0 * p / n_g};
    }
    int training_layers() const { return depth - 1; }

    // Lobes covered by the branch-b codeword of layer s (interleaved bits).
    std::vector<int> lobes(int layer, int branch) const
    {
        if (layer < 1 || layer >= depth || (branch != 0 && branch != 1))
            throw std::out_of_range("lobe codebook layer/branch out of range");
        std::vector<int> out;
        for (int p = 1; p <= n_g; ++p)
            if ((((p - 1) >> (layer - 1)) & 1) == branch)
                out.push_back(p);
        return out;
    }

    // Lobe whose coverage holds direction u (upper boundary belongs to the next lobe).
    int lobe_of(double u) const
    {
        const int p = static_cast<int>(std::floor((u + 1.0) * n_g / 2.0)) + 1;
        return std::clamp(p, 1, n_g);
    }
};

inline LobeCodebook build_lobe_codebook(int n_g)
{
    if (n_g < 2 || !std::has_single_bit(static_cast<unsigned>(n_g)))
        throw ConfigError("lobe count must be a power of two >= 2, got " + std::to_string(n_g));
    LobeCodebook cb;
    cb.n_g = n_g;
    cb.depth = std::countr_zero(static_cast<unsigned>(n_g)) + 1;
    return cb;
}

// Aperture coordinates of the elements used by surface codewords. The frame
// normal points toward the transmitter.
struct ApertureGeometry
{
    std::vector<Vec3> elements;
    SurfaceFrame frame;
    double lambda = 0.0;
};

inline ApertureGeometry aperture_geometry(const Scenario &sc, const BaseStation &tx)
{
    ApertureGeometry g{element_positions(sc), surface_frame(sc.ios), sc.lambda()};
    if (plane_offset(sc.ios, tx.position) < 0.0)
        g.frame.normal = -g.frame.normal;
    return g;
}

inline ApertureGeometry aperture_geometry(const Scenario &sc) { return aperture_geometry(sc, sc.bs); }

// Effective aperture phase profile for lobe p. Far field uses a linear
// ramp along the horizontal axis; a positive focal distance focuses on a
// point at that range instead, on the given side of the surface.
inline CVector basic_codeword(const LobeCodebook &cb, int p, const ApertureGeometry &g, double focal_distance = 0.0,
                              double normal_sign = 1.0)
{
    if (p < 1 || p > cb.n_g)
        throw std::out_of_range("lobe index out of range");
    const double u = cb.direction(p);
    const double k = kTwoPi / g.lambda;
    CVector c(static_cast<Eigen::Index>(g.elements.size()));
    const Vec3 focus =
        g.frame.center + focal_distance * (u * g.frame.horizontal + normal_sign * std::sqrt(1.0 - u * u) * g.frame.normal);
    for (std::size_t m = 0; m < g.elements.size(); ++m)
    {
        const Vec3 r = g.elements[m] - g.frame.center;
        const double phase = focal_distance > 0.0 ? k * ((g.elements[m] - focus).norm() - focal_distance)
                                                  : -k * r.dot(g.frame.horizontal) * u;
        c[static_cast<Eigen::Index>(m)] = std::polar(1.0, phase);
    }
    return c;
}

// Sum of the covered basic codewords with unit-modulus quadratic-phase
// weights exp(j pi i (i + 1) / n), rescaled to unit RMS entry magnitude. The
// phases keep the sum near constant modulus, which the per-element discrete
// projection needs for wide sectors.
inline CVector multi_lobe_codeword(const LobeCodebook &cb, int layer, int branch, const ApertureGeometry &g,
                                   double focal_distance = 0.0, double normal_sign = 1.0)
{
    CVector sum = CVector::Zero(static_cast<Eigen::Index>(g.elements.size()));
    const auto covered = cb.lobes(layer, branch);
    const double n = static_cast<double>(covered.size());
    for (std::size_t i = 0; i < covered.size(); ++i)
    {
        const double di = static_cast<double>(i);
        sum += std::polar(1.0, kPi * di * (di + 1.0) / n) * basic_codeword(cb, covered[i], g, focal_distance, normal_sign);
    }
    const double rms = sum.norm() / std::sqrt(static_cast<double>(sum.size()));
    if (rms > 0.0)
        sum /= rms;
    return sum;
}

// ---------------------------------------------------------------------------
// Steering estimation and discrete projection

// Column k: exp(-j 2 pi d / lambda), d from element to section center k.
inline CMatrix estimate_steering(const std::vector<Vec3> &section_centers, const std::vector<Vec3> &elements,
                                 double lambda)
{
    CMatrix h(static_cast<Eigen::Index>(elements.size()), static_cast<Eigen::Index>(section_centers.size()));
    for (std::size_t k = 0; k < section_centers.size(); ++k)
        for (std::size_t m = 0; m < elements.size(); ++m)
            h(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(k)) =
                std::polar(1.0, -kTwoPi * (elements[m] - section_centers[k]).norm() / lambda);
    return h;
}

// Per element, the state minimizing sum_k |G(m,k) - c(state, side_k) H(m,k)|^2.
// Ties resolve to the lowest state index.
inline PhaseConfig construct_Q(const CMatrix &g, const CMatrix &h, const ElementStateTable &table,
                               const std::vector<Side> &sides)
{
    if (g.rows() != h.rows() || g.cols() != h.cols() || static_cast<std::size_t>(g.cols()) != sides.size())
        throw ConfigError("construct_Q: target, steering and side dimensions disagree");
    PhaseConfig cfg = PhaseConfig::uniform(static_cast<std::size_t>(g.rows()));
    for (Eigen::Index m = 0; m < g.rows(); ++m)
    {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t s = 0; s < table.size(); ++s)
        {
            double cost = 0.0;
            for (Eigen::Index k = 0; k < g.cols(); ++k)
                cost += std::norm(g(m, k) - coefficient(table, s, sides[static_cast<std::size_t>(k)]) * h(m, k));
            if (cost < best)
            {
                best = cost;
                cfg.states[static_cast<std::size_t>(m)] = static_cast<std::uint16_t>(s);
            }
        }
    }
    return cfg;
}

// Rotates each target column by the global phase (32-point grid) that
// minimizes its own discrete projection residual. Received power is blind
// to a common phase, but the nearest-state projection is not.
inline CMatrix align_targets(const CMatrix &g, const CMatrix &h, const ElementStateTable &table,
                             const std::vector<Side> &sides)
{
    if (g.rows() != h.rows() || g.cols() != h.cols() || static_cast<std::size_t>(g.cols()) != sides.size())
        throw ConfigError("align_targets: target, steering and side dimensions disagree");
    constexpr int kSteps = 32;
    CMatrix out = g;
    for (Eigen::Index k = 0; k < g.cols(); ++k)
    {
        const Side side = sides[static_cast<std::size_t>(k)];
        double best = std::numeric_limits<double>::infinity();
        Complex rot(1.0, 0.0);
        for (int a = 0; a < kSteps; ++a)
        {
            const Complex r = std::polar(1.0, kTwoPi * a / kSteps);
            double cost = 0.0;
            for (Eigen::Index m = 0; m < g.rows(); ++m)
            {
                double c = std::numeric_limits<double>::infinity();
                for (std::size_t s = 0; s < table.size(); ++s)
                    c = std::min(c, std::norm(r * g(m, k) - coefficient(table, s, side) * h(m, k)));
                cost += c;
            }
            if (cost < best - 1e-12)
            {
                best = cost;
                rot = r;
            }
        }
        out.col(k) *= rot;
    }
    return out;
}

// Greedy per-element state flips that maximize the modeled contrast: min
// over covered sample directions minus max over uncovered ones (log power).
// Each lobe contributes `samples` directions spread over `span` of its
// width. The model is the far-field sum of c(state) h_m exp(j k x_m u).
inline void refine_lobe_contrast(PhaseConfig &cfg, const LobeCodebook &cb, const std::vector<int> &covered,
                                 const ApertureGeometry &g, const CVector &h, const ElementStateTable &table,
                                 Side side, int samples = 1, double span = 0.5, int max_sweeps = 5)
{
    if (samples < 1 || !(span >= 0.0 && span <= 1.0))
        throw ConfigError("contrast refinement needs samples >= 1 and span in [0, 1]");
    const std::size_t M = g.elements.size();
    const auto S = static_cast<std::size_t>(samples);
    const std::size_t P = static_cast<std::size_t>(cb.n_g) * S;
    const double k = kTwoPi / g.lambda;
    const double width = 2.0 / cb.n_g;
    std::vector<bool> in(P, false);
    for (int p : covered)
        for (std::size_t j = 0; j < S; ++j)
            in[static_cast<std::size_t>(p - 1) * S + j] = true;
    std::vector<double> dirs(P);
    for (std::size_t p = 0; p < P; ++p)
    {
        const double frac = S > 1 ? (static_cast<double>(p % S) + 0.5) / static_cast<double>(S) - 0.5 : 0.0;
        dirs[p] = cb.direction(static_cast<int>(p / S) + 1) + frac * span * width;
    }
    std::vector<std::vector<Complex>> a(M, std::vector<Complex>(P));
    std::vector<Complex> field(P, Complex(0.0, 0.0));
    for (std::size_t m = 0; m < M; ++m)
    {
        const double x = (g.elements[m] - g.frame.center).dot(g.frame.horizontal);
        for (std::size_t p = 0; p < P; ++p)
        {
            a[m][p] = h[static_cast<Eigen::Index>(m)] * std::polar(1.0, k * x * dirs[p]);
            field[p] += coefficient(table, cfg.states[m], side) * a[m][p];
        }
    }
    auto contrast = [&](const std::vector<Complex> &f) {
        double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
        for (std::size_t p = 0; p < P; ++p)
        {
            if (in[p])
                lo = std::min(lo, std::norm(f[p]));
            else
                hi = std::max(hi, std::norm(f[p]));
        }
        if (hi <= 0.0)
            return std::numeric_limits<double>::infinity();
        return lo <= 0.0 ? -std::numeric_limits<double>::infinity() : std::log(lo) - std::log(hi);
    };
    double best = contrast(field);
    std::vector<Complex> trial(P);
    for (int sweep = 0; sweep < max_sweeps; ++sweep)
    {
        bool changed = false;
        for (std::size_t m = 0; m < M; ++m)
        {
            const Complex cur = coefficient(table, cfg.states[m], side);
            for (std::size_t s = 0; s < table.size(); ++s)
            {
                if (s == cfg.states[m])
                    continue;
                const Complex d = coefficient(table, s, side) - cur;
                for (std::size_t p = 0; p < P; ++p)
                    trial[p] = field[p] + d * a[m][p];
                const double v = contrast(trial);
                if (v > best + 1e-12)
                {
                    best = v;
                    field = trial;
                    cfg.states[m] = static_cast<std::uint16_t>(s);
                    changed = true;
                    break;
                }
            }
        }
        if (!changed)
            break;
    }
}

// ---------------------------------------------------------------------------
// Sounding interface: training sees received powers only.

class SoundingOracle
{
  public:
    virtual ~SoundingOracle() = default;
    // One transmission with BS codeword w and surface configuration q; every
    // user reports its received power (W) after its best receive combiner.
    virtual std::vector<double> broadcast(const CVector &w, const PhaseConfig &q) = 0;
    virtual std::size_t users() const = 0;
    std::size_t soundings() const { return count_; }

  protected:
    std::size_t count_ = 0;
};

// Combiner candidates: identity for one antenna, otherwise an N_r-point
// DFT direction grid.
inline std::vector<CVector> combiner_set(int n_r)
{
    std::vector<CVector> out;
    for (int c = 0; c < n_r; ++c)
    {
        CVector w(n_r);
        const double u = -1.0 + (2.0 * c + 1.0) / n_r;
        for (int r = 0; r < n_r; ++r)
            w[r] = std::polar(1.0 / std::sqrt(static_cast<double>(n_r)), -kPi * r * u);
        out.push_back(std::move(w));
    }
    return out;
}

// Simulated over-the-air sounding on a ground-truth channel.
class ChannelSounder final : public SoundingOracle
{
  public:
    ChannelSounder(ChannelSet &&, double, double, bool, std::uint64_t) = delete;
    ChannelSounder(const ChannelSet &ch, double p_t, double noise, bool noisy, std::uint64_t seed)
        : ch_(ch), p_t_(p_t), noise_(noise), noisy_(noisy), rng_(seed)
    {
        for (const auto &h : ch_.h_iu)
            combiners_.push_back(combiner_set(static_cast<int>(h.cols())));
    }

    std::size_t users() const override { return ch_.users(); }

    std::vector<double> broadcast(const CVector &w, const PhaseConfig &q) override
    {
        ++count_;
        std::vector<double> out(ch_.users());
        for (std::size_t k = 0; k < ch_.users(); ++k)
        {
            const CVector y = std::sqrt(p_t_) * (cascaded_channel_user(ch_, q, k) * w);
            double best = -1.0;
            for (const auto &c : combiners_[k])
            {
                Complex s = c.dot(y);
                if (noisy_)
                    s += std::sqrt(noise_) * detail::cn01(rng_);
                best = std::max(best, std::norm(s));
            }
            out[k] = best;
        }
        return out;
    }

  private:
    const ChannelSet &ch_;
    double p_t_;
    double noise_;
    bool noisy_;
    std::mt19937_64 rng_;
    std::vector<std::vector<CVector>> combiners_;
};

// ---------------------------------------------------------------------------
// Training protocol

struct TrainingRecord
{
    int round = 0;           // 0: BS sweep, s >= 1: surface layer s
    std::string codeword_id; // "S<i>" or "L<s>B<b>"
    std::size_t user = 0;
    double rx_power_dbm = 0.0;
};

struct TrainOptions
{
    double focal_distance = 0.0; // > 0 enables focal-point codewords
    bool refine = true;          // contrast refinement of multi-lobe configurations
    int refine_samples = 3;      // sample directions per lobe
    double refine_span = 0.5;    // fraction of the lobe width they cover
};

struct TrainResult
{
    std::vector<std::size_t> section; // per user, 0-based
    std::vector<int> lobe;            // per user, 1-based
    CMatrix v_a;                      // N x K, selected BS codewords
    CMatrix steering;                 // M x K incident steering estimate
    std::size_t training_count = 0;
    std::vector<TrainingRecord> trace;
};

inline double side_sign(Side s) { return s == Side::reflect ? 1.0 : -1.0; }

// Greedy distinct-section assignment by reported strength.
inline std::vector<std::size_t> assign_sections(const std::vector<std::vector<double>> &power, std::size_t users)
{
    struct Cand
    {
        double p;
        std::size_t section, user;
    };
    std::vector<Cand> c;
    for (std::size_t i = 0; i < power.size(); ++i)
        for (std::size_t k = 0; k < users; ++k)
            c.push_back({power[i][k], i, k});
    std::stable_sort(c.begin(), c.end(), [](const Cand &a, const Cand &b) { return a.p > b.p; });
    std::vector<std::size_t> sel(users, power.size());
    std::vector<bool> taken(power.size(), false);
    std::size_t done = 0;
    for (const auto &x : c)
    {
        if (done == users)
            break;
        if (taken[x.section] || sel[x.user] != power.size())
            continue;
        sel[x.user] = x.section;
        taken[x.section] = true;
        ++done;
    }
    return sel;
}

// (a) BS sector sweep under a random surface configuration, (b) per-user
// hierarchical lobe search, two soundings per layer. `sides` are the users'
// sides of the surface relative to the BS.
inline TrainResult beam_train(SoundingOracle &oracle, const SectorCodebook &sectors, const LobeCodebook &lobes,
                              const ApertureGeometry &geom, const ElementStateTable &table,
                              const std::vector<Side> &sides, std::uint64_t seed, const TrainOptions &opt = {})
{
    const std::size_t K = sides.size();
    if (K == 0 || K != oracle.users())
        throw ConfigError("beam training: one side per user required");
    if (K > sectors.size())
        throw InfeasibleError("beam training needs at least K=" + std::to_string(K) + " sections, got " +
                              std::to_string(sectors.size()));
    const std::size_t start = oracle.soundings();
    const std::size_t M = geom.elements.size();
    TrainResult res;

    std::mt19937_64 rng(derive_seed(seed, 0x5ec7));
    const PhaseConfig q_rand = random_config(M, table.size(), rng);
    std::vector<std::vector<double>> power;
    for (std::size_t i = 0; i < sectors.size(); ++i)
    {
        power.push_back(oracle.broadcast(sectors.codewords[i], q_rand));
        for (std::size_t k = 0; k < K; ++k)
            res.trace.push_back({0, "S" + std::to_string(i), k, watts_to_dbm(power.back()[k])});
    }
    res.section = assign_sections(power, K);

    std::vector<Vec3> centers;
    res.v_a.resize(sectors.codewords.front().size(), static_cast<Eigen::Index>(K));
    for (std::size_t k = 0; k < K; ++k)
    {
        centers.push_back(sectors.centers[res.section[k]]);
        res.v_a.col(static_cast<Eigen::Index>(k)) = sectors.codewords[res.section[k]];
    }
    res.steering = estimate_steering(centers, geom.elements, geom.lambda);

    for (std::size_t k = 0; k < K; ++k)
    {
        const auto kk = static_cast<Eigen::Index>(k);
        int index = 0;
        for (int s = 1; s <= lobes.training_layers(); ++s)
        {
            double p[2];
            for (int b = 0; b < 2; ++b)
            {
                const CVector g = multi_lobe_codeword(lobes, s, b, geom, opt.focal_distance, side_sign(sides[k]));
                const CMatrix h = res.steering.col(kk);
                PhaseConfig q = construct_Q(align_targets(g, h, table, {sides[k]}), h, table, {sides[k]});
                if (opt.refine)
                    refine_lobe_contrast(q, lobes, lobes.lobes(s, b), geom, h.col(0), table, sides[k], opt.refine_samples,
                                         opt.refine_span);
                p[b] = oracle.broadcast(res.v_a.col(kk), q)[k];
                res.trace.push_back({s, "L" + std::to_string(s) + "B" + std::to_string(b), k, watts_to_dbm(p[b])});
            }
            if (p[1] > p[0])
                index |= 1 << (s - 1);
        }
        res.lobe.push_back(index + 1);
    }
    res.training_count = oracle.soundings() - start;
    return res;
}

// Reference: sound every basic lobe for user k and return the strongest.
inline int exhaustive_lobe_search(SoundingOracle &oracle, const TrainResult &tr, std::size_t k,
                                  const LobeCodebook &lobes, const ApertureGeometry &geom,
                                  const ElementStateTable &table, Side side, const TrainOptions &opt = {})
{
    const auto kk = static_cast<Eigen::Index>(k);
    int best = 1;
    double best_p = -1.0;
    for (int p = 1; p <= lobes.n_g; ++p)
    {
        const CVector g = basic_codeword(lobes, p, geom, opt.focal_distance, side_sign(side));
        const CMatrix h = tr.steering.col(kk);
        const double pw =
            oracle.broadcast(tr.v_a.col(kk), construct_Q(align_targets(g, h, table, {side}), h, table, {side}))[k];
        if (pw > best_p)
        {
            best_p = pw;
            best = p;
        }
    }
    return best;
}

// Final surface configuration serving every user's selected lobe.
inline PhaseConfig configuration_for(const TrainResult &tr, const LobeCodebook &lobes, const ApertureGeometry &geom,
                                     const ElementStateTable &table, const std::vector<Side> &sides,
                                     const TrainOptions &opt = {})
{
    CMatrix g(static_cast<Eigen::Index>(geom.elements.size()), static_cast<Eigen::Index>(sides.size()));
    for (std::size_t k = 0; k < sides.size(); ++k)
        g.col(static_cast<Eigen::Index>(k)) =
            basic_codeword(lobes, tr.lobe[k], geom, opt.focal_distance, side_sign(sides[k]));
    return construct_Q(align_targets(g, tr.steering, table, sides), tr.steering, table, sides);
}

// ---------------------------------------------------------------------------
// End-to-end pipeline

struct PipelineOptions
{
    int n_b = 4;
    int n_g = 16;
    bool noisy_feedback = false;
    Precoder precoder = Precoder::zf;
    double region_pad = 0.25;
    TrainOptions train;
};

struct PipelineResult
{
    double sum_rate = 0.0;
    Eigen::VectorXd rates;
    std::size_t training_count = 0;
    std::size_t pilot_count = 0;
    PhaseConfig config;
    TrainResult train;
    std::vector<int> combiner; // per user, 0-based
};

// Sides of every user relative to the BS (positions are known to the controller).
inline std::vector<Side> user_sides(const Scenario &sc, const BaseStation &tx)
{
    std::vector<Side> s;
    for (const auto &u : sc.users)
        s.push_back(side_of(sc.ios, tx.position, u.position));
    return s;
}

inline PipelineResult codebook_pipeline(const Scenario &sc, const ChannelSet &truth, std::uint64_t seed,
                                        const PipelineOptions &opt = {})
{
    const double lambda = sc.lambda();
    const auto sides = user_sides(sc, sc.bs);
    const auto geom = aperture_geometry(sc);
    const auto sectors =
        build_sector_codebook(sector_region(sc, sc.bs, opt.region_pad), bs_antenna_positions(sc.bs, sc), lambda, opt.n_b);
    const auto lobes = build_lobe_codebook(opt.n_g);
    const double p_t = sc.bs.tx_power_w, noise = sc.noise_power_w;

    ChannelSounder sounder(truth, p_t, noise, opt.noisy_feedback, derive_seed(seed, 0xfeed));
    PipelineResult out;
    out.train = beam_train(sounder, sectors, lobes, geom, *truth.table, sides, seed, opt.train);
    out.training_count = out.train.training_count;
    out.config = configuration_for(out.train, lobes, geom, *truth.table, sides, opt.train);

    // Each user picks the combiner maximizing its own gain on its codeword,
    // then K pilots give the K x K equivalent channel.
    const std::size_t K = truth.users();
    CMatrix h_eq(static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(K));
    std::vector<RowCVector> rows;
    std::mt19937_64 rng(derive_seed(seed, 0x9170));
    for (std::size_t k = 0; k < K; ++k)
    {
        const CMatrix hk = cascaded_channel_user(truth, out.config, k);
        const auto cands = combiner_set(static_cast<int>(hk.rows()));
        int best = 0;
        double bp = -1.0;
        for (std::size_t c = 0; c < cands.size(); ++c)
        {
            const double p = (cands[c].adjoint() * hk * out.train.v_a.col(static_cast<Eigen::Index>(k))).squaredNorm();
            if (p > bp)
            {
                bp = p;
                best = static_cast<int>(c);
            }
        }
        out.combiner.push_back(best);
        rows.push_back(cands[static_cast<std::size_t>(best)].adjoint() * hk);
    }
    for (std::size_t j = 0; j < K; ++j)
    {
        ++out.pilot_count;
        for (std::size_t k = 0; k < K; ++k)
        {
            Complex y = rows[k] * out.train.v_a.col(static_cast<Eigen::Index>(j));
            if (opt.noisy_feedback)
                y += std::sqrt(noise / p_t) * detail::cn01(rng);
            h_eq(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) = y;
        }
    }
    const Beamformer vd = make_precoder(h_eq, opt.precoder, p_t, noise);
    CMatrix v = out.train.v_a * vd.v;
    v *= std::sqrt(p_t / v.squaredNorm());
    CMatrix h_true(static_cast<Eigen::Index>(K), v.rows());
    for (std::size_t k = 0; k < K; ++k)
        h_true.row(static_cast<Eigen::Index>(k)) = rows[k];
    const auto r = rates_from_effective(h_true, v, noise);
    out.sum_rate = r.sum_rate;
    out.rates = r.rate;
    return out;
}

inline PipelineResult codebook_pipeline(const Scenario &sc, std::uint64_t seed, const PipelineOptions &opt = {})
{
    return codebook_pipeline(sc, synthesize_channels(sc, seed), seed, opt);
}

// Sounding trace as `round,codeword_id,user,rx_power_dbm`, optionally led by
// a seed column.
inline void write_training_trace_csv(std::ostream &os, const std::vector<TrainingRecord> &trace,
                                     std::optional<std::uint64_t> seed = {}, bool header = true)
{
    const std::string lead = seed ? std::to_string(*seed) + "," : "";
    if (header)
        os << (seed ? "seed," : "") << "round,codeword_id,user,rx_power_dbm\n";
    for (const auto &r : trace)
        os << lead << r.round << "," << r.codeword_id << "," << r.user << "," << format_cell(r.rx_power_dbm) << "\n";
}

// Selections as `user,section,lobe,combiner`; section and combiner are
// 0-based, lobe is 1-based.
inline void write_selection_csv(std::ostream &os, const PipelineResult &r, std::optional<std::uint64_t> seed = {},
                                bool header = true)
{
    const std::string lead = seed ? std::to_string(*seed) + "," : "";
    if (header)
        os << (seed ? "seed," : "") << "user,section,lobe,combiner\n";
    for (std::size_t k = 0; k < r.train.section.size(); ++k)
        os << lead << k << "," << r.train.section[k] << "," << r.train.lobe[k] << "," << r.combiner[k] << "\n";
}

} // namespace ios
