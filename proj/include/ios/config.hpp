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

// Scenario files: one `key = value` per line, `#` starts a comment.
// Vectors are three whitespace-separated numbers. Users and access points
// are indexed (`users[0].position`, `aps[1].tx_power_w`). Keys under `run.`
// are experiment options and are passed through untouched.

#pragma once

#include "channel.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace ios {

using Options = std::map<std::string, std::string>;

struct ConfigFile
{
    Scenario scenario;
    Options options; // `run.` keys with the prefix removed
};

namespace detail {

inline std::string trim(const std::string &s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline std::string fmt_double(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string fmt_vec(const Vec3 &v)
{
    return fmt_double(v.x()) + " " + fmt_double(v.y()) + " " + fmt_double(v.z());
}

struct Entry
{
    std::string value;
    int line = 0;
};

class KeyReader
{
  public:
    KeyReader(std::map<std::string, Entry> entries, std::string origin)
        : entries_(std::move(entries)), origin_(std::move(origin))
    {
    }

    bool has(const std::string &key) const { return entries_.count(key) != 0; }

    [[noreturn]] void fail(const std::string &key, const std::string &what) const
    {
        const auto it = entries_.find(key);
        std::string where = origin_;
        if (it != entries_.end())
            where += ":" + std::to_string(it->second.line);
        throw ConfigError(where + ": key '" + key + "': " + what);
    }

    const std::string &raw(const std::string &key)
    {
        used_.insert(key);
        return entries_.at(key).value;
    }

    void require(const std::string &key) const
    {
        if (!has(key))
            throw ConfigError(origin_ + ": missing required key '" + key + "'");
    }

    void read(const std::string &key, double &out)
    {
        if (!has(key))
            return;
        const auto &s = raw(key);
        std::size_t pos = 0;
        try
        {
            out = std::stod(s, &pos);
        }
        catch (const std::exception &)
        {
            fail(key, "expected a number, got '" + s + "'");
        }
        if (pos != s.size())
            fail(key, "expected a number, got '" + s + "'");
    }

    void read(const std::string &key, int &out)
    {
        if (!has(key))
            return;
        const auto &s = raw(key);
        std::size_t pos = 0;
        try
        {
            out = std::stoi(s, &pos);
        }
        catch (const std::exception &)
        {
            fail(key, "expected an integer, got '" + s + "'");
        }
        if (pos != s.size())
            fail(key, "expected an integer, got '" + s + "'");
    }

    void read(const std::string &key, bool &out)
    {
        if (!has(key))
            return;
        const auto &s = raw(key);
        if (s == "true" || s == "1")
            out = true;
        else if (s == "false" || s == "0")
            out = false;
        else
            fail(key, "expected true or false, got '" + s + "'");
    }

    void read(const std::string &key, Vec3 &out)
    {
        if (!has(key))
            return;
        std::istringstream is(raw(key));
        double x, y, z;
        std::string rest;
        if (!(is >> x >> y >> z) || (is >> rest))
            fail(key, "expected three numbers");
        out = Vec3(x, y, z);
    }

    void read(const std::string &key, std::string &out)
    {
        if (has(key))
            out = raw(key);
    }

    // Number of `name[i].*` entries; indices must be contiguous from 0.
    std::size_t count_indexed(const std::string &name) const
    {
        std::set<long> seen;
        for (const auto &[k, e] : entries_)
        {
            if (k.rfind(name + "[", 0) != 0)
                continue;
            const auto close = k.find("].", name.size() + 1);
            long idx = -1;
            if (close != std::string::npos)
            {
                const auto digits = k.substr(name.size() + 1, close - name.size() - 1);
                if (!digits.empty() && digits.find_first_not_of("0123456789") == std::string::npos &&
                    digits.size() < 7)
                    idx = std::stol(digits);
            }
            if (idx < 0)
                throw ConfigError(origin_ + ":" + std::to_string(e.line) + ": key '" + k + "': malformed index");
            seen.insert(idx);
        }
        for (long i = 0; i < static_cast<long>(seen.size()); ++i)
            if (!seen.count(i))
                throw ConfigError(origin_ + ": " + name + " indices must be contiguous from 0 (missing " + name +
                                  "[" + std::to_string(i) + "])");
        return seen.size();
    }

    void reject_unused() const
    {
        for (const auto &[k, e] : entries_)
            if (!used_.count(k))
                throw ConfigError(origin_ + ":" + std::to_string(e.line) + ": unknown key '" + k + "'");
    }

  private:
    std::map<std::string, Entry> entries_;
    std::string origin_;
    std::set<std::string> used_;
};

inline void read_transmitter(KeyReader &r, const std::string &p, BaseStation &bs)
{
    r.require(p + ".position");
    r.read(p + ".position", bs.position);
    r.read(p + ".n_antennas", bs.n_antennas);
    r.read(p + ".antenna_spacing", bs.antenna_spacing);
    r.read(p + ".tx_power_w", bs.tx_power_w);
    r.read(p + ".beamwidth_deg", bs.beamwidth_deg);
    if (r.has(p + ".array_axis"))
    {
        Vec3 a;
        r.read(p + ".array_axis", a);
        bs.array_axis = a;
    }
}

inline void write_transmitter(std::ostream &os, const std::string &p, const BaseStation &bs)
{
    os << p << ".position = " << fmt_vec(bs.position) << "\n";
    os << p << ".n_antennas = " << bs.n_antennas << "\n";
    os << p << ".antenna_spacing = " << fmt_double(bs.antenna_spacing) << "\n";
    os << p << ".tx_power_w = " << fmt_double(bs.tx_power_w) << "\n";
    os << p << ".beamwidth_deg = " << fmt_double(bs.beamwidth_deg) << "\n";
    if (bs.array_axis)
        os << p << ".array_axis = " << fmt_vec(*bs.array_axis) << "\n";
}

} // namespace detail

// Resolves `ios.state_table`: `prototype`, or a table file path relative to
// `base_dir`.
inline std::shared_ptr<const ElementStateTable> resolve_state_table(const std::string &source,
                                                                    const std::filesystem::path &base_dir)
{
    if (source == "prototype")
        return std::make_shared<const ElementStateTable>(measured_prototype_table());
    std::filesystem::path p(source);
    if (p.is_relative())
        p = base_dir / p;
    return std::make_shared<const ElementStateTable>(load_state_table(p.string()));
}

inline ConfigFile parse_config(std::istream &in, const std::string &origin = "<stream>",
                               const std::filesystem::path &base_dir = ".")
{
    std::map<std::string, detail::Entry> entries;
    Options options;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line))
    {
        ++lineno;
        const auto hash = line.find('#');
        const auto body = detail::trim(line.substr(0, hash));
        if (body.empty())
            continue;
        const auto eq = body.find('=');
        if (eq == std::string::npos)
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
        const auto key = detail::trim(body.substr(0, eq));
        const auto value = detail::trim(body.substr(eq + 1));
        if (key.empty())
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
        if (value.empty())
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": key '" + key + "': empty value");
        if (key.rfind("run.", 0) == 0)
        {
            if (!options.emplace(key.substr(4), value).second)
                throw ConfigError(origin + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
            continue;
        }
        if (!entries.emplace(key, detail::Entry{value, lineno}).second)
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
    }

    detail::KeyReader r(std::move(entries), origin);
    ConfigFile cf;
    Scenario &sc = cf.scenario;
    r.require("carrier_hz");
    r.read("carrier_hz", sc.carrier_hz);
    r.read("noise_power_w", sc.noise_power_w);
    r.read("kappa", sc.kappa);
    r.read("radiation_exponent", sc.radiation_exponent);
    r.read("wall_loss_db", sc.wall_loss_db);
    if (r.has("pathloss_mode"))
    {
        const auto &m = r.raw("pathloss_mode");
        if (m == "scatter")
            sc.pathloss = PathlossMode::scatter;
        else if (m == "lens")
            sc.pathloss = PathlossMode::lens;
        else
            r.fail("pathloss_mode", "expected scatter or lens, got '" + m + "'");
    }

    detail::read_transmitter(r, "bs", sc.bs);

    r.require("ios.center");
    r.read("ios.center", sc.ios.center);
    r.read("ios.normal", sc.ios.normal);
    r.read("ios.rows", sc.ios.rows);
    r.read("ios.cols", sc.ios.cols);
    r.read("ios.pitch_x", sc.ios.pitch_x);
    r.read("ios.pitch_y", sc.ios.pitch_y);
    r.read("ios.active_row_begin", sc.ios.active_row_begin);
    r.read("ios.active_row_count", sc.ios.active_row_count);
    r.read("ios.state_table", sc.ios.table_source);
    try
    {
        sc.ios.table = resolve_state_table(sc.ios.table_source, base_dir);
    }
    catch (const ConfigError &e)
    {
        r.fail("ios.state_table", e.what());
    }

    const std::size_t n_users = r.count_indexed("users");
    for (std::size_t k = 0; k < n_users; ++k)
    {
        const std::string p = "users[" + std::to_string(k) + "]";
        UserConfig u;
        r.require(p + ".position");
        r.read(p + ".position", u.position);
        r.read(p + ".n_antennas", u.n_antennas);
        r.read(p + ".blocked", u.blocked);
        r.read(p + ".direct_loss_db", u.direct_loss_db);
        r.read(p + ".cell", u.cell);
        sc.users.push_back(u);
    }
    const std::size_t n_aps = r.count_indexed("aps");
    for (std::size_t j = 0; j < n_aps; ++j)
    {
        BaseStation ap;
        detail::read_transmitter(r, "aps[" + std::to_string(j) + "]", ap);
        sc.aps.push_back(ap);
    }
    r.reject_unused();
    validate(sc);
    cf.options = std::move(options);
    return cf;
}

inline ConfigFile load_config(const std::string &path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open config file '" + path + "'");
    return parse_config(in, path, std::filesystem::path(path).parent_path());
}

inline Scenario parse_scenario(const std::string &path) { return load_config(path).scenario; }

// Full resolved scenario in the input format.
inline std::string serialize_scenario(const Scenario &sc)
{
    using detail::fmt_double;
    using detail::fmt_vec;
    std::ostringstream os;
    os << "carrier_hz = " << fmt_double(sc.carrier_hz) << "\n";
    os << "noise_power_w = " << fmt_double(sc.noise_power_w) << "\n";
    os << "kappa = " << fmt_double(sc.kappa) << "\n";
    os << "radiation_exponent = " << fmt_double(sc.radiation_exponent) << "\n";
    os << "pathloss_mode = " << (sc.pathloss == PathlossMode::scatter ? "scatter" : "lens") << "\n";
    os << "wall_loss_db = " << fmt_double(sc.wall_loss_db) << "\n";
    detail::write_transmitter(os, "bs", sc.bs);
    os << "ios.center = " << fmt_vec(sc.ios.center) << "\n";
    os << "ios.normal = " << fmt_vec(sc.ios.normal) << "\n";
    os << "ios.rows = " << sc.ios.rows << "\n";
    os << "ios.cols = " << sc.ios.cols << "\n";
    os << "ios.pitch_x = " << fmt_double(sc.ios.pitch_x) << "\n";
    os << "ios.pitch_y = " << fmt_double(sc.ios.pitch_y) << "\n";
    os << "ios.active_row_begin = " << sc.ios.active_row_begin << "\n";
    os << "ios.active_row_count = " << sc.ios.active_row_count << "\n";
    os << "ios.state_table = " << sc.ios.table_source << "\n";
    for (std::size_t k = 0; k < sc.users.size(); ++k)
    {
        const auto &u = sc.users[k];
        const std::string p = "users[" + std::to_string(k) + "]";
        os << p << ".position = " << fmt_vec(u.position) << "\n";
        os << p << ".n_antennas = " << u.n_antennas << "\n";
        os << p << ".blocked = " << (u.blocked ? "true" : "false") << "\n";
        os << p << ".direct_loss_db = " << fmt_double(u.direct_loss_db) << "\n";
        os << p << ".cell = " << u.cell << "\n";
    }
    for (std::size_t j = 0; j < sc.aps.size(); ++j)
        detail::write_transmitter(os, "aps[" + std::to_string(j) + "]", sc.aps[j]);
    return os.str();
}

// Typed access to experiment options with defaults; every key read is
// recorded so the resolved set can be echoed and leftovers rejected.
class OptionReader
{
  public:
    explicit OptionReader(Options opts) : opts_(std::move(opts)) {}

    double get(const std::string &key, double def) { return parse<double>(key, def); }
    int get(const std::string &key, int def) { return parse<int>(key, def); }
    bool get(const std::string &key, bool def)
    {
        const std::string v = get(key, std::string(def ? "true" : "false"));
        if (v == "true" || v == "1")
            return true;
        if (v == "false" || v == "0")
            return false;
        throw ConfigError("option 'run." + key + "': expected true or false, got '" + v + "'");
    }
    std::string get(const std::string &key, const std::string &def)
    {
        const auto it = opts_.find(key);
        const std::string v = it == opts_.end() ? def : it->second;
        resolved_[key] = v;
        return v;
    }
    std::string get(const std::string &key, const char *def) { return get(key, std::string(def)); }

    // Keys read by no experiment kind are rejected; keys meant for other
    // kinds are ignored so one scenario file can serve several kinds.
    void reject_unknown(const std::set<std::string> &known) const
    {
        for (const auto &[k, v] : opts_)
            if (!resolved_.count(k) && !known.count(k))
                throw ConfigError("unknown option 'run." + k + "'");
    }

    const Options &resolved() const { return resolved_; }

  private:
    template <class T>
    T parse(const std::string &key, T def)
    {
        const auto it = opts_.find(key);
        if (it == opts_.end())
        {
            if constexpr (std::is_same_v<T, double>)
                resolved_[key] = detail::fmt_double(def);
            else
                resolved_[key] = std::to_string(def);
            return def;
        }
        resolved_[key] = it->second;
        std::size_t pos = 0;
        T v{};
        try
        {
            if constexpr (std::is_same_v<T, double>)
                v = std::stod(it->second, &pos);
            else
                v = std::stoi(it->second, &pos);
        }
        catch (const std::exception &)
        {
            pos = 0;
        }
        if (pos == 0 || pos != it->second.size())
            throw ConfigError("option 'run." + key + "': cannot parse '" + it->second + "'");
        return v;
    }

    Options opts_;
    Options resolved_;
};

} // namespace ios
