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

// CSV tables with a `#`-prefixed header block and mean/std aggregate rows.

#pragma once

#include "common.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

namespace ios {

inline constexpr double kNA = std::numeric_limits<double>::quiet_NaN();

inline std::string format_cell(double v)
{
    if (std::isnan(v))
        return "NA";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

using Cell = std::variant<double, std::string>;

inline std::string format_cell(const Cell &c)
{
    return std::holds_alternative<double>(c) ? format_cell(std::get<double>(c)) : std::get<std::string>(c);
}

struct Table
{
    std::vector<std::string> columns; // excluding the leading label column
    std::string label_column = "seed";
    std::vector<std::string> labels;
    std::vector<std::vector<Cell>> rows;

    void add(std::string label, std::vector<Cell> values)
    {
        if (values.size() != columns.size())
            throw NumericalError("table row has " + std::to_string(values.size()) + " cells, expected " +
                                 std::to_string(columns.size()));
        labels.push_back(std::move(label));
        rows.push_back(std::move(values));
    }

    void add(std::string label, const std::vector<double> &values)
    {
        add(std::move(label), std::vector<Cell>(values.begin(), values.end()));
    }
};

// Mean and sample standard deviation per column; NA cells are skipped and
// an all-NA column stays NA. Text columns aggregate to empty cells.
inline std::pair<std::vector<Cell>, std::vector<Cell>> column_stats(const Table &t)
{
    std::vector<Cell> mean(t.columns.size(), kNA), sd(t.columns.size(), kNA);
    for (std::size_t c = 0; c < t.columns.size(); ++c)
    {
        bool text = false;
        std::vector<double> v;
        for (const auto &r : t.rows)
        {
            if (const double *x = std::get_if<double>(&r[c]))
            {
                if (!std::isnan(*x))
                    v.push_back(*x);
            }
            else
                text = true;
        }
        if (text)
        {
            mean[c] = sd[c] = std::string();
            continue;
        }
        if (v.empty())
            continue;
        double s = 0.0;
        for (double x : v)
            s += x;
        const double m = s / static_cast<double>(v.size());
        double q = 0.0;
        for (double x : v)
            q += (x - m) * (x - m);
        mean[c] = m;
        sd[c] = v.size() > 1 ? std::sqrt(q / static_cast<double>(v.size() - 1)) : 0.0;
    }
    return {mean, sd};
}

inline void write_header_block(std::ostream &os, const std::vector<std::string> &lines)
{
    for (const auto &l : lines)
        os << "# " << l << "\n";
}

inline void write_table(std::ostream &os, const Table &t, bool aggregate)
{
    os << t.label_column;
    for (const auto &c : t.columns)
        os << "," << c;
    os << "\n";
    auto emit = [&](const std::string &label, const std::vector<Cell> &v) {
        os << label;
        for (const auto &x : v)
            os << "," << format_cell(x);
        os << "\n";
    };
    for (std::size_t i = 0; i < t.rows.size(); ++i)
        emit(t.labels[i], t.rows[i]);
    if (aggregate)
    {
        const auto [mean, sd] = column_stats(t);
        emit("mean", mean);
        emit("std", sd);
    }
}

// Splits a multi-line block into header lines.
inline std::vector<std::string> split_lines(const std::string &s)
{
    std::vector<std::string> out;
    std::istringstream is(s);
    std::string line;
    while (std::getline(is, line))
        out.push_back(line);
    return out;
}

} // namespace ios
