// SPDX-License-Identifier: Apache-2.0
//
// csiloc -- mmWave CSI positioning laboratory

#include "csiloc/eval.hpp"

#include "csiloc/common.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace csiloc::eval {

double position_error(const Vec2 &est, const Vec2 &truth) { return (est - truth).norm(); }

HeadingError heading_error(const Vec2 &est, const Vec2 &truth)
{
    HeadingError he;
    const double ne = est.norm(), nt = truth.norm();
    if (ne == 0.0 || nt == 0.0) {
        he.degrees = 180.0;
        he.degenerate = true;
        return he;
    }
    const double c = std::clamp(est.dot(truth) / (ne * nt), -1.0, 1.0);
    he.degrees = rad2deg(std::acos(c));
    return he;
}

std::vector<std::pair<double, double>> ecdf(std::vector<double> values)
{
    if (values.empty())
        throw std::invalid_argument("ecdf of empty sample");
    std::sort(values.begin(), values.end());
    std::vector<std::pair<double, double>> out;
    out.reserve(values.size());
    const double n = static_cast<double>(values.size());
    for (size_t i = 0; i < values.size(); ++i)
        out.emplace_back(values[i], static_cast<double>(i + 1) / n);
    return out;
}

double percentile(std::vector<double> values, double p)
{
    if (values.empty())
        throw std::invalid_argument("percentile of empty sample");
    std::sort(values.begin(), values.end());
    const double rank = p / 100.0 * static_cast<double>(values.size() - 1);
    const size_t lo = static_cast<size_t>(std::floor(rank));
    const size_t hi = std::min(lo + 1, values.size() - 1);
    const double frac = rank - static_cast<double>(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
}

Aggregates aggregate(const std::vector<double> &values)
{
    Aggregates a;
    a.count = values.size();
    if (values.empty())
        return a;
    a.mean = std::accumulate(values.begin(), values.end(), 0.0) /
             static_cast<double>(values.size());
    a.median = percentile(values, 50.0);
    a.p5 = percentile(values, 5.0);
    a.p25 = percentile(values, 25.0);
    a.p75 = percentile(values, 75.0);
    a.p80 = percentile(values, 80.0);
    a.p95 = percentile(values, 95.0);
    return a;
}

std::pair<std::vector<SampleError>, std::vector<SampleError>>
stratify_los(const std::vector<SampleError> &samples)
{
    std::pair<std::vector<SampleError>, std::vector<SampleError>> out;
    for (const auto &s : samples)
        (s.los ? out.first : out.second).push_back(s);
    return out;
}

ErrorReport build_report(std::string label, std::vector<SampleError> samples,
                         uint64_t config_hash)
{
    ErrorReport r;
    r.label = std::move(label);
    r.config_hash = config_hash;
    r.samples = std::move(samples);

    std::vector<double> pos_all, pos_los, pos_nlos, speed, heading;
    for (const auto &s : r.samples) {
        pos_all.push_back(s.position_err_m);
        (s.los ? pos_los : pos_nlos).push_back(s.position_err_m);
        if (s.speed_err_ms)
            speed.push_back(*s.speed_err_ms);
        if (s.heading_err_deg)
            heading.push_back(*s.heading_err_deg);
    }
    r.position_all = aggregate(pos_all);
    r.position_los = aggregate(pos_los);
    r.position_nlos = aggregate(pos_nlos);
    if (!speed.empty())
        r.speed_all = aggregate(speed);
    if (!heading.empty())
        r.heading_all = aggregate(heading);
    if (!pos_all.empty())
        r.position_ecdf = ecdf(pos_all);
    r.nlos_fraction =
        r.samples.empty() ? 0.0
                          : static_cast<double>(pos_nlos.size()) /
                                static_cast<double>(r.samples.size());
    return r;
}

} // namespace csiloc::eval
