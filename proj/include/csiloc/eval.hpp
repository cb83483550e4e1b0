// SPDX-License-Identifier: Apache-2.0
//
// csiloc -- mmWave CSI positioning laboratory
// Error metrics, ECDFs and stratified machine-readable reports.

#pragma once

#include "csiloc/geometry.hpp"

#include <optional>
#include <string>
#include <vector>

namespace csiloc::eval {

double position_error(const Vec2 &est, const Vec2 &truth);

// Angle between heading vectors, degrees in [0, 180]. A zero estimate is
// reported as the maximum error of 180 with the flag set.
struct HeadingError {
    double degrees = 0.0;
    bool degenerate = false;
};
HeadingError heading_error(const Vec2 &est, const Vec2 &truth);

// Empirical CDF: sorted values with step fractions k/n.
std::vector<std::pair<double, double>> ecdf(std::vector<double> values);

// Percentile by linear interpolation between closest ranks
// (rank = p/100 * (n-1) over the sorted values).
double percentile(std::vector<double> values, double p);

struct Aggregates {
    size_t count = 0;
    double median = 0.0;
    double mean = 0.0;
    double p5 = 0.0, p25 = 0.0, p75 = 0.0, p80 = 0.0, p95 = 0.0;
};
Aggregates aggregate(const std::vector<double> &values);

struct SampleError {
    int track = -1;
    double time_s = 0.0;
    double position_err_m = 0.0;
    std::optional<double> speed_err_ms;
    std::optional<double> heading_err_deg;
    bool los = false; // at least one gNB in LoS
};

struct ErrorReport {
    std::string label;
    std::vector<SampleError> samples;
    Aggregates position_all, position_los, position_nlos;
    std::optional<Aggregates> speed_all, heading_all;
    std::vector<std::pair<double, double>> position_ecdf;
    double nlos_fraction = 0.0;
    uint64_t config_hash = 0;
};

// Builds all aggregates and the ECDF from per-sample errors.
ErrorReport build_report(std::string label, std::vector<SampleError> samples,
                         uint64_t config_hash);

// Splits samples into (LoS, NLoS) by the per-sample any-gNB-LoS flag.
std::pair<std::vector<SampleError>, std::vector<SampleError>>
stratify_los(const std::vector<SampleError> &samples);

} // namespace csiloc::eval
