// SPDX-License-Identifier: Apache-2.0
//
// csiloc -- mmWave CSI positioning laboratory
// Model input features from CSI: normalized RB powers, RB-to-RB relative
// phases, the combined power-phase feature, time-domain path features,
// measurement uncertainty injection, and train-split normalization.

#pragma once

#include "csiloc/channel.hpp"

#include <random>
#include <string>
#include <vector>

namespace csiloc::features {

enum class FreqVariant { FrC, FrPow, FrPh, FrPowPh, FrPP };
enum class Granularity { RbLevel, BwLevel };
enum class PathMode { Dominant, Top5 };

struct TimeCombo {
    bool tof = true;
    bool rp = false;
    bool aoa = true;
};

// Selects and sizes one feature pipeline. Frequency layouts are
// (gnb, beam, rb) with ascending index order; time layouts run per gNB
// ascending, per path descending power, fields ordered ToF, RP, AoA.
// Dominant-path AoA is a 3-D Cartesian unit direction; 5-path AoA is the
// azimuth scalar.
struct FeatureSpec {
    enum class Domain { Freq, Time };
    Domain domain = Domain::Freq;
    FreqVariant freq = FreqVariant::FrPP;
    Granularity granularity = Granularity::RbLevel;
    TimeCombo combo;
    PathMode path_mode = PathMode::Dominant;
    int n_gnbs = 3;
    int n_beams = 16;
    int n_rbs = 10;

    int paths_per_gnb() const { return path_mode == PathMode::Dominant ? 1 : 5; }
    int aoa_components() const { return path_mode == PathMode::Dominant ? 3 : 1; }
    int fields_per_path() const
    {
        return (combo.tof ? 1 : 0) + (combo.rp ? 1 : 0) + (combo.aoa ? aoa_components() : 0);
    }

    // Slot count of the normalization basis (pre-combination quantities).
    int basis_length() const;
    // Final model input width.
    int feature_length() const;

    std::string variant_name() const;
};

FreqVariant freq_variant_from_name(const std::string &name);
std::string freq_variant_name(FreqVariant v);

// Per-slot normalization: min-max slots rescale into [0,1] on the training
// split (test values are not clamped); passthrough slots copy values.
// Unavailable measurements take the slot's sentinel.
struct SlotStat {
    enum class Kind { MinMax, Passthrough };
    Kind kind = Kind::Passthrough;
    double min = 0.0;
    double max = 0.0;
    double missing = 0.0;
};

struct NormStats {
    std::vector<SlotStat> slots;
    bool fitted = false;

    double apply(size_t slot, double value, bool available) const;
};

// Fits per-slot min/max over the training measurements only.
NormStats fit_norm_stats(const FeatureSpec &spec,
                         const std::vector<const channel::SampleMeasurement *> &train);

// Full per-sample pipeline: raw quantities -> normalization -> variant
// assembly -> optional BW-level averaging.
std::vector<double> extract_features(const FeatureSpec &spec,
                                     const channel::SampleMeasurement &m,
                                     const NormStats &stats);

// Spec'd single-variant entry points (RB-level, frequency domain).
std::vector<double> fr_pow(const channel::CsiGrid &grid, const NormStats &stats);
std::vector<double> fr_ph(const channel::CsiGrid &grid);
std::vector<double> fr_pp(const channel::CsiGrid &grid, const NormStats &stats);

// Mean across the RB axis of an RB-level feature vector with `comps`
// interleaved components per RB (1 for power/phase, 2 for complex).
std::vector<double> fr_bw_level(const std::vector<double> &rb_level, int n_gnbs, int n_beams,
                                int n_rbs, int comps);

// Time-domain feature vector from (already thresholded, sorted) path lists.
std::vector<double> td_features(const std::vector<std::vector<channel::TimePath>> &paths_per_gnb,
                                const FeatureSpec &spec, const NormStats &stats);

// ----------------------------------------------------------- uncertainty --

struct UncertaintyConfig {
    double fr_rel_std = 0.3;    // complex AWGN, sigma = 0.3 * RMS |H|
    double tof_std_m = 10.0;    // pseudo-range AWGN
    double rp_std_db = 2.0;     // path power AWGN
    double aoa_quant_deg = 22.5; // azimuth discretization (360/16 beams)
};

enum class UncertaintyKind { FrAwgn, TofRange, RpPower, AoaQuantize, All };
UncertaintyKind uncertainty_kind_from_name(const std::string &name);

// Nearest-multiple azimuth quantization, result wrapped to (-pi, pi].
double quantize_azimuth(double azimuth_rad, double step_rad);

// Perturbs a measurement in place. Draw order is fixed (grid entries in
// index order, then per gNB per path: ToF then RP) so identical seeds give
// identical perturbations.
void inject_uncertainty(channel::SampleMeasurement &m, UncertaintyKind kind,
                        const UncertaintyConfig &cfg, std::mt19937_64 &rng);

// AWGN on x-y positions (training labels only; callers pick the subset).
void label_noise(std::vector<Vec2> &positions, double std_m, std::mt19937_64 &rng);

} // namespace csiloc::features
