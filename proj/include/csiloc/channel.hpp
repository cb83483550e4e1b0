// SPDX-License-Identifier: Apache-2.0
//
// csiloc -- mmWave CSI positioning laboratory
// Beamformed frequency response per resource block and time-domain path
// observables derived from traced path sets.

#pragma once

#include "csiloc/raytrace.hpp"
#include "csiloc/scene.hpp"

#include <complex>
#include <vector>

namespace csiloc::channel {

// OFDM numerology. The DFT exponent uses Fs/N = subcarrier spacing, so the
// per-subcarrier phase ramp is exp(-j 2 pi n df_sc tau).
struct OfdmConfig {
    double subcarrier_spacing_hz = 120e3;
    int rb_size = 12; // subcarriers per resource block
    int n_rbs = 10;   // M
    int fft_size = 4096;

    double sampling_freq_hz() const { return subcarrier_spacing_hz * fft_size; }
    double rb_bandwidth_hz() const { return subcarrier_spacing_hz * rb_size; } // = 1.44 MHz
    // CSI observation subcarrier for RB m: the 6th subcarrier of each block.
    int observation_subcarrier(int m) const { return 6 + m * rb_size; }
    // ToF that cycles the RB-to-RB relative phase by a full 2 pi.
    double phase_cycle_tof_s() const { return 1.0 / rb_bandwidth_hz(); }
    double phase_cycle_distance_m() const { return kSpeedOfLight / rb_bandwidth_hz(); }
};

// Beamformed complex frequency response per (gnb, beam, rb) for one UE
// sample, with a per-entry availability mask (false entries hold 0).
struct CsiGrid {
    int n_gnbs = 0;
    int n_beams = 0;
    int n_rbs = 0;
    std::vector<std::complex<double>> values;
    std::vector<uint8_t> mask;

    // sample metadata
    Vec2 ue_pos{0.0, 0.0};
    double time_s = 0.0;
    std::vector<uint8_t> los; // per gNB

    void resize(int g, int b, int r)
    {
        n_gnbs = g;
        n_beams = b;
        n_rbs = r;
        values.assign(static_cast<size_t>(g) * b * r, {0.0, 0.0});
        mask.assign(values.size(), 0);
        los.assign(static_cast<size_t>(g), 0);
    }
    size_t idx(int g, int b, int r) const
    {
        return (static_cast<size_t>(g) * n_beams + b) * n_rbs + r;
    }
    std::complex<double> &at(int g, int b, int r) { return values[idx(g, b, r)]; }
    std::complex<double> at(int g, int b, int r) const { return values[idx(g, b, r)]; }
};

// One retained time-domain multipath observation at a gNB.
struct TimePath {
    double delay_s = 0.0;
    double power_dbm = 0.0; // TX reference + 20 log10 |h|
    double aoa_azimuth = 0.0;
    double aoa_elevation = 0.0;
};

// Element-wise steering phases for a propagation direction, referenced to
// the array center: element i carries exp(j 2 pi / lambda <k(dir), p_i>).
Eigen::VectorXcd steering_vector(const scene::ArrayConfig &array, double azimuth,
                                 double elevation, double wavelength);

// Effective beamformed channel at the observation subcarrier of each RB:
// H(n_m) = sum_k h_k exp(-j 2 pi n_m df_sc tau_k) (a_tx(aod_k)^H b_tx),
// with a single isotropic UE element (b_rx = 1).
Eigen::VectorXcd beamformed_fr(const rt::PathSet &paths, const Eigen::VectorXcd &beam_weights,
                               const scene::ArrayConfig &array, double wavelength,
                               const OfdmConfig &ofdm);

// Path observables for the uplink interpretation: drops paths whose total
// loss exceeds threshold_db, keeps at most max_paths strongest, descending
// power. Powers are dBm against the given transmit reference.
std::vector<TimePath> time_csi(const rt::PathSet &paths, double threshold_db = 160.0,
                               double tx_power_dbm = 30.0, int max_paths = 5);

// Full per-sample measurement: CSI grid across all gNBs/beams plus per-gNB
// time-domain paths and LoS flags. Masks out gNBs with no path above the
// loss threshold.
struct SampleMeasurement {
    CsiGrid grid;
    std::vector<std::vector<TimePath>> paths_per_gnb;
};

SampleMeasurement measure_sample(const scene::SceneMap &scene, const OfdmConfig &ofdm,
                                 const Vec3 &ue_pos, double time_s, int max_bounces = 2,
                                 double reflection_loss_db = 6.0, double threshold_db = 160.0,
                                 double tx_power_dbm = 30.0, int max_paths = 5);

} // namespace csiloc::channel
