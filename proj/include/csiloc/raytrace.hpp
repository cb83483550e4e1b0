// SPDX-License-Identifier: Apache-2.0
//
// csiloc -- mmWave CSI positioning laboratory
// Image-method specular ray tracer: enumerates LoS and up-to-two-bounce
// reflection paths off building walls, with per-path delay, angles and gain.

#pragma once

#include "csiloc/scene.hpp"

#include <complex>
#include <vector>

namespace csiloc::rt {

// One propagation path. Vertices run gNB -> reflection points -> UE.
// aod is the departure direction at the gNB; aoa stores the gNB-side
// arrival direction of the reciprocal uplink path, which coincides with
// aod for a specular chain.
struct PathComponent {
    double delay_s = 0.0;
    std::complex<double> gain{0.0, 0.0}; // linear amplitude
    double aod_azimuth = 0.0;
    double aod_elevation = 0.0;
    double aoa_azimuth = 0.0;
    double aoa_elevation = 0.0;
    int bounce_count = 0;
    std::vector<Vec3> vertices;
    double length_m = 0.0;

    double power_db() const { return 20.0 * std::log10(std::abs(gain)); } // = -pathloss
    double pathloss_db() const { return -power_db(); }
};

struct PathSet {
    int gnb_id = -1;
    std::vector<PathComponent> paths; // sorted by descending |gain|^2

    size_t size() const { return paths.size(); }
    bool empty() const { return paths.empty(); }
};

// Complex path coefficient for a polyline of the given length: free-space
// path loss 20 log10(4 pi d f / c) plus reflection_loss_db per bounce, phase
// -2 pi f d / c with a pi flip per bounce. Throws on degenerate (d <= 0).
std::complex<double> path_gain(double length_m, int bounce_count, double carrier_freq_hz,
                               double reflection_loss_db);

// Enumerates the LoS path (if visible) and all valid image-method specular
// paths with up to max_bounces in {0,1,2} reflections off building walls.
// Paths come back sorted by descending power; no duplicates.
PathSet enumerate_paths(const scene::GnbSite &gnb, const Vec3 &ue_pos,
                        const scene::SceneMap &scene, int max_bounces = 2,
                        double reflection_loss_db = 6.0);

} // namespace csiloc::rt
