// SPDX-License-Identifier: Apache-2.0
//
// csiloc -- mmWave CSI positioning laboratory

#include "csiloc/channel.hpp"

#include <algorithm>
#include <cmath>

namespace csiloc::channel {

Eigen::VectorXcd steering_vector(const scene::ArrayConfig &array, double azimuth,
                                 double elevation, double wavelength)
{
    const auto elems = array.element_positions();
    const Vec3 k = direction_from_angles(azimuth, elevation);
    Eigen::VectorXcd a(static_cast<Eigen::Index>(elems.size()));
    const double kscale = 2.0 * kPi / wavelength;
    for (size_t i = 0; i < elems.size(); ++i)
        a[static_cast<Eigen::Index>(i)] = std::polar(1.0, kscale * k.dot(elems[i]));
    return a;
}

Eigen::VectorXcd beamformed_fr(const rt::PathSet &paths, const Eigen::VectorXcd &beam_weights,
                               const scene::ArrayConfig &array, double wavelength,
                               const OfdmConfig &ofdm)
{
    Eigen::VectorXcd h = Eigen::VectorXcd::Zero(ofdm.n_rbs);
    if (paths.empty())
        return h;
    for (const auto &p : paths.paths) {
        const Eigen::VectorXcd a_tx =
            steering_vector(array, p.aod_azimuth, p.aod_elevation, wavelength);
        const std::complex<double> tx_factor = a_tx.adjoint() * beam_weights;
        for (int m = 0; m < ofdm.n_rbs; ++m) {
            const double n = ofdm.observation_subcarrier(m);
            const double phase = -2.0 * kPi * n * ofdm.subcarrier_spacing_hz * p.delay_s;
            h[m] += p.gain * std::polar(1.0, phase) * tx_factor;
        }
    }
    return h;
}

std::vector<TimePath> time_csi(const rt::PathSet &paths, double threshold_db,
                               double tx_power_dbm, int max_paths)
{
    std::vector<TimePath> out;
    for (const auto &p : paths.paths) {
        if (p.pathloss_db() > threshold_db)
            continue;
        TimePath tp;
        tp.delay_s = p.delay_s;
        tp.power_dbm = tx_power_dbm + 20.0 * std::log10(std::abs(p.gain));
        tp.aoa_azimuth = p.aoa_azimuth;
        tp.aoa_elevation = p.aoa_elevation;
        out.push_back(tp);
        if (static_cast<int>(out.size()) == max_paths)
            break; // input is already sorted by descending power
    }
    return out;
}

SampleMeasurement measure_sample(const scene::SceneMap &scene, const OfdmConfig &ofdm,
                                 const Vec3 &ue_pos, double time_s, int max_bounces,
                                 double reflection_loss_db, double threshold_db,
                                 double tx_power_dbm, int max_paths)
{
    SampleMeasurement s;
    const int n_gnbs = static_cast<int>(scene.gnbs.size());
    const int n_beams = n_gnbs > 0 ? static_cast<int>(scene.gnbs[0].codebook.beams.size()) : 0;
    s.grid.resize(n_gnbs, n_beams, ofdm.n_rbs);
    s.grid.ue_pos = xy(ue_pos);
    s.grid.time_s = time_s;
    s.paths_per_gnb.resize(static_cast<size_t>(n_gnbs));

    for (int g = 0; g < n_gnbs; ++g) {
        const auto &gnb = scene.gnbs[static_cast<size_t>(g)];
        s.grid.los[static_cast<size_t>(g)] =
            scene::los_visible(gnb.position, ue_pos, scene) ? 1 : 0;

        rt::PathSet ps =
            rt::enumerate_paths(gnb, ue_pos, scene, max_bounces, reflection_loss_db);
        // Apply the loss threshold per path before beamforming.
        std::erase_if(ps.paths,
                      [&](const rt::PathComponent &p) { return p.pathloss_db() > threshold_db; });
        s.paths_per_gnb[static_cast<size_t>(g)] =
            time_csi(ps, threshold_db, tx_power_dbm, max_paths);

        if (ps.empty())
            continue; // gNB stays masked
        const double lambda = gnb.wavelength();
        for (int b = 0; b < n_beams; ++b) {
            const Eigen::VectorXcd h =
                beamformed_fr(ps, gnb.codebook.beams[static_cast<size_t>(b)].weights,
                              gnb.array, lambda, ofdm);
            for (int m = 0; m < ofdm.n_rbs; ++m) {
                s.grid.at(g, b, m) = h[m];
                s.grid.mask[s.grid.idx(g, b, m)] = 1;
            }
        }
    }
    return s;
}

} // namespace csiloc::channel
