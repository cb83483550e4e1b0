// SPDX-License-Identifier: Apache-2.0
//
// csiloc -- mmWave CSI positioning laboratory
// Urban deployment description: map geometry, gNB sites, cylindrical arrays
// and the 16-beam azimuth codebook.

#pragma once

#include "csiloc/common.hpp"
#include "csiloc/geometry.hpp"

#include <Eigen/Dense>
#include <complex>
#include <string>
#include <vector>

namespace csiloc::scene {

using CVector = Eigen::VectorXcd;

// Uniform cylindrical array: n_rings stacked rings of elements_per_ring
// elements each. Spacing defaults are filled in from the carrier wavelength
// at load time: ring_spacing = lambda/2 and radius = lambda/(4 sin(pi/n))
// so that adjacent in-ring elements sit ~lambda/2 apart.
struct ArrayConfig {
    int n_rings = 4;
    int elements_per_ring = 16;
    double ring_spacing_m = 0.0;
    double radius_m = 0.0;

    int n_elements() const { return n_rings * elements_per_ring; }

    // Element positions relative to the array center, deterministic order:
    // ring-major, azimuth index minor.
    std::vector<Vec3> element_positions() const;
};

struct Beam {
    double azimuth_rad = 0.0;
    double elevation_rad = 0.0;
    CVector weights; // unit norm, length = ArrayConfig::n_elements()
};

struct BeamCodebook {
    std::vector<Beam> beams;
};

struct GnbSite {
    int id = 0;
    Vec3 position{0.0, 0.0, 5.0}; // height component defaults to 5 m
    double carrier_freq_hz = 28e9;
    ArrayConfig array;
    BeamCodebook codebook;

    double wavelength() const { return kSpeedOfLight / carrier_freq_hz; }
};

struct Building {
    Rect footprint;
    double height_m = 0.0;
};

struct Street {
    std::string name;
    Vec2 from{0.0, 0.0};
    Vec2 to{0.0, 0.0};
    double speed_limit_kmh = 40.0;
};

struct SceneMap {
    Rect bounds;
    std::vector<Building> buildings;
    std::vector<Street> streets;
    std::vector<GnbSite> gnbs;
    std::string name;

    // Stable content hash used for dataset/model lineage checks.
    uint64_t hash() const;
};

// Unit-norm weights steering the array toward (azimuth, elevation):
// the normalized steering vector, which maximizes |a^H(dir) w| over
// unit-norm w (Cauchy-Schwarz).
CVector beam_weights(const ArrayConfig &array, double azimuth, double elevation,
                     double wavelength);

// Builds the 16-beam codebook: azimuths uniformly spaced 22.5 deg apart,
// common elevation (default -10 deg downtilt).
BeamCodebook make_codebook(const ArrayConfig &array, double wavelength, int n_beams = 16,
                           double elevation_rad = deg2rad(-10.0));

// 2.5-D visibility: true iff the segment p-q crosses no building footprint
// below that building's height. Obstacles are closed sets, so a ray grazing
// a footprint corner counts as blocked.
bool los_visible(const Vec3 &p, const Vec3 &q, const SceneMap &scene);

// Like los_visible, but ignores intersections of `skip_end` / `skip_start`
// building indices near the respective segment endpoint. Used by the tracer
// to validate reflected segment chains whose endpoints lie on wall faces.
bool segment_blocked(const Vec3 &p, const Vec3 &q, const SceneMap &scene,
                     int skip_start_building = -1, int skip_end_building = -1);

// Parses and validates a scene description (JSON text), resolving array
// spacings and beam weights. Rejects overlapping buildings, streets crossing
// buildings and gNBs inside buildings with located diagnostics.
SceneMap load_scene(const std::string &json_text);
SceneMap load_scene_file(const std::string &path);

// Built-in presets: "madrid-like" (550x370 m, 12 blocks, 3 gNBs @ 28 GHz)
// and "toy" (300x220 m, 4 blocks, 2 gNBs) for desk-scale runs.
SceneMap make_preset(const std::string &name);

// Serializes a SceneMap back into the config schema (used to derive variant
// scenes, e.g. relocating one gNB for transfer-learning experiments).
std::string scene_to_json(const SceneMap &scene);

} // namespace csiloc::scene
