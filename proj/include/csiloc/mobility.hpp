// SPDX-License-Identifier: Apache-2.0
//
// csiloc -- mmWave CSI positioning laboratory
// Vehicle-like UE tracks on the street graph: random turns at intersections,
// decelerate-turn-accelerate kinematics, 100 ms sampling.

#pragma once

#include "csiloc/scene.hpp"

#include <cstdint>
#include <vector>

namespace csiloc::mobility {

// Street graph: streets split at mutual crossings; edges carry the parent
// street's speed limit.
struct StreetGraph {
    struct Edge {
        int a = -1, b = -1; // node indices
        double length = 0.0;
        double limit_ms = 0.0;
        int street = -1;
    };
    std::vector<Vec2> nodes;
    std::vector<Edge> edges;
    std::vector<std::vector<int>> adjacency; // node -> incident edge ids

    int other_end(int edge, int node) const
    {
        return edges[static_cast<size_t>(edge)].a == node ? edges[static_cast<size_t>(edge)].b
                                                          : edges[static_cast<size_t>(edge)].a;
    }
};

StreetGraph build_street_graph(const scene::SceneMap &scene);

struct KinematicsParams {
    double dt_s = 0.1;
    double accel_ms2 = 2.0;       // after a turn, up to the street limit
    double decel_ms2 = 3.0;       // approaching a turn
    double turn_speed_kmh = 20.0; // held through the turn zone
    double turn_zone_m = 15.0;    // pinned-speed stretch before the corner
};

struct TrackSample {
    double t = 0.0;
    Vec2 pos{0.0, 0.0};
    double speed_ms = 0.0;
    Vec2 heading{1.0, 0.0}; // unit
    int edge = -1;
};

struct Track {
    uint64_t seed = 0;
    std::vector<TrackSample> samples;
};

// Random walk over the street graph: uniform outgoing direction at each
// intersection (no U-turns except at dead ends), speed envelope that reaches
// the 20 km/h turn speed 15 m before each corner and accelerates back to the
// street limit afterwards.
Track generate_track(const scene::SceneMap &scene, uint64_t seed, int n_samples,
                     const KinematicsParams &params = {});
Track generate_track(const StreetGraph &graph, uint64_t seed, int n_samples,
                     const KinematicsParams &params = {});

enum class Split : int { Train = 0, Val = 1, Test = 2 };

struct TrackDataset {
    std::vector<Track> tracks;
    std::vector<Split> split; // per track, 80/10/10 by whole tracks
};

TrackDataset generate_dataset(const scene::SceneMap &scene, int n_tracks, int samples_per_track,
                              uint64_t master_seed, const KinematicsParams &params = {});

} // namespace csiloc::mobility
