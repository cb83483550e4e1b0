// SPDX-License-Identifier: Apache-2.0
//
// csiloc -- mmWave CSI positioning laboratory

#include "csiloc/mobility.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <queue>
#include <random>

namespace csiloc::mobility {

namespace {

constexpr double kNodeTol = 1e-6;

int find_or_add_node(std::vector<Vec2> &nodes, const Vec2 &p)
{
    for (size_t i = 0; i < nodes.size(); ++i)
        if ((nodes[i] - p).norm() < kNodeTol)
            return static_cast<int>(i);
    nodes.push_back(p);
    return static_cast<int>(nodes.size() - 1);
}

} // namespace

StreetGraph build_street_graph(const scene::SceneMap &scene)
{
    StreetGraph g;
    for (size_t si = 0; si < scene.streets.size(); ++si) {
        const auto &st = scene.streets[si];
        // Cut points: endpoints plus crossings with every other street.
        std::vector<double> cuts{0.0, 1.0};
        for (size_t sj = 0; sj < scene.streets.size(); ++sj) {
            if (si == sj)
                continue;
            const auto &o = scene.streets[sj];
            if (auto hit = intersect_segments(st.from, st.to, o.from, o.to))
                cuts.push_back(hit->first);
        }
        std::sort(cuts.begin(), cuts.end());
        cuts.erase(std::unique(cuts.begin(), cuts.end(),
                               [](double a, double b) { return std::abs(a - b) < 1e-9; }),
                   cuts.end());

        for (size_t c = 0; c + 1 < cuts.size(); ++c) {
            const Vec2 pa = st.from + cuts[c] * (st.to - st.from);
            const Vec2 pb = st.from + cuts[c + 1] * (st.to - st.from);
            const double len = (pb - pa).norm();
            if (len < kNodeTol)
                continue;
            StreetGraph::Edge e;
            e.a = find_or_add_node(g.nodes, pa);
            e.b = find_or_add_node(g.nodes, pb);
            e.length = len;
            e.limit_ms = kmh_to_ms(st.speed_limit_kmh);
            e.street = static_cast<int>(si);
            g.edges.push_back(e);
        }
    }

    g.adjacency.assign(g.nodes.size(), {});
    for (size_t ei = 0; ei < g.edges.size(); ++ei) {
        g.adjacency[static_cast<size_t>(g.edges[ei].a)].push_back(static_cast<int>(ei));
        g.adjacency[static_cast<size_t>(g.edges[ei].b)].push_back(static_cast<int>(ei));
    }

    if (!g.nodes.empty()) {
        // Reject disconnected street graphs up front.
        std::vector<char> seen(g.nodes.size(), 0);
        std::queue<int> q;
        q.push(0);
        seen[0] = 1;
        size_t reached = 1;
        while (!q.empty()) {
            const int n = q.front();
            q.pop();
            for (int ei : g.adjacency[static_cast<size_t>(n)]) {
                const int m = g.other_end(ei, n);
                if (!seen[static_cast<size_t>(m)]) {
                    seen[static_cast<size_t>(m)] = 1;
                    ++reached;
                    q.push(m);
                }
            }
        }
        if (reached != g.nodes.size())
            throw ConfigError("street graph is disconnected");
    }
    return g;
}

namespace {

// One leg of the walk: an edge traversed from `from` toward `to`.
struct Leg {
    int edge = -1;
    int from = -1, to = -1;
    double length = 0.0;
    double limit = 0.0;
    Vec2 origin{0.0, 0.0};
    Vec2 dir{1.0, 0.0};
    bool turn_at_end = false; // heading changes at `to`
};

class Walker {
  public:
    Walker(const StreetGraph &g, uint64_t seed, const KinematicsParams &p)
        : graph_(g), params_(p), rng_(seed)
    {
        if (g.edges.empty())
            throw ConfigError("street graph has no edges");
        // Start on a random edge, position uniform along it, direction random.
        std::uniform_int_distribution<size_t> edge_pick(0, g.edges.size() - 1);
        const int e = static_cast<int>(edge_pick(rng_));
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        const bool forward = unit(rng_) < 0.5;
        s_ = unit(rng_) * g.edges[static_cast<size_t>(e)].length;
        legs_.push_back(make_leg(e, forward ? g.edges[static_cast<size_t>(e)].a
                                            : g.edges[static_cast<size_t>(e)].b));
        extend_route();
        v_ = std::min(legs_.front().limit, envelope_cap(s_));
    }

    TrackSample sample(double t) const
    {
        const Leg &leg = legs_.front();
        TrackSample smp;
        smp.t = t;
        smp.pos = leg.origin + s_ * leg.dir;
        smp.speed_ms = v_;
        smp.heading = leg.dir;
        smp.edge = leg.edge;
        return smp;
    }

    void step()
    {
        double rem = v_ * params_.dt_s;
        while (rem > 0.0) {
            const Leg &leg = legs_.front();
            const double left = leg.length - s_;
            if (rem < left) {
                s_ += rem;
                rem = 0.0;
            } else {
                rem -= left;
                legs_.pop_front();
                s_ = 0.0;
                extend_route();
            }
        }
        const double cap = std::min(legs_.front().limit, envelope_cap(s_));
        double v_next = std::min(v_ + params_.accel_ms2 * params_.dt_s, cap);
        v_next = std::max(v_next, v_ - params_.decel_ms2 * params_.dt_s);
        v_ = v_next;
    }

  private:
    Leg make_leg(int edge, int from) const
    {
        const auto &e = graph_.edges[static_cast<size_t>(edge)];
        Leg leg;
        leg.edge = edge;
        leg.from = from;
        leg.to = graph_.other_end(edge, from);
        leg.length = e.length;
        leg.limit = e.limit_ms;
        leg.origin = graph_.nodes[static_cast<size_t>(from)];
        leg.dir = (graph_.nodes[static_cast<size_t>(leg.to)] - leg.origin).normalized();
        return leg;
    }

    // Keeps at least three legs queued so the speed envelope can see ahead.
    void extend_route()
    {
        while (legs_.size() < 3) {
            Leg &last = legs_.back();
            const int node = last.to;
            std::vector<int> options;
            for (int ei : graph_.adjacency[static_cast<size_t>(node)])
                if (ei != last.edge)
                    options.push_back(ei);
            int chosen;
            if (options.empty()) {
                chosen = last.edge; // dead end: U-turn
            } else {
                std::uniform_int_distribution<size_t> pick(0, options.size() - 1);
                chosen = options[pick(rng_)];
            }
            Leg next = make_leg(chosen, node);
            last.turn_at_end = (1.0 - last.dir.dot(next.dir)) > 1e-9;
            legs_.push_back(std::move(next));
        }
    }

    // Maximum speed permitted at arclength s of the current leg, given the
    // deceleration envelopes of upcoming turns and limit drops.
    double envelope_cap(double s) const
    {
        const double v_turn = kmh_to_ms(params_.turn_speed_kmh);
        double cap = std::numeric_limits<double>::infinity();
        double dist = legs_.front().length - s;
        for (size_t i = 0; i + 1 < legs_.size(); ++i) {
            const Leg &cur = legs_[i];
            const Leg &nxt = legs_[i + 1];
            const double target = cur.turn_at_end ? v_turn : nxt.limit;
            const double zone = cur.turn_at_end ? params_.turn_zone_m : 0.0;
            const double run = std::max(0.0, dist - zone);
            cap = std::min(cap, std::sqrt(target * target + 2.0 * params_.decel_ms2 * run));
            dist += nxt.length;
        }
        return cap;
    }

    const StreetGraph &graph_;
    KinematicsParams params_;
    std::mt19937_64 rng_;
    std::deque<Leg> legs_;
    double s_ = 0.0;
    double v_ = 0.0;
};

} // namespace

Track generate_track(const StreetGraph &graph, uint64_t seed, int n_samples,
                     const KinematicsParams &params)
{
    if (n_samples < 1)
        throw ConfigError("n_samples must be >= 1");
    Track tr;
    tr.seed = seed;
    tr.samples.reserve(static_cast<size_t>(n_samples));
    Walker w(graph, seed, params);
    for (int i = 0; i < n_samples; ++i) {
        tr.samples.push_back(w.sample(i * params.dt_s));
        w.step();
    }
    return tr;
}

Track generate_track(const scene::SceneMap &scene, uint64_t seed, int n_samples,
                     const KinematicsParams &params)
{
    return generate_track(build_street_graph(scene), seed, n_samples, params);
}

TrackDataset generate_dataset(const scene::SceneMap &scene, int n_tracks, int samples_per_track,
                              uint64_t master_seed, const KinematicsParams &params)
{
    if (n_tracks < 3)
        throw ConfigError("need at least 3 tracks for a train/val/test split");
    const StreetGraph graph = build_street_graph(scene);
    TrackDataset ds;
    ds.tracks.reserve(static_cast<size_t>(n_tracks));
    for (int i = 0; i < n_tracks; ++i)
        ds.tracks.push_back(generate_track(graph, derive_seed(master_seed, static_cast<uint64_t>(i)),
                                           samples_per_track, params));

    const int n_val = std::max(1, n_tracks / 10);
    const int n_test = std::max(1, n_tracks / 10);
    ds.split.assign(static_cast<size_t>(n_tracks), Split::Train);
    for (int i = n_tracks - n_test - n_val; i < n_tracks - n_test; ++i)
        ds.split[static_cast<size_t>(i)] = Split::Val;
    for (int i = n_tracks - n_test; i < n_tracks; ++i)
        ds.split[static_cast<size_t>(i)] = Split::Test;
    return ds;
}

} // namespace csiloc::mobility
