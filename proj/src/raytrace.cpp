// SPDX-License-Identifier: Apache-2.0
//
// csiloc -- mmWave CSI positioning laboratory

#include "csiloc/raytrace.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <tuple>

namespace csiloc::rt {

namespace {

constexpr double kSideEps = 1e-9;

// Vertical wall face: 2-D segment a..b with outward unit normal n.
struct Wall {
    int building = -1;
    Vec2 a, b;
    Vec2 n;
    double height = 0.0;

    Vec2 dir() const { return (b - a).normalized(); }
    double len() const { return (b - a).norm(); }
    double side(const Vec2 &p) const { return (p - a).dot(n); }
    Vec2 mirror(const Vec2 &p) const { return p - 2.0 * side(p) * n; }
};

std::vector<Wall> collect_walls(const scene::SceneMap &s)
{
    std::vector<Wall> walls;
    walls.reserve(s.buildings.size() * 4);
    for (size_t i = 0; i < s.buildings.size(); ++i) {
        const Rect &r = s.buildings[i].footprint;
        const double h = s.buildings[i].height_m;
        const int bi = static_cast<int>(i);
        const Vec2 ll = r.lo, ur = r.hi;
        const Vec2 lr(ur.x(), ll.y()), ul(ll.x(), ur.y());
        walls.push_back({bi, ll, lr, Vec2(0, -1), h}); // south
        walls.push_back({bi, lr, ur, Vec2(1, 0), h});  // east
        walls.push_back({bi, ur, ul, Vec2(0, 1), h});  // north
        walls.push_back({bi, ul, ll, Vec2(-1, 0), h}); // west
    }
    return walls;
}

// Crossing of the line i -> t with the wall's infinite plane, expecting i
// behind the wall (side < 0) and t in front (side > 0). Returns the crossing
// point or nullopt when the geometry is degenerate or off the face segment.
std::optional<Vec2> reflection_point(const Wall &w, const Vec2 &image, const Vec2 &target)
{
    const double si = w.side(image);
    const double st = w.side(target);
    if (si >= -kSideEps || st <= kSideEps)
        return std::nullopt;
    const double t = si / (si - st); // in (0,1)
    const Vec2 r = image + t * (target - image);
    const double along = (r - w.a).dot(w.dir());
    if (along < -kSideEps || along > w.len() + kSideEps)
        return std::nullopt;
    return r;
}

struct Candidate {
    std::vector<Vec3> vertices; // gnb .. ue
    int bounces = 0;
    double length = 0.0;
};

double polyline_length(const std::vector<Vec3> &v)
{
    double L = 0.0;
    for (size_t i = 1; i < v.size(); ++i)
        L += (v[i] - v[i - 1]).norm();
    return L;
}

} // namespace

std::complex<double> path_gain(double length_m, int bounce_count, double carrier_freq_hz,
                               double reflection_loss_db)
{
    if (length_m <= 0.0)
        throw std::invalid_argument("degenerate path");
    const double fspl_db =
        20.0 * std::log10(4.0 * kPi * length_m * carrier_freq_hz / kSpeedOfLight);
    const double loss_db = fspl_db + bounce_count * reflection_loss_db;
    const double amp = std::pow(10.0, -loss_db / 20.0);
    const double phase =
        -2.0 * kPi * carrier_freq_hz * length_m / kSpeedOfLight + bounce_count * kPi;
    return std::polar(amp, phase);
}

PathSet enumerate_paths(const scene::GnbSite &gnb, const Vec3 &ue_pos,
                        const scene::SceneMap &scn, int max_bounces,
                        double reflection_loss_db)
{
    const Vec3 g = gnb.position;
    const Vec2 g2 = xy(g), u2 = xy(ue_pos);
    const double dz = ue_pos.z() - g.z();

    std::vector<Candidate> cands;

    if (scene::los_visible(g, ue_pos, scn)) {
        Candidate c;
        c.vertices = {g, ue_pos};
        c.bounces = 0;
        c.length = (ue_pos - g).norm();
        if (c.length > 0.0)
            cands.push_back(std::move(c));
    }

    const auto walls = collect_walls(scn);

    if (max_bounces >= 1) {
        for (const auto &w : walls) {
            if (w.side(g2) <= kSideEps || w.side(u2) <= kSideEps)
                continue;
            const Vec2 img = w.mirror(g2);
            auto r2 = reflection_point(w, img, u2);
            if (!r2)
                continue;
            // Unfolded 2-D length; z interpolates linearly along it.
            const double L2 = (u2 - img).norm();
            if (L2 <= 0.0)
                continue;
            const double s_r = (g2 - *r2).norm(); // == |img - r2|
            const double z_r = g.z() + (s_r / L2) * dz;
            if (z_r > w.height)
                continue;
            const Vec3 r3(r2->x(), r2->y(), z_r);
            if (scene::segment_blocked(g, r3, scn, -1, w.building))
                continue;
            if (scene::segment_blocked(r3, ue_pos, scn, w.building, -1))
                continue;
            Candidate c;
            c.vertices = {g, r3, ue_pos};
            c.bounces = 1;
            c.length = std::sqrt(L2 * L2 + dz * dz);
            cands.push_back(std::move(c));
        }
    }

    if (max_bounces >= 2) {
        for (size_t i = 0; i < walls.size(); ++i) {
            const Wall &w1 = walls[i];
            if (w1.side(g2) <= kSideEps)
                continue;
            const Vec2 img1 = w1.mirror(g2);
            for (size_t j = 0; j < walls.size(); ++j) {
                if (i == j)
                    continue;
                const Wall &w2 = walls[j];
                if (w2.side(u2) <= kSideEps)
                    continue;
                const Vec2 img2 = w2.mirror(img1);
                auto r2 = reflection_point(w2, img2, u2);
                if (!r2)
                    continue;
                if (w1.side(*r2) <= kSideEps)
                    continue; // the second hop must stay in front of wall 1
                auto r1 = reflection_point(w1, img1, *r2);
                if (!r1)
                    continue;
                if (w2.side(*r1) <= kSideEps)
                    continue;
                const double L2 = (u2 - img2).norm();
                if (L2 <= 0.0)
                    continue;
                const double s1 = (g2 - *r1).norm();
                const double s2 = s1 + (*r2 - *r1).norm();
                const double z1 = g.z() + (s1 / L2) * dz;
                const double z2 = g.z() + (s2 / L2) * dz;
                if (z1 > w1.height || z2 > w2.height)
                    continue;
                const Vec3 v1(r1->x(), r1->y(), z1);
                const Vec3 v2(r2->x(), r2->y(), z2);
                if (scene::segment_blocked(g, v1, scn, -1, w1.building))
                    continue;
                if (scene::segment_blocked(v1, v2, scn, w1.building, w2.building))
                    continue;
                if (scene::segment_blocked(v2, ue_pos, scn, w2.building, -1))
                    continue;
                Candidate c;
                c.vertices = {g, v1, v2, ue_pos};
                c.bounces = 2;
                c.length = std::sqrt(L2 * L2 + dz * dz);
                cands.push_back(std::move(c));
            }
        }
    }

    // Drop geometric duplicates (collinear wall families can rediscover the
    // same chain when a reflection point lands exactly on a face boundary).
    std::map<std::vector<long long>, bool> seen;
    PathSet out;
    out.gnb_id = gnb.id;
    for (auto &c : cands) {
        std::vector<long long> key;
        key.push_back(c.bounces);
        for (const auto &v : c.vertices) {
            key.push_back(llround(v.x() * 1e6));
            key.push_back(llround(v.y() * 1e6));
            key.push_back(llround(v.z() * 1e6));
        }
        if (!seen.emplace(std::move(key), true).second)
            continue;

        PathComponent p;
        p.vertices = std::move(c.vertices);
        p.bounce_count = c.bounces;
        p.length_m = polyline_length(p.vertices);
        p.delay_s = p.length_m / kSpeedOfLight;
        p.gain = path_gain(p.length_m, p.bounce_count, gnb.carrier_freq_hz,
                           reflection_loss_db);
        const Vec3 first_leg = p.vertices[1] - p.vertices[0];
        const double run = xy(first_leg).norm();
        p.aod_azimuth = azimuth_of(xy(first_leg));
        p.aod_elevation = std::atan2(first_leg.z(), run);
        // Uplink arrival at the gNB comes along the same first leg.
        p.aoa_azimuth = p.aod_azimuth;
        p.aoa_elevation = p.aod_elevation;
        out.paths.push_back(std::move(p));
    }

    std::sort(out.paths.begin(), out.paths.end(), [](const PathComponent &a,
                                                     const PathComponent &b) {
        const double pa = std::norm(a.gain), pb = std::norm(b.gain);
        if (pa != pb)
            return pa > pb;
        return a.length_m < b.length_m;
    });
    return out;
}

} // namespace csiloc::rt
