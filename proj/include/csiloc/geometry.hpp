// SPDX-License-Identifier: Apache-2.0
//
// csiloc -- mmWave CSI positioning laboratory
// Planar geometry primitives shared by the scene, tracer and mobility modules.

#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <optional>
#include <utility>

namespace csiloc {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;

inline Vec2 xy(const Vec3 &p) { return Vec2(p.x(), p.y()); }

// Axis-aligned rectangle, closed set (boundary points count as inside).
struct Rect {
    Vec2 lo{0.0, 0.0};
    Vec2 hi{0.0, 0.0};

    double width() const { return hi.x() - lo.x(); }
    double depth() const { return hi.y() - lo.y(); }

    bool contains(const Vec2 &p) const
    {
        return p.x() >= lo.x() && p.x() <= hi.x() && p.y() >= lo.y() && p.y() <= hi.y();
    }

    bool contains_strict(const Vec2 &p) const
    {
        return p.x() > lo.x() && p.x() < hi.x() && p.y() > lo.y() && p.y() < hi.y();
    }

    bool overlaps_strict(const Rect &o) const
    {
        return lo.x() < o.hi.x() && o.lo.x() < hi.x() && lo.y() < o.hi.y() && o.lo.y() < hi.y();
    }

    bool contains(const Rect &o) const { return contains(o.lo) && contains(o.hi); }
};

// Closed-set clip of segment p + t*(q-p), t in [0,1], against a rectangle
// (slab method). Returns the parameter interval of the overlap, or nullopt.
// A corner graze yields a degenerate interval [t,t] and still counts.
inline std::optional<std::pair<double, double>>
clip_segment_rect(const Vec2 &p, const Vec2 &q, const Rect &r)
{
    double t0 = 0.0, t1 = 1.0;
    const Vec2 d = q - p;
    for (int axis = 0; axis < 2; ++axis) {
        const double pa = p[axis], da = d[axis];
        const double lo = r.lo[axis], hi = r.hi[axis];
        if (da == 0.0) {
            if (pa < lo || pa > hi)
                return std::nullopt;
            continue;
        }
        double ta = (lo - pa) / da;
        double tb = (hi - pa) / da;
        if (ta > tb)
            std::swap(ta, tb);
        t0 = std::max(t0, ta);
        t1 = std::min(t1, tb);
        if (t0 > t1)
            return std::nullopt;
    }
    return std::make_pair(t0, t1);
}

// Intersection of two planar segments, returned as parameters (t, u) along
// a->b and c->d; closed set, endpoints count. Collinear overlaps report the
// first contact point. Tolerance is absolute on the parameters.
inline std::optional<std::pair<double, double>>
intersect_segments(const Vec2 &a, const Vec2 &b, const Vec2 &c, const Vec2 &d, double eps = 1e-12)
{
    const Vec2 r = b - a, s = d - c;
    const double denom = r.x() * s.y() - r.y() * s.x();
    const Vec2 ca = c - a;
    if (std::abs(denom) < eps * (r.norm() * s.norm() + 1e-30)) {
        // Parallel: report overlap only if collinear.
        if (std::abs(ca.x() * r.y() - ca.y() * r.x()) > eps * (r.norm() + 1.0))
            return std::nullopt;
        const double rr = r.squaredNorm();
        if (rr == 0.0)
            return std::nullopt;
        double tc = ca.dot(r) / rr;
        double td = (d - a).dot(r) / rr;
        if (tc > td)
            std::swap(tc, td);
        if (td < -eps || tc > 1.0 + eps)
            return std::nullopt;
        const double t = std::clamp(tc, 0.0, 1.0);
        const double u = (a + t * r - c).norm() / (s.norm() + 1e-30);
        return std::make_pair(t, std::clamp(u, 0.0, 1.0));
    }
    const double t = (ca.x() * s.y() - ca.y() * s.x()) / denom;
    const double u = (ca.x() * r.y() - ca.y() * r.x()) / denom;
    if (t < -eps || t > 1.0 + eps || u < -eps || u > 1.0 + eps)
        return std::nullopt;
    return std::make_pair(std::clamp(t, 0.0, 1.0), std::clamp(u, 0.0, 1.0));
}

// Azimuth of a planar direction, radians in (-pi, pi].
inline double azimuth_of(const Vec2 &d) { return std::atan2(d.y(), d.x()); }

// Unit propagation direction for (azimuth, elevation); elevation positive up.
inline Vec3 direction_from_angles(double azimuth, double elevation)
{
    const double ce = std::cos(elevation);
    return Vec3(ce * std::cos(azimuth), ce * std::sin(azimuth), std::sin(elevation));
}

} // namespace csiloc
