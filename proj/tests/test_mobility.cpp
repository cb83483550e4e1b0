// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "csiloc/mobility.hpp"

using namespace csiloc;
using mobility::Track;

namespace {

scene::SceneMap cross_scene(double limit_a = 40.0, double limit_b = 60.0)
{
    const std::string cfg = R"({
      "bounds": {"min": [-500,-500], "max": [500,500]},
      "streets": [
        {"name": "a", "from": [-500, 0], "to": [500, 0], "speed_limit_kmh": )" +
                            std::to_string(limit_a) + R"(},
        {"name": "b", "from": [0, -500], "to": [0, 500], "speed_limit_kmh": )" +
                            std::to_string(limit_b) + R"(}
      ]
    })";
    return scene::load_scene(cfg);
}

scene::SceneMap single_street()
{
    const std::string cfg = R"({
      "bounds": {"min": [0,0], "max": [2000, 10]},
      "streets": [{"from": [0, 5], "to": [2000, 5], "speed_limit_kmh": 40}]
    })";
    return scene::load_scene(cfg);
}

} // namespace

TEST_CASE("street graph splits streets at crossings")
{
    const auto g = mobility::build_street_graph(cross_scene());
    CHECK(g.nodes.size() == 5); // 4 arms + center
    CHECK(g.edges.size() == 4);
    int center = -1;
    for (size_t n = 0; n < g.nodes.size(); ++n)
        if (g.nodes[n].norm() < 1e-9)
            center = static_cast<int>(n);
    REQUIRE(center >= 0);
    CHECK(g.adjacency[static_cast<size_t>(center)].size() == 4);
}

TEST_CASE("disconnected street graphs are rejected")
{
    const std::string cfg = R"({
      "bounds": {"min": [0,0], "max": [100,100]},
      "streets": [
        {"from": [0, 10], "to": [100, 10]},
        {"from": [0, 90], "to": [100, 90]}
      ]
    })";
    CHECK_THROWS_AS(mobility::build_street_graph(scene::load_scene(cfg)), ConfigError);
}

TEST_CASE("cruise on a straight street: constant 40 km/h, 1.111 m per sample")
{
    const Track tr = mobility::generate_track(single_street(), 11, 400);
    REQUIRE(tr.samples.size() == 400);
    const double v40 = kmh_to_ms(40.0);
    int cruise_pairs = 0;
    for (size_t i = 0; i + 1 < tr.samples.size(); ++i) {
        const auto &s0 = tr.samples[i];
        const auto &s1 = tr.samples[i + 1];
        CHECK(s1.t - s0.t == doctest::Approx(0.1).epsilon(1e-12));
        if (std::abs(s0.speed_ms - v40) < 1e-9 && std::abs(s1.speed_ms - v40) < 1e-9 &&
            s0.edge == s1.edge) {
            CHECK((s1.pos - s0.pos).norm() == doctest::Approx(v40 * 0.1).epsilon(1e-9));
            CHECK((s1.pos - s0.pos).norm() == doctest::Approx(1.1111).epsilon(1e-3));
            ++cruise_pairs;
        }
    }
    CHECK(cruise_pairs > 50);
}

TEST_CASE("kinematic envelope: 3 m/s^2 into turns, 2 m/s^2 out of them")
{
    const Track tr = mobility::generate_track(cross_scene(40.0, 40.0), 3, 3000);
    const double v40 = kmh_to_ms(40.0);
    const double v20 = kmh_to_ms(20.0);

    SUBCASE("acceleration bound holds everywhere")
    {
        for (size_t i = 0; i + 1 < tr.samples.size(); ++i) {
            const double dv = tr.samples[i + 1].speed_ms - tr.samples[i].speed_ms;
            CHECK(std::abs(dv) <= 3.0 * 0.1 + 1e-9);
        }
    }

    SUBCASE("speed stays within [20, 40] km/h on this map")
    {
        for (const auto &s : tr.samples) {
            CHECK(s.speed_ms >= v20 - 1e-9);
            CHECK(s.speed_ms <= v40 + 1e-9);
        }
    }

    SUBCASE("a full 40->20 deceleration run lasts about 1.852 s")
    {
        // Find a maximal strictly-decreasing run from cruise to turn speed.
        bool found = false;
        for (size_t i = 0; i + 1 < tr.samples.size() && !found; ++i) {
            if (std::abs(tr.samples[i].speed_ms - v40) > 1e-9)
                continue;
            size_t j = i;
            while (j + 1 < tr.samples.size() &&
                   tr.samples[j + 1].speed_ms < tr.samples[j].speed_ms - 1e-12)
                ++j;
            if (std::abs(tr.samples[j].speed_ms - v20) < 1e-9) {
                const double duration = tr.samples[j].t - tr.samples[i].t;
                CHECK(duration == doctest::Approx((40.0 - 20.0) / 3.6 / 3.0).epsilon(0.08));
                found = true;
            }
        }
        CHECK(found);
    }

    SUBCASE("heading changes only at corners")
    {
        for (size_t i = 0; i + 1 < tr.samples.size(); ++i) {
            const auto &s0 = tr.samples[i];
            const auto &s1 = tr.samples[i + 1];
            CHECK(std::abs(s0.heading.norm() - 1.0) < 1e-12);
            if (s0.edge == s1.edge)
                CHECK((s1.heading - s0.heading).norm() < 1e-12);
        }
    }
}

TEST_CASE("acceleration to a 60 km/h limit takes about 5.556 s from the turn")
{
    const Track tr = mobility::generate_track(cross_scene(60.0, 60.0), 5, 4000);
    const double v60 = kmh_to_ms(60.0);
    const double v20 = kmh_to_ms(20.0);
    bool found = false;
    for (size_t i = 0; i + 1 < tr.samples.size() && !found; ++i) {
        if (std::abs(tr.samples[i].speed_ms - v20) > 1e-9)
            continue;
        if (tr.samples[i + 1].speed_ms <= tr.samples[i].speed_ms + 1e-12)
            continue;
        size_t j = i;
        while (j + 1 < tr.samples.size() &&
               tr.samples[j + 1].speed_ms > tr.samples[j].speed_ms + 1e-12)
            ++j;
        if (std::abs(tr.samples[j].speed_ms - v60) < 1e-6) {
            const double duration = tr.samples[j].t - tr.samples[i].t;
            CHECK(duration == doctest::Approx((60.0 - 20.0) / 3.6 / 2.0).epsilon(0.05));
            found = true;
        }
    }
    CHECK(found);
}

TEST_CASE("dataset split is 80/10/10 by whole tracks and deterministic")
{
    const auto scn = cross_scene();
    const auto count = [](const mobility::TrackDataset &ds, mobility::Split s) {
        return std::count(ds.split.begin(), ds.split.end(), s);
    };

    const auto d40 = mobility::generate_dataset(scn, 40, 10, 99);
    CHECK(count(d40, mobility::Split::Train) == 32);
    CHECK(count(d40, mobility::Split::Val) == 4);
    CHECK(count(d40, mobility::Split::Test) == 4);

    const auto d10 = mobility::generate_dataset(scn, 10, 10, 99);
    CHECK(count(d10, mobility::Split::Train) == 8);
    CHECK(count(d10, mobility::Split::Val) == 1);
    CHECK(count(d10, mobility::Split::Test) == 1);

    CHECK_THROWS_AS(mobility::generate_dataset(scn, 2, 10, 99), ConfigError);

    const auto again = mobility::generate_dataset(scn, 10, 10, 99);
    for (size_t t = 0; t < 10; ++t) {
        REQUIRE(again.tracks[t].samples.size() == d10.tracks[t].samples.size());
        for (size_t i = 0; i < again.tracks[t].samples.size(); ++i) {
            CHECK(again.tracks[t].samples[i].pos == d10.tracks[t].samples[i].pos);
            CHECK(again.tracks[t].samples[i].speed_ms == d10.tracks[t].samples[i].speed_ms);
        }
    }
}

TEST_CASE("positions stay on streets and per-street speed limits are honored")
{
    const auto scn = scene::make_preset("madrid-like");
    const auto graph = mobility::build_street_graph(scn);
    const Track tr = mobility::generate_track(graph, 17, 2000);
    for (const auto &s : tr.samples) {
        const auto &e = graph.edges[static_cast<size_t>(s.edge)];
        const Vec2 a = graph.nodes[static_cast<size_t>(e.a)];
        const Vec2 b = graph.nodes[static_cast<size_t>(e.b)];
        // Distance from the sample to its street segment.
        const Vec2 d = b - a;
        const double t = std::clamp((s.pos - a).dot(d) / d.squaredNorm(), 0.0, 1.0);
        CHECK((s.pos - (a + t * d)).norm() < 1e-6);
        CHECK(s.speed_ms <= e.limit_ms + 1e-9);
    }
}

TEST_CASE("NLoS sample fraction on the default map lies in the wide bracket")
{
    const auto scn = scene::make_preset("madrid-like");
    const auto ds = mobility::generate_dataset(scn, 40, 200, 12345);
    size_t nlos = 0, total = 0;
    for (const auto &tr : ds.tracks)
        for (const auto &s : tr.samples) {
            const Vec3 ue(s.pos.x(), s.pos.y(), 1.5);
            bool any = false;
            for (const auto &g : scn.gnbs)
                any = any || scene::los_visible(g.position, ue, scn);
            nlos += any ? 0 : 1;
            ++total;
        }
    const double fraction = static_cast<double>(nlos) / static_cast<double>(total);
    MESSAGE("NLoS fraction on madrid-like over 40 tracks: ", fraction);
    CHECK(fraction >= 0.20);
    CHECK(fraction <= 0.50);
}
