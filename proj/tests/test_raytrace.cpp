// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "csiloc/raytrace.hpp"

#include <map>

using namespace csiloc;

namespace {

scene::SceneMap scene_from(const std::string &buildings_json)
{
    const std::string cfg = R"({
      "bounds": {"min": [-500,-500], "max": [500,500]},
      "buildings": )" + buildings_json +
                            R"(,
      "streets": [{"from": [-500,-490], "to": [500,-490]}],
      "gnbs": [{"position": [0, 0, 5]}]
    })";
    return scene::load_scene(cfg);
}

} // namespace

TEST_CASE("free space yields exactly the direct path")
{
    const auto s = scene_from("[]");
    const Vec3 ue(100.0, 0.0, 1.5);
    const auto ps = rt::enumerate_paths(s.gnbs[0], ue, s, 2);
    REQUIRE(ps.size() == 1);
    const auto &p = ps.paths[0];
    CHECK(p.bounce_count == 0);
    const double d = (ue - s.gnbs[0].position).norm();
    CHECK(p.length_m == doctest::Approx(d).epsilon(1e-12));
    CHECK(p.delay_s == doctest::Approx(d / kSpeedOfLight).epsilon(1e-12));
    CHECK(p.length_m == doctest::Approx(kSpeedOfLight * p.delay_s).epsilon(1e-9));
}

TEST_CASE("single parallel wall adds one mirror path with the image length")
{
    // Wall along y = 50 (south face of a slab building), link along y = 0.
    const auto s = scene_from(R"([{"min": [-200, 50], "max": [200, 60], "height": 40}])");
    const Vec3 gnb = s.gnbs[0].position;
    const Vec3 ue(150.0, 0.0, 1.5);
    const auto ps = rt::enumerate_paths(s.gnbs[0], ue, s, 1);
    REQUIRE(ps.size() == 2);

    const auto &direct = ps.paths[0];
    const auto &mirror = ps.paths[1];
    CHECK(direct.bounce_count == 0);
    CHECK(mirror.bounce_count == 1);

    // Image of the gNB across y = 50 sits at y = 100.
    const Vec3 image(gnb.x(), 100.0, gnb.z());
    CHECK(mirror.length_m == doctest::Approx((image - ue).norm()).epsilon(1e-9));
    REQUIRE(mirror.vertices.size() == 3);
    CHECK(mirror.vertices[1].y() == doctest::Approx(50.0));

    // Specularity: angle of incidence equals angle of reflection.
    const Vec3 in = (mirror.vertices[1] - mirror.vertices[0]).normalized();
    const Vec3 out = (mirror.vertices[2] - mirror.vertices[1]).normalized();
    const Vec3 n(0.0, -1.0, 0.0);
    CHECK(std::abs(in.dot(n) + out.dot(n)) < 1e-9);
}

TEST_CASE("a UE enclosed by four walls sees nothing without bounces")
{
    const auto s = scene_from(R"([
      {"min": [ 90, -60], "max": [100,  60], "height": 40},
      {"min": [190, -60], "max": [200,  60], "height": 40},
      {"min": [100,  50], "max": [190,  60], "height": 40},
      {"min": [100, -60], "max": [190, -50], "height": 40}
    ])");
    const Vec3 ue(150.0, 0.0, 1.5);
    const auto ps = rt::enumerate_paths(s.gnbs[0], ue, s, 0);
    CHECK(ps.empty());
}

TEST_CASE("path_gain free-space values")
{
    // 100 m at 28 GHz: FSPL = 20 log10(4 pi d f / c) = 101.39 dB.
    const auto h0 = rt::path_gain(100.0, 0, 28e9, 6.0);
    CHECK(-20.0 * std::log10(std::abs(h0)) == doctest::Approx(101.39).epsilon(1e-4));

    // One 6 dB bounce adds to 107.39 dB.
    const auto h1 = rt::path_gain(100.0, 1, 28e9, 6.0);
    CHECK(-20.0 * std::log10(std::abs(h1)) == doctest::Approx(107.39).epsilon(1e-4));

    // d an integer number of wavelengths: zero phase for a direct path.
    const double f = 28e9;
    const double lambda = kSpeedOfLight / f;
    const auto h2 = rt::path_gain(1000.0 * lambda, 0, f, 6.0);
    CHECK(std::abs(wrap_pi(std::arg(h2))) < 1e-6);

    CHECK_THROWS_AS(rt::path_gain(0.0, 0, f, 6.0), std::invalid_argument);
}

TEST_CASE("gain magnitude strictly decreases with length at fixed bounce count")
{
    double prev = 1e9;
    for (double d = 10.0; d < 1000.0; d *= 1.7) {
        const double a = std::abs(rt::path_gain(d, 1, 28e9, 6.0));
        CHECK(a < prev);
        prev = a;
    }
}

namespace {

std::multiset<std::pair<int, long long>> path_signature(const rt::PathSet &ps)
{
    std::multiset<std::pair<int, long long>> sig;
    for (const auto &p : ps.paths)
        sig.insert({p.bounce_count, llround(p.length_m * 1e6)});
    return sig;
}

} // namespace

TEST_CASE("reciprocity, monotonicity and reflection-point validity")
{
    const auto s = scene_from(R"([
      {"min": [40, 30], "max": [120, 80], "height": 40},
      {"min": [40, -80], "max": [120, -30], "height": 35},
      {"min": [160, -20], "max": [220, 40], "height": 28}
    ])");
    const Vec3 ue(140.0, 5.0, 1.5);
    const auto &gnb = s.gnbs[0];

    const auto fwd = rt::enumerate_paths(gnb, ue, s, 2);
    CHECK(fwd.size() >= 2);

    SUBCASE("reciprocity: swapped endpoints give the same multiset of paths")
    {
        scene::GnbSite reversed = gnb;
        reversed.position = ue;
        const auto bwd = rt::enumerate_paths(reversed, gnb.position, s, 2);
        CHECK(path_signature(fwd) == path_signature(bwd));
    }

    SUBCASE("monotonicity: higher bounce budgets only add paths")
    {
        const auto b0 = rt::enumerate_paths(gnb, ue, s, 0);
        const auto b1 = rt::enumerate_paths(gnb, ue, s, 1);
        const auto b2 = rt::enumerate_paths(gnb, ue, s, 2);
        CHECK(b0.size() <= b1.size());
        CHECK(b1.size() <= b2.size());
        auto s0 = path_signature(b0), s1 = path_signature(b1), s2 = path_signature(b2);
        CHECK(std::includes(s1.begin(), s1.end(), s0.begin(), s0.end()));
        CHECK(std::includes(s2.begin(), s2.end(), s1.begin(), s1.end()));
    }

    SUBCASE("every reflection point is specular and sits on a wall face")
    {
        for (const auto &p : fwd.paths) {
            CHECK(p.bounce_count == static_cast<int>(p.vertices.size()) - 2);
            CHECK(p.length_m == doctest::Approx(kSpeedOfLight * p.delay_s).epsilon(1e-12));
            for (size_t v = 1; v + 1 < p.vertices.size(); ++v) {
                const Vec3 &r = p.vertices[v];
                // On some building face.
                bool on_face = false;
                Vec2 normal(0.0, 0.0);
                for (const auto &b : s.buildings) {
                    const auto &fp = b.footprint;
                    if (std::abs(r.x() - fp.lo.x()) < 1e-9 || std::abs(r.x() - fp.hi.x()) < 1e-9)
                        if (r.y() >= fp.lo.y() - 1e-9 && r.y() <= fp.hi.y() + 1e-9) {
                            on_face = true;
                            normal = Vec2(1.0, 0.0);
                        }
                    if (std::abs(r.y() - fp.lo.y()) < 1e-9 || std::abs(r.y() - fp.hi.y()) < 1e-9)
                        if (r.x() >= fp.lo.x() - 1e-9 && r.x() <= fp.hi.x() + 1e-9) {
                            on_face = true;
                            normal = Vec2(0.0, 1.0);
                        }
                }
                CHECK(on_face);
                // Incidence angle == reflection angle (2-D, vertical walls).
                const Vec2 in = (xy(p.vertices[v]) - xy(p.vertices[v - 1])).normalized();
                const Vec2 out = (xy(p.vertices[v + 1]) - xy(p.vertices[v])).normalized();
                CHECK(std::abs(std::abs(in.dot(normal)) - std::abs(out.dot(normal))) < 1e-9);
            }
        }
    }

    SUBCASE("paths are sorted by descending power and deduplicated")
    {
        for (size_t i = 1; i < fwd.paths.size(); ++i)
            CHECK(std::norm(fwd.paths[i - 1].gain) >= std::norm(fwd.paths[i].gain));
        std::map<std::vector<long long>, int> seen;
        for (const auto &p : fwd.paths) {
            std::vector<long long> key{p.bounce_count};
            for (const auto &v : p.vertices) {
                key.push_back(llround(v.x() * 1e6));
                key.push_back(llround(v.y() * 1e6));
            }
            CHECK(++seen[key] == 1);
        }
    }
}
