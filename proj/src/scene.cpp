// SPDX-License-Identifier: Apache-2.0
//
// csiloc -- mmWave CSI positioning laboratory

#include "csiloc/scene.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <sstream>

namespace csiloc::scene {

using json = nlohmann::ordered_json;

std::vector<Vec3> ArrayConfig::element_positions() const
{
    std::vector<Vec3> pos;
    pos.reserve(static_cast<size_t>(n_elements()));
    const double z0 = -0.5 * (n_rings - 1) * ring_spacing_m;
    for (int ring = 0; ring < n_rings; ++ring) {
        const double z = z0 + ring * ring_spacing_m;
        for (int i = 0; i < elements_per_ring; ++i) {
            const double phi = 2.0 * kPi * i / elements_per_ring;
            pos.emplace_back(radius_m * std::cos(phi), radius_m * std::sin(phi), z);
        }
    }
    return pos;
}

CVector beam_weights(const ArrayConfig &array, double azimuth, double elevation,
                     double wavelength)
{
    const auto elems = array.element_positions();
    const Vec3 k = direction_from_angles(azimuth, elevation);
    CVector w(static_cast<Eigen::Index>(elems.size()));
    const double kscale = 2.0 * kPi / wavelength;
    for (size_t i = 0; i < elems.size(); ++i) {
        const double phase = kscale * k.dot(elems[i]);
        w[static_cast<Eigen::Index>(i)] = std::polar(1.0, phase);
    }
    w.normalize();
    return w;
}

BeamCodebook make_codebook(const ArrayConfig &array, double wavelength, int n_beams,
                           double elevation_rad)
{
    BeamCodebook cb;
    cb.beams.reserve(static_cast<size_t>(n_beams));
    for (int b = 0; b < n_beams; ++b) {
        Beam beam;
        beam.azimuth_rad = wrap_pi(2.0 * kPi * b / n_beams);
        beam.elevation_rad = elevation_rad;
        beam.weights = beam_weights(array, beam.azimuth_rad, beam.elevation_rad, wavelength);
        cb.beams.push_back(std::move(beam));
    }
    return cb;
}

namespace {

// True if the 2-D overlap interval of segment p2-q2 with the footprint dips
// below the building height. z varies linearly with t along the segment.
bool interval_blocks(const std::pair<double, double> &t, double zp, double zq, double height)
{
    const double z0 = zp + t.first * (zq - zp);
    const double z1 = zp + t.second * (zq - zp);
    return std::min(z0, z1) < height;
}

} // namespace

bool segment_blocked(const Vec3 &p, const Vec3 &q, const SceneMap &scene,
                     int skip_start_building, int skip_end_building)
{
    constexpr double kEndEps = 1e-9;
    const Vec2 p2 = xy(p), q2 = xy(q);
    for (size_t i = 0; i < scene.buildings.size(); ++i) {
        const auto &b = scene.buildings[i];
        auto t = clip_segment_rect(p2, q2, b.footprint);
        if (!t)
            continue;
        const int bi = static_cast<int>(i);
        if (bi == skip_start_building && t->second <= kEndEps)
            continue;
        if (bi == skip_end_building && t->first >= 1.0 - kEndEps)
            continue;
        if (interval_blocks(*t, p.z(), q.z(), b.height_m))
            return true;
    }
    return false;
}

bool los_visible(const Vec3 &p, const Vec3 &q, const SceneMap &scene)
{
    return !segment_blocked(p, q, scene);
}

uint64_t SceneMap::hash() const
{
    // Hash the canonical JSON form so logically equal scenes agree.
    return fnv1a(scene_to_json(*this));
}

namespace {

Vec2 parse_vec2(const json &j, const std::string &where)
{
    if (!j.is_array() || j.size() != 2)
        throw ConfigError(where + ": expected [x, y]");
    return Vec2(j[0].get<double>(), j[1].get<double>());
}

Vec3 parse_vec3(const json &j, const std::string &where)
{
    if (!j.is_array() || (j.size() != 2 && j.size() != 3))
        throw ConfigError(where + ": expected [x, y] or [x, y, z]");
    const double z = j.size() == 3 ? j[2].get<double>() : 5.0;
    return Vec3(j[0].get<double>(), j[1].get<double>(), z);
}

std::string fmt_rect(const Rect &r)
{
    std::ostringstream os;
    os << "[" << r.lo.x() << "," << r.lo.y() << "]x[" << r.hi.x() << "," << r.hi.y() << "]";
    return os.str();
}

void validate(const SceneMap &s)
{
    if (s.bounds.width() <= 0.0 || s.bounds.depth() <= 0.0)
        throw ConfigError("scene bounds are degenerate");

    for (size_t i = 0; i < s.buildings.size(); ++i) {
        const auto &b = s.buildings[i];
        if (b.footprint.width() <= 0.0 || b.footprint.depth() <= 0.0 || b.height_m <= 0.0)
            throw ConfigError("building " + std::to_string(i) + " is degenerate");
        if (!s.bounds.contains(b.footprint))
            throw ConfigError("building " + std::to_string(i) + " " + fmt_rect(b.footprint) +
                              " extends outside bounds");
        for (size_t jx = i + 1; jx < s.buildings.size(); ++jx) {
            if (b.footprint.overlaps_strict(s.buildings[jx].footprint))
                throw ConfigError("buildings " + std::to_string(i) + " and " +
                                  std::to_string(jx) + " overlap at " + fmt_rect(b.footprint));
        }
    }

    for (size_t i = 0; i < s.streets.size(); ++i) {
        const auto &st = s.streets[i];
        if (!s.bounds.contains(st.from) || !s.bounds.contains(st.to))
            throw ConfigError("street " + st.name + " leaves the scene bounds");
        if (st.speed_limit_kmh <= 0.0)
            throw ConfigError("street " + st.name + " has nonpositive speed limit");
        for (size_t bi = 0; bi < s.buildings.size(); ++bi) {
            auto t = clip_segment_rect(st.from, st.to, s.buildings[bi].footprint);
            // A touch along the facade is fine; crossing the interior is not.
            if (t && t->second - t->first > 1e-9)
                throw ConfigError("street " + st.name + " intersects building " +
                                  std::to_string(bi) + " " +
                                  fmt_rect(s.buildings[bi].footprint));
        }
    }

    for (const auto &g : s.gnbs) {
        if (g.carrier_freq_hz <= 0.0)
            throw ConfigError("gnb " + std::to_string(g.id) + " has nonpositive carrier");
        if (!s.bounds.contains(xy(g.position)))
            throw ConfigError("gnb " + std::to_string(g.id) + " outside bounds");
        for (size_t bi = 0; bi < s.buildings.size(); ++bi) {
            if (s.buildings[bi].footprint.contains_strict(xy(g.position)))
                throw ConfigError("gnb " + std::to_string(g.id) + " at (" +
                                  std::to_string(g.position.x()) + "," +
                                  std::to_string(g.position.y()) + ") inside building " +
                                  std::to_string(bi) + " " +
                                  fmt_rect(s.buildings[bi].footprint));
        }
        if (g.array.n_rings < 1 || g.array.elements_per_ring < 1)
            throw ConfigError("gnb " + std::to_string(g.id) + " has an empty array");
    }
}

// Fills wavelength-derived array spacings and materializes beam weights.
void resolve(SceneMap &s)
{
    for (size_t i = 0; i < s.gnbs.size(); ++i) {
        auto &g = s.gnbs[i];
        g.id = static_cast<int>(i);
        const double lambda = g.wavelength();
        if (g.array.ring_spacing_m <= 0.0)
            g.array.ring_spacing_m = lambda / 2.0;
        if (g.array.radius_m <= 0.0) {
            const int n = std::max(2, g.array.elements_per_ring);
            g.array.radius_m = lambda / (4.0 * std::sin(kPi / n));
        }
        if (g.codebook.beams.empty())
            g.codebook = make_codebook(g.array, lambda);
    }
}

} // namespace

SceneMap load_scene(const std::string &json_text)
{
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error &e) {
        throw ConfigError(std::string("scene config parse error: ") + e.what());
    }

    SceneMap s;
    if (j.contains("name"))
        s.name = j["name"].get<std::string>();
    if (!j.contains("bounds"))
        throw ConfigError("scene config: missing bounds");
    s.bounds.lo = parse_vec2(j["bounds"]["min"], "bounds.min");
    s.bounds.hi = parse_vec2(j["bounds"]["max"], "bounds.max");

    for (const auto &bj : j.value("buildings", json::array())) {
        Building b;
        b.footprint.lo = parse_vec2(bj.at("min"), "building.min");
        b.footprint.hi = parse_vec2(bj.at("max"), "building.max");
        b.height_m = bj.at("height").get<double>();
        s.buildings.push_back(b);
    }

    for (const auto &sj : j.value("streets", json::array())) {
        Street st;
        st.name = sj.value("name", "street" + std::to_string(s.streets.size()));
        st.from = parse_vec2(sj.at("from"), "street.from");
        st.to = parse_vec2(sj.at("to"), "street.to");
        st.speed_limit_kmh = sj.value("speed_limit_kmh", 40.0);
        s.streets.push_back(st);
    }

    for (const auto &gj : j.value("gnbs", json::array())) {
        GnbSite g;
        g.position = parse_vec3(gj.at("position"), "gnb.position");
        g.carrier_freq_hz = gj.value("carrier_freq_hz", 28e9);
        if (gj.contains("array")) {
            const auto &aj = gj["array"];
            g.array.n_rings = aj.value("n_rings", 4);
            g.array.elements_per_ring = aj.value("elements_per_ring", 16);
            g.array.ring_spacing_m = aj.value("ring_spacing_m", 0.0);
            g.array.radius_m = aj.value("radius_m", 0.0);
        }
        s.gnbs.push_back(std::move(g));
    }

    resolve(s);
    validate(s);
    return s;
}

SceneMap load_scene_file(const std::string &path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open scene file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return load_scene(ss.str());
}

std::string scene_to_json(const SceneMap &scene)
{
    json j;
    j["name"] = scene.name;
    j["bounds"] = {{"min", {scene.bounds.lo.x(), scene.bounds.lo.y()}},
                   {"max", {scene.bounds.hi.x(), scene.bounds.hi.y()}}};
    j["buildings"] = json::array();
    for (const auto &b : scene.buildings)
        j["buildings"].push_back({{"min", {b.footprint.lo.x(), b.footprint.lo.y()}},
                                  {"max", {b.footprint.hi.x(), b.footprint.hi.y()}},
                                  {"height", b.height_m}});
    j["streets"] = json::array();
    for (const auto &st : scene.streets)
        j["streets"].push_back({{"name", st.name},
                                {"from", {st.from.x(), st.from.y()}},
                                {"to", {st.to.x(), st.to.y()}},
                                {"speed_limit_kmh", st.speed_limit_kmh}});
    j["gnbs"] = json::array();
    for (const auto &g : scene.gnbs)
        j["gnbs"].push_back({{"position", {g.position.x(), g.position.y(), g.position.z()}},
                             {"carrier_freq_hz", g.carrier_freq_hz},
                             {"array",
                              {{"n_rings", g.array.n_rings},
                               {"elements_per_ring", g.array.elements_per_ring},
                               {"ring_spacing_m", g.array.ring_spacing_m},
                               {"radius_m", g.array.radius_m}}}});
    return j.dump(2);
}

namespace {

// Madrid-like preset: 550x370 m bounds, a 5x4 street grid with 12 blocks.
// Block sizes and the street widths loosely follow the METIS grid flavour;
// the statistical LoS/NLoS mix is the target, not exact coordinates.
json madrid_like_json()
{
    json j;
    j["name"] = "madrid-like";
    j["bounds"] = {{"min", {0.0, 0.0}}, {"max", {550.0, 370.0}}};

    const double vx[] = {10.0, 145.0, 280.0, 415.0, 540.0};
    const double hy[] = {10.0, 130.0, 250.0, 360.0};
    const double heights[] = {28.0, 40.0, 32.0, 48.0, 24.0, 36.0,
                              44.0, 30.0, 38.0, 26.0, 42.0, 34.0};

    j["buildings"] = json::array();
    int bi = 0;
    for (int col = 0; col < 4; ++col) {
        for (int row = 0; row < 3; ++row) {
            const double x0 = vx[col] + 10.0, x1 = vx[col + 1] - 10.0;
            const double y0 = hy[row] + 10.0, y1 = hy[row + 1] - 10.0;
            j["buildings"].push_back(
                {{"min", {x0, y0}}, {"max", {x1, y1}}, {"height", heights[bi % 12]}});
            ++bi;
        }
    }

    j["streets"] = json::array();
    for (int i = 0; i < 5; ++i)
        j["streets"].push_back({{"name", "v" + std::to_string(i)},
                                {"from", {vx[i], hy[0]}},
                                {"to", {vx[i], hy[3]}},
                                {"speed_limit_kmh", 40.0}});
    const double hlimits[] = {40.0, 60.0, 40.0, 20.0}; // top street slow, one wide fast street
    for (int i = 0; i < 4; ++i)
        j["streets"].push_back({{"name", "h" + std::to_string(i)},
                                {"from", {vx[0], hy[i]}},
                                {"to", {vx[4], hy[i]}},
                                {"speed_limit_kmh", hlimits[i]}});

    j["gnbs"] = json::array();
    j["gnbs"].push_back({{"position", {145.0, 130.0, 5.0}}, {"carrier_freq_hz", 28e9}});
    j["gnbs"].push_back({{"position", {415.0, 250.0, 5.0}}, {"carrier_freq_hz", 28e9}});
    j["gnbs"].push_back({{"position", {280.0, 10.0, 5.0}}, {"carrier_freq_hz", 28e9}});
    return j;
}

// Toy preset for fast end-to-end runs: 300x220 m, 4 blocks, 2 gNBs.
json toy_json()
{
    json j;
    j["name"] = "toy";
    j["bounds"] = {{"min", {0.0, 0.0}}, {"max", {300.0, 220.0}}};

    const double vx[] = {10.0, 145.0, 290.0};
    const double hy[] = {10.0, 110.0, 210.0};
    const double heights[] = {30.0, 42.0, 36.0, 26.0};

    j["buildings"] = json::array();
    int bi = 0;
    for (int col = 0; col < 2; ++col) {
        for (int row = 0; row < 2; ++row) {
            const double x0 = vx[col] + 10.0, x1 = vx[col + 1] - 10.0;
            const double y0 = hy[row] + 10.0, y1 = hy[row + 1] - 10.0;
            j["buildings"].push_back(
                {{"min", {x0, y0}}, {"max", {x1, y1}}, {"height", heights[bi++]}});
        }
    }

    j["streets"] = json::array();
    for (int i = 0; i < 3; ++i)
        j["streets"].push_back({{"name", "v" + std::to_string(i)},
                                {"from", {vx[i], hy[0]}},
                                {"to", {vx[i], hy[2]}},
                                {"speed_limit_kmh", 40.0}});
    for (int i = 0; i < 3; ++i)
        j["streets"].push_back({{"name", "h" + std::to_string(i)},
                                {"from", {vx[0], hy[i]}},
                                {"to", {vx[2], hy[i]}},
                                {"speed_limit_kmh", 40.0}});

    j["gnbs"] = json::array();
    j["gnbs"].push_back({{"position", {145.0, 110.0, 5.0}}, {"carrier_freq_hz", 28e9}});
    j["gnbs"].push_back({{"position", {10.0, 10.0, 5.0}}, {"carrier_freq_hz", 28e9}});
    return j;
}

} // namespace

SceneMap make_preset(const std::string &name)
{
    if (name == "madrid-like")
        return load_scene(madrid_like_json().dump());
    if (name == "toy")
        return load_scene(toy_json().dump());
    throw ConfigError("unknown scene preset: " + name + " (known: madrid-like, toy)");
}

} // namespace csiloc::scene
