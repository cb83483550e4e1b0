// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "csiloc/channel.hpp"

#include <random>

using namespace csiloc;
using channel::OfdmConfig;

namespace {

scene::ArrayConfig single_element()
{
    scene::ArrayConfig a;
    a.n_rings = 1;
    a.elements_per_ring = 1;
    a.ring_spacing_m = 0.0;
    a.radius_m = 0.0;
    return a;
}

// Single isotropic TX element: beam weight [1].
Eigen::VectorXcd unit_beam()
{
    Eigen::VectorXcd w(1);
    w[0] = 1.0;
    return w;
}

rt::PathComponent make_path(double delay, std::complex<double> gain, double az = 0.0,
                            double el = 0.0, int bounces = 0)
{
    rt::PathComponent p;
    p.delay_s = delay;
    p.gain = gain;
    p.aod_azimuth = az;
    p.aod_elevation = el;
    p.aoa_azimuth = az;
    p.aoa_elevation = el;
    p.bounce_count = bounces;
    p.length_m = delay * kSpeedOfLight;
    return p;
}

} // namespace

TEST_CASE("OfdmConfig default numerology")
{
    const OfdmConfig ofdm;
    CHECK(ofdm.rb_bandwidth_hz() == doctest::Approx(1.44e6));
    CHECK(ofdm.observation_subcarrier(0) == 6);
    CHECK(ofdm.observation_subcarrier(9) == 114);
    CHECK(ofdm.phase_cycle_tof_s() * 1e9 == doctest::Approx(694.444).epsilon(1e-5));
    CHECK(ofdm.phase_cycle_distance_m() == doctest::Approx(208.189).epsilon(1e-4));
}

TEST_CASE("steering vector element phases")
{
    SUBCASE("element at the array center is 1 for any direction")
    {
        const auto a = channel::steering_vector(single_element(), 1.1, -0.3, 0.0107);
        REQUIRE(a.size() == 1);
        CHECK(std::abs(a[0] - std::complex<double>(1.0, 0.0)) < 1e-12);
    }

    SUBCASE("two elements half a wavelength apart along x, wave along +x")
    {
        // A 1-ring, 2-element array has elements at +-radius on the x axis;
        // radius lambda/4 puts them lambda/2 apart.
        const double lambda = 0.0107;
        scene::ArrayConfig two;
        two.n_rings = 1;
        two.elements_per_ring = 2;
        two.ring_spacing_m = 0.0;
        two.radius_m = lambda / 4.0;
        const auto a = channel::steering_vector(two, 0.0, 0.0, lambda);
        REQUIRE(a.size() == 2);
        CHECK(std::abs(wrap_pi(std::arg(a[0]) - std::arg(a[1]))) == doctest::Approx(kPi));
        CHECK(std::abs(a[0]) == doctest::Approx(1.0));
        CHECK(std::abs(a[1]) == doctest::Approx(1.0));
    }

    SUBCASE("direction orthogonal to all displacements gives all ones")
    {
        const double lambda = 0.0107;
        scene::ArrayConfig ring;
        ring.n_rings = 1;
        ring.elements_per_ring = 8;
        ring.ring_spacing_m = 0.0;
        ring.radius_m = lambda;
        // Elements lie in the z = 0 plane; propagation straight up.
        const auto a = channel::steering_vector(ring, 0.0, kPi / 2.0, lambda);
        for (Eigen::Index i = 0; i < a.size(); ++i)
            CHECK(std::abs(a[i] - std::complex<double>(1.0, 0.0)) < 1e-9);
    }
}

TEST_CASE("beamformed frequency response against closed forms")
{
    const OfdmConfig ofdm;
    const double lambda = kSpeedOfLight / 28e9;

    SUBCASE("K=1, tau=0, isotropic single element: constant h0")
    {
        rt::PathSet ps;
        ps.paths.push_back(make_path(0.0, {0.3, -0.4}));
        const auto h = channel::beamformed_fr(ps, unit_beam(), single_element(), lambda, ofdm);
        REQUIRE(h.size() == 10);
        for (int m = 0; m < 10; ++m)
            CHECK(std::abs(h[m] - std::complex<double>(0.3, -0.4)) < 1e-12);
    }

    SUBCASE("tau * rb_bandwidth = 0.5 flips phase by pi between RBs")
    {
        rt::PathSet ps;
        const double tau = 0.5 / ofdm.rb_bandwidth_hz();
        ps.paths.push_back(make_path(tau, {1.0, 0.0}));
        const auto h = channel::beamformed_fr(ps, unit_beam(), single_element(), lambda, ofdm);
        for (int m = 1; m < 10; ++m) {
            const double d = wrap_pi(std::arg(h[m]) - std::arg(h[m - 1]));
            CHECK(std::abs(std::abs(d) - kPi) < 1e-9);
        }
    }

    SUBCASE("two equal-gain paths half an RB apart alternate 2|h| and 0")
    {
        rt::PathSet ps;
        const double tau1 = 100e-9;
        const double dtau = 0.5 / ofdm.rb_bandwidth_hz();
        const std::complex<double> h0(0.7, 0.1);
        // Align the second path's phase with the first at the m=0 subcarrier.
        const double align =
            2.0 * kPi * ofdm.observation_subcarrier(0) * ofdm.subcarrier_spacing_hz * dtau;
        ps.paths.push_back(make_path(tau1, h0));
        ps.paths.push_back(make_path(tau1 + dtau, h0 * std::polar(1.0, align)));
        const auto h = channel::beamformed_fr(ps, unit_beam(), single_element(), lambda, ofdm);
        for (int m = 0; m < 10; ++m) {
            const double expect = (m % 2 == 0) ? 2.0 * std::abs(h0) : 0.0;
            CHECK(std::abs(std::abs(h[m]) - expect) < 1e-9);
        }
    }

    SUBCASE("empty PathSet gives the zero vector")
    {
        rt::PathSet ps;
        const auto h = channel::beamformed_fr(ps, unit_beam(), single_element(), lambda, ofdm);
        CHECK(h.norm() == 0.0);
    }
}

TEST_CASE("single-path phase law (generative Eq. 6) within 1e-9")
{
    const OfdmConfig ofdm;
    const double lambda = kSpeedOfLight / 28e9;
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> tau_dist(1e-9, 2e-6);
    for (int trial = 0; trial < 50; ++trial) {
        const double tau = tau_dist(rng);
        rt::PathSet ps;
        ps.paths.push_back(make_path(tau, std::polar(1e-5, 1.234)));
        const auto h = channel::beamformed_fr(ps, unit_beam(), single_element(), lambda, ofdm);
        const double expect = wrap_pi(-2.0 * kPi * tau * ofdm.rb_bandwidth_hz());
        for (int m = 1; m < 10; ++m) {
            const double d = wrap_pi(std::arg(h[m]) - std::arg(h[m - 1]));
            CHECK(std::abs(wrap_pi(d - expect)) < 1e-9);
        }
    }
}

TEST_CASE("delays one full phase cycle apart are indistinguishable (Eq. 7)")
{
    const OfdmConfig ofdm;
    const double lambda = kSpeedOfLight / 28e9;
    const double tau = 300e-9;
    rt::PathSet a, b;
    a.paths.push_back(make_path(tau, {1e-5, 0.0}));
    b.paths.push_back(make_path(tau + ofdm.phase_cycle_tof_s(), {1e-5, 0.0}));
    const auto ha = channel::beamformed_fr(a, unit_beam(), single_element(), lambda, ofdm);
    const auto hb = channel::beamformed_fr(b, unit_beam(), single_element(), lambda, ofdm);
    for (int m = 1; m < 10; ++m) {
        const double da = wrap_pi(std::arg(ha[m]) - std::arg(ha[m - 1]));
        const double db = wrap_pi(std::arg(hb[m]) - std::arg(hb[m - 1]));
        CHECK(std::abs(wrap_pi(da - db)) < 1e-9);
    }
}

TEST_CASE("linearity and the energy bound")
{
    const OfdmConfig ofdm;
    const scene::SceneMap s = scene::make_preset("toy");
    const auto &gnb = s.gnbs[0];
    const double lambda = gnb.wavelength();
    const auto &beam = gnb.codebook.beams[3].weights;

    rt::PathSet a, b, both;
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int k = 0; k < 6; ++k) {
        auto p = make_path(1e-7 * (k + 1) + 3e-9 * u(rng),
                           std::polar(1e-5 * (1.0 + 0.3 * u(rng)), kPi * u(rng)),
                           kPi * u(rng), 0.1 * u(rng), k % 3);
        (k % 2 == 0 ? a : b).paths.push_back(p);
        both.paths.push_back(p);
    }

    const auto ha = channel::beamformed_fr(a, beam, gnb.array, lambda, ofdm);
    const auto hb = channel::beamformed_fr(b, beam, gnb.array, lambda, ofdm);
    const auto hu = channel::beamformed_fr(both, beam, gnb.array, lambda, ofdm);
    for (int m = 0; m < 10; ++m)
        CHECK(std::abs(hu[m] - (ha[m] + hb[m])) <= 1e-12 * std::abs(hu[m]) + 1e-18);

    // |H(n)| <= sum_k |h_k| * ||b|| * ||a||.
    double bound = 0.0;
    const double an = std::sqrt(static_cast<double>(gnb.array.n_elements()));
    for (const auto &p : both.paths)
        bound += std::abs(p.gain) * beam.norm() * an;
    for (int m = 0; m < 10; ++m)
        CHECK(std::abs(hu[m]) <= bound + 1e-15);
}

TEST_CASE("time_csi thresholding, ordering and truncation")
{
    SUBCASE("a path at 161 dB loss is dropped")
    {
        rt::PathSet ps;
        ps.paths.push_back(make_path(1e-6, std::polar(std::pow(10.0, -161.0 / 20.0), 0.3)));
        CHECK(channel::time_csi(ps).empty());
    }

    SUBCASE("seven paths above threshold keep the 5 strongest in order")
    {
        rt::PathSet ps;
        for (int k = 0; k < 7; ++k)
            ps.paths.push_back(
                make_path(1e-7 * (k + 1), std::polar(std::pow(10.0, -(80.0 + 5 * k) / 20.0), 0.0)));
        const auto t = channel::time_csi(ps);
        REQUIRE(t.size() == 5);
        for (size_t i = 1; i < t.size(); ++i)
            CHECK(t[i - 1].power_dbm >= t[i].power_dbm);
        // 30 dBm TX reference: strongest is 30 - 80 dBm.
        CHECK(t[0].power_dbm == doctest::Approx(-50.0).epsilon(1e-9));
    }

    SUBCASE("single LoS path delay is distance over c")
    {
        const auto s = scene::make_preset("toy");
        const Vec3 ue(80.0, 10.0, 1.5);
        auto ps = rt::enumerate_paths(s.gnbs[0], ue, s, 0);
        REQUIRE(ps.size() == 1);
        const auto t = channel::time_csi(ps);
        REQUIRE(t.size() == 1);
        CHECK(t[0].delay_s ==
              doctest::Approx((ue - s.gnbs[0].position).norm() / kSpeedOfLight).epsilon(1e-12));
    }
}

TEST_CASE("measure_sample masks gNBs without usable paths and flags LoS")
{
    const auto s = scene::make_preset("toy");
    const channel::OfdmConfig ofdm;
    const Vec3 ue(80.0, 10.0, 1.5); // on the bottom street
    const auto m = channel::measure_sample(s, ofdm, ue, 0.0);
    CHECK(m.grid.n_gnbs == 2);
    CHECK(m.grid.n_beams == 16);
    CHECK(m.grid.n_rbs == 10);
    for (int g = 0; g < 2; ++g) {
        const bool visible = scene::los_visible(s.gnbs[g].position, ue, s);
        CHECK((m.grid.los[g] != 0) == visible);
        const bool any_mask = m.grid.mask[m.grid.idx(g, 0, 0)] != 0;
        CHECK(any_mask == !m.paths_per_gnb[g].empty());
    }
}
