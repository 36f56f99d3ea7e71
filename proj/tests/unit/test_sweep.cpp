#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "nwcav/sweep/sweep.hpp"

using namespace nwcav;

namespace {

double lorentz(double x, double w) { return 1.0 / (1.0 + (x / w) * (x / w)); }

// Two coupled oscillators: branch wavelengths mean(H) +- sqrt(delta^2 + g^2),
// delta = a (H - h0), each branch dressed with a narrow lorentzian ridge.
sweep::PurcellMap oscillator_map(double h0, double g, double a = 0.25) {
    sweep::PurcellMap map;
    map.parameter_name = "height_nm";
    for (double h = 1280.0; h <= 1420.0 + 1e-9; h += 10.0) map.parameter.push_back(h);
    for (double l = 880.0; l <= 940.0 + 1e-9; l += 0.5) map.wavelength_nm.push_back(l);
    map.rows.assign(map.parameter.size(), {});
    map.f_p.resize(map.parameter.size() * map.wavelength_nm.size());
    for (std::size_t r = 0; r < map.parameter.size(); ++r) {
        const double h = map.parameter[r];
        const double mean = 910.0 + 0.15 * (h - h0);
        const double split = std::sqrt(a * a * (h - h0) * (h - h0) + g * g);
        for (std::size_t c = 0; c < map.wavelength_nm.size(); ++c) {
            const double lam = map.wavelength_nm[c];
            map.f_p[r * map.wavelength_nm.size() + c] =
                1.0 + 12.0 * lorentz(lam - (mean + split), 2.0) +
                9.0 * lorentz(lam - (mean - split), 2.0);
        }
    }
    return map;
}

bool on_a_branch(const sweep::AnticrossingReport& rep, const sweep::RidgePoint& p) {
    auto match = [&](const std::vector<sweep::RidgePoint>& branch) {
        return std::any_of(branch.begin(), branch.end(), [&](const sweep::RidgePoint& q) {
            return q.parameter == p.parameter && q.wavelength_nm == p.wavelength_nm &&
                   q.f_p == p.f_p;
        });
    };
    return match(rep.branch_a) || match(rep.branch_b);
}

// Stub runner: lorentzian spectrum whose center tracks the wire height.
sweep::RowResult height_stub(const scene::SceneSpec& s, const fdtd::Numerics&,
                             const std::vector<double>& w) {
    sweep::RowResult r;
    const double center = 700.0 + 0.15 * s.height_nm;
    r.f_p.reserve(w.size());
    for (double lam : w) r.f_p.push_back(0.2 + 6.0 * lorentz(lam - center, 3.0));
    return r;
}

}  // namespace

TEST_CASE("two-oscillator map yields center and gap of the avoided crossing") {
    const auto map = oscillator_map(1350.0, 6.0);
    const auto rep = sweep::detect_avoided_crossing(map);
    CHECK(rep.center_parameter == doctest::Approx(1350.0).epsilon(1e-12));
    CHECK(rep.center_wavelength_nm == doctest::Approx(910.0).epsilon(0.002));
    CHECK(rep.gap_nm == doctest::Approx(12.0).epsilon(0.05));
    CHECK_FALSE(rep.is_crossing);
    CHECK(rep.branch_a.size() >= 12);
    CHECK(rep.branch_b.size() >= 12);
    CHECK(rep.gap_nm >= 0.0);
    CHECK(on_a_branch(rep, rep.quasi_bic));
    CHECK(rep.quasi_bic.f_p > 12.0);
    CHECK(std::abs(rep.quasi_bic.parameter - 1350.0) <= 30.0);

    // Off-grid center: recovered within one parameter step.
    const auto rep2 = sweep::detect_avoided_crossing(oscillator_map(1345.0, 6.0));
    CHECK(std::abs(rep2.center_parameter - 1345.0) <= 10.0 + 1e-9);
    CHECK(rep2.gap_nm >= 0.95 * 12.0);
    CHECK(rep2.gap_nm <= 1.05 * 2.0 * std::sqrt(0.25 * 0.25 * 25.0 + 36.0));
}

TEST_CASE("zero coupling is reported as a crossing, not an anticrossing") {
    const auto rep = sweep::detect_avoided_crossing(oscillator_map(1350.0, 0.0));
    CHECK(rep.is_crossing);
    CHECK(rep.gap_nm <= 0.5 + 1e-12);
    CHECK(std::abs(rep.center_parameter - 1350.0) <= 10.0 + 1e-9);
}

TEST_CASE("crossing detection depends on ridge geometry, not magnitude") {
    const auto map = oscillator_map(1350.0, 6.0);
    auto scaled = map;
    for (auto& v : scaled.f_p) v *= 3.7;
    const auto a = sweep::detect_avoided_crossing(map);
    const auto b = sweep::detect_avoided_crossing(scaled);
    CHECK(a.center_parameter == b.center_parameter);
    CHECK(a.center_wavelength_nm == b.center_wavelength_nm);
    CHECK(a.gap_nm == b.gap_nm);
    CHECK(a.is_crossing == b.is_crossing);
    CHECK(a.quasi_bic.parameter == b.quasi_bic.parameter);
    CHECK(a.quasi_bic.wavelength_nm == b.quasi_bic.wavelength_nm);
    CHECK(a.branch_a.size() == b.branch_a.size());
    CHECK(a.branch_b.size() == b.branch_b.size());

    // Row order in the map must not matter either.
    auto shuffled = map;
    std::mt19937 rng(7);
    std::vector<std::size_t> perm(map.parameter.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    const std::size_t m = map.wavelength_nm.size();
    for (std::size_t r = 0; r < perm.size(); ++r) {
        shuffled.parameter[r] = map.parameter[perm[r]];
        std::copy(map.f_p.begin() + static_cast<std::ptrdiff_t>(perm[r] * m),
                  map.f_p.begin() + static_cast<std::ptrdiff_t>((perm[r] + 1) * m),
                  shuffled.f_p.begin() + static_cast<std::ptrdiff_t>(r * m));
    }
    const auto c = sweep::detect_avoided_crossing(shuffled);
    CHECK(c.center_parameter == a.center_parameter);
    CHECK(c.gap_nm == a.gap_nm);
}

TEST_CASE("a single ridge raises the no-anticrossing error") {
    sweep::PurcellMap map;
    map.parameter_name = "height_nm";
    for (double h = 1280.0; h <= 1420.0 + 1e-9; h += 10.0) map.parameter.push_back(h);
    for (double l = 880.0; l <= 940.0 + 1e-9; l += 0.5) map.wavelength_nm.push_back(l);
    map.rows.assign(map.parameter.size(), {});
    for (double h : map.parameter)
        for (double l : map.wavelength_nm)
            map.f_p.push_back(1.0 + 10.0 * lorentz(l - (900.0 + 0.1 * (h - 1350.0)), 2.0));
    CHECK_THROWS_WITH_AS(sweep::detect_avoided_crossing(map),
                         doctest::Contains("no anticrossing"), std::runtime_error);
}

TEST_CASE("quasi-bic counting dedups and stays monotone in threshold") {
    sweep::PurcellMap map;
    map.parameter_name = "height_nm";
    for (double h = 350.0; h <= 2100.0 + 1e-9; h += 10.0) map.parameter.push_back(h);
    for (double l = 890.0; l <= 910.0 + 1e-9; l += 0.5) map.wavelength_nm.push_back(l);
    map.rows.assign(map.parameter.size(), {});
    const double centers[] = {500.0, 800.0, 950.0, 1100.0, 1400.0, 1430.0, 1700.0, 2000.0};
    const double amps[] = {12.0, 15.0, 8.0, 11.0, 18.0, 9.0, 13.0, 12.0};
    for (double h : map.parameter)
        for (double l : map.wavelength_nm) {
            double f = 0.3;
            for (int i = 0; i < 8; ++i)
                f += amps[i] * std::exp(-(h - centers[i]) * (h - centers[i]) / (30.0 * 30.0) -
                                        (l - 900.0) * (l - 900.0) / 9.0);
            map.f_p.push_back(f);
        }

    const auto at10 = sweep::count_quasi_bic(map, 895.0, 905.0, 10.0);
    CHECK(at10.count == 6);  // the 8 nm and the deduplicated 9 nm bumps drop out
    for (const auto& loc : at10.locations) {
        CHECK(loc.wavelength_nm == doctest::Approx(900.0).epsilon(1e-6));
        CHECK(loc.f_p > 10.0);
    }
    // The 1430 bump sits 30 nm from the stronger 1400 one: same feature.
    for (const auto& loc : at10.locations)
        CHECK(std::abs(loc.parameter - 1430.0) > 5.0);

    int prev = 1000;
    for (double t : {0.5, 5.0, 10.0, 12.5, 14.0, 16.0, 20.0}) {
        const int c = sweep::count_quasi_bic(map, 895.0, 905.0, t).count;
        CHECK(c <= prev);
        prev = c;
    }
    CHECK(sweep::count_quasi_bic(map, 895.0, 905.0, 100.0).count == 0);
}

TEST_CASE("scaling fit is exact on exactly linear samples") {
    std::vector<std::pair<double, double>> pts;
    for (double s = 0.9; s <= 1.1 + 1e-9; s += 0.025)
        pts.emplace_back(s, 873.66 * s + 24.97);
    const auto fit = sweep::fit_scaling_law(pts);
    CHECK(fit.slope_nm == doctest::Approx(873.66).epsilon(1e-10));
    CHECK(fit.intercept_nm == doctest::Approx(24.97).epsilon(1e-9));
    CHECK(fit.residual_rms_nm < 1e-9);
    CHECK(fit.slope_nm * 1.0 + fit.intercept_nm == doctest::Approx(898.63).epsilon(1e-9));

    CHECK_THROWS_AS(sweep::fit_scaling_law({{1.0, 900.0}}), std::runtime_error);
    CHECK_THROWS_AS(sweep::fit_scaling_law({{1.0, 900.0}, {1.0, 901.0}}),
                    std::invalid_argument);
}

TEST_CASE("height sweep keeps rows in caller order and isolates failures") {
    scene::SceneSpec base;
    fdtd::Numerics num;
    sweep::SweepOptions opt;
    opt.runner = height_stub;

    const std::vector<double> heights{1300.0, 1240.0, 1280.0};
    const auto map = sweep::sweep_height(base, heights, num, opt);
    CHECK(map.parameter_name == "height_nm");
    CHECK(map.parameter == heights);
    CHECK(map.f_p.size() == heights.size() * map.wavelength_nm.size());

    const std::vector<double> sorted_h{1240.0, 1280.0, 1300.0};
    const auto sorted_map = sweep::sweep_height(base, sorted_h, num, opt);
    for (std::size_t r = 0; r < heights.size(); ++r) {
        const auto it = std::find(sorted_h.begin(), sorted_h.end(), heights[r]);
        const std::size_t rs = static_cast<std::size_t>(it - sorted_h.begin());
        for (std::size_t c = 0; c < map.wavelength_nm.size(); ++c)
            CHECK(map.at(r, c) == sorted_map.at(rs, c));
    }

    // Single-height sweep equals that run's spectrum.
    const auto single = sweep::sweep_height(base, {1280.0}, num, opt);
    scene::SceneSpec one = base;
    one.height_nm = 1280.0;
    const auto direct = height_stub(one, num, single.wavelength_nm);
    REQUIRE(single.f_p.size() == direct.f_p.size());
    for (std::size_t c = 0; c < direct.f_p.size(); ++c)
        CHECK(single.at(0, c) == direct.f_p[c]);

    // One failing run never aborts the sweep.
    sweep::SweepOptions bad = opt;
    bad.runner = [](const scene::SceneSpec& s, const fdtd::Numerics& n,
                    const std::vector<double>& w) {
        if (s.height_nm == 1240.0) throw std::runtime_error("boom");
        return height_stub(s, n, w);
    };
    const auto part = sweep::sweep_height(base, heights, num, bad);
    CHECK_FALSE(part.rows[0].failed);
    CHECK(part.rows[1].failed);
    CHECK(part.rows[1].message == "boom");
    CHECK_FALSE(part.rows[1].converged);
    CHECK(std::isnan(part.at(1, 0)));
    CHECK(part.at(0, 0) == map.at(0, 0));
    CHECK(part.f_p.size() == map.f_p.size());

    CHECK_THROWS_AS(sweep::sweep_height(base, {}, num, opt), std::invalid_argument);
}

TEST_CASE("worker pool size never changes the assembled map") {
    scene::SceneSpec base;
    fdtd::Numerics num;
    sweep::SweepOptions serial, pooled;
    serial.runner = height_stub;
    pooled.runner = height_stub;
    serial.workers = 1;
    pooled.workers = 4;
    std::vector<double> heights;
    for (double h = 1200.0; h <= 1500.0 + 1e-9; h += 20.0) heights.push_back(h);
    const auto a = sweep::sweep_height(base, heights, num, serial);
    const auto b = sweep::sweep_height(base, heights, num, pooled);
    CHECK(a.f_p == b.f_p);
    CHECK(a.parameter == b.parameter);
    CHECK(a.wavelength_nm == b.wavelength_nm);
}

TEST_CASE("tolerance sweep validates geometry per row") {
    scene::SceneSpec base;  // height 1375, diameter 420
    fdtd::Numerics num;
    sweep::SweepOptions opt;
    opt.runner = [](const scene::SceneSpec& s, const fdtd::Numerics&,
                    const std::vector<double>& w) {
        sweep::RowResult r;
        for (double lam : w)
            r.f_p.push_back(0.5 + 4.0 * lorentz(lam - 900.0, 3.0) /
                                      (1.0 + 0.01 * s.crown_height_nm +
                                       0.02 * std::abs(s.dipole_lateral_offset_nm)));
        return r;
    };

    const auto crown = sweep::tolerance_sweep(base, sweep::ToleranceAxis::CrownHeight,
                                              {0.0, 50.0, 1500.0}, num, opt);
    CHECK(crown.parameter_name == "crown_height_nm");
    CHECK_FALSE(crown.rows[0].failed);
    CHECK_FALSE(crown.rows[1].failed);
    CHECK(crown.rows[2].failed);
    CHECK(crown.rows[2].message.find("crown") != std::string::npos);

    // The identity perturbation reproduces the base run.
    const auto direct = opt.runner(base, num, crown.wavelength_nm);
    for (std::size_t c = 0; c < crown.wavelength_nm.size(); ++c)
        CHECK(crown.at(0, c) == direct.f_p[c]);

    const auto off = sweep::tolerance_sweep(base, sweep::ToleranceAxis::LateralOffset,
                                            {0.0, 100.0, 250.0}, num, opt);
    CHECK(off.parameter_name == "lateral_offset_nm");
    CHECK_FALSE(off.rows[1].failed);
    CHECK(off.rows[2].failed);
    CHECK(off.rows[2].message.find("wire") != std::string::npos);
}

TEST_CASE("scale sweep fits the peak line and flags band-edge samples") {
    scene::SceneSpec base;  // band 900 +- 50
    fdtd::Numerics num;
    sweep::SweepOptions opt;
    opt.runner = [](const scene::SceneSpec& s, const fdtd::Numerics&,
                    const std::vector<double>& w) {
        // Fake peak exactly on a known line against the applied scale factor.
        const double scale = s.height_nm / 1375.0;
        const double center = 880.0 * scale + 20.0;
        sweep::RowResult r;
        for (double lam : w) r.f_p.push_back(0.2 + 5.0 * lorentz(lam - center, 3.0));
        return r;
    };

    const auto res = sweep::sweep_scale(base, {0.96, 0.98, 1.0, 1.02, 1.04, 1.2}, num, opt);
    CHECK(res.map.parameter_name == "scale_factor");
    REQUIRE(res.fit.excluded_scale.size() == 1);  // 1.2 pushes the peak off band
    CHECK(res.fit.excluded_scale[0] == 1.2);
    CHECK(res.fit.scale.size() == 5);
    CHECK(res.fit.slope_nm == doctest::Approx(880.0).epsilon(1e-3));
    // Vertex interpolation on the 0.5 nm grid leaves ~0.01 nm peak bias; the
    // short scale lever arm amplifies that into the intercept.
    CHECK(res.fit.intercept_nm == doctest::Approx(20.0).epsilon(5e-3));
    CHECK(res.fit.residual_rms_nm < 0.05);

    // The scene handed to the runner really is scaled in D and H.
    sweep::SweepOptions probe;
    std::vector<double> seen_d, seen_h, seen_c;
    probe.runner = [&](const scene::SceneSpec& s, const fdtd::Numerics&,
                       const std::vector<double>& w) {
        seen_d.push_back(s.diameter_nm);
        seen_h.push_back(s.height_nm);
        seen_c.push_back(s.crown_height_nm);
        sweep::RowResult r;
        for (double lam : w) r.f_p.push_back(1.0 + lorentz(lam - 900.0, 3.0));
        return r;
    };
    scene::SceneSpec crowned = base;
    crowned.crown_height_nm = 100.0;
    (void)sweep::sweep_scale(crowned, {0.9, 1.1}, num, probe);
    REQUIRE(seen_d.size() == 2);
    CHECK(seen_d[0] == doctest::Approx(0.9 * 420.0));
    CHECK(seen_h[0] == doctest::Approx(0.9 * 1375.0));
    CHECK(seen_c[0] == doctest::Approx(0.9 * 100.0));
    CHECK(seen_d[1] == doctest::Approx(1.1 * 420.0));
}
