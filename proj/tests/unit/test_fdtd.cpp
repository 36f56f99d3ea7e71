#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <cstdio>
#include <fstream>

#include "nwcav/fdtd/fdtd.hpp"
#include "nwcav/units.hpp"

using namespace nwcav;
using fdtd::Boundary;

namespace {

fdtd::Numerics test_numerics(double resolution_nm = 10.0) {
    fdtd::Numerics num;
    num.resolution_nm = resolution_nm;
    return num;
}

std::complex<double> probe_phasor(const fdtd::MonitorResult& mon, std::size_t lam) {
    // SingleCell monitors carry one face with one cell; e1 is Ex.
    return mon.faces.at(0).e1.at(lam);
}

}  // namespace

TEST_CASE("stable time step scales with cell size and rejects bad input") {
    const double dt10 = fdtd::stable_dt(10.0, 0.99);
    CHECK(dt10 == doctest::Approx(1.9065856e-17).epsilon(1e-6));
    CHECK(fdtd::stable_dt(20.0, 0.99) == doctest::Approx(2.0 * dt10).epsilon(1e-15));
    CHECK(fdtd::stable_dt(10.0, 0.5) == doctest::Approx(dt10 * 0.5 / 0.99).epsilon(1e-15));
    CHECK_THROWS(fdtd::stable_dt(0.0, 0.99));
    CHECK_THROWS(fdtd::stable_dt(10.0, 0.0));
    CHECK_THROWS(fdtd::stable_dt(10.0, 1.5));
}

TEST_CASE("pulse keeps the analysis band inside its spectrum") {
    const auto p = fdtd::Pulse::for_band(900.0, 50.0);
    CHECK(p.t0_s == doctest::Approx(6.5 * p.tau_s));
    // Band-edge spectral weight stays above the 1% deconvolution floor.
    const double w_hi = omega_of_wavelength(850.0 * nm);
    const double w_lo = omega_of_wavelength(950.0 * nm);
    CHECK(p.spectrum_rel(w_hi) > 1e-2);
    CHECK(p.spectrum_rel(w_lo) > 1e-2);
    CHECK(p.spectrum_rel(p.omega0) == doctest::Approx(1.0));
    // Envelope peaks at t0 on the carrier crest.
    CHECK(p.current(p.t0_s) == doctest::Approx(p.amplitude));
    CHECK(std::abs(p.current(p.t0_s + 6.5 * p.tau_s)) < 1e-8 * p.amplitude);
    CHECK_THROWS(fdtd::Pulse::for_band(900.0, 0.0));
    CHECK_THROWS(fdtd::Pulse::for_band(900.0, 900.0));
}

TEST_CASE("empty grid with no sources stays identically zero") {
    const auto grid = fdtd::air_grid({-200, -200, -200}, {200, 200, 200}, 20.0);
    auto num = test_numerics(20.0);
    num.absorber_layers = 6;
    fdtd::Simulation sim(grid, {}, num, {});
    for (int s = 0; s < 50; ++s) sim.step();
    for (int c = 0; c < 6; ++c)
        for (double v : sim.field(c)) CHECK(v == 0.0);
    CHECK(sim.interior_energy_j() == 0.0);
}

TEST_CASE("plane wave propagates at the discrete phase velocity") {
    // One-dimensional column: conductor x-walls and magnetic-mirror y-walls
    // support a uniform Ex / Hy wave travelling in z.
    const auto grid = fdtd::air_grid({0, 0, 0}, {40, 40, 4000}, 10.0);
    auto num = test_numerics();
    num.boundary = {{{Boundary::Pec, Boundary::Pec},
                     {Boundary::Pmc, Boundary::Pmc},
                     {Boundary::Cpml, Boundary::Cpml}}};
    num.max_steps = 4000;
    num.decay_threshold = 1e-8;

    const double lambda_nm = 200.0;  // 20 cells per wavelength
    fdtd::CurrentSource sheet;
    sheet.component = 0;
    sheet.pulse = fdtd::Pulse::for_band(lambda_nm, 20.0);
    const int ksrc = 60;
    for (int j = 0; j <= grid.layout.ny; ++j)
        for (int i = 0; i < grid.layout.nx; ++i)
            sheet.taps.push_back({grid.layout.node_id(i, j, ksrc), 1.0});

    fdtd::MonitorSpec pa, pb;
    pa.geometry = fdtd::MonitorSpec::Geometry::SingleCell;
    pa.name = "a";
    pa.min_nm = pa.max_nm = {25, 25, 2500};
    pa.wavelengths_nm = {lambda_nm};
    pb = pa;
    pb.name = "b";
    pb.min_nm = pb.max_nm = {25, 25, 2550};

    const auto res = fdtd::run_on_grid(grid, {sheet}, num, {pa, pb});
    CHECK(res.termination == "decayed");
    CHECK_FALSE(res.under_resolved);

    const auto ea = probe_phasor(res.monitor("a"), 0);
    const auto eb = probe_phasor(res.monitor("b"), 0);
    CHECK(std::abs(ea) > 0.0);
    const double dphi = std::arg(eb * std::conj(ea));  // +k dz for an outgoing wave
    CHECK(dphi > 0.0);
    const double k_meas = dphi / (50.0 * nm);
    const double omega = omega_of_wavelength(lambda_nm * nm);
    const double v_meas = omega / k_meas / c0;

    // Independent prediction from the Yee dispersion relation
    // sin(k dx/2) = (dx / (c dt)) sin(w dt/2).
    const double dx = 10.0 * nm;
    const double dt = fdtd::stable_dt(10.0, 0.99);
    const double k_pred = 2.0 / dx * std::asin(dx / (c0 * dt) * std::sin(0.5 * omega * dt));
    const double v_pred = omega / k_pred / c0;
    CHECK(v_pred == doctest::Approx(0.997204).epsilon(2e-5));
    CHECK(v_meas == doctest::Approx(v_pred).epsilon(2e-3));
    CHECK(std::abs(v_meas - 1.0) < 0.005);
}

TEST_CASE("field energy drains monotonically with no source present") {
    const auto grid = fdtd::air_grid({-250, -250, -250}, {250, 250, 250}, 10.0);
    auto num = test_numerics();
    fdtd::Simulation sim(grid, {}, num, {});
    // Initial condition: E = the solver's own discrete curl of a potential on
    // the Hz face lattice. div o curl vanishes identically on the staggered
    // mesh, so the blob carries no charge and leaves no static remnant.
    const auto& L = grid.layout;
    auto psi = [&](int i, int j, int k) {
        const double x = L.x_node(i) + 5.0, y = L.y_node(j) + 5.0, z = L.z_node(k);
        return std::exp(-(x * x + y * y + z * z) / (2.0 * 25.0 * 25.0));
    };
    auto& ex = sim.field_mut(0);
    auto& ey = sim.field_mut(1);
    for (int k = 14; k <= L.nz - 14; ++k)
        for (int j = 14; j <= L.ny - 14; ++j)
            for (int i = 14; i <= L.nx - 14; ++i) {
                const auto id = static_cast<std::size_t>(L.node_id(i, j, k));
                ex[id] = psi(i, j, k) - psi(i, j - 1, k);
                ey[id] = -(psi(i, j, k) - psi(i - 1, j, k));
            }
    const double u0 = sim.interior_energy_j();
    CHECK(u0 > 0.0);
    // Monotone drain down to a deep floor, then bounded there: the tiny
    // remnant that survives in the absorber wanders at the rounding floor
    // (~1e-10 of u0) without ever growing back. The first block is excluded:
    // starting from pure E, the integer-step energy functional wobbles by
    // O(w dt) until the staggered H catches up.
    for (int s = 0; s < 10; ++s) sim.step();
    double prev = sim.interior_energy_j();
    bool reached_floor = false;
    for (int block = 0; block < 120; ++block) {
        for (int s = 0; s < 10; ++s) sim.step();
        const double u = sim.interior_energy_j();
        if (!reached_floor && u < 1e-7 * u0) reached_floor = true;
        if (reached_floor)
            CHECK(u < 1e-7 * u0);
        else
            CHECK(u <= prev * (1.0 + 1e-9));
        prev = u;
    }
    CHECK(reached_floor);
    CHECK(prev < 1e-7 * u0);
}

TEST_CASE("monitors and flux scale exactly with source amplitude") {
    const auto grid = fdtd::air_grid({-200, -200, -200}, {200, 200, 200}, 10.0);
    auto num = test_numerics();
    num.max_steps = 600;  // fixed-length runs keep the comparison exact
    num.decay_threshold = 1e-30;
    const auto box = fdtd::total_power_monitor({0, 0, 0}, 40.0, {880.0, 900.0});

    auto run_amp = [&](double amp) {
        const auto pulse = fdtd::Pulse::for_band(900.0, 50.0, amp);
        auto sources = fdtd::make_dipole_sources(grid.layout, {0, 0, 0}, {1, 0, 0}, pulse);
        return fdtd::run_on_grid(grid, std::move(sources), num, {box});
    };
    const auto r1 = run_amp(1.0);
    const auto r2 = run_amp(2.5);
    CHECK(r1.steps == r2.steps);
    const auto& m1 = r1.monitor("total_power");
    const auto& m2 = r2.monitor("total_power");
    for (std::size_t l = 0; l < 2; ++l) {
        CHECK(std::abs(m2.source_current[l] - 2.5 * m1.source_current[l]) <=
              1e-12 * std::abs(m1.source_current[l]) * 2.5);
        CHECK(m2.power_w[l] == doctest::Approx(6.25 * m1.power_w[l]).epsilon(1e-12));
    }
    for (std::size_t fidx = 0; fidx < m1.faces.size(); ++fidx) {
        const auto& f1 = m1.faces[fidx];
        const auto& f2 = m2.faces[fidx];
        double worst = 0.0;
        for (std::size_t i = 0; i < f1.e1.size(); ++i) {
            const double ref = std::abs(f1.e1[i]) + 1e-300;
            worst = std::max(worst, std::abs(f2.e1[i] - 2.5 * f1.e1[i]) / (2.5 * ref));
        }
        CHECK(worst < 1e-12);
    }
}

TEST_CASE("radiated spectrum of a free dipole matches the analytic radiation rate") {
    // P(w)/|p(w)|^2 for a point current moment in vacuum is eta0 w^2/(12 pi c^2).
    const auto grid = fdtd::air_grid({-250, -250, -250}, {250, 250, 250}, 10.0);
    auto num = test_numerics();
    num.decay_threshold = 1e-7;
    num.max_steps = 20000;
    const std::vector<double> lams = {850, 875, 900, 925, 950};
    const auto box = fdtd::total_power_monitor({0, 0, 0}, 60.0, lams);
    const auto pulse = fdtd::Pulse::for_band(900.0, 50.0);
    auto sources = fdtd::make_dipole_sources(grid.layout, {0, 0, 0}, {1, 0, 0}, pulse);
    const auto res = fdtd::run_on_grid(grid, std::move(sources), num, {box});
    CHECK(res.termination == "decayed");
    const auto& mon = res.monitor("total_power");
    for (std::size_t l = 0; l < lams.size(); ++l) {
        const double w = omega_of_wavelength(lams[l] * nm);
        const double p_pred =
            eta0 * w * w / (12.0 * pi * c0 * c0) * std::norm(mon.source_current[l]);
        CHECK(mon.power_w[l] == doctest::Approx(p_pred).epsilon(0.05));
    }
}

TEST_CASE("time-integrated box flux balances the work done by the source") {
    const auto grid = fdtd::air_grid({-250, -250, -250}, {250, 250, 250}, 10.0);
    auto num = test_numerics();
    num.decay_threshold = 1e-7;
    num.max_steps = 20000;
    auto box = fdtd::total_power_monitor({0, 0, 0}, 60.0, {900.0});
    box.accumulate_time_flux = true;
    const auto pulse = fdtd::Pulse::for_band(900.0, 50.0);
    auto sources = fdtd::make_dipole_sources(grid.layout, {0, 0, 0}, {1, 0, 0}, pulse);
    const auto res = fdtd::run_on_grid(grid, std::move(sources), num, {box});
    CHECK(res.termination == "decayed");
    const double flux = res.monitor("total_power").time_integrated_flux_j;
    CHECK(res.source_work_j > 0.0);
    CHECK(flux == doctest::Approx(res.source_work_j).epsilon(0.02));
}

TEST_CASE("transfer between two points is reciprocal") {
    auto grid = fdtd::air_grid({-200, -200, -200}, {200, 200, 200}, 10.0);
    // Asymmetric dielectric block painted onto the edge grid, biased toward B.
    const double eps_block = 2.25;
    for (int c = 0; c < 3; ++c)
        for (int k = 0; k <= grid.layout.nz; ++k)
            for (int j = 0; j <= grid.layout.ny; ++j)
                for (int i = 0; i <= grid.layout.nx; ++i) {
                    double x = grid.layout.x_node(i) + (c == 0 ? 5.0 : 0.0);
                    double y = grid.layout.y_node(j) + (c == 1 ? 5.0 : 0.0);
                    double z = grid.layout.z_node(k) + (c == 2 ? 5.0 : 0.0);
                    if (x >= 30 && x <= 80 && std::abs(y) <= 50 && std::abs(z) <= 50)
                        grid.edge_eps_rel[c][static_cast<std::size_t>(
                            grid.layout.node_id(i, j, k))] = eps_block;
                }
    auto num = test_numerics();
    const auto pulse = fdtd::Pulse::for_band(900.0, 100.0);
    const long long edge_a = grid.layout.node_id(9, 20, 20);   // Ex edge at (-105, 0, 0)
    const long long edge_b = grid.layout.node_id(30, 20, 20);  // Ex edge at (+105, 0, 0)
    const double omega = omega_of_wavelength(900.0 * nm);

    auto transfer = [&](long long src_edge, long long obs_edge) {
        fdtd::CurrentSource cs;
        cs.component = 0;
        cs.pulse = pulse;
        cs.taps = {{src_edge, 1.0}};
        fdtd::Simulation sim(grid, {cs}, num, {});
        std::complex<double> acc = 0.0;
        for (int s = 0; s < 1500; ++s) {
            sim.step();
            const double t = sim.time_s();
            acc += sim.field(0)[static_cast<std::size_t>(obs_edge)] *
                   std::complex<double>(std::cos(omega * t), std::sin(omega * t));
        }
        return acc;
    };
    const auto t_ab = transfer(edge_a, edge_b);
    const auto t_ba = transfer(edge_b, edge_a);
    CHECK(std::abs(t_ab) > 0.0);
    CHECK(std::abs(t_ab - t_ba) / std::abs(t_ab) < 0.01);
}

TEST_CASE("checkpointed run resumes bit-identically") {
    const auto grid = fdtd::air_grid({-200, -200, -200}, {200, 200, 200}, 10.0);
    auto num = test_numerics();
    const auto box = fdtd::total_power_monitor({0, 0, 0}, 40.0, {900.0});
    const auto pulse = fdtd::Pulse::for_band(900.0, 50.0);
    const auto sources = fdtd::make_dipole_sources(grid.layout, {0, 0, 0}, {1, 0, 0}, pulse);
    const std::string ck = "test_fdtd_checkpoint.bin";

    fdtd::Simulation straight(grid, sources, num, {box});
    fdtd::Simulation first(grid, sources, num, {box});
    for (int s = 0; s < 400; ++s) straight.step();
    for (int s = 0; s < 200; ++s) first.step();
    first.save_checkpoint(ck);

    fdtd::Simulation resumed(grid, sources, num, {box});
    resumed.load_checkpoint(ck);
    CHECK(resumed.step_index() == 200);
    for (int s = 0; s < 200; ++s) resumed.step();

    for (int c = 0; c < 6; ++c) {
        const auto& fa = straight.field(c);
        const auto& fb = resumed.field(c);
        REQUIRE(fa.size() == fb.size());
        long long mismatches = 0;
        for (std::size_t i = 0; i < fa.size(); ++i)
            if (fa[i] != fb[i]) ++mismatches;
        CHECK(mismatches == 0);
    }
    const auto ra = straight.finish("decayed", false);
    const auto rb = resumed.finish("decayed", false);
    const auto& ma = ra.monitor("total_power").faces;
    const auto& mb = rb.monitor("total_power").faces;
    for (std::size_t fidx = 0; fidx < ma.size(); ++fidx)
        for (std::size_t i = 0; i < ma[fidx].e1.size(); ++i) {
            CHECK(ma[fidx].e1[i] == mb[fidx].e1[i]);
            CHECK(ma[fidx].h2[i] == mb[fidx].h2[i]);
        }
    std::remove(ck.c_str());
}

TEST_CASE("checkpoints from a different setup are rejected") {
    const auto grid = fdtd::air_grid({-200, -200, -200}, {200, 200, 200}, 10.0);
    auto num = test_numerics();
    const auto pulse = fdtd::Pulse::for_band(900.0, 50.0);
    const auto sources = fdtd::make_dipole_sources(grid.layout, {0, 0, 0}, {1, 0, 0}, pulse);
    const std::string ck = "test_fdtd_reject.bin";

    fdtd::Simulation sim(grid, sources, num, {});
    for (int s = 0; s < 10; ++s) sim.step();
    sim.save_checkpoint(ck);

    SUBCASE("different resolution") {
        const auto grid2 = fdtd::air_grid({-200, -200, -200}, {200, 200, 200}, 20.0);
        auto num2 = test_numerics(20.0);
        num2.absorber_layers = 6;
        const auto sources2 =
            fdtd::make_dipole_sources(grid2.layout, {0, 0, 0}, {1, 0, 0}, pulse);
        fdtd::Simulation other(grid2, sources2, num2, {});
        CHECK_THROWS_WITH_AS(other.load_checkpoint(ck),
                             doctest::Contains("does not match"), std::runtime_error);
    }
    SUBCASE("different source placement") {
        const auto sources2 =
            fdtd::make_dipole_sources(grid.layout, {10, 0, 0}, {1, 0, 0}, pulse);
        fdtd::Simulation other(grid, sources2, num, {});
        CHECK_THROWS_WITH_AS(other.load_checkpoint(ck),
                             doctest::Contains("different scene"), std::runtime_error);
    }
    SUBCASE("corrupt header") {
        std::ofstream bad("test_fdtd_corrupt.bin", std::ios::binary);
        bad << "not a checkpoint at all";
        bad.close();
        fdtd::Simulation other(grid, sources, num, {});
        CHECK_THROWS_AS(other.load_checkpoint("test_fdtd_corrupt.bin"), std::runtime_error);
        std::remove("test_fdtd_corrupt.bin");
    }
    std::remove(ck.c_str());
}

TEST_CASE("monitors must stay out of the absorbing shell") {
    const auto grid = fdtd::air_grid({-200, -200, -200}, {200, 200, 200}, 10.0);
    auto num = test_numerics();
    auto box = fdtd::total_power_monitor({0, 0, 0}, 150.0, {900.0});  // reaches layer 5
    CHECK_THROWS_WITH_AS(fdtd::Simulation(grid, {}, num, {box}),
                         doctest::Contains("absorbing"), std::invalid_argument);
    auto ok = fdtd::total_power_monitor({0, 0, 0}, 60.0, {900.0});
    CHECK_NOTHROW(fdtd::Simulation(grid, {}, num, {ok}));
}

TEST_CASE("dipoles cannot sit inside the absorbing shell") {
    const auto grid = fdtd::air_grid({-200, -200, -200}, {200, 200, 200}, 10.0);
    const auto pulse = fdtd::Pulse::for_band(900.0, 50.0);
    CHECK_THROWS(fdtd::make_dipole_sources(grid.layout, {0, 0, -195}, {1, 0, 0}, pulse));
    CHECK_THROWS(fdtd::make_dipole_sources(grid.layout, {0, 0, 0}, {0, 0, 0}, pulse));
    CHECK_NOTHROW(fdtd::make_dipole_sources(grid.layout, {0, 0, 0}, {1, 0, 1}, pulse));
}

TEST_CASE("a decay threshold of one flags the run as under-resolved") {
    const auto grid = fdtd::air_grid({-200, -200, -200}, {200, 200, 200}, 20.0);
    auto num = test_numerics(20.0);
    num.absorber_layers = 6;
    num.decay_threshold = 1.0;
    const auto pulse = fdtd::Pulse::for_band(900.0, 150.0);
    auto sources = fdtd::make_dipole_sources(grid.layout, {0, 0, 0}, {1, 0, 0}, pulse);
    const auto res = fdtd::run_on_grid(grid, std::move(sources), num, {});
    CHECK(res.termination == "decayed");
    CHECK(res.under_resolved);
    // Terminates at the first energy check past the end of the pulse.
    const double t_end = pulse.end_time_s();
    CHECK(res.steps * res.dt_s <= t_end + 2.0 * num.energy_stride * res.dt_s);
}

TEST_CASE("hitting the step limit marks the run under-resolved") {
    const auto grid = fdtd::air_grid({-200, -200, -200}, {200, 200, 200}, 20.0);
    auto num = test_numerics(20.0);
    num.absorber_layers = 6;
    num.max_steps = 50;
    num.decay_threshold = 1e-12;
    const auto pulse = fdtd::Pulse::for_band(900.0, 50.0);
    auto sources = fdtd::make_dipole_sources(grid.layout, {0, 0, 0}, {1, 0, 0}, pulse);
    const auto res = fdtd::run_on_grid(grid, std::move(sources), num, {});
    CHECK(res.termination == "max_steps");
    CHECK(res.under_resolved);
    CHECK(res.steps == 50);
}

TEST_CASE("normal-incidence reflection off the fitted metal matches Fresnel") {
    const auto table =
        scene::read_material_table(std::string(NWCAV_DATA_DIR) + "/gold_jc1972.tsv");
    const auto gold = scene::fit_metal_poles(table, {850.0, 950.0}, 3, "gold");
    const double lam = 900.0;

    // 1D column: conductor x-walls, magnetic-mirror y-walls, metal half-space
    // below z = 0. The plane monitor sits between the source sheet and the
    // interface, so its net flux is (R - 1) * P_incident.
    auto net_flux = [&](bool with_metal) {
        auto grid = fdtd::air_grid({0, 0, -800}, {40, 40, 800}, 10.0);
        const auto& L = grid.layout;
        if (with_metal) {
            grid.materials.push_back(gold);
            for (int c = 0; c < 3; ++c)
                for (int k = 0; k <= L.nz; ++k) {
                    if (L.z_node(k) + (c == 2 ? 5.0 : 0.0) >= -0.5) continue;
                    for (int j = 0; j <= L.ny; ++j)
                        for (int i = 0; i <= L.nx; ++i) {
                            const auto id = static_cast<std::size_t>(L.node_id(i, j, k));
                            grid.edge_material[c][id] = 1;
                            grid.edge_eps_rel[c][id] = gold.epsilon_infinity;
                        }
                }
            for (int k = 0; k < L.nz && L.z_node(k) + 5.0 < 0.0; ++k)
                for (int j = 0; j < L.ny; ++j)
                    for (int i = 0; i < L.nx; ++i)
                        grid.cell_material[static_cast<std::size_t>(L.cell_id(i, j, k))] = 1;
        }
        auto num = test_numerics();
        num.boundary = {{{Boundary::Pec, Boundary::Pec},
                         {Boundary::Pmc, Boundary::Pmc},
                         {Boundary::Cpml, Boundary::Cpml}}};
        num.max_steps = 20000;
        num.decay_threshold = 1e-6;
        fdtd::CurrentSource sheet;
        sheet.component = 0;
        sheet.pulse = fdtd::Pulse::for_band(900.0, 50.0);
        const int ksrc = 120;  // z = +400
        for (int j = 0; j <= L.ny; ++j)
            for (int i = 0; i < L.nx; ++i)
                sheet.taps.push_back({L.node_id(i, j, ksrc), 1.0});
        fdtd::MonitorSpec plane;
        plane.geometry = fdtd::MonitorSpec::Geometry::Plane;
        plane.name = "between";
        plane.min_nm = {10, 10, 200};
        plane.max_nm = {30, 30, 200};
        plane.wavelengths_nm = {lam};
        const auto res = fdtd::run_on_grid(grid, {sheet}, num, {plane});
        CHECK(res.termination == "decayed");
        return res.monitor("between").power_w.at(0);
    };

    const double phi_metal = net_flux(true);
    const double phi_vac = net_flux(false);
    CHECK(phi_vac < 0.0);  // incident wave travels downward through the plane
    const double r_meas = 1.0 - phi_metal / phi_vac;

    const auto nhat = std::sqrt(scene::permittivity_at(gold, lam));
    const double r_fresnel = std::norm((1.0 - nhat) / (1.0 + nhat));
    CHECK(r_fresnel > 0.9);
    CHECK(std::abs(r_meas - r_fresnel) < 0.03);
}

TEST_CASE("fields of a centered dipole keep the scene's mirror symmetries") {
    scene::SceneSpec spec;
    spec.diameter_nm = 240;
    spec.height_nm = 300;
    spec.crown_height_nm = 0;
    spec.mirror_enabled = false;
    spec.dipole_offset_from_top_nm = 30;
    spec.dipole_lateral_offset_nm = 0;

    fdtd::Numerics num;
    num.resolution_nm = 20.0;
    num.absorber_layers = 8;
    num.max_steps = 400;  // symmetry holds at any step count
    num.decay_threshold = 1e-30;

    fdtd::MonitorSpec plane;
    plane.geometry = fdtd::MonitorSpec::Geometry::Plane;
    plane.name = "above";
    plane.min_nm = {-160, -160, 340};
    plane.max_nm = {160, 160, 340};
    plane.wavelengths_nm = {900.0};

    const auto res = fdtd::run(spec, num, {plane}, std::nullopt, 250.0);
    const auto& face = res.monitor("above").faces.at(0);
    const int na = face.a1 - face.a0, nb = face.b1 - face.b0;
    REQUIRE(na > 2);
    // The lateral domain is centered on the axis, so cell p mirrors to
    // na-1-p. |Ex| is even under both in-plane mirrors for an x dipole;
    // |Ey| flips sign only, leaving its magnitude symmetric too.
    double emax = 0.0;
    for (const auto& v : face.e1) emax = std::max(emax, std::abs(v));
    CHECK(emax > 0.0);
    auto at = [&](const std::vector<std::complex<double>>& f, int p, int q) {
        return f[static_cast<std::size_t>(q) * na + p];
    };
    double worst = 0.0;
    for (int q = 0; q < nb; ++q)
        for (int p = 0; p < na; ++p) {
            const double x1 = std::abs(at(face.e1, p, q));
            worst = std::max(worst, std::abs(x1 - std::abs(at(face.e1, na - 1 - p, q))));
            worst = std::max(worst, std::abs(x1 - std::abs(at(face.e1, p, nb - 1 - q))));
            const double y1 = std::abs(at(face.e2, p, q));
            worst = std::max(worst, std::abs(y1 - std::abs(at(face.e2, na - 1 - p, q))));
            worst = std::max(worst, std::abs(y1 - std::abs(at(face.e2, p, nb - 1 - q))));
        }
    CHECK(worst < 1e-12 * emax);
}

TEST_CASE("unknown monitor names fail loudly") {
    const auto grid = fdtd::air_grid({-100, -100, -100}, {100, 100, 100}, 20.0);
    auto num = test_numerics(20.0);
    num.max_steps = 5;
    num.absorber_layers = 2;
    const auto res = fdtd::run_on_grid(grid, {}, num, {});
    CHECK_THROWS_AS(res.monitor("nope"), std::out_of_range);
}
