#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "nwcav/scene/scene.hpp"
#include "nwcav/units.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <fstream>
#include <map>
#include <vector>

using namespace nwcav;
using scene::Band;
using scene::MaterialGrid;
using scene::MaterialKind;
using scene::MaterialModel;
using scene::MaterialSample;
using scene::SceneSpec;

namespace {

SceneSpec paper_scene() {
    SceneSpec s;
    s.diameter_nm = 420.0;
    s.height_nm = 1375.0;
    s.crown_height_nm = 0.0;
    s.oxide_thickness_nm = 12.0;
    s.mirror_enabled = true;
    s.dipole_offset_from_top_nm = 30.0;
    return s;
}

double hex_area(double diameter_nm) {
    const double s = 0.5 * diameter_nm;
    return 1.5 * std::sqrt(3.0) * s * s;
}

// Wire cells per z-layer, indexed by k.
std::map<int, long long> wire_layer_counts(const MaterialGrid& g) {
    const int wire = g.material_index("nanowire");
    std::map<int, long long> counts;
    for (int k = 0; k < g.layout.nz; ++k) {
        long long n = 0;
        for (int j = 0; j < g.layout.ny; ++j)
            for (int i = 0; i < g.layout.nx; ++i)
                if (g.cell_material[g.layout.cell_id(i, j, k)] == wire) ++n;
        if (n > 0) counts[k] = n;
    }
    return counts;
}

}  // namespace

TEST_CASE("hexagon containment: vertices, flats, symmetry") {
    const double s = 210.0;
    const double apothem = 0.5 * std::sqrt(3.0) * s;
    CHECK(scene::inside_hexagon(0.0, 0.0, s));
    CHECK(scene::inside_hexagon(s, 0.0, s));          // vertex on +x
    CHECK(scene::inside_hexagon(-s, 0.0, s));
    CHECK(!scene::inside_hexagon(s + 1e-9, 0.0, s));
    CHECK(scene::inside_hexagon(0.0, apothem, s));    // flat on +y
    CHECK(!scene::inside_hexagon(0.0, apothem + 1e-9, s));
    CHECK(!scene::inside_hexagon(s * 0.9, apothem * 0.9, s));
    for (double x : {13.7, 180.0, 209.0})
        for (double y : {2.5, 97.0}) {
            CHECK(scene::inside_hexagon(x, y, s) == scene::inside_hexagon(-x, y, s));
            CHECK(scene::inside_hexagon(x, y, s) == scene::inside_hexagon(x, -y, s));
        }
}

TEST_CASE("nanowire cell count matches the analytic hexagonal prism volume") {
    const MaterialGrid g = scene::rasterize(paper_scene(), 10.0, 120.0);
    const double analytic_cells = hex_area(420.0) * 1375.0 / 1000.0;
    const double got = static_cast<double>(g.count_cells("nanowire"));
    CHECK(std::fabs(got - analytic_cells) / analytic_cells < 0.02);
    for (std::uint8_t m : g.cell_material) CHECK_UNARY(m < g.materials.size());
}

TEST_CASE("flat top: every wire layer carries the full hexagon footprint") {
    const auto counts = wire_layer_counts(scene::rasterize(paper_scene(), 10.0, 120.0));
    REQUIRE(!counts.empty());
    const long long footprint = counts.begin()->second;
    int prev_k = counts.begin()->first - 1;
    for (const auto& [k, n] : counts) {
        CHECK(n == footprint);
        CHECK(k == prev_k + 1);  // contiguous layers
        prev_k = k;
    }
    CHECK(counts.size() == 138);  // wire spans z in [12, 1387) on a 10 nm grid
}

TEST_CASE("suspended wire has no gold and no oxide") {
    SceneSpec s = paper_scene();
    s.mirror_enabled = false;
    const MaterialGrid g = scene::rasterize(s, 10.0, 120.0);
    CHECK(g.count_cells("gold") == 0);
    CHECK(g.count_cells("oxide") == 0);
    CHECK(g.material_index("gold") == -1);
    CHECK(g.material_index("oxide") == -1);
    const double analytic_cells = hex_area(420.0) * 1375.0 / 1000.0;
    const double got = static_cast<double>(g.count_cells("nanowire"));
    CHECK(std::fabs(got - analytic_cells) / analytic_cells < 0.02);
    // The half-space under the wire is plain air: every material id stays in
    // range and every edge permittivity is a physical value >= 1.
    for (std::uint8_t id : g.cell_material) CHECK(id < g.materials.size());
    for (int c = 0; c < 3; ++c) {
        double emin = 1e300;
        for (std::uint8_t id : g.edge_material[c]) CHECK(id < g.materials.size());
        for (double e : g.edge_eps_rel[c]) emin = std::min(emin, e);
        CHECK(emin >= 1.0);
    }
    const auto& L = g.layout;
    long long below = 0;
    for (int k = 0; L.z_node(k) + 5.0 < 0.0; ++k)
        for (int j = 0; j < L.ny; ++j)
            for (int i = 0; i < L.nx; ++i)
                below += g.cell_material[static_cast<std::size_t>(L.cell_id(i, j, k))];
    CHECK(below == 0);  // all air below the base
}

TEST_CASE("crown tapers the footprint monotonically and matches pyramid volume") {
    SceneSpec s = paper_scene();
    s.crown_height_nm = 300.0;
    const MaterialGrid g = scene::rasterize(s, 10.0, 120.0);
    const auto counts = wire_layer_counts(g);
    REQUIRE(!counts.empty());
    long long prev = counts.begin()->second;
    for (const auto& [k, n] : counts) {
        CHECK(n <= prev + 0);  // nested cross-sections never grow with z
        prev = n;
    }
    const double analytic_cells =
        hex_area(420.0) * (1075.0 + 300.0 / 3.0) / 1000.0;
    const double got = static_cast<double>(g.count_cells("nanowire"));
    CHECK(std::fabs(got - analytic_cells) / analytic_cells < 0.025);
}

TEST_CASE("rasterization is deterministic") {
    SceneSpec s = paper_scene();
    s.crown_height_nm = 120.0;
    const MaterialGrid a = scene::rasterize(s, 10.0, 60.0);
    const MaterialGrid b = scene::rasterize(s, 10.0, 60.0);
    CHECK(a.cell_material == b.cell_material);
    for (int c = 0; c < 3; ++c) {
        CHECK(a.edge_eps_rel[c] == b.edge_eps_rel[c]);
        CHECK(a.edge_material[c] == b.edge_material[c]);
    }
}

TEST_CASE("on-axis scene is mirror-symmetric in x and y") {
    const MaterialGrid g = scene::rasterize(paper_scene(), 10.0, 60.0);
    const int nx = g.layout.nx, ny = g.layout.ny, nz = g.layout.nz;
    long long cell_mismatch = 0, ez_mismatch = 0, ex_mismatch = 0;
    for (int k = 0; k < nz; ++k)
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < nx; ++i) {
                const std::uint8_t m = g.cell_material[g.layout.cell_id(i, j, k)];
                if (m != g.cell_material[g.layout.cell_id(nx - 1 - i, j, k)]) ++cell_mismatch;
                if (m != g.cell_material[g.layout.cell_id(i, ny - 1 - j, k)]) ++cell_mismatch;
            }
    // Ez edges sit on lateral nodes: reflection maps node i -> nx - i.
    for (int k = 0; k < nz; ++k)
        for (int j = 0; j <= ny; ++j)
            for (int i = 0; i <= nx; ++i) {
                const double e = g.edge_eps_rel[2][g.layout.node_id(i, j, k)];
                if (e != g.edge_eps_rel[2][g.layout.node_id(nx - i, j, k)]) ++ez_mismatch;
                if (e != g.edge_eps_rel[2][g.layout.node_id(i, ny - j, k)]) ++ez_mismatch;
            }
    // Ex edges are offset half a cell in x: reflection maps i -> nx - 1 - i.
    for (int k = 0; k <= nz; ++k)
        for (int j = 0; j <= ny; ++j)
            for (int i = 0; i < nx; ++i) {
                const double e = g.edge_eps_rel[0][g.layout.node_id(i, j, k)];
                if (e != g.edge_eps_rel[0][g.layout.node_id(nx - 1 - i, j, k)]) ++ex_mismatch;
                if (e != g.edge_eps_rel[0][g.layout.node_id(i, ny - j, k)]) ++ex_mismatch;
            }
    CHECK(cell_mismatch == 0);
    CHECK(ez_mismatch == 0);
    CHECK(ex_mismatch == 0);
}

TEST_CASE("halving the cell size moves the volume estimate by less than one surface shell") {
    SceneSpec s = paper_scene();
    const MaterialGrid coarse = scene::rasterize(s, 10.0, 60.0);
    const MaterialGrid fine = scene::rasterize(s, 5.0, 60.0);
    const double v10 = static_cast<double>(coarse.count_cells("nanowire")) * 1000.0;
    const double v5 = static_cast<double>(fine.count_cells("nanowire")) * 125.0;

    const int wire = coarse.material_index("nanowire");
    const auto& lay = coarse.layout;
    auto is_wire = [&](int i, int j, int k) {
        if (i < 0 || j < 0 || k < 0 || i >= lay.nx || j >= lay.ny || k >= lay.nz) return false;
        return coarse.cell_material[lay.cell_id(i, j, k)] == wire;
    };
    long long surface = 0;
    for (int k = 0; k < lay.nz; ++k)
        for (int j = 0; j < lay.ny; ++j)
            for (int i = 0; i < lay.nx; ++i)
                if (is_wire(i, j, k) &&
                    (!is_wire(i - 1, j, k) || !is_wire(i + 1, j, k) || !is_wire(i, j - 1, k) ||
                     !is_wire(i, j + 1, k) || !is_wire(i, j, k - 1) || !is_wire(i, j, k + 1)))
                    ++surface;
    CHECK(std::fabs(v10 - v5) < static_cast<double>(surface) * 1000.0);
}

TEST_CASE("oxide layer permittivity is volume-averaged across its top boundary") {
    const SceneSpec s = paper_scene();  // 12 nm oxide on a 10 nm grid
    const MaterialGrid g = scene::rasterize(s, 10.0, 120.0);
    const auto& lay = g.layout;
    const int ic = lay.nx / 2, jc = lay.ny / 2;  // node exactly on the axis
    const int k0 = static_cast<int>(std::llround(-lay.z0_nm / lay.dx_nm));
    REQUIRE(lay.z_node(k0) == 0.0);
    const double eps_ox = 1.45 * 1.45;
    const double eps_wire = 3.44 * 3.44;

    // Ez edge fully inside the oxide: exact slab value.
    CHECK(g.edge_eps_rel[2][lay.node_id(ic, jc, k0)] == doctest::Approx(eps_ox).epsilon(1e-12));
    // Ez edge spanning [10, 20]: 2 nm oxide + 8 nm wire under the footprint.
    CHECK(g.edge_eps_rel[2][lay.node_id(ic, jc, k0 + 1)] ==
          doctest::Approx(0.2 * eps_ox + 0.8 * eps_wire).epsilon(1e-12));
    // Same edge far outside the wire: 2 nm oxide + 8 nm air.
    CHECK(g.edge_eps_rel[2][lay.node_id(1, 1, k0 + 1)] ==
          doctest::Approx(0.2 * eps_ox + 0.8 * 1.0).epsilon(1e-12));
    // Ex edge at z = 10 on the axis: dual cell spans [5, 15].
    CHECK(g.edge_eps_rel[0][lay.node_id(ic, jc, k0 + 1)] ==
          doctest::Approx(0.7 * eps_ox + 0.3 * eps_wire).epsilon(1e-12));
    // Tangential edge on the gold surface stays staircase: oxide value.
    CHECK(g.edge_eps_rel[0][lay.node_id(ic, jc, k0)] ==
          doctest::Approx(eps_ox).epsilon(1e-12));
    // Below the surface the edge belongs to gold.
    CHECK(static_cast<int>(g.edge_material[0][lay.node_id(ic, jc, k0 - 1)]) ==
          g.material_index("gold"));
    CHECK(g.warnings.empty());

    SceneSpec thin = paper_scene();
    thin.oxide_thickness_nm = 6.0;
    const MaterialGrid gt = scene::rasterize(thin, 10.0, 120.0);
    CHECK(!gt.warnings.empty());
    CHECK(gt.edge_eps_rel[2][gt.layout.node_id(ic, jc, k0)] ==
          doctest::Approx(0.6 * eps_ox + 0.4 * eps_wire).epsilon(1e-12));
}

TEST_CASE("scene validation rejects bad specs") {
    CHECK_THROWS([] { SceneSpec s; s.diameter_nm = 0.0; s.validate(); }());
    CHECK_THROWS([] { SceneSpec s; s.height_nm = 100.0; s.crown_height_nm = 100.0; s.validate(); }());
    CHECK_THROWS([] { SceneSpec s; s.crown_height_nm = -1.0; s.validate(); }());
    CHECK_THROWS([] { SceneSpec s; s.dipole_offset_from_top_nm = 0.0; s.validate(); }());
    CHECK_THROWS([] { SceneSpec s; s.dipole_offset_from_top_nm = 1375.0; s.validate(); }());
    CHECK_THROWS([] { SceneSpec s; s.dipole_lateral_offset_nm = 211.0; s.validate(); }());
    CHECK_THROWS([] { SceneSpec s; s.dipole_orientation = {0, 0, 0}; s.validate(); }());
    CHECK_THROWS([] {
        SceneSpec s;
        s.dipole_orientation = {0, 0, 1};
        s.dipole_lateral_offset_nm = 50.0;
        s.validate();
    }());
    CHECK_THROWS([] {
        SceneSpec s;  // 30 nm below the apex of a 300 nm crown: side is 21 nm there
        s.crown_height_nm = 300.0;
        s.dipole_lateral_offset_nm = 25.0;
        s.validate();
    }());
    CHECK_NOTHROW([] {
        SceneSpec s;
        s.crown_height_nm = 300.0;
        s.dipole_lateral_offset_nm = 15.0;
        s.validate();
    }());
    CHECK_NOTHROW([] { SceneSpec s; s.mirror_enabled = false; s.validate(); }());
    CHECK_THROWS([] { scene::rasterize(SceneSpec{}, -1.0, 100.0); }());
    CHECK_THROWS([] { scene::rasterize(SceneSpec{}, 10.0, -5.0); }());
}

TEST_CASE("dipole position accounts for mirror stack and offsets") {
    SceneSpec s = paper_scene();
    auto p = s.dipole_position_nm();
    CHECK(p[0] == 0.0);
    CHECK(p[1] == 0.0);
    CHECK(p[2] == doctest::Approx(12.0 + 1375.0 - 30.0).epsilon(1e-15));

    s.dipole_lateral_offset_nm = 100.0;
    p = s.dipole_position_nm();
    CHECK(p[0] == doctest::Approx(100.0).epsilon(1e-15));
    CHECK(p[1] == 0.0);

    s.dipole_orientation = {0.0, 1.0, 0.0};
    s.dipole_lateral_offset_nm = 50.0;
    p = s.dipole_position_nm();
    CHECK(p[0] == 0.0);
    CHECK(p[1] == doctest::Approx(50.0).epsilon(1e-15));

    s = paper_scene();
    s.mirror_enabled = false;
    CHECK(s.dipole_position_nm()[2] == doctest::Approx(1375.0 - 30.0).epsilon(1e-15));
}

TEST_CASE("constant material fixtures") {
    const MaterialModel inp = MaterialModel::constant("nanowire", 3.44);
    CHECK(scene::permittivity_at(inp, 900.0) == std::complex<double>(3.44 * 3.44, 0.0));
    CHECK(scene::permittivity_at(inp, 431.7) == std::complex<double>(3.44 * 3.44, 0.0));
    const MaterialModel vac = MaterialModel::constant("air", 1.0);
    CHECK(scene::permittivity_at(vac, 900.0) == std::complex<double>(1.0, 0.0));
    CHECK_THROWS(MaterialModel::constant("bad", 0.7));
}

TEST_CASE("pole fit: constant table collapses to zero pole strength") {
    std::vector<MaterialSample> table;
    for (double lam = 700.0; lam <= 1100.0; lam += 50.0)
        table.push_back({lam, {2.25, 0.0}});
    const MaterialModel m = scene::fit_metal_poles(table, {800.0, 1000.0}, 1, "glass");
    CHECK(m.fit_residual < 1e-6);
    CHECK(scene::permittivity_at(m, 900.0).real() == doctest::Approx(2.25).epsilon(1e-5));
    CHECK(std::fabs(scene::permittivity_at(m, 900.0).imag()) < 1e-5);
    for (const auto& p : m.poles) CHECK(p.gamma >= 0.0);
}

TEST_CASE("pole fit: synthetic Drude round-trip within 1%") {
    const double S = 1.3e16 * 1.3e16, gamma = 1.1e14, eps_inf = 1.8;
    std::vector<MaterialSample> table;
    for (double lam = 700.0; lam <= 1200.0; lam += 25.0) {
        const double w = omega_of_wavelength(lam * nm);
        const std::complex<double> eps =
            eps_inf + S / std::complex<double>(-w * w, -gamma * w);
        table.push_back({lam, eps});
    }
    const MaterialModel m = scene::fit_metal_poles(table, {750.0, 1150.0}, 1, "drude");
    REQUIRE(m.poles.size() == 1);
    CHECK(m.poles[0].omega0 == 0.0);
    CHECK(std::fabs(m.poles[0].amplitude - S) / S < 0.01);
    CHECK(std::fabs(m.poles[0].gamma - gamma) / gamma < 0.01);
    CHECK(std::fabs(m.epsilon_infinity - eps_inf) / eps_inf < 0.01);
}

TEST_CASE("gold fit: Drude + Lorentz reaches 2% over 800-1000 nm") {
    const auto table = scene::read_material_table(std::string(NWCAV_DATA_DIR) + "/gold_jc1972.tsv");
    REQUIRE(table.size() == 9);
    const MaterialModel m = scene::fit_metal_poles(table, {800.0, 1000.0}, 2, "gold");
    CHECK(m.fit_residual <= 0.02);
    CHECK(m.kind == MaterialKind::DispersivePoleModel);
    for (const auto& p : m.poles) CHECK(p.gamma >= 0.0);
    // Passivity over the band: absorption sign never flips.
    for (double lam = 800.0; lam <= 1000.0; lam += 10.0)
        CHECK(scene::permittivity_at(m, lam).imag() >= 0.0);
    // Tabulated point inside the band is reproduced within the residual.
    const std::complex<double> ref(-32.040669, 1.92542);
    CHECK(std::abs(scene::permittivity_at(m, 892.0) - ref) / std::abs(ref) <=
          m.fit_residual + 1e-12);
    CHECK_THROWS(scene::permittivity_at(m, 700.0));
    CHECK_THROWS(scene::permittivity_at(m, 1100.0));
    // Band not covered by the tabulation:
    CHECK_THROWS(scene::fit_metal_poles(table, {500.0, 1000.0}, 2, "gold"));
}

TEST_CASE("material table reader validates structure") {
    const char* path = "scene_tab_tmp.tsv";
    {
        std::ofstream f(path);
        f << "# wavelength_nm\tre_eps\n800\t-20\n";
    }
    CHECK_THROWS(scene::read_material_table(path));
    {
        std::ofstream f(path);
        f << "# wavelength_nm\tre_eps\tim_eps\n800\t-20\t1\n800\t-21\t1\n";
    }
    CHECK_THROWS(scene::read_material_table(path));
    {
        std::ofstream f(path);
        f << "# wavelength_nm\tre_eps\tim_eps\n900\t-32\t2\n800\t-25\t1.6\n";
    }
    const auto t = scene::read_material_table(path);
    REQUIRE(t.size() == 2);
    CHECK(t[0].wavelength_nm == 800.0);  // sorted ascending
    CHECK(t[1].eps == std::complex<double>(-32.0, 2.0));
    std::remove(path);
}
