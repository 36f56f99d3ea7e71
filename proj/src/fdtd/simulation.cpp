#include "nwcav/fdtd/fdtd.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "nwcav/io/sha256.hpp"
#include "nwcav/units.hpp"

namespace nwcav::fdtd {

namespace {

constexpr int kPmlGrade = 3;
constexpr double kPmlSigmaScale = 0.8;  // of (grade+1)/(eta0 dx)

// Backward-difference row for tangential E updates along one axis.
// diff = s_hi * H[hi] - s_lo * H[lo]; walls are skipped (PEC, and the
// conductor backing the absorber) or use the image H value (PMC).
struct DiffRow {
    int hi = 0, lo = 0;
    double s_hi = 1.0, s_lo = 1.0;
    bool skip = false;
};

std::vector<DiffRow> make_rows(int n, Boundary lo, Boundary hi) {
    std::vector<DiffRow> rows(static_cast<std::size_t>(n) + 1);
    for (int m = 0; m <= n; ++m) rows[m] = {m, m - 1, 1.0, 1.0, false};
    rows[0] = (lo == Boundary::Pmc) ? DiffRow{0, 0, 1.0, -1.0, false}
                                    : DiffRow{0, 0, 0.0, 0.0, true};
    rows[n] = (hi == Boundary::Pmc) ? DiffRow{n - 1, n - 1, -1.0, 1.0, false}
                                    : DiffRow{0, 0, 0.0, 0.0, true};
    return rows;
}

// (axis-aligned, in-plane-1, in-plane-2) coordinates -> node id, where the
// in-plane axes are (axis+1)%3 and (axis+2)%3.
long long id_abc(const scene::GridLayout& L, int axis, int ia, int ib, int ic) {
    switch (axis) {
        case 0: return L.node_id(ia, ib, ic);
        case 1: return L.node_id(ic, ia, ib);
        default: return L.node_id(ib, ic, ia);
    }
}

struct CFace {
    int axis = 2, sign = 1, plane = 0;
    int a0 = 0, a1 = 0, b0 = 0, b1 = 0;
    bool all_air = true;
    long long nc = 0;
    std::vector<std::complex<double>> e1, e2, h1, h2;  // wavelength-major
    std::vector<double> c1, c2, c3, c4;                // co-location scratch
    std::vector<double> eo1, eo2;                      // E at step start (time flux)
};

struct CMon {
    MonitorSpec spec;
    std::vector<double> omega;
    std::vector<CFace> faces;
    std::vector<std::complex<double>> src;
    double flux_j = 0.0;
};

template <typename T>
void put(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
void get(std::istream& is, T& v) {
    is.read(reinterpret_cast<char*>(&v), sizeof v);
}

template <typename T>
void put_vec(std::ostream& os, const std::vector<T>& v) {
    put(os, static_cast<std::uint64_t>(v.size()));
    os.write(reinterpret_cast<const char*>(v.data()),
             static_cast<std::streamsize>(v.size() * sizeof(T)));
}

template <typename T>
void get_vec(std::istream& is, std::vector<T>& v, const char* what) {
    std::uint64_t count = 0;
    get(is, count);
    if (count != v.size())
        throw std::runtime_error(std::string("checkpoint mismatch: ") + what +
                                 " has " + std::to_string(count) + " entries, expected " +
                                 std::to_string(v.size()));
    is.read(reinterpret_cast<char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(T)));
}

constexpr char kMagic[8] = {'N', 'W', 'C', 'A', 'V', 'C', 'K', '1'};
constexpr char kTrailer[8] = {'N', 'W', 'C', 'K', 'E', 'N', 'D', '0'};
constexpr std::uint32_t kCheckpointVersion = 1;

}  // namespace

struct Simulation::Impl {
    const scene::MaterialGrid* grid = nullptr;
    scene::GridLayout lay;
    Numerics num;
    double dxm = 0.0;  // cell size, m
    double dt = 0.0;
    long long n = 0;
    double pulse_end = 0.0;

    std::array<std::vector<double>, 6> f;  // Ex,Ey,Ez,Hx,Hy,Hz

    std::array<std::vector<DiffRow>, 3> erow;
    std::array<int, 3> tlo{}, thi{};  // inclusive tangential-E node bounds
    std::array<int, 3> glo{}, ghi{};  // non-absorbing node bounds

    // Absorber coefficients per node index along each axis; bE/cE at integer
    // positions, bH/cH at half positions (index m means m+1/2).
    std::array<std::vector<double>, 3> bE, cE, bH, cH;
    std::array<std::vector<int>, 3> smap;   // node index -> slab slot, -1 outside
    std::array<std::vector<int>, 3> spos;   // slab node positions, ascending
    std::array<int, 3> W{};                 // slab slots per axis
    std::array<std::array<std::vector<double>, 2>, 3> psiE, psiH;

    // Pole-model metal state.
    int metal_mat = -1;
    double inv_e0einf = 0.0;
    struct PoleCoef { double c1, c2, c3; };
    std::vector<PoleCoef> pole;
    std::array<std::vector<long long>, 3> gid;               // metal edges
    std::array<std::vector<std::vector<double>>, 3> Pc, Pp;  // [comp][pole][edge]
    std::array<std::vector<double>, 3> dPol;                 // scratch, sum over poles

    std::vector<CurrentSource> src;
    Pulse pulse0;
    std::vector<std::vector<double>> tap_e0;
    double work = 0.0;

    std::vector<CMon> mons;
    double e_peak = 0.0;
    mutable std::string hash;

    long long node(int i, int j, int k) const { return lay.node_id(i, j, k); }
    long long psi_id(int axis, int s, int t1, int t2) const {
        // t1/t2 are the natural loop coordinates: axis 0 -> (j,k),
        // axis 1 -> (i,k), axis 2 -> (i,j).
        switch (axis) {
            case 0: return (static_cast<long long>(t2) * (lay.ny + 1) + t1) * W[0] + s;
            case 1: return (static_cast<long long>(t2) * W[1] + s) * (lay.nx + 1) + t1;
            default: return (static_cast<long long>(s) * (lay.ny + 1) + t1) * (lay.nx + 1) + t2;
        }
    }

    void build_absorber();
    void build_metal();
    void compile_monitor(const MonitorSpec& spec);
    void add_face(CMon& mon, int axis, int sign, int plane, int a0, int a1, int b0, int b1);
    void validate_sources() const;

    void update_h();
    void update_e();
    void pml_h();
    void pml_e();
    void ade_advance();
    void ade_subtract();
    void capture_tap_e();
    void apply_sources(double t_half);
    void colocate_e(CFace& fc, std::vector<double>& o1, std::vector<double>& o2) const;
    void colocate_h(CFace& fc) const;
    void sample_monitors();
    void timeflux_begin();
    void timeflux_end();
    double energy_now() const;
    const std::string& scene_hash() const;
};

// ---------------------------------------------------------------------------
// Setup

double stable_dt(double resolution_nm, double courant_fraction) {
    if (!(resolution_nm > 0.0))
        throw std::invalid_argument("resolution must be positive");
    if (!(courant_fraction > 0.0) || courant_fraction > 1.0)
        throw std::invalid_argument("courant fraction must be in (0, 1]");
    const double dx = resolution_nm * nm;
    return courant_fraction * dx / (c0 * std::sqrt(3.0));
}

void Numerics::validate() const {
    if (!(resolution_nm > 0.0)) throw std::invalid_argument("resolution must be positive");
    if (!(courant_fraction > 0.0) || courant_fraction > 1.0)
        throw std::invalid_argument("courant fraction must be in (0, 1]");
    if (absorber_layers < 1) throw std::invalid_argument("absorber needs at least one layer");
    if (!(decay_threshold > 0.0)) throw std::invalid_argument("decay threshold must be positive");
    if (max_steps < 1) throw std::invalid_argument("max_steps must be positive");
    if (monitor_stride < 1) throw std::invalid_argument("monitor stride must be positive");
    if (energy_stride < 1) throw std::invalid_argument("energy stride must be positive");
}

Simulation::Simulation(const scene::MaterialGrid& grid, std::vector<CurrentSource> sources,
                       const Numerics& numerics, const std::vector<MonitorSpec>& monitors)
    : impl_(std::make_unique<Impl>()) {
    numerics.validate();
    Impl& im = *impl_;
    im.grid = &grid;
    im.lay = grid.layout;
    im.num = numerics;
    im.dxm = im.lay.dx_nm * nm;
    im.dt = stable_dt(im.lay.dx_nm, numerics.courant_fraction);
    im.src = std::move(sources);

    const long long N = im.lay.nodes();
    for (auto& arr : im.f) arr.assign(static_cast<std::size_t>(N), 0.0);
    for (int c = 0; c < 3; ++c) {
        if (grid.edge_eps_rel[c].size() != static_cast<std::size_t>(N) ||
            grid.edge_material[c].size() != static_cast<std::size_t>(N))
            throw std::invalid_argument("material grid edge arrays do not match the layout");
    }

    const int dims[3] = {im.lay.nx, im.lay.ny, im.lay.nz};
    for (int a = 0; a < 3; ++a) {
        im.erow[a] = make_rows(dims[a], numerics.boundary[a][0], numerics.boundary[a][1]);
        im.tlo[a] = im.erow[a][0].skip ? 1 : 0;
        im.thi[a] = im.erow[a][static_cast<std::size_t>(dims[a])].skip ? dims[a] - 1 : dims[a];
        const bool clo = numerics.boundary[a][0] == Boundary::Cpml;
        const bool chi = numerics.boundary[a][1] == Boundary::Cpml;
        im.glo[a] = clo ? numerics.absorber_layers + 1 : 1;
        im.ghi[a] = dims[a] - (chi ? numerics.absorber_layers + 1 : 1);
        if ((clo || chi) && dims[a] < 2 * (numerics.absorber_layers + 2))
            throw std::invalid_argument("grid too small for the absorbing layers");
        if (im.ghi[a] <= im.glo[a])
            throw std::invalid_argument("grid has no interior cells");
    }

    im.build_absorber();
    im.build_metal();
    im.validate_sources();

    im.pulse_end = 0.0;
    for (const auto& s : im.src) im.pulse_end = std::max(im.pulse_end, s.pulse.end_time_s());
    if (!im.src.empty()) im.pulse0 = im.src.front().pulse;
    im.tap_e0.resize(im.src.size());
    for (std::size_t s = 0; s < im.src.size(); ++s)
        im.tap_e0[s].assign(im.src[s].taps.size(), 0.0);

    for (const MonitorSpec& spec : monitors) im.compile_monitor(spec);
}

Simulation::~Simulation() = default;
Simulation::Simulation(Simulation&&) noexcept = default;
Simulation& Simulation::operator=(Simulation&&) noexcept = default;

void Simulation::Impl::build_absorber() {
    const int L = num.absorber_layers;
    const int dims[3] = {lay.nx, lay.ny, lay.nz};
    const double smax = kPmlSigmaScale * (kPmlGrade + 1) / (eta0 * dxm);
    for (int a = 0; a < 3; ++a) {
        const int n = dims[a];
        bE[a].assign(static_cast<std::size_t>(n) + 1, 1.0);
        cE[a].assign(static_cast<std::size_t>(n) + 1, 0.0);
        bH[a].assign(static_cast<std::size_t>(n) + 1, 1.0);
        cH[a].assign(static_cast<std::size_t>(n) + 1, 0.0);
        smap[a].assign(static_cast<std::size_t>(n) + 1, -1);
        const bool clo = num.boundary[a][0] == Boundary::Cpml;
        const bool chi = num.boundary[a][1] == Boundary::Cpml;
        W[a] = (clo ? L : 0) + (chi ? L : 0);
        int slot = 0;
        auto sigma = [&](double depth) {
            if (depth <= 0.0) return 0.0;
            return smax * std::pow(depth / L, kPmlGrade);
        };
        auto coef = [&](double s, double& b, double& c) {
            b = std::exp(-s * dt / eps0);
            c = b - 1.0;
        };
        if (clo) {
            for (int m = 0; m < L; ++m) {
                smap[a][m] = slot++;
                coef(sigma(L - m), bE[a][m], cE[a][m]);
                coef(sigma(L - m - 0.5), bH[a][m], cH[a][m]);
            }
        }
        if (chi) {
            for (int m = n - L; m < n; ++m) {
                smap[a][m] = slot++;
                coef(sigma(m - (n - L)), bE[a][m], cE[a][m]);
                coef(sigma(m + 0.5 - (n - L)), bH[a][m], cH[a][m]);
            }
        }
        spos[a].clear();
        for (int m = 0; m <= n; ++m)
            if (smap[a][m] >= 0) spos[a].push_back(m);

        long long planes = 0;
        switch (a) {
            case 0: planes = static_cast<long long>(lay.ny + 1) * (lay.nz + 1); break;
            case 1: planes = static_cast<long long>(lay.nx + 1) * (lay.nz + 1); break;
            default: planes = static_cast<long long>(lay.nx + 1) * (lay.ny + 1); break;
        }
        const std::size_t psi_n = static_cast<std::size_t>(planes * W[a]);
        for (int which = 0; which < 2; ++which) {
            psiE[a][which].assign(psi_n, 0.0);
            psiH[a][which].assign(psi_n, 0.0);
        }
    }
}

void Simulation::Impl::build_metal() {
    const auto& g = *grid;
    metal_mat = -1;
    for (int c = 0; c < 3; ++c) {
        for (std::size_t id = 0; id < g.edge_material[c].size(); ++id) {
            const int m = g.edge_material[c][id];
            if (g.materials[static_cast<std::size_t>(m)].kind !=
                scene::MaterialKind::DispersivePoleModel)
                continue;
            if (metal_mat >= 0 && metal_mat != m)
                throw std::invalid_argument("at most one pole-model material per grid");
            metal_mat = m;
            gid[c].push_back(static_cast<long long>(id));
        }
    }
    if (metal_mat < 0) return;
    const scene::MaterialModel& mm = g.materials[static_cast<std::size_t>(metal_mat)];
    if (mm.poles.empty())
        throw std::invalid_argument("material '" + mm.name +
                                    "' has no pole model; fit one before running");
    inv_e0einf = 1.0 / (eps0 * mm.epsilon_infinity);
    for (const scene::Pole& p : mm.poles) {
        // Explicit second-order polarization update: resonances beyond the
        // step rate flip the recursion unstable long before they matter
        // physically.
        if (p.omega0 * dt > 1.0 || p.gamma * dt > 1.0)
            throw std::invalid_argument(
                "material '" + mm.name +
                "' has a pole faster than the time step resolves; refit it with "
                "bounded resonances or refine the grid");
        const double den = 1.0 + 0.5 * p.gamma * dt;
        pole.push_back({(2.0 - p.omega0 * p.omega0 * dt * dt) / den,
                        -(1.0 - 0.5 * p.gamma * dt) / den,
                        eps0 * p.amplitude * dt * dt / den});
    }
    for (int c = 0; c < 3; ++c) {
        Pc[c].assign(pole.size(), std::vector<double>(gid[c].size(), 0.0));
        Pp[c].assign(pole.size(), std::vector<double>(gid[c].size(), 0.0));
        dPol[c].assign(gid[c].size(), 0.0);
    }
}

void Simulation::Impl::validate_sources() const {
    for (const CurrentSource& s : src) {
        if (s.component < 0 || s.component > 2)
            throw std::invalid_argument("source component must be 0, 1, or 2");
        if (s.taps.empty()) throw std::invalid_argument("source has no taps");
        for (const auto& [id, w] : s.taps) {
            (void)w;
            if (id < 0 || id >= lay.nodes())
                throw std::invalid_argument("source tap outside the grid");
        }
    }
}

void Simulation::Impl::add_face(CMon& mon, int axis, int sign, int plane, int a0, int a1,
                                int b0, int b1) {
    const int tb = (axis + 1) % 3, tc = (axis + 2) % 3;
    if (plane < glo[axis] || plane > ghi[axis] || a0 < glo[tb] || a1 > ghi[tb] ||
        b0 < glo[tc] || b1 > ghi[tc])
        throw std::invalid_argument("monitor '" + mon.spec.name +
                                    "' extends into the absorbing boundary or outside the grid");
    if (a1 <= a0 || b1 <= b0)
        throw std::invalid_argument("monitor '" + mon.spec.name + "' has an empty face");

    CFace fc;
    fc.axis = axis;
    fc.sign = sign;
    fc.plane = plane;
    fc.a0 = a0;
    fc.a1 = a1;
    fc.b0 = b0;
    fc.b1 = b1;
    fc.nc = static_cast<long long>(a1 - a0) * (b1 - b0);
    for (int p = a0; p <= a1 && fc.all_air; ++p)
        for (int q = b0; q <= b1 && fc.all_air; ++q) {
            const long long id = id_abc(lay, axis, plane, p, q);
            for (int c = 0; c < 3; ++c)
                if (grid->edge_material[c][static_cast<std::size_t>(id)] != 0) {
                    fc.all_air = false;
                    break;
                }
        }
    const std::size_t total = static_cast<std::size_t>(fc.nc) * mon.omega.size();
    fc.e1.assign(total, {});
    fc.e2.assign(total, {});
    fc.h1.assign(total, {});
    fc.h2.assign(total, {});
    fc.c1.assign(static_cast<std::size_t>(fc.nc), 0.0);
    fc.c2.assign(static_cast<std::size_t>(fc.nc), 0.0);
    fc.c3.assign(static_cast<std::size_t>(fc.nc), 0.0);
    fc.c4.assign(static_cast<std::size_t>(fc.nc), 0.0);
    if (mon.spec.accumulate_time_flux) {
        fc.eo1.assign(static_cast<std::size_t>(fc.nc), 0.0);
        fc.eo2.assign(static_cast<std::size_t>(fc.nc), 0.0);
    }
    mon.faces.push_back(std::move(fc));
}

void Simulation::Impl::compile_monitor(const MonitorSpec& spec) {
    if (spec.wavelengths_nm.empty())
        throw std::invalid_argument("monitor '" + spec.name + "' has no wavelengths");
    for (double w : spec.wavelengths_nm)
        if (!(w > 0.0))
            throw std::invalid_argument("monitor '" + spec.name + "' has a non-positive wavelength");

    CMon mon;
    mon.spec = spec;
    for (double w : spec.wavelengths_nm)
        mon.omega.push_back(omega_of_wavelength(w * nm));
    mon.src.assign(mon.omega.size(), {});

    const double origin[3] = {lay.x0_nm, lay.y0_nm, lay.z0_nm};
    auto node_of = [&](int axis, double v) {
        return static_cast<int>(std::llround((v - origin[axis]) / lay.dx_nm));
    };
    auto cell_of = [&](int axis, double v) {
        return static_cast<int>(std::llround((v - origin[axis]) / lay.dx_nm - 0.5));
    };

    using G = MonitorSpec::Geometry;
    if (spec.geometry == G::SingleCell) {
        // Degenerate one-cell z-face: gives co-located Ex/Ey/Hx/Hy at a point.
        const int p = cell_of(0, spec.min_nm[0]);
        const int q = cell_of(1, spec.min_nm[1]);
        add_face(mon, 2, 1, node_of(2, spec.min_nm[2]), p, p + 1, q, q + 1);
    } else if (spec.geometry == G::Plane) {
        const int a = spec.plane_axis;
        if (a < 0 || a > 2) throw std::invalid_argument("plane axis must be 0, 1, or 2");
        const int tb = (a + 1) % 3, tc = (a + 2) % 3;
        add_face(mon, a, 1, node_of(a, spec.min_nm[a]), node_of(tb, spec.min_nm[tb]),
                 node_of(tb, spec.max_nm[tb]), node_of(tc, spec.min_nm[tc]),
                 node_of(tc, spec.max_nm[tc]));
    } else {
        int lo[3], hi[3];
        for (int a = 0; a < 3; ++a) {
            lo[a] = node_of(a, spec.min_nm[a]);
            hi[a] = node_of(a, spec.max_nm[a]);
            if (hi[a] <= lo[a])
                throw std::invalid_argument("monitor '" + spec.name + "' has an empty box");
        }
        for (int a = 0; a < 3; ++a) {
            const int tb = (a + 1) % 3, tc = (a + 2) % 3;
            if (!(spec.geometry == G::BoxOpenBottom && a == 2))
                add_face(mon, a, -1, lo[a], lo[tb], hi[tb], lo[tc], hi[tc]);
            add_face(mon, a, 1, hi[a], lo[tb], hi[tb], lo[tc], hi[tc]);
        }
    }
    mons.push_back(std::move(mon));
}

// ---------------------------------------------------------------------------
// Field updates

void Simulation::Impl::update_h() {
    const int nx = lay.nx, ny = lay.ny, nz = lay.nz;
    const double dh = dt / (mu0 * dxm);
    const long long sy = nx + 1;
    const long long sz = static_cast<long long>(nx + 1) * (ny + 1);
    const double* Ex = f[0].data();
    const double* Ey = f[1].data();
    const double* Ez = f[2].data();
    double* Hx = f[3].data();
    double* Hy = f[4].data();
    double* Hz = f[5].data();

#pragma omp parallel for schedule(static)
    for (int k = 0; k < nz; ++k) {
        for (int j = 0; j < ny; ++j) {
            const long long ro = node(0, j, k);
            for (int i = 0; i <= nx; ++i) {
                const long long id = ro + i;
                Hx[id] += dh * ((Ey[id + sz] - Ey[id]) - (Ez[id + sy] - Ez[id]));
            }
        }
    }
#pragma omp parallel for schedule(static)
    for (int k = 0; k < nz; ++k) {
        for (int j = 0; j <= ny; ++j) {
            const long long ro = node(0, j, k);
            for (int i = 0; i < nx; ++i) {
                const long long id = ro + i;
                Hy[id] += dh * ((Ez[id + 1] - Ez[id]) - (Ex[id + sz] - Ex[id]));
            }
        }
    }
#pragma omp parallel for schedule(static)
    for (int k = 0; k <= nz; ++k) {
        for (int j = 0; j < ny; ++j) {
            const long long ro = node(0, j, k);
            for (int i = 0; i < nx; ++i) {
                const long long id = ro + i;
                Hz[id] += dh * ((Ex[id + sy] - Ex[id]) - (Ey[id + 1] - Ey[id]));
            }
        }
    }
}

void Simulation::Impl::update_e() {
    const int nx = lay.nx, ny = lay.ny, nz = lay.nz;
    const double de = dt / (eps0 * dxm);
    double* Ex = f[0].data();
    double* Ey = f[1].data();
    double* Ez = f[2].data();
    const double* Hx = f[3].data();
    const double* Hy = f[4].data();
    const double* Hz = f[5].data();
    const double* ex_eps = grid->edge_eps_rel[0].data();
    const double* ey_eps = grid->edge_eps_rel[1].data();
    const double* ez_eps = grid->edge_eps_rel[2].data();

    // Ex: tangential walls on y and z.
#pragma omp parallel for schedule(static)
    for (int k = tlo[2]; k <= thi[2]; ++k) {
        const DiffRow rz = erow[2][static_cast<std::size_t>(k)];
        for (int j = tlo[1]; j <= thi[1]; ++j) {
            const DiffRow ry = erow[1][static_cast<std::size_t>(j)];
            const long long ro = node(0, j, k);
            const double* hz_hi = Hz + node(0, ry.hi, k);
            const double* hz_lo = Hz + node(0, ry.lo, k);
            const double* hy_hi = Hy + node(0, j, rz.hi);
            const double* hy_lo = Hy + node(0, j, rz.lo);
            for (int i = 0; i < nx; ++i) {
                const long long id = ro + i;
                Ex[id] += de / ex_eps[id] *
                          ((ry.s_hi * hz_hi[i] - ry.s_lo * hz_lo[i]) -
                           (rz.s_hi * hy_hi[i] - rz.s_lo * hy_lo[i]));
            }
        }
    }

    // Ey: tangential walls on z (row) and x (loop ends).
    const DiffRow rx0 = erow[0][0];
    const DiffRow rxn = erow[0][static_cast<std::size_t>(nx)];
#pragma omp parallel for schedule(static)
    for (int k = tlo[2]; k <= thi[2]; ++k) {
        const DiffRow rz = erow[2][static_cast<std::size_t>(k)];
        for (int j = 0; j < ny; ++j) {
            const long long ro = node(0, j, k);
            const double* hx_hi = Hx + node(0, j, rz.hi);
            const double* hx_lo = Hx + node(0, j, rz.lo);
            if (!rx0.skip) {
                const double dxh = rx0.s_hi * Hz[ro + rx0.hi] - rx0.s_lo * Hz[ro + rx0.lo];
                Ey[ro] += de / ey_eps[ro] *
                          ((rz.s_hi * hx_hi[0] - rz.s_lo * hx_lo[0]) - dxh);
            }
            for (int i = 1; i < nx; ++i) {
                const long long id = ro + i;
                Ey[id] += de / ey_eps[id] *
                          ((rz.s_hi * hx_hi[i] - rz.s_lo * hx_lo[i]) - (Hz[id] - Hz[id - 1]));
            }
            if (!rxn.skip) {
                const long long id = ro + nx;
                const double dxh = rxn.s_hi * Hz[ro + rxn.hi] - rxn.s_lo * Hz[ro + rxn.lo];
                Ey[id] += de / ey_eps[id] *
                          ((rz.s_hi * hx_hi[nx] - rz.s_lo * hx_lo[nx]) - dxh);
            }
        }
    }

    // Ez: tangential walls on y (row) and x (loop ends).
#pragma omp parallel for schedule(static)
    for (int k = 0; k < nz; ++k) {
        for (int j = tlo[1]; j <= thi[1]; ++j) {
            const DiffRow ry = erow[1][static_cast<std::size_t>(j)];
            const long long ro = node(0, j, k);
            const double* hx_hi = Hx + node(0, ry.hi, k);
            const double* hx_lo = Hx + node(0, ry.lo, k);
            if (!rx0.skip) {
                const double dxh = rx0.s_hi * Hy[ro + rx0.hi] - rx0.s_lo * Hy[ro + rx0.lo];
                Ez[ro] += de / ez_eps[ro] *
                          (dxh - (ry.s_hi * hx_hi[0] - ry.s_lo * hx_lo[0]));
            }
            for (int i = 1; i < nx; ++i) {
                const long long id = ro + i;
                Ez[id] += de / ez_eps[id] *
                          ((Hy[id] - Hy[id - 1]) - (ry.s_hi * hx_hi[i] - ry.s_lo * hx_lo[i]));
            }
            if (!rxn.skip) {
                const long long id = ro + nx;
                const double dxh = rxn.s_hi * Hy[ro + rxn.hi] - rxn.s_lo * Hy[ro + rxn.lo];
                Ez[id] += de / ez_eps[id] *
                          (dxh - (ry.s_hi * hx_hi[nx] - ry.s_lo * hx_lo[nx]));
            }
        }
    }
}

void Simulation::Impl::pml_h() {
    const int nx = lay.nx, ny = lay.ny, nz = lay.nz;
    const double dtm = dt / mu0;
    const double invdx = 1.0 / dxm;
    const long long sy = nx + 1;
    const long long sz = static_cast<long long>(nx + 1) * (ny + 1);
    const double* Ex = f[0].data();
    const double* Ey = f[1].data();
    const double* Ez = f[2].data();
    double* Hx = f[3].data();
    double* Hy = f[4].data();
    double* Hz = f[5].data();

    // x-axis absorber: Hy gains +d/dx Ez, Hz gains -d/dx Ey.
    for (int m : spos[0]) {
        const double bh = bH[0][static_cast<std::size_t>(m)];
        const double ch = cH[0][static_cast<std::size_t>(m)];
        if (ch == 0.0) continue;
        const int s = smap[0][static_cast<std::size_t>(m)];
        double* py = psiH[0][0].data();
        double* pz = psiH[0][1].data();
#pragma omp parallel for schedule(static)
        for (int k = 0; k <= nz; ++k) {
            for (int j = 0; j <= ny; ++j) {
                const long long id = node(m, j, k);
                const long long pid = psi_id(0, s, j, k);
                if (k < nz) {  // Hy valid range
                    const double d = (Ez[id + 1] - Ez[id]) * invdx;
                    py[pid] = bh * py[pid] + ch * d;
                    Hy[id] += dtm * py[pid];
                }
                if (j < ny) {  // Hz valid range
                    const double d = (Ey[id + 1] - Ey[id]) * invdx;
                    pz[pid] = bh * pz[pid] + ch * d;
                    Hz[id] -= dtm * pz[pid];
                }
            }
        }
    }

    // y-axis absorber: Hz gains +d/dy Ex, Hx gains -d/dy Ez.
    for (int m : spos[1]) {
        const double bh = bH[1][static_cast<std::size_t>(m)];
        const double ch = cH[1][static_cast<std::size_t>(m)];
        if (ch == 0.0) continue;
        const int s = smap[1][static_cast<std::size_t>(m)];
        double* pz = psiH[1][0].data();
        double* px = psiH[1][1].data();
#pragma omp parallel for schedule(static)
        for (int k = 0; k <= nz; ++k) {
            const long long ro = node(0, m, k);
            for (int i = 0; i <= nx; ++i) {
                const long long id = ro + i;
                const long long pid = psi_id(1, s, i, k);
                if (i < nx) {
                    const double d = (Ex[id + sy] - Ex[id]) * invdx;
                    pz[pid] = bh * pz[pid] + ch * d;
                    Hz[id] += dtm * pz[pid];
                }
                if (k < nz) {
                    const double d = (Ez[id + sy] - Ez[id]) * invdx;
                    px[pid] = bh * px[pid] + ch * d;
                    Hx[id] -= dtm * px[pid];
                }
            }
        }
    }

    // z-axis absorber: Hx gains +d/dz Ey, Hy gains -d/dz Ex.
    for (int m : spos[2]) {
        const double bh = bH[2][static_cast<std::size_t>(m)];
        const double ch = cH[2][static_cast<std::size_t>(m)];
        if (ch == 0.0) continue;
        const int s = smap[2][static_cast<std::size_t>(m)];
        double* px = psiH[2][0].data();
        double* py = psiH[2][1].data();
#pragma omp parallel for schedule(static)
        for (int j = 0; j <= ny; ++j) {
            const long long ro = node(0, j, m);
            for (int i = 0; i <= nx; ++i) {
                const long long id = ro + i;
                const long long pid = psi_id(2, s, j, i);
                if (j < ny) {
                    const double d = (Ey[id + sz] - Ey[id]) * invdx;
                    px[pid] = bh * px[pid] + ch * d;
                    Hx[id] += dtm * px[pid];
                }
                if (i < nx) {
                    const double d = (Ex[id + sz] - Ex[id]) * invdx;
                    py[pid] = bh * py[pid] + ch * d;
                    Hy[id] -= dtm * py[pid];
                }
            }
        }
    }
}

void Simulation::Impl::pml_e() {
    const int nx = lay.nx, ny = lay.ny, nz = lay.nz;
    const double de = dt / eps0;
    const double invdx = 1.0 / dxm;
    const long long sy = nx + 1;
    const long long sz = static_cast<long long>(nx + 1) * (ny + 1);
    double* Ex = f[0].data();
    double* Ey = f[1].data();
    double* Ez = f[2].data();
    const double* Hx = f[3].data();
    const double* Hy = f[4].data();
    const double* Hz = f[5].data();
    const double* ex_eps = grid->edge_eps_rel[0].data();
    const double* ey_eps = grid->edge_eps_rel[1].data();
    const double* ez_eps = grid->edge_eps_rel[2].data();

    // x-axis absorber: Ey gains -d/dx Hz, Ez gains +d/dx Hy.
    for (int m : spos[0]) {
        if (erow[0][static_cast<std::size_t>(m)].skip) continue;
        const double be = bE[0][static_cast<std::size_t>(m)];
        const double ce = cE[0][static_cast<std::size_t>(m)];
        if (ce == 0.0) continue;
        const int s = smap[0][static_cast<std::size_t>(m)];
        double* py = psiE[0][0].data();
        double* pz = psiE[0][1].data();
#pragma omp parallel for schedule(static)
        for (int k = 0; k <= nz; ++k) {
            for (int j = 0; j <= ny; ++j) {
                const long long id = node(m, j, k);
                const long long pid = psi_id(0, s, j, k);
                if (j < ny && k >= tlo[2] && k <= thi[2]) {  // Ey
                    const double d = (Hz[id] - Hz[id - 1]) * invdx;
                    py[pid] = be * py[pid] + ce * d;
                    Ey[id] -= de / ey_eps[id] * py[pid];
                }
                if (k < nz && j >= tlo[1] && j <= thi[1]) {  // Ez
                    const double d = (Hy[id] - Hy[id - 1]) * invdx;
                    pz[pid] = be * pz[pid] + ce * d;
                    Ez[id] += de / ez_eps[id] * pz[pid];
                }
            }
        }
    }

    // y-axis absorber: Ez gains -d/dy Hx, Ex gains +d/dy Hz.
    for (int m : spos[1]) {
        if (erow[1][static_cast<std::size_t>(m)].skip) continue;
        const double be = bE[1][static_cast<std::size_t>(m)];
        const double ce = cE[1][static_cast<std::size_t>(m)];
        if (ce == 0.0) continue;
        const int s = smap[1][static_cast<std::size_t>(m)];
        double* pz = psiE[1][0].data();
        double* px = psiE[1][1].data();
#pragma omp parallel for schedule(static)
        for (int k = 0; k <= nz; ++k) {
            const long long ro = node(0, m, k);
            for (int i = 0; i <= nx; ++i) {
                const long long id = ro + i;
                const long long pid = psi_id(1, s, i, k);
                if (k < nz && i >= tlo[0] && i <= thi[0]) {  // Ez
                    const double d = (Hx[id] - Hx[id - sy]) * invdx;
                    pz[pid] = be * pz[pid] + ce * d;
                    Ez[id] -= de / ez_eps[id] * pz[pid];
                }
                if (i < nx && k >= tlo[2] && k <= thi[2]) {  // Ex
                    const double d = (Hz[id] - Hz[id - sy]) * invdx;
                    px[pid] = be * px[pid] + ce * d;
                    Ex[id] += de / ex_eps[id] * px[pid];
                }
            }
        }
    }

    // z-axis absorber: Ex gains -d/dz Hy, Ey gains +d/dz Hx.
    for (int m : spos[2]) {
        if (erow[2][static_cast<std::size_t>(m)].skip) continue;
        const double be = bE[2][static_cast<std::size_t>(m)];
        const double ce = cE[2][static_cast<std::size_t>(m)];
        if (ce == 0.0) continue;
        const int s = smap[2][static_cast<std::size_t>(m)];
        double* px = psiE[2][0].data();
        double* py = psiE[2][1].data();
#pragma omp parallel for schedule(static)
        for (int j = 0; j <= ny; ++j) {
            const long long ro = node(0, j, m);
            for (int i = 0; i <= nx; ++i) {
                const long long id = ro + i;
                const long long pid = psi_id(2, s, j, i);
                if (i < nx && j >= tlo[1] && j <= thi[1]) {  // Ex
                    const double d = (Hy[id] - Hy[id - sz]) * invdx;
                    px[pid] = be * px[pid] + ce * d;
                    Ex[id] -= de / ex_eps[id] * px[pid];
                }
                if (j < ny && i >= tlo[0] && i <= thi[0]) {  // Ey
                    const double d = (Hx[id] - Hx[id - sz]) * invdx;
                    py[pid] = be * py[pid] + ce * d;
                    Ey[id] += de / ey_eps[id] * py[pid];
                }
            }
        }
    }
}

void Simulation::Impl::ade_advance() {
    for (int c = 0; c < 3; ++c) {
        const auto& ids = gid[c];
        if (ids.empty()) continue;
        const double* E = f[c].data();
        double* dp = dPol[c].data();
        const long long ne = static_cast<long long>(ids.size());
#pragma omp parallel for schedule(static)
        for (long long e = 0; e < ne; ++e) {
            const double eold = E[ids[static_cast<std::size_t>(e)]];
            double dsum = 0.0;
            for (std::size_t p = 0; p < pole.size(); ++p) {
                double& pc = Pc[c][p][static_cast<std::size_t>(e)];
                double& pp = Pp[c][p][static_cast<std::size_t>(e)];
                const double pn = pole[p].c1 * pc + pole[p].c2 * pp + pole[p].c3 * eold;
                dsum += pn - pc;
                pp = pc;
                pc = pn;
            }
            dp[e] = dsum;
        }
    }
}

void Simulation::Impl::ade_subtract() {
    for (int c = 0; c < 3; ++c) {
        const auto& ids = gid[c];
        if (ids.empty()) continue;
        double* E = f[c].data();
        const double* dp = dPol[c].data();
        const long long ne = static_cast<long long>(ids.size());
#pragma omp parallel for schedule(static)
        for (long long e = 0; e < ne; ++e)
            E[ids[static_cast<std::size_t>(e)]] -= dp[e] * inv_e0einf;
    }
}

void Simulation::Impl::capture_tap_e() {
    for (std::size_t s = 0; s < src.size(); ++s)
        for (std::size_t t = 0; t < src[s].taps.size(); ++t)
            tap_e0[s][t] = f[src[s].component][static_cast<std::size_t>(src[s].taps[t].first)];
}

void Simulation::Impl::apply_sources(double t_half) {
    const double inv_dv = 1.0 / (dxm * dxm * dxm);
    for (std::size_t s = 0; s < src.size(); ++s) {
        const CurrentSource& cs = src[s];
        const double p = cs.pulse.current(t_half);
        if (p == 0.0) continue;
        double* E = f[cs.component].data();
        const double* eps = grid->edge_eps_rel[cs.component].data();
        for (std::size_t t = 0; t < cs.taps.size(); ++t) {
            const long long id = cs.taps[t].first;
            const double w = cs.taps[t].second;
            E[id] -= dt / (eps0 * eps[id]) * p * w * inv_dv;
            work -= p * w * 0.5 * (tap_e0[s][t] + E[id]) * dt;
        }
    }
}

void Simulation::Impl::colocate_e(CFace& fc, std::vector<double>& o1,
                                  std::vector<double>& o2) const {
    const int a = fc.axis, b = (a + 1) % 3, c = (a + 2) % 3;
    const int m = fc.plane, na = fc.a1 - fc.a0;
    const double* Eb = f[b].data();
    const double* Ec = f[c].data();
#pragma omp parallel for schedule(static)
    for (int q = fc.b0; q < fc.b1; ++q) {
        for (int p = fc.a0; p < fc.a1; ++p) {
            const long long cell = static_cast<long long>(q - fc.b0) * na + (p - fc.a0);
            o1[static_cast<std::size_t>(cell)] =
                0.5 * (Eb[id_abc(lay, a, m, p, q)] + Eb[id_abc(lay, a, m, p, q + 1)]);
            o2[static_cast<std::size_t>(cell)] =
                0.5 * (Ec[id_abc(lay, a, m, p, q)] + Ec[id_abc(lay, a, m, p + 1, q)]);
        }
    }
}

void Simulation::Impl::colocate_h(CFace& fc) const {
    const int a = fc.axis, b = (a + 1) % 3, c = (a + 2) % 3;
    const int m = fc.plane, na = fc.a1 - fc.a0;
    const double* Hb = f[3 + b].data();
    const double* Hc = f[3 + c].data();
    double* o1 = fc.c3.data();
    double* o2 = fc.c4.data();
#pragma omp parallel for schedule(static)
    for (int q = fc.b0; q < fc.b1; ++q) {
        for (int p = fc.a0; p < fc.a1; ++p) {
            const long long cell = static_cast<long long>(q - fc.b0) * na + (p - fc.a0);
            o1[cell] = 0.25 * (Hb[id_abc(lay, a, m - 1, p, q)] + Hb[id_abc(lay, a, m, p, q)] +
                               Hb[id_abc(lay, a, m - 1, p + 1, q)] + Hb[id_abc(lay, a, m, p + 1, q)]);
            o2[cell] = 0.25 * (Hc[id_abc(lay, a, m - 1, p, q)] + Hc[id_abc(lay, a, m, p, q)] +
                               Hc[id_abc(lay, a, m - 1, p, q + 1)] + Hc[id_abc(lay, a, m, p, q + 1)]);
        }
    }
}

void Simulation::Impl::sample_monitors() {
    const double tE = static_cast<double>(n + 1) * dt;
    const double tH = (static_cast<double>(n) + 0.5) * dt;
    for (CMon& mon : mons) {
        const double pj = pulse0.current(tH);
        for (std::size_t l = 0; l < mon.omega.size(); ++l)
            mon.src[l] += pj * std::complex<double>(std::cos(mon.omega[l] * tH),
                                                    std::sin(mon.omega[l] * tH));
        for (CFace& fc : mon.faces) {
            colocate_e(fc, fc.c1, fc.c2);
            colocate_h(fc);
            const long long nc = fc.nc;
            const long long nl = static_cast<long long>(mon.omega.size());
#pragma omp parallel for schedule(static)
            for (long long l = 0; l < nl; ++l) {
                const std::complex<double> phE(std::cos(mon.omega[static_cast<std::size_t>(l)] * tE),
                                               std::sin(mon.omega[static_cast<std::size_t>(l)] * tE));
                const std::complex<double> phH(std::cos(mon.omega[static_cast<std::size_t>(l)] * tH),
                                               std::sin(mon.omega[static_cast<std::size_t>(l)] * tH));
                const long long base = l * nc;
                for (long long cell = 0; cell < nc; ++cell) {
                    fc.e1[static_cast<std::size_t>(base + cell)] += phE * fc.c1[static_cast<std::size_t>(cell)];
                    fc.e2[static_cast<std::size_t>(base + cell)] += phE * fc.c2[static_cast<std::size_t>(cell)];
                    fc.h1[static_cast<std::size_t>(base + cell)] += phH * fc.c3[static_cast<std::size_t>(cell)];
                    fc.h2[static_cast<std::size_t>(base + cell)] += phH * fc.c4[static_cast<std::size_t>(cell)];
                }
            }
        }
    }
}

void Simulation::Impl::timeflux_begin() {
    for (CMon& mon : mons) {
        if (!mon.spec.accumulate_time_flux) continue;
        for (CFace& fc : mon.faces) {
            colocate_e(fc, fc.eo1, fc.eo2);
            colocate_h(fc);
        }
    }
}

void Simulation::Impl::timeflux_end() {
    const double dA = dxm * dxm;
    for (CMon& mon : mons) {
        if (!mon.spec.accumulate_time_flux) continue;
        double p_out = 0.0;
        for (CFace& fc : mon.faces) {
            colocate_e(fc, fc.c1, fc.c2);
            double s = 0.0;
            const long long nc = fc.nc;
#pragma omp parallel for schedule(static) reduction(+ : s)
            for (long long cell = 0; cell < nc; ++cell) {
                const double e1 = 0.5 * (fc.eo1[static_cast<std::size_t>(cell)] +
                                         fc.c1[static_cast<std::size_t>(cell)]);
                const double e2 = 0.5 * (fc.eo2[static_cast<std::size_t>(cell)] +
                                         fc.c2[static_cast<std::size_t>(cell)]);
                s += e1 * fc.c4[static_cast<std::size_t>(cell)] -
                     e2 * fc.c3[static_cast<std::size_t>(cell)];
            }
            p_out += fc.sign * s * dA;
        }
        mon.flux_j += p_out * dt;
    }
}

void Simulation::step() {
    Impl& im = *impl_;
    im.update_h();
    im.pml_h();
    im.timeflux_begin();
    im.ade_advance();
    im.capture_tap_e();
    im.update_e();
    im.pml_e();
    im.ade_subtract();
    im.apply_sources((static_cast<double>(im.n) + 0.5) * im.dt);
    if ((im.n + 1) % im.num.monitor_stride == 0) im.sample_monitors();
    im.timeflux_end();
    ++im.n;
}

// ---------------------------------------------------------------------------
// Diagnostics and results

double Simulation::Impl::energy_now() const {
    const double dv = dxm * dxm * dxm;
    const double* Ex = f[0].data();
    const double* Ey = f[1].data();
    const double* Ez = f[2].data();
    const double* Hx = f[3].data();
    const double* Hy = f[4].data();
    const double* Hz = f[5].data();
    const double* ex_eps = grid->edge_eps_rel[0].data();
    const double* ey_eps = grid->edge_eps_rel[1].data();
    const double* ez_eps = grid->edge_eps_rel[2].data();

    // Fixed per-plane partials summed in plane order: totals are independent
    // of the thread count.
    std::vector<double> part(static_cast<std::size_t>(ghi[2] - glo[2]) + 1, 0.0);
#pragma omp parallel for schedule(static)
    for (int k = glo[2]; k <= ghi[2]; ++k) {
        double se = 0.0, sh = 0.0;
        for (int j = glo[1]; j <= ghi[1]; ++j) {
            const long long ro = node(0, j, k);
            for (int i = glo[0]; i <= ghi[0]; ++i) {
                const long long id = ro + i;
                se += ex_eps[id] * Ex[id] * Ex[id] + ey_eps[id] * Ey[id] * Ey[id] +
                      ez_eps[id] * Ez[id] * Ez[id];
                sh += Hx[id] * Hx[id] + Hy[id] * Hy[id] + Hz[id] * Hz[id];
            }
        }
        part[static_cast<std::size_t>(k - glo[2])] = 0.5 * (eps0 * se + mu0 * sh) * dv;
    }
    double total = 0.0;
    for (double v : part) total += v;
    return total;
}

double Simulation::interior_energy_j() {
    const double u = impl_->energy_now();
    if (!std::isfinite(u))
        throw std::runtime_error("field energy is not finite at step " +
                                 std::to_string(impl_->n) + "; the run has gone unstable");
    impl_->e_peak = std::max(impl_->e_peak, u);
    return u;
}

double Simulation::energy_peak_j() const { return impl_->e_peak; }
long long Simulation::step_index() const { return impl_->n; }
double Simulation::time_s() const { return static_cast<double>(impl_->n) * impl_->dt; }
double Simulation::dt_s() const { return impl_->dt; }
double Simulation::pulse_end_time_s() const { return impl_->pulse_end; }
const std::vector<double>& Simulation::field(int component) const {
    return impl_->f[static_cast<std::size_t>(component)];
}
std::vector<double>& Simulation::field_mut(int component) {
    return impl_->f[static_cast<std::size_t>(component)];
}
const scene::GridLayout& Simulation::layout() const { return impl_->lay; }

void Simulation::check_finite() const {
    static const char* names[6] = {"Ex", "Ey", "Ez", "Hx", "Hy", "Hz"};
    for (int c = 0; c < 6; ++c) {
        const auto& arr = impl_->f[static_cast<std::size_t>(c)];
        for (std::size_t id = 0; id < arr.size(); ++id) {
            if (std::isfinite(arr[id])) continue;
            throw std::runtime_error(std::string(names[c]) + " is not finite at node " +
                                     std::to_string(id) + ", step " + std::to_string(impl_->n));
        }
    }
}

double face_power(const FaceResult& face, std::size_t k, double dx_nm) {
    const double dA = dx_nm * nm * dx_nm * nm;
    const std::size_t nc = static_cast<std::size_t>(face.ncells());
    const std::size_t base = k * nc;
    double s = 0.0;
    for (std::size_t cell = 0; cell < nc; ++cell) {
        s += (face.e1[base + cell] * std::conj(face.h2[base + cell]) -
              face.e2[base + cell] * std::conj(face.h1[base + cell]))
                 .real();
    }
    return 0.5 * face.sign * s * dA;
}

RunResult Simulation::finish(std::string termination, bool under_resolved) const {
    const Impl& im = *impl_;
    RunResult out;
    out.layout = im.lay;
    out.dt_s = im.dt;
    out.steps = im.n;
    out.termination = std::move(termination);
    out.under_resolved = under_resolved;
    out.energy_peak_j = im.e_peak;
    out.energy_final_j = im.energy_now();
    out.source_work_j = im.work;
    const double dts = im.num.monitor_stride * im.dt;

    for (const CMon& cm : im.mons) {
        MonitorResult mr;
        mr.spec = cm.spec;
        mr.time_integrated_flux_j = cm.flux_j;
        mr.source_current.resize(cm.src.size());
        for (std::size_t l = 0; l < cm.src.size(); ++l) mr.source_current[l] = cm.src[l] * dts;
        for (const CFace& cf : cm.faces) {
            FaceResult fr;
            fr.axis = cf.axis;
            fr.sign = cf.sign;
            fr.plane = cf.plane;
            fr.a0 = cf.a0;
            fr.a1 = cf.a1;
            fr.b0 = cf.b0;
            fr.b1 = cf.b1;
            fr.all_air = cf.all_air;
            fr.e1.resize(cf.e1.size());
            fr.e2.resize(cf.e2.size());
            fr.h1.resize(cf.h1.size());
            fr.h2.resize(cf.h2.size());
            for (std::size_t i = 0; i < cf.e1.size(); ++i) {
                fr.e1[i] = cf.e1[i] * dts;
                fr.e2[i] = cf.e2[i] * dts;
                fr.h1[i] = cf.h1[i] * dts;
                fr.h2[i] = cf.h2[i] * dts;
            }
            mr.faces.push_back(std::move(fr));
        }
        mr.power_w.assign(cm.omega.size(), 0.0);
        for (std::size_t l = 0; l < cm.omega.size(); ++l)
            for (const FaceResult& fr : mr.faces)
                mr.power_w[l] += face_power(fr, l, im.lay.dx_nm);
        out.monitors.push_back(std::move(mr));
    }
    return out;
}

const MonitorResult& RunResult::monitor(const std::string& name) const {
    for (const MonitorResult& m : monitors)
        if (m.spec.name == name) return m;
    std::string known;
    for (const MonitorResult& m : monitors) known += " '" + m.spec.name + "'";
    throw std::out_of_range("no monitor named '" + name + "'; have:" + known);
}

// ---------------------------------------------------------------------------
// Checkpointing

const std::string& Simulation::Impl::scene_hash() const {
    if (!hash.empty()) return hash;
    io::Sha256 h;
    auto upd = [&](const void* p, std::size_t len) { h.update(p, len); };
    auto upd_pod = [&](const auto& v) { h.update(&v, sizeof v); };
    upd("nwcav-fdtd-state-1", 18);
    upd_pod(lay.nx);
    upd_pod(lay.ny);
    upd_pod(lay.nz);
    upd_pod(lay.dx_nm);
    upd_pod(lay.x0_nm);
    upd_pod(lay.y0_nm);
    upd_pod(lay.z0_nm);
    upd_pod(dt);
    upd_pod(num.monitor_stride);
    upd_pod(num.absorber_layers);
    for (int a = 0; a < 3; ++a)
        for (int side = 0; side < 2; ++side) {
            const auto b = static_cast<std::uint8_t>(num.boundary[a][side]);
            upd_pod(b);
        }
    upd(grid->cell_material.data(), grid->cell_material.size());
    for (int c = 0; c < 3; ++c) {
        upd(grid->edge_material[c].data(), grid->edge_material[c].size());
        upd(grid->edge_eps_rel[c].data(), grid->edge_eps_rel[c].size() * sizeof(double));
    }
    for (const auto& m : grid->materials) {
        upd(m.name.data(), m.name.size());
        upd_pod(m.epsilon_infinity);
        for (const auto& p : m.poles) {
            upd_pod(p.amplitude);
            upd_pod(p.omega0);
            upd_pod(p.gamma);
        }
    }
    for (const auto& s : src) {
        upd_pod(s.component);
        for (const auto& [id, w] : s.taps) {
            upd_pod(id);
            upd_pod(w);
        }
        upd_pod(s.pulse.omega0);
        upd_pod(s.pulse.tau_s);
        upd_pod(s.pulse.t0_s);
        upd_pod(s.pulse.amplitude);
    }
    for (const CMon& m : mons) {
        upd(m.spec.name.data(), m.spec.name.size());
        for (double w : m.omega) upd_pod(w);
        const auto tf = static_cast<std::uint8_t>(m.spec.accumulate_time_flux);
        upd_pod(tf);
        for (const CFace& fc : m.faces) {
            upd_pod(fc.axis);
            upd_pod(fc.sign);
            upd_pod(fc.plane);
            upd_pod(fc.a0);
            upd_pod(fc.a1);
            upd_pod(fc.b0);
            upd_pod(fc.b1);
        }
    }
    hash = h.hex_digest();
    return hash;
}

void Simulation::save_checkpoint(const std::string& path) const {
    const Impl& im = *impl_;
    const std::string tmp = path + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw std::runtime_error("cannot write checkpoint file " + tmp);
        os.write(kMagic, sizeof kMagic);
        put(os, kCheckpointVersion);
        put(os, im.lay.nx);
        put(os, im.lay.ny);
        put(os, im.lay.nz);
        put(os, im.lay.dx_nm);
        put(os, im.dt);
        put(os, im.n);
        const std::string& hs = im.scene_hash();
        std::uint64_t hl = hs.size();
        put(os, hl);
        os.write(hs.data(), static_cast<std::streamsize>(hs.size()));
        put(os, im.work);
        put(os, im.e_peak);
        for (const auto& arr : im.f) put_vec(os, arr);
        for (int a = 0; a < 3; ++a)
            for (int which = 0; which < 2; ++which) {
                put_vec(os, im.psiE[a][which]);
                put_vec(os, im.psiH[a][which]);
            }
        for (int c = 0; c < 3; ++c)
            for (std::size_t p = 0; p < im.pole.size(); ++p) {
                put_vec(os, im.Pc[c][p]);
                put_vec(os, im.Pp[c][p]);
            }
        for (const CMon& m : im.mons) {
            put_vec(os, m.src);
            put(os, m.flux_j);
            for (const CFace& fc : m.faces) {
                put_vec(os, fc.e1);
                put_vec(os, fc.e2);
                put_vec(os, fc.h1);
                put_vec(os, fc.h2);
            }
        }
        os.write(kTrailer, sizeof kTrailer);
        if (!os) throw std::runtime_error("short write on checkpoint file " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

void Simulation::load_checkpoint(const std::string& path) {
    Impl& im = *impl_;
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open checkpoint file " + path);
    char magic[8] = {};
    is.read(magic, sizeof magic);
    if (!is || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
        throw std::runtime_error("not a checkpoint file: " + path);
    std::uint32_t version = 0;
    get(is, version);
    if (version != kCheckpointVersion)
        throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
    int nx = 0, ny = 0, nz = 0;
    double dx = 0.0, dt = 0.0;
    get(is, nx);
    get(is, ny);
    get(is, nz);
    get(is, dx);
    get(is, dt);
    if (nx != im.lay.nx || ny != im.lay.ny || nz != im.lay.nz || dx != im.lay.dx_nm ||
        dt != im.dt)
        throw std::runtime_error(
            "checkpoint grid does not match this run (different resolution or extent)");
    long long n = 0;
    get(is, n);
    std::uint64_t hl = 0;
    get(is, hl);
    if (hl > 4096) throw std::runtime_error("corrupt checkpoint header: " + path);
    std::string hs(hl, '\0');
    is.read(hs.data(), static_cast<std::streamsize>(hl));
    if (!is) throw std::runtime_error("truncated checkpoint file: " + path);
    if (hs != im.scene_hash())
        throw std::runtime_error(
            "checkpoint was taken from a different scene or monitor setup");
    get(is, im.work);
    get(is, im.e_peak);
    for (auto& arr : im.f) get_vec(is, arr, "field");
    for (int a = 0; a < 3; ++a)
        for (int which = 0; which < 2; ++which) {
            get_vec(is, im.psiE[a][which], "absorber state");
            get_vec(is, im.psiH[a][which], "absorber state");
        }
    for (int c = 0; c < 3; ++c)
        for (std::size_t p = 0; p < im.pole.size(); ++p) {
            get_vec(is, im.Pc[c][p], "polarization state");
            get_vec(is, im.Pp[c][p], "polarization state");
        }
    for (CMon& m : im.mons) {
        get_vec(is, m.src, "monitor accumulator");
        get(is, m.flux_j);
        for (CFace& fc : m.faces) {
            get_vec(is, fc.e1, "monitor accumulator");
            get_vec(is, fc.e2, "monitor accumulator");
            get_vec(is, fc.h1, "monitor accumulator");
            get_vec(is, fc.h2, "monitor accumulator");
        }
    }
    char trailer[8] = {};
    is.read(trailer, sizeof trailer);
    if (!is || std::memcmp(trailer, kTrailer, sizeof kTrailer) != 0)
        throw std::runtime_error("truncated checkpoint file: " + path);
    im.n = n;
}

}  // namespace nwcav::fdtd
