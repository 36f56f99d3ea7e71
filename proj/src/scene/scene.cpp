#include "nwcav/scene/scene.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "nwcav/io/tsv.hpp"
#include "nwcav/units.hpp"

namespace nwcav::scene {

namespace {

constexpr double kSqrt3 = 1.7320508075688772;

// Signed excess over the hexagon boundary: <= 0 inside, < 0 strictly inside.
// Built from |x|, |y| so it is exactly reflection-symmetric in floating point.
double hexagon_excess(double x_nm, double y_nm, double side_nm) {
    const double ax = std::fabs(x_nm), ay = std::fabs(y_nm);
    const double apothem = 0.5 * kSqrt3 * side_nm;
    return std::max(ay, 0.5 * (kSqrt3 * ax + ay)) - apothem;
}

}  // namespace

bool inside_hexagon(double x_nm, double y_nm, double side_nm) {
    return hexagon_excess(x_nm, y_nm, side_nm) <= 0.0;
}

MaterialModel MaterialModel::constant(std::string name, double refractive_index) {
    if (!(refractive_index >= 1.0))
        throw std::invalid_argument("constant-index material requires index >= 1: " + name);
    MaterialModel m;
    m.kind = MaterialKind::ConstantIndex;
    m.name = std::move(name);
    m.refractive_index = refractive_index;
    m.epsilon_infinity = refractive_index * refractive_index;
    return m;
}

std::complex<double> permittivity_at(const MaterialModel& model, double wavelength_nm) {
    if (!(wavelength_nm > 0.0)) throw std::invalid_argument("wavelength must be positive");
    if (model.kind == MaterialKind::ConstantIndex)
        return {model.refractive_index * model.refractive_index, 0.0};
    if (!model.fit_band_nm.contains(wavelength_nm))
        throw std::out_of_range("wavelength " + std::to_string(wavelength_nm) +
                                " nm outside fit band of material '" + model.name + "'");
    const double w = omega_of_wavelength(wavelength_nm * nm);
    std::complex<double> eps(model.epsilon_infinity, 0.0);
    for (const Pole& p : model.poles)
        eps += p.amplitude / std::complex<double>(p.omega0 * p.omega0 - w * w, -p.gamma * w);
    return eps;
}

std::vector<MaterialSample> read_material_table(const std::string& path) {
    io::Table t = io::read_table(path);
    const int cw = t.column_index("wavelength_nm");
    const int cr = t.column_index("re_eps");
    const int ci = t.column_index("im_eps");
    if (cw < 0 || cr < 0 || ci < 0)
        throw std::runtime_error("material table needs columns wavelength_nm, re_eps, im_eps: " +
                                 path);
    std::vector<MaterialSample> out;
    out.reserve(t.rows.size());
    for (const auto& row : t.rows)
        out.push_back({row[cw], {row[cr], row[ci]}});
    std::sort(out.begin(), out.end(),
              [](const MaterialSample& a, const MaterialSample& b) {
                  return a.wavelength_nm < b.wavelength_nm;
              });
    for (std::size_t i = 1; i < out.size(); ++i)
        if (!(out[i].wavelength_nm > out[i - 1].wavelength_nm))
            throw std::runtime_error("duplicate wavelength in material table: " + path);
    return out;
}

namespace {

// Dense linear solve with partial pivoting; dimensions stay below ~30.
std::vector<double> solve_linear(std::vector<double> a, std::vector<double> b) {
    const std::size_t n = b.size();
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::fabs(a[r * n + col]) > std::fabs(a[piv * n + col])) piv = r;
        if (std::fabs(a[piv * n + col]) < 1e-300)
            throw std::runtime_error("singular normal equations in pole fit");
        if (piv != col) {
            for (std::size_t c = 0; c < n; ++c) std::swap(a[col * n + c], a[piv * n + c]);
            std::swap(b[col], b[piv]);
        }
        for (std::size_t r = col + 1; r < n; ++r) {
            const double f = a[r * n + col] / a[col * n + col];
            for (std::size_t c = col; c < n; ++c) a[r * n + c] -= f * a[col * n + c];
            b[r] -= f * b[col];
        }
    }
    std::vector<double> x(n);
    for (std::size_t r = n; r-- > 0;) {
        double s = b[r];
        for (std::size_t c = r + 1; c < n; ++c) s -= a[r * n + c] * x[c];
        x[r] = s / a[r * n + r];
    }
    return x;
}

struct FitSample {
    double w;                 // omega / omega_ref
    std::complex<double> eps;
};

// Smoothly bounded resonance: |w0| < cap for any raw parameter u. An
// unconstrained fit happily parks a Lorentz pole in the far UV where it acts
// as a constant over the band but rings far above the rate any practical
// polarization time step can resolve.
double bounded_w0(double u, double cap) { return cap * u / std::sqrt(1.0 + u * u); }
double bounded_gamma(double u, double cap) { return cap * u * u / (1.0 + u * u); }

// Parameter layout (all frequencies in omega_ref units, squares enforce the
// sign constraints; resonance and damping are sigmoid-bounded): t[0]^2 =
// eps_inf - 1; t[1]^2, t[2] = Drude strength and damping raw; then per
// Lorentz pole (strength^(1/2), omega0 raw, damping raw).
std::complex<double> eval_scaled(const std::vector<double>& t, int n_poles, double w,
                                 double w0_cap) {
    std::complex<double> eps(1.0 + t[0] * t[0], 0.0);
    eps += t[1] * t[1] / std::complex<double>(-w * w, -bounded_gamma(t[2], w0_cap) * w);
    for (int p = 1; p < n_poles; ++p) {
        const double s = t[3 * p] * t[3 * p];
        const double w0 = bounded_w0(t[3 * p + 1], w0_cap);
        const double g = bounded_gamma(t[3 * p + 2], w0_cap);
        eps += s / std::complex<double>(w0 * w0 - w * w, -g * w);
    }
    return eps;
}

double max_rel_error(const std::vector<double>& t, int n_poles,
                     const std::vector<FitSample>& samples, double w0_cap) {
    double worst = 0.0;
    for (const FitSample& s : samples)
        worst = std::max(worst, std::abs(eval_scaled(t, n_poles, s.w, w0_cap) - s.eps) /
                                    std::abs(s.eps));
    return worst;
}

// Levenberg-Marquardt on the relative complex misfit.
std::vector<double> lm_fit(std::vector<double> t, int n_poles,
                           const std::vector<FitSample>& samples, double w0_cap) {
    const std::size_t np = t.size();
    const std::size_t nr = 2 * samples.size();
    auto residuals = [&](const std::vector<double>& params) {
        std::vector<double> r(nr);
        for (std::size_t k = 0; k < samples.size(); ++k) {
            const std::complex<double> d =
                (eval_scaled(params, n_poles, samples[k].w, w0_cap) - samples[k].eps) /
                std::abs(samples[k].eps);
            r[2 * k] = d.real();
            r[2 * k + 1] = d.imag();
        }
        return r;
    };
    auto cost = [&](const std::vector<double>& r) {
        double c = 0.0;
        for (double v : r) c += v * v;
        return c;
    };

    std::vector<double> r = residuals(t);
    double c = cost(r);
    double lambda = 1e-3;
    for (int iter = 0; iter < 400 && c > 1e-26; ++iter) {
        std::vector<double> jac(nr * np);
        for (std::size_t j = 0; j < np; ++j) {
            std::vector<double> tp = t;
            const double h = 1e-7 * (1.0 + std::fabs(t[j]));
            tp[j] += h;
            const std::vector<double> rp = residuals(tp);
            for (std::size_t k = 0; k < nr; ++k) jac[k * np + j] = (rp[k] - r[k]) / h;
        }
        std::vector<double> jtj(np * np, 0.0), jtr(np, 0.0);
        for (std::size_t k = 0; k < nr; ++k)
            for (std::size_t a = 0; a < np; ++a) {
                jtr[a] += jac[k * np + a] * r[k];
                for (std::size_t b = 0; b < np; ++b)
                    jtj[a * np + b] += jac[k * np + a] * jac[k * np + b];
            }
        bool accepted = false;
        for (int attempt = 0; attempt < 40; ++attempt) {
            std::vector<double> a = jtj;
            for (std::size_t d = 0; d < np; ++d)
                a[d * np + d] += lambda * std::max(jtj[d * np + d], 1e-12);
            std::vector<double> rhs(np);
            for (std::size_t d = 0; d < np; ++d) rhs[d] = -jtr[d];
            std::vector<double> step;
            try {
                step = solve_linear(std::move(a), std::move(rhs));
            } catch (const std::runtime_error&) {
                lambda *= 4.0;
                continue;
            }
            std::vector<double> tn = t;
            double step_norm = 0.0;
            for (std::size_t d = 0; d < np; ++d) {
                tn[d] += step[d];
                step_norm = std::max(step_norm, std::fabs(step[d]));
            }
            const std::vector<double> rn = residuals(tn);
            const double cn = cost(rn);
            if (cn < c) {
                t = std::move(tn);
                r = rn;
                c = cn;
                lambda = std::max(lambda / 3.0, 1e-12);
                accepted = step_norm > 1e-12;
                break;
            }
            lambda *= 4.0;
        }
        if (!accepted) break;
    }
    return t;
}

}  // namespace

MaterialModel fit_metal_poles(const std::vector<MaterialSample>& table, Band band_nm,
                              int n_poles, std::string name, double tolerance) {
    if (n_poles < 1) throw std::invalid_argument("pole fit requires n_poles >= 1");
    if (!(band_nm.lo_nm > 0.0 && band_nm.hi_nm > band_nm.lo_nm))
        throw std::invalid_argument("pole fit requires a non-empty positive band");
    if (table.size() < 2) throw std::invalid_argument("pole fit requires >= 2 table rows");
    if (table.front().wavelength_nm > band_nm.lo_nm ||
        table.back().wavelength_nm < band_nm.hi_nm)
        throw std::invalid_argument("material tabulation does not cover the fit band");

    // Fit samples: tabulated points inside the band plus the linearly
    // interpolated values at the exact band edges.
    auto interp = [&](double lambda) {
        auto hi = std::lower_bound(table.begin(), table.end(), lambda,
                                   [](const MaterialSample& s, double v) {
                                       return s.wavelength_nm < v;
                                   });
        if (hi == table.begin()) return hi->eps;
        auto lo = hi - 1;
        if (hi == table.end() || lo->wavelength_nm == lambda) return lo->eps;
        const double f = (lambda - lo->wavelength_nm) / (hi->wavelength_nm - lo->wavelength_nm);
        return lo->eps * (1.0 - f) + hi->eps * f;
    };
    const double omega_ref = omega_of_wavelength(0.5 * (band_nm.lo_nm + band_nm.hi_nm) * nm);
    std::vector<FitSample> samples;
    auto push = [&](double lambda, std::complex<double> eps) {
        samples.push_back({omega_of_wavelength(lambda * nm) / omega_ref, eps});
    };
    push(band_nm.lo_nm, interp(band_nm.lo_nm));
    for (const MaterialSample& s : table)
        if (s.wavelength_nm > band_nm.lo_nm && s.wavelength_nm < band_nm.hi_nm)
            push(s.wavelength_nm, s.eps);
    push(band_nm.hi_nm, interp(band_nm.hi_nm));

    // Drude seed from the sample nearest the band center.
    const FitSample& mid = samples[samples.size() / 2];
    double eps_inf0 = 0.0;
    for (const FitSample& s : samples) eps_inf0 += s.eps.real();
    eps_inf0 = std::max(1.0, eps_inf0 / static_cast<double>(samples.size()));
    const double drude_gap = eps_inf0 - mid.eps.real();
    double g0 = drude_gap > 0.0 ? std::max(mid.eps.imag() * mid.w / drude_gap, 1e-3) : 1e-2;
    double s0 = drude_gap > 0.0 ? drude_gap * (mid.w * mid.w + g0 * g0) : 1e-4;

    // Resonances are confined below the equivalent of a 200 nm wavelength:
    // real interband structure sits there, and bounded poles keep the
    // time-domain polarization update resolvable at practical steps.
    const double w0_cap = omega_of_wavelength(200.0 * nm) / omega_ref;
    auto raw_for = [&](double w0_scaled) {
        const double v = std::min(w0_scaled / w0_cap, 0.95);
        return v / std::sqrt(1.0 - v * v);
    };
    auto raw_for_gamma = [&](double g_scaled) {
        const double v = std::min(g_scaled / w0_cap, 0.95);
        return std::sqrt(v / (1.0 - v));
    };

    std::vector<double> best;
    double best_err = 1e300;
    for (double w0_seed : {2.0, 1.5, 2.8, 1.2}) {
        std::vector<double> t(3 * static_cast<std::size_t>(n_poles));
        t[0] = std::sqrt(std::max(eps_inf0 - 1.0, 0.25));
        t[1] = std::sqrt(s0);
        t[2] = raw_for_gamma(g0);
        for (int p = 1; p < n_poles; ++p) {
            t[3 * p] = 0.01;
            t[3 * p + 1] = raw_for(w0_seed + 0.5 * (p - 1));
            t[3 * p + 2] = raw_for_gamma(0.3);
        }
        t = lm_fit(std::move(t), n_poles, samples, w0_cap);
        const double err = max_rel_error(t, n_poles, samples, w0_cap);
        if (err < best_err) {
            best_err = err;
            best = std::move(t);
        }
        if (best_err < 0.5 * tolerance) break;
    }

    if (best_err > tolerance) {
        char msg[160];
        std::snprintf(msg, sizeof msg,
                      "pole fit for '%s' reached %.3f%% max relative error, above the "
                      "%.3f%% tolerance",
                      name.c_str(), 100.0 * best_err, 100.0 * tolerance);
        throw std::runtime_error(msg);
    }

    MaterialModel m;
    m.kind = MaterialKind::DispersivePoleModel;
    m.name = std::move(name);
    m.refractive_index = 0.0;
    m.epsilon_infinity = 1.0 + best[0] * best[0];
    m.fit_band_nm = band_nm;
    m.fit_residual = best_err;
    m.poles.push_back({best[1] * best[1] * omega_ref * omega_ref, 0.0,
                       bounded_gamma(best[2], w0_cap) * omega_ref});
    for (int p = 1; p < n_poles; ++p)
        m.poles.push_back({best[3 * p] * best[3 * p] * omega_ref * omega_ref,
                           std::fabs(bounded_w0(best[3 * p + 1], w0_cap)) * omega_ref,
                           bounded_gamma(best[3 * p + 2], w0_cap) * omega_ref});
    return m;
}

std::array<double, 3> SceneSpec::dipole_position_nm() const {
    double px = 0.0, py = 0.0;
    if (dipole_lateral_offset_nm != 0.0) {
        const double inplane = std::hypot(dipole_orientation[0], dipole_orientation[1]);
        px = dipole_lateral_offset_nm * dipole_orientation[0] / inplane;
        py = dipole_lateral_offset_nm * dipole_orientation[1] / inplane;
    }
    return {px, py, wire_top_z_nm() - dipole_offset_from_top_nm};
}

void SceneSpec::validate() const {
    if (!(diameter_nm > 0.0)) throw std::invalid_argument("diameter_nm must be > 0");
    if (!(crown_height_nm >= 0.0)) throw std::invalid_argument("crown_height_nm must be >= 0");
    if (!(height_nm > crown_height_nm))
        throw std::invalid_argument("height_nm must exceed crown_height_nm");
    if (!(oxide_thickness_nm >= 0.0))
        throw std::invalid_argument("oxide_thickness_nm must be >= 0");
    if (!(nanowire_index >= 1.0) || !(oxide_index >= 1.0))
        throw std::invalid_argument("refractive indices must be >= 1");
    if (!(center_wavelength_nm > 0.0))
        throw std::invalid_argument("center_wavelength_nm must be > 0");
    if (!(band_halfwidth_nm > 0.0 && band_halfwidth_nm < center_wavelength_nm))
        throw std::invalid_argument("band_halfwidth_nm must lie in (0, center_wavelength)");
    const double norm = std::sqrt(dipole_orientation[0] * dipole_orientation[0] +
                                  dipole_orientation[1] * dipole_orientation[1] +
                                  dipole_orientation[2] * dipole_orientation[2]);
    if (!(norm > 0.0)) throw std::invalid_argument("dipole_orientation must be nonzero");
    if (dipole_lateral_offset_nm != 0.0 &&
        !(std::hypot(dipole_orientation[0], dipole_orientation[1]) > 0.0))
        throw std::invalid_argument(
            "dipole_lateral_offset_nm requires an in-plane polarization component");

    if (!(dipole_offset_from_top_nm > 0.0 && dipole_offset_from_top_nm < height_nm))
        throw std::invalid_argument("dipole must sit strictly inside the wire in z");
    const auto p = dipole_position_nm();
    double side = 0.5 * diameter_nm;
    if (crown_height_nm > 0.0 && dipole_offset_from_top_nm < crown_height_nm)
        side *= dipole_offset_from_top_nm / crown_height_nm;
    if (!(hexagon_excess(p[0], p[1], side) < 0.0))
        throw std::invalid_argument("dipole lies outside the nanowire cross-section");
}

int MaterialGrid::material_index(const std::string& name) const {
    for (std::size_t i = 0; i < materials.size(); ++i)
        if (materials[i].name == name) return static_cast<int>(i);
    return -1;
}

long long MaterialGrid::count_cells(const std::string& name) const {
    const int idx = material_index(name);
    if (idx < 0) return 0;
    long long n = 0;
    for (std::uint8_t m : cell_material)
        if (m == idx) ++n;
    return n;
}

namespace {

struct Rasterizer {
    const SceneSpec& spec;
    double t_ox;        // rendered oxide thickness (0 when mirror disabled)
    double zb, zt;      // wire base/top
    double side;
    int air = 0, wire = 1, oxide = -1, gold = -1;

    explicit Rasterizer(const SceneSpec& s)
        : spec(s),
          t_ox(s.mirror_enabled ? s.oxide_thickness_nm : 0.0),
          zb(s.wire_base_z_nm()),
          zt(s.wire_top_z_nm()),
          side(0.5 * s.diameter_nm) {}

    int material_at(double x, double y, double z) const {
        if (z < 0.0) return spec.mirror_enabled ? gold : air;
        if (z < t_ox) return oxide;
        if (z >= zb && z < zt) {
            double s = side;
            if (spec.crown_height_nm > 0.0 && z > zt - spec.crown_height_nm)
                s *= (zt - z) / spec.crown_height_nm;
            if (inside_hexagon(x, y, s)) return wire;
        }
        return air;
    }
};

}  // namespace

MaterialGrid rasterize(const SceneSpec& spec, double resolution_nm,
                       const DomainPadding& padding, const std::optional<MaterialModel>& gold) {
    spec.validate();
    if (!(resolution_nm > 0.0)) throw std::invalid_argument("resolution_nm must be > 0");
    if (!(padding.lateral_nm >= 0.0 && padding.below_nm >= 0.0 && padding.above_nm >= 0.0))
        throw std::invalid_argument("padding must be >= 0");

    MaterialGrid g;
    const double dx = resolution_nm;
    const int nhalf = static_cast<int>(
        std::ceil((0.5 * spec.diameter_nm + padding.lateral_nm) / dx - 1e-12));
    const int kpad = static_cast<int>(std::ceil(padding.below_nm / dx - 1e-12));
    const int kup =
        static_cast<int>(std::ceil((spec.wire_top_z_nm() + padding.above_nm) / dx - 1e-12));
    g.layout.nx = g.layout.ny = 2 * nhalf;
    g.layout.nz = kpad + kup;
    g.layout.dx_nm = dx;
    g.layout.x0_nm = g.layout.y0_nm = -nhalf * dx;
    g.layout.z0_nm = -kpad * dx;

    g.materials.push_back(MaterialModel::constant("air", 1.0));
    g.materials.push_back(MaterialModel::constant("nanowire", spec.nanowire_index));
    Rasterizer rz(spec);
    if (spec.mirror_enabled && spec.oxide_thickness_nm > 0.0) {
        rz.oxide = static_cast<int>(g.materials.size());
        g.materials.push_back(MaterialModel::constant("oxide", spec.oxide_index));
    }
    if (spec.mirror_enabled) {
        rz.gold = static_cast<int>(g.materials.size());
        if (gold) {
            MaterialModel m = *gold;
            m.name = "gold";
            g.materials.push_back(std::move(m));
        } else {
            // Placeholder so geometry work can proceed; the FDTD runner
            // rejects dispersive materials with no poles.
            MaterialModel m;
            m.kind = MaterialKind::DispersivePoleModel;
            m.name = "gold";
            g.materials.push_back(std::move(m));
        }
    }
    if (spec.mirror_enabled && spec.oxide_thickness_nm > 0.0 &&
        spec.oxide_thickness_nm < resolution_nm)
        g.warnings.push_back("oxide layer thinner than one cell; rendered by sub-cell averaging");

    const int nx = g.layout.nx, ny = g.layout.ny, nz = g.layout.nz;
    g.cell_material.assign(static_cast<std::size_t>(g.layout.cells()), 0);
#pragma omp parallel for schedule(static)
    for (int k = 0; k < nz; ++k) {
        const double z = g.layout.z_node(k) + 0.5 * dx;
        for (int j = 0; j < ny; ++j) {
            const double y = g.layout.y_node(j) + 0.5 * dx;
            for (int i = 0; i < nx; ++i) {
                const double x = g.layout.x_node(i) + 0.5 * dx;
                g.cell_material[g.layout.cell_id(i, j, k)] =
                    static_cast<std::uint8_t>(rz.material_at(x, y, z));
            }
        }
    }

    // Per-edge permittivity at each E-edge midpoint. Staircase by midpoint
    // material except across the oxide top plane, where the edge's dual cell
    // is z-averaged in volume fraction (the slab is laterally uniform, so the
    // z overlap is exact). Spans touching the gold half-space stay staircase:
    // the dispersive update cannot mix materials.
    auto base_eps = [&](int id) { return g.materials[id].epsilon_infinity; };
    const bool can_avg = spec.mirror_enabled && spec.oxide_thickness_nm > 0.0;
    for (int c = 0; c < 3; ++c) {
        g.edge_eps_rel[c].assign(static_cast<std::size_t>(g.layout.nodes()), 1.0);
        g.edge_material[c].assign(static_cast<std::size_t>(g.layout.nodes()), 0);
        const double ox = c == 0 ? 0.5 * dx : 0.0;
        const double oy = c == 1 ? 0.5 * dx : 0.0;
        const double oz = c == 2 ? 0.5 * dx : 0.0;
#pragma omp parallel for schedule(static)
        for (int k = 0; k <= nz; ++k) {
            const double zm = g.layout.z_node(k) + oz;
            const double zlo = zm - 0.5 * dx, zhi = zm + 0.5 * dx;
            for (int j = 0; j <= ny; ++j) {
                const double ym = g.layout.y_node(j) + oy;
                for (int i = 0; i <= nx; ++i) {
                    const double xm = g.layout.x_node(i) + ox;
                    const long long id = g.layout.node_id(i, j, k);
                    const int mid = rz.material_at(xm, ym, zm);
                    g.edge_material[c][id] = static_cast<std::uint8_t>(mid);
                    if (can_avg && zlo >= 0.0 && zlo < rz.t_ox && zhi > rz.t_ox) {
                        const double f_ox = (rz.t_ox - zlo) / (zhi - zlo);
                        const int rest = rz.material_at(xm, ym, 0.5 * (rz.t_ox + zhi));
                        g.edge_eps_rel[c][id] =
                            f_ox * base_eps(rz.oxide) + (1.0 - f_ox) * base_eps(rest);
                    } else {
                        g.edge_eps_rel[c][id] = base_eps(mid);
                    }
                }
            }
        }
    }
    return g;
}

MaterialGrid rasterize(const SceneSpec& spec, double resolution_nm,
                       double domain_padding_nm, const std::optional<MaterialModel>& gold) {
    return rasterize(spec, resolution_nm,
                     DomainPadding{domain_padding_nm, domain_padding_nm, domain_padding_nm},
                     gold);
}

}  // namespace nwcav::scene
