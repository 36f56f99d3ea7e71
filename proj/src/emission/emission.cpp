#include "nwcav/emission/emission.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "nwcav/units.hpp"

namespace nwcav::emission {

namespace {

constexpr double kDegree = pi / 180.0;

// Quadratic vertex through three samples, tolerant of uneven spacing.
void quadratic_vertex(double x1, double y1, double x2, double y2, double x3, double y3,
                      double& xv, double& yv) {
    const double num = (y1 - y2) * (x3 - x2) * (x3 - x2) - (y3 - y2) * (x2 - x1) * (x2 - x1);
    const double den = (y1 - y2) * (x3 - x2) + (y3 - y2) * (x2 - x1);
    if (den >= 0.0) {  // flat or concave-up triple: keep the grid sample
        xv = x2;
        yv = y2;
        return;
    }
    xv = x2 + 0.5 * num / den;
    const double l1 = (xv - x2) * (xv - x3) / ((x1 - x2) * (x1 - x3));
    const double l2 = (xv - x1) * (xv - x3) / ((x2 - x1) * (x2 - x3));
    const double l3 = (xv - x1) * (xv - x2) / ((x3 - x1) * (x3 - x2));
    yv = y1 * l1 + y2 * l2 + y3 * l3;
}

}  // namespace

PeakInfo find_peak_fwhm(const std::vector<double>& wavelength_nm,
                        const std::vector<double>& value) {
    const std::size_t n = wavelength_nm.size();
    if (n != value.size()) throw std::invalid_argument("wavelength and value sizes differ");
    if (n < 3) throw std::invalid_argument("need at least three spectral samples");
    for (std::size_t i = 1; i < n; ++i)
        if (!(wavelength_nm[i] > wavelength_nm[i - 1]))
            throw std::invalid_argument("wavelengths must be strictly ascending");

    const std::size_t m = static_cast<std::size_t>(
        std::distance(value.begin(), std::max_element(value.begin(), value.end())));
    if (m == 0 || m == n - 1)
        throw std::runtime_error(
            "spectral peak lies at the edge of the analysis band; widen the band");

    PeakInfo out;
    quadratic_vertex(wavelength_nm[m - 1], value[m - 1], wavelength_nm[m], value[m],
                     wavelength_nm[m + 1], value[m + 1], out.wavelength_nm, out.value);

    const double half = 0.5 * out.value;
    auto cross = [&](std::size_t lo, std::size_t hi) {
        const double t = (half - value[lo]) / (value[hi] - value[lo]);
        return wavelength_nm[lo] + t * (wavelength_nm[hi] - wavelength_nm[lo]);
    };

    double left = wavelength_nm.front();
    bool left_found = false;
    for (std::size_t i = m; i-- > 0;) {
        if (value[i] <= half) {
            left = cross(i, i + 1);
            left_found = true;
            break;
        }
    }
    double right = wavelength_nm.back();
    bool right_found = false;
    for (std::size_t i = m + 1; i < n; ++i) {
        if (value[i] <= half) {
            right = cross(i, i - 1);
            right_found = true;
            break;
        }
    }
    out.fwhm_nm = right - left;
    out.fwhm_is_lower_bound = !(left_found && right_found);
    return out;
}

PurcellSpectrum purcell_spectrum(const fdtd::RunResult& cavity,
                                 const fdtd::RunResult& vacuum_reference,
                                 const std::string& monitor_name) {
    const auto& mc = cavity.monitor(monitor_name);
    const auto& mv = vacuum_reference.monitor(monitor_name);
    const auto& lc = mc.spec.wavelengths_nm;
    const auto& lv = mv.spec.wavelengths_nm;
    if (lc.size() != lv.size())
        throw std::invalid_argument("cavity and reference runs sample different bands");
    for (std::size_t k = 0; k < lc.size(); ++k)
        if (std::abs(lc[k] - lv[k]) > 1e-9 * lc[k])
            throw std::invalid_argument("cavity and reference runs sample different bands");
    if (vacuum_reference.under_resolved)
        throw std::invalid_argument("reference run did not converge; rerun it longer");

    PurcellSpectrum out;
    out.wavelength_nm = lc;
    out.f_p.resize(lc.size());
    out.flagged_under_resolved = cavity.under_resolved;
    for (std::size_t k = 0; k < lc.size(); ++k) {
        const double jc = std::norm(mc.source_current.at(k));
        const double jv = std::norm(mv.source_current.at(k));
        if (jc <= 0.0 || jv <= 0.0)
            throw std::runtime_error("source spectrum vanishes inside the analysis band");
        const double pv = mv.power_w[k] / jv;
        if (pv <= 0.0)
            throw std::runtime_error("reference run radiates no power inside the band");
        out.f_p[k] = (mc.power_w[k] / jc) / pv;
    }

    std::ostringstream ref;
    ref << "reference: " << vacuum_reference.steps << " steps, " << vacuum_reference.termination
        << ", dipole at (" << vacuum_reference.source_position_nm[0] << ", "
        << vacuum_reference.source_position_nm[1] << ", "
        << vacuum_reference.source_position_nm[2] << ") nm";
    out.reference = ref.str();

    try {
        out.peak = find_peak_fwhm(out.wavelength_nm, out.f_p);
    } catch (const std::exception&) {
        out.peak.reset();  // flat or edge-peaked spectrum carries no annotation
    }
    return out;
}

PeakInfo find_peak_fwhm(const PurcellSpectrum& spectrum) {
    return find_peak_fwhm(spectrum.wavelength_nm, spectrum.f_p);
}

namespace {

// Direction cosines and the spherical unit vectors for one sample direction.
struct Direction {
    double u[3];
    double th[3];
    double ph[3];
};

Direction make_direction(double theta, double phi) {
    const double st = std::sin(theta), ct = std::cos(theta);
    const double sp = std::sin(phi), cp = std::cos(phi);
    Direction d;
    d.u[0] = st * cp;
    d.u[1] = st * sp;
    d.u[2] = ct;
    d.th[0] = ct * cp;
    d.th[1] = ct * sp;
    d.th[2] = -st;
    d.ph[0] = -sp;
    d.ph[1] = cp;
    d.ph[2] = 0.0;
    return d;
}

struct FaceGeometry {
    const fdtd::FaceResult* face;
    int ua, va;              // tangential axes (axis+1)%3, (axis+2)%3
    std::vector<double> cu;  // tangential cell-center coordinates, metres
    std::vector<double> cv;
    double ca;               // plane coordinate on the normal axis, metres
};

// One face's contribution to the radiation integrals N = S J e^{-ik r.r'} dA
// and L likewise for M, for one direction. `image` radiates the face's
// reflection in the conductor plane instead: positions z -> 2 zp - z, currents
// (Jx,Jy,Jz) -> (-Jx,-Jy,+Jz) and (Mx,My,Mz) -> (+Mx,+My,-Mz).
void accumulate_face(const FaceGeometry& g, std::size_t lam, const Direction& d, double k_wave,
                     bool image, double plane_z_m, double cell_area,
                     std::complex<double> (&n_int)[3], std::complex<double> (&l_int)[3]) {
    const auto& f = *g.face;
    const int a = f.axis;
    const long long na = f.a1 - f.a0;
    const long long nb = f.b1 - f.b0;

    auto coord = [&](int axis_id, double val) {
        return (image && axis_id == 2) ? 2.0 * plane_z_m - val : val;
    };

    // The phase factorizes over the two tangential axes; exp() once per row
    // and column instead of once per cell.
    static thread_local std::vector<std::complex<double>> wu, wv;
    wu.resize(static_cast<std::size_t>(na));
    wv.resize(static_cast<std::size_t>(nb));
    for (long long p = 0; p < na; ++p)
        wu[static_cast<std::size_t>(p)] =
            std::polar(1.0, -k_wave * d.u[g.ua] * coord(g.ua, g.cu[static_cast<std::size_t>(p)]));
    for (long long q = 0; q < nb; ++q)
        wv[static_cast<std::size_t>(q)] =
            std::polar(1.0, -k_wave * d.u[g.va] * coord(g.va, g.cv[static_cast<std::size_t>(q)]));
    const std::complex<double> base = std::polar(1.0, -k_wave * d.u[a] * coord(a, g.ca));

    // J = n x H and M = -n x E with n = sign * a-hat:
    //   J_u = -s h2, J_v = +s h1, M_u = +s e2, M_v = -s e1.
    const double s = static_cast<double>(f.sign);
    double ju_s = -s, jv_s = s, mu_s = s, mv_s = -s;
    if (image) {
        ju_s *= (g.ua == 2) ? 1.0 : -1.0;
        jv_s *= (g.va == 2) ? 1.0 : -1.0;
        mu_s *= (g.ua == 2) ? -1.0 : 1.0;
        mv_s *= (g.va == 2) ? -1.0 : 1.0;
    }

    const std::size_t off = lam * static_cast<std::size_t>(f.ncells());
    std::complex<double> nu = 0.0, nv = 0.0, lu = 0.0, lv = 0.0;
    for (long long q = 0; q < nb; ++q) {
        const std::complex<double> row = base * wv[static_cast<std::size_t>(q)];
        const std::size_t roff = off + static_cast<std::size_t>(q * na);
        std::complex<double> rnu = 0.0, rnv = 0.0, rlu = 0.0, rlv = 0.0;
        for (long long p = 0; p < na; ++p) {
            const std::complex<double> ph = wu[static_cast<std::size_t>(p)];
            const std::size_t c = roff + static_cast<std::size_t>(p);
            rnu += f.h2[c] * ph;
            rnv += f.h1[c] * ph;
            rlu += f.e2[c] * ph;
            rlv += f.e1[c] * ph;
        }
        nu += rnu * row;
        nv += rnv * row;
        lu += rlu * row;
        lv += rlv * row;
    }
    n_int[g.ua] += ju_s * cell_area * nu;
    n_int[g.va] += jv_s * cell_area * nv;
    l_int[g.ua] += mu_s * cell_area * lu;
    l_int[g.va] += mv_s * cell_area * lv;
}

}  // namespace

FarField near_to_far(const fdtd::MonitorResult& box, const scene::GridLayout& layout,
                     std::size_t wavelength_index, const FarFieldOptions& opt) {
    if (wavelength_index >= box.spec.wavelengths_nm.size())
        throw std::out_of_range("wavelength index outside the monitor band");
    if (box.faces.empty()) throw std::invalid_argument("monitor has no faces");
    if (opt.theta_step_deg <= 0.0 || opt.phi_step_deg <= 0.0 || opt.theta_max_deg <= 0.0 ||
        opt.theta_max_deg > 180.0)
        throw std::invalid_argument("bad far-field grid options");
    for (const auto& f : box.faces)
        if (!f.all_air)
            throw std::invalid_argument(
                "near-to-far surface cuts through material; enlarge the monitor box");

    const double lam_nm = box.spec.wavelengths_nm[wavelength_index];
    const double k_wave = 2.0 * pi / (lam_nm * nm);
    const double dx_m = layout.dx_nm * nm;
    const double cell_area = dx_m * dx_m;
    const bool with_image = opt.mirror_plane_z_nm.has_value();
    const double plane_z_m = with_image ? *opt.mirror_plane_z_nm * nm : 0.0;

    std::vector<FaceGeometry> geom;
    geom.reserve(box.faces.size());
    for (const auto& f : box.faces) {
        FaceGeometry g;
        g.face = &f;
        g.ua = (f.axis + 1) % 3;
        g.va = (f.axis + 2) % 3;
        const double org[3] = {layout.x0_nm, layout.y0_nm, layout.z0_nm};
        g.ca = (org[f.axis] + f.plane * layout.dx_nm) * nm;
        g.cu.resize(static_cast<std::size_t>(f.a1 - f.a0));
        for (int p = f.a0; p < f.a1; ++p)
            g.cu[static_cast<std::size_t>(p - f.a0)] = (org[g.ua] + (p + 0.5) * layout.dx_nm) * nm;
        g.cv.resize(static_cast<std::size_t>(f.b1 - f.b0));
        for (int q = f.b0; q < f.b1; ++q)
            g.cv[static_cast<std::size_t>(q - f.b0)] = (org[g.va] + (q + 0.5) * layout.dx_nm) * nm;
        geom.push_back(std::move(g));
    }

    FarField out;
    out.wavelength_nm = lam_nm;
    const int nth = static_cast<int>(std::lround(opt.theta_max_deg / opt.theta_step_deg)) + 1;
    const int nph = static_cast<int>(std::lround(360.0 / opt.phi_step_deg));
    out.theta_deg.resize(static_cast<std::size_t>(nth));
    for (int it = 0; it < nth; ++it) out.theta_deg[static_cast<std::size_t>(it)] = it * opt.theta_step_deg;
    out.phi_deg.resize(static_cast<std::size_t>(nph));
    for (int ip = 0; ip < nph; ++ip) out.phi_deg[static_cast<std::size_t>(ip)] = ip * opt.phi_step_deg;
    const std::size_t ndir = static_cast<std::size_t>(nth) * static_cast<std::size_t>(nph);
    out.e_theta.resize(ndir);
    out.e_phi.resize(ndir);
    out.power_density.resize(ndir);

    // Radiated field in the e^{-iwt} convention: E_th = ik/(4pi) (eta0 N_th + L_ph),
    // E_ph = ik/(4pi) (eta0 N_ph - L_th), with the e^{ikr}/r factor stripped.
    const std::complex<double> front(0.0, k_wave / (4.0 * pi));
#pragma omp parallel for schedule(static)
    for (int it = 0; it < nth; ++it) {
        for (int ip = 0; ip < nph; ++ip) {
            const Direction d =
                make_direction(out.theta_deg[static_cast<std::size_t>(it)] * kDegree,
                               out.phi_deg[static_cast<std::size_t>(ip)] * kDegree);
            std::complex<double> n_int[3] = {0.0, 0.0, 0.0};
            std::complex<double> l_int[3] = {0.0, 0.0, 0.0};
            for (const auto& g : geom) {
                accumulate_face(g, wavelength_index, d, k_wave, false, plane_z_m, cell_area,
                                n_int, l_int);
                if (with_image)
                    accumulate_face(g, wavelength_index, d, k_wave, true, plane_z_m, cell_area,
                                    n_int, l_int);
            }
            std::complex<double> n_th = 0.0, n_ph = 0.0, l_th = 0.0, l_ph = 0.0;
            for (int ax = 0; ax < 3; ++ax) {
                n_th += n_int[ax] * d.th[ax];
                n_ph += n_int[ax] * d.ph[ax];
                l_th += l_int[ax] * d.th[ax];
                l_ph += l_int[ax] * d.ph[ax];
            }
            const std::size_t idx =
                static_cast<std::size_t>(it) * static_cast<std::size_t>(nph) + static_cast<std::size_t>(ip);
            out.e_theta[idx] = front * (eta0 * n_th + l_ph);
            out.e_phi[idx] = front * (eta0 * n_ph - l_th);
            out.power_density[idx] =
                (std::norm(out.e_theta[idx]) + std::norm(out.e_phi[idx])) / (2.0 * eta0);
        }
    }

    // Trapezoid in theta against sin(theta), uniform periodic sum in phi.
    const double dth = opt.theta_step_deg * kDegree;
    const double dph = opt.phi_step_deg * kDegree;
    double total = 0.0;
    for (int it = 0; it < nth; ++it) {
        double ring = 0.0;
        for (int ip = 0; ip < nph; ++ip)
            ring += out.power_density[static_cast<std::size_t>(it) * static_cast<std::size_t>(nph) +
                                      static_cast<std::size_t>(ip)];
        const double wt = (it == 0 || it == nth - 1) ? 0.5 : 1.0;
        total += wt * ring * std::sin(out.theta_deg[static_cast<std::size_t>(it)] * kDegree);
    }
    out.total_power_w = total * dth * dph;
    return out;
}

double extraction_efficiency(const FarField& far, double numerical_aperture,
                             double total_emitted_power_w) {
    if (!(total_emitted_power_w > 0.0))
        throw std::invalid_argument("total emitted power must be positive");
    if (numerical_aperture < 0.0 || numerical_aperture > 1.0)
        throw std::invalid_argument("numerical aperture must lie in [0, 1]");
    if (numerical_aperture == 0.0) return 0.0;
    const double theta_c = std::asin(numerical_aperture) / kDegree;
    if (theta_c > far.theta_deg.back() + 1e-9)
        throw std::invalid_argument("far field does not cover the requested aperture");

    const std::size_t nph = far.phi_deg.size();
    const double dph = (nph > 1 ? far.phi_deg[1] - far.phi_deg[0] : 360.0) * kDegree;
    auto ring = [&](std::size_t it) {
        double sum = 0.0;
        for (std::size_t ip = 0; ip < nph; ++ip) sum += far.power_density[it * nph + ip];
        return sum * dph * std::sin(far.theta_deg[it] * kDegree);
    };

    double acc = 0.0;
    for (std::size_t it = 0; it + 1 < far.theta_deg.size(); ++it) {
        const double t0 = far.theta_deg[it], t1 = far.theta_deg[it + 1];
        if (t0 >= theta_c) break;
        const double f0 = ring(it), f1 = ring(it + 1);
        if (t1 <= theta_c) {
            acc += 0.5 * (f0 + f1) * (t1 - t0) * kDegree;
        } else {
            // Partial last interval up to the exact aperture angle.
            const double t = (theta_c - t0) / (t1 - t0);
            const double fc = f0 + t * (f1 - f0);
            acc += 0.5 * (f0 + fc) * (theta_c - t0) * kDegree;
            break;
        }
    }
    return acc / total_emitted_power_w;
}

namespace {

// Overlap against an x-polarized angular Gaussian with half-angle theta0.
double overlap_at(const FarField& far, double theta0_deg, bool intensity_only) {
    const std::size_t nth = far.theta_deg.size();
    const std::size_t nph = far.phi_deg.size();
    const double dth = (nth > 1 ? far.theta_deg[1] - far.theta_deg[0] : 1.0) * kDegree;
    const double dph = (nph > 1 ? far.phi_deg[1] - far.phi_deg[0] : 360.0) * kDegree;
    const double t0 = theta0_deg * kDegree;

    std::complex<double> cross = 0.0;
    double cross_int = 0.0, norm_e = 0.0, norm_g = 0.0;
    for (std::size_t it = 0; it < nth; ++it) {
        const double th = far.theta_deg[it] * kDegree;
        const double wt = ((it == 0 || it == nth - 1) ? 0.5 : 1.0) * std::sin(th) * dth * dph;
        const double g = std::exp(-th * th / (t0 * t0));
        for (std::size_t ip = 0; ip < nph; ++ip) {
            const std::size_t idx = it * nph + ip;
            const double phi = far.phi_deg[ip] * kDegree;
            const double gth = g * std::cos(phi), gph = -g * std::sin(phi);
            if (intensity_only) {
                cross_int += std::sqrt(far.power_density[idx]) * g * wt;
                norm_e += far.power_density[idx] * wt;
            } else {
                cross += (far.e_theta[idx] * gth + far.e_phi[idx] * gph) * wt;
                norm_e += (std::norm(far.e_theta[idx]) + std::norm(far.e_phi[idx])) * wt;
            }
            norm_g += (gth * gth + gph * gph) * wt;
        }
    }
    if (norm_e <= 0.0 || norm_g <= 0.0) return 0.0;
    const double num = intensity_only ? cross_int * cross_int : std::norm(cross);
    return num / (norm_e * norm_g);
}

}  // namespace

OverlapResult gaussian_overlap(const FarField& far, const OverlapOptions& opt) {
    if (opt.theta_min_deg <= 0.0 || opt.theta_max_deg <= opt.theta_min_deg)
        throw std::invalid_argument("bad waist search interval");

    // A coarse scan brackets the maximum before golden-section refinement;
    // the scan guards against secondary lobes fooling a pure golden search.
    const int n_scan = 24;
    double best_t = opt.theta_min_deg, best_v = -1.0;
    for (int i = 0; i <= n_scan; ++i) {
        const double t = opt.theta_min_deg +
                         (opt.theta_max_deg - opt.theta_min_deg) * i / static_cast<double>(n_scan);
        const double v = overlap_at(far, t, opt.intensity_only);
        if (v > best_v) {
            best_v = v;
            best_t = t;
        }
    }
    const double step = (opt.theta_max_deg - opt.theta_min_deg) / n_scan;
    double lo = std::max(opt.theta_min_deg, best_t - step);
    double hi = std::min(opt.theta_max_deg, best_t + step);
    const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
    double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
    double f1 = overlap_at(far, x1, opt.intensity_only);
    double f2 = overlap_at(far, x2, opt.intensity_only);
    while (hi - lo > 1e-4) {
        if (f1 < f2) {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + gr * (hi - lo);
            f2 = overlap_at(far, x2, opt.intensity_only);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - gr * (hi - lo);
            f1 = overlap_at(far, x1, opt.intensity_only);
        }
    }
    OverlapResult out;
    out.theta_deg = 0.5 * (lo + hi);
    out.efficiency = overlap_at(far, out.theta_deg, opt.intensity_only);
    if (best_v > out.efficiency) {  // the refinement never loses to the scan
        out.efficiency = best_v;
        out.theta_deg = best_t;
    }
    return out;
}

}  // namespace nwcav::emission
