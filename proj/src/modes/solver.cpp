#include "nwcav/modes/solver.hpp"

#include "nwcav/units.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <stdexcept>

namespace nwcav::modes {

namespace {

// J and K for integer order with the order -1 identities, so the l = 0
// recurrences fall out of the general expressions.
double bj(int n, double x) {
    if (n < 0) return (((-n) % 2) ? -1.0 : 1.0) * std::cyl_bessel_j(double(-n), x);
    return std::cyl_bessel_j(double(n), x);
}

double bk(int n, double x) {
    return std::cyl_bessel_k(double(std::abs(n)), x);
}

// Characteristic equation pieces at one candidate n_eff. With
// A = J_l'(u)/(u J_l(u)), B = K_l'(w)/(w K_l(w)), nu = (n2/n1)^2 the exact
// dispersion relation (A+B)(A+nu*B) = l^2 (1/u^2+1/w^2)(1/u^2+nu/w^2)
// factors into f_plus * f_minus; f_plus roots are TM/HE, f_minus TE/EH.
// Everything is evaluated in the u^2 w^2 / V^2 rescaled form, which has the
// same sign pattern and roots but stays bounded at the cutoffs (w -> 0), so
// barely-guided roots survive the residual filter.
struct BranchEval {
    double u = 0, w = 0;
    double f_plus = 0, f_minus = 0, f_full = 0;
    double s_ratio = 0;
    bool valid = false;
};

struct GuideConsts {
    double n1, n2, nu, ak0, v;
};

GuideConsts consts_of(const GuideSpec& g) {
    GuideConsts c;
    c.n1 = g.core_index;
    c.n2 = g.clad_index;
    c.nu = (c.n2 * c.n2) / (c.n1 * c.n1);
    c.ak0 = pi * g.core_diameter_nm / g.wavelength_nm;
    c.v = c.ak0 * std::sqrt(c.n1 * c.n1 - c.n2 * c.n2);
    return c;
}

BranchEval eval_branches(const GuideConsts& c, int l, double ne) {
    BranchEval e;
    double du2 = c.n1 * c.n1 - ne * ne;
    double dw2 = ne * ne - c.n2 * c.n2;
    if (du2 <= 0 || dw2 <= 0) return e;
    e.u = c.ak0 * std::sqrt(du2);
    e.w = c.ak0 * std::sqrt(dw2);
    double u2 = e.u * e.u, w2 = e.w * e.w, v2 = u2 + w2;
    // At = u^2 A, Bt = w^2 B; both stay O(l) at their endpoints.
    double At = e.u * (bj(l - 1, e.u) - bj(l + 1, e.u)) / (2.0 * bj(l, e.u));
    double Bt = -e.w * (bk(l - 1, e.w) + bk(l + 1, e.w)) / (2.0 * bk(l, e.w));
    double rhs = double(l) * double(l) * v2 * (e.w * e.w + c.nu * u2);
    double p = 0.5 * (1.0 + c.nu) * u2 * Bt;
    double q = 0.5 * (1.0 - c.nu) * u2 * Bt;
    double R = std::sqrt(q * q + rhs);
    e.f_plus = (w2 * At + p + R) / v2;
    e.f_minus = (w2 * At + p - R) / v2;
    e.f_full = ((w2 * At + u2 * Bt) * (w2 * At + c.nu * u2 * Bt) - rhs) / (v2 * v2);
    e.s_ratio = (l == 0) ? 0.0 : -double(l) * v2 / (w2 * At + u2 * Bt);
    e.valid = std::isfinite(e.f_plus) && std::isfinite(e.f_minus);
    return e;
}

double branch_value(const GuideConsts& c, int l, bool plus, double ne) {
    BranchEval e = eval_branches(c, l, ne);
    if (!e.valid) return std::numeric_limits<double>::quiet_NaN();
    return plus ? e.f_plus : e.f_minus;
}

// Bisection until the bracket collapses to adjacent doubles. Sign changes
// caused by poles of A (zeros of J_l) converge too, but leave a large
// residual and are rejected by the caller.
double bisect_branch(const GuideConsts& c, int l, bool plus, double lo, double hi,
                     double flo) {
    for (int it = 0; it < 200; ++it) {
        double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        double fm = branch_value(c, l, plus, mid);
        if (std::isnan(fm)) break;
        if ((flo < 0) == (fm < 0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

struct FieldAmp {
    double A, B;  // Ez and Hz amplitudes before power normalization
};

void sample_profile(const GuideSpec& g, const GuideConsts& c, GuidedMode& mode) {
    double a = 0.5 * g.core_diameter_nm * nm;
    double omega = omega_of_wavelength(g.wavelength_nm * nm);
    double beta = mode.n_eff * omega / c0;
    double eps1 = eps0 * c.n1 * c.n1;
    double eps2 = eps0 * c.n2 * c.n2;

    FieldAmp amp{1.0, 0.0};
    if (mode.family == ModeFamily::TE) amp = {0.0, 1.0};
    else if (mode.family == ModeFamily::HE || mode.family == ModeFamily::EH)
        amp.B = mode.s_ratio * beta / (omega * mu0);

    double e1 = beta * amp.A + omega * mu0 * amp.B;
    double e2 = beta * amp.A - omega * mu0 * amp.B;

    const int n = 2400;
    double r_max = a * (1.0 + std::min(8.0 / mode.w, 39.0));
    double dr = r_max / (n - 1);
    auto& pr = mode.profile;
    pr.r_step_nm = dr / nm;
    pr.er.resize(n); pr.ephi.resize(n); pr.ez.resize(n);
    pr.hr.resize(n); pr.hphi.resize(n); pr.hz.resize(n);

    int l = mode.l;
    double dJ = bj(l, mode.u);
    double dK = bk(l, mode.w);
    for (int i = 0; i < n; ++i) {
        double r = i * dr;
        if (r <= a) {
            double x = mode.u * r / a;
            double jm = bj(l - 1, x), jp = bj(l + 1, x), jc = bj(l, x);
            double c1 = beta * amp.B + omega * eps1 * amp.A;
            double c2 = beta * amp.B - omega * eps1 * amp.A;
            double s = a / (2.0 * mode.u * dJ);
            pr.er[i] = s * (e1 * jm - e2 * jp);
            pr.ephi[i] = -s * (e1 * jm + e2 * jp);
            pr.hr[i] = s * (c1 * jm - c2 * jp);
            pr.hphi[i] = s * (c1 * jm + c2 * jp);
            pr.ez[i] = amp.A * jc / dJ;
            pr.hz[i] = amp.B * jc / dJ;
        } else {
            double y = mode.w * r / a;
            double km = bk(l - 1, y), kp = bk(l + 1, y), kc = bk(l, y);
            double d1 = beta * amp.B + omega * eps2 * amp.A;
            double d2 = beta * amp.B - omega * eps2 * amp.A;
            double s = a / (2.0 * mode.w * dK);
            pr.er[i] = s * (e1 * km + e2 * kp);
            pr.ephi[i] = s * (-e1 * km + e2 * kp);
            pr.hr[i] = s * (d1 * km + d2 * kp);
            pr.hphi[i] = s * (d1 * km - d2 * kp);
            pr.ez[i] = amp.A * kc / dK;
            pr.hz[i] = amp.B * kc / dK;
        }
    }

    // Unit forward power: P = (ang/2) * Int (er*hphi - ephi*hr) r dr with
    // ang = 2*pi for l = 0 (one angular term is identically zero) else pi.
    double integral = 0.0;
    for (int i = 1; i < n; ++i) {
        double g0 = (pr.er[i - 1] * pr.hphi[i - 1] - pr.ephi[i - 1] * pr.hr[i - 1]) * ((i - 1) * dr);
        double g1 = (pr.er[i] * pr.hphi[i] - pr.ephi[i] * pr.hr[i]) * (i * dr);
        integral += 0.5 * (g0 + g1) * dr;
    }
    double ang = (l == 0) ? 2.0 * pi : pi;
    double power = 0.5 * ang * integral;
    if (!(power > 0))
        throw std::runtime_error("mode " + mode.label() + ": non-positive modal power");
    double scale = 1.0 / std::sqrt(power);
    for (auto* v : {&pr.er, &pr.ephi, &pr.ez, &pr.hr, &pr.hphi, &pr.hz})
        for (double& x : *v) x *= scale;
}

std::vector<GuidedMode> solve_order(const GuideSpec& guide, int l, bool with_profiles) {
    guide.validate();
    if (l < 0) throw std::invalid_argument("azimuthal order must be >= 0");
    GuideConsts c = consts_of(guide);

    const double step = 1e-4;
    double roots[2][64];
    std::size_t n_roots[2] = {0, 0};

    // Scan grid: a geometric ladder hugging the cladding index picks up
    // barely-guided roots (w -> 0) that a uniform grid would miss, then the
    // uniform 1e-4 sweep covers the rest of the interval.
    std::vector<double> grid;
    grid.reserve(std::size_t((c.n1 - c.n2) / step) + 48);
    for (int j = 40; j >= 1; --j) {
        double ne = c.n2 + step * std::ldexp(1.0, -j);
        if (ne > c.n2 * (1.0 + 4.0 * std::numeric_limits<double>::epsilon()))
            grid.push_back(ne);
    }
    for (double ne = c.n2 + 0.5 * step; ne < c.n1; ne += step) grid.push_back(ne);

    double prev_ne = grid[0];
    BranchEval prev = eval_branches(c, l, prev_ne);
    for (std::size_t gi = 1; gi < grid.size(); ++gi) {
        double ne = grid[gi];
        BranchEval cur = eval_branches(c, l, ne);
        for (int b = 0; b < 2; ++b) {
            bool plus = (b == 0);
            double fp = plus ? prev.f_plus : prev.f_minus;
            double fc = plus ? cur.f_plus : cur.f_minus;
            if (prev.valid && cur.valid && (fp < 0) != (fc < 0)) {
                double root = bisect_branch(c, l, plus, prev_ne, ne, fp);
                BranchEval e = eval_branches(c, l, root);
                if (e.valid && std::abs(e.f_full) < 1e-10 && n_roots[b] < 64)
                    roots[b][n_roots[b]++] = root;
            }
        }
        prev_ne = ne;
        prev = cur;
    }

    std::vector<GuidedMode> out;
    for (int b = 0; b < 2; ++b) {
        bool plus = (b == 0);
        // m counts from the largest n_eff of the family downwards; the scan
        // visits ascending n_eff.
        std::sort(roots[b], roots[b] + n_roots[b], std::greater<>());
        for (std::size_t i = 0; i < n_roots[b]; ++i) {
            GuidedMode m;
            m.family = (l == 0) ? (plus ? ModeFamily::TM : ModeFamily::TE)
                                : (plus ? ModeFamily::HE : ModeFamily::EH);
            m.l = l;
            m.m = int(i) + 1;
            m.n_eff = roots[b][i];
            BranchEval e = eval_branches(c, l, m.n_eff);
            m.u = e.u;
            m.w = e.w;
            m.s_ratio = e.s_ratio;
            m.residual = e.f_full;
            if (with_profiles) sample_profile(guide, c, m);
            out.push_back(std::move(m));
        }
    }
    std::sort(out.begin(), out.end(),
              [](const GuidedMode& a, const GuidedMode& b2) { return a.n_eff > b2.n_eff; });
    return out;
}

std::vector<GuidedMode> all_modes_impl(const GuideSpec& guide, bool with_profiles) {
    std::vector<GuidedMode> out;
    int empty_run = 0;
    for (int l = 0; empty_run < 2 && l < 64; ++l) {
        auto roots = solve_order(guide, l, with_profiles);
        if (roots.empty()) ++empty_run;
        else empty_run = 0;
        for (auto& m : roots) out.push_back(std::move(m));
    }
    std::sort(out.begin(), out.end(),
              [](const GuidedMode& a, const GuidedMode& b) { return a.n_eff > b.n_eff; });
    return out;
}

} // namespace

void GuideSpec::validate() const {
    if (!(core_index > clad_index) || !(clad_index >= 1.0))
        throw std::invalid_argument("guide indices must satisfy core > clad >= 1");
    if (!(core_diameter_nm > 0) || !(wavelength_nm > 0))
        throw std::invalid_argument("guide diameter and wavelength must be positive");
}

double GuideSpec::v_number() const {
    return pi * core_diameter_nm / wavelength_nm *
           std::sqrt(core_index * core_index - clad_index * clad_index);
}

std::string family_name(ModeFamily f) {
    switch (f) {
        case ModeFamily::TE: return "TE";
        case ModeFamily::TM: return "TM";
        case ModeFamily::HE: return "HE";
        case ModeFamily::EH: return "EH";
    }
    return "??";
}

std::string GuidedMode::label() const {
    return family_name(family) + std::to_string(l) + std::to_string(m);
}

double GuidedMode::axis_coupling_weight() const {
    if (l != 1 || profile.er.empty()) return 0.0;
    return profile.er[0] * profile.er[0];
}

std::vector<GuidedMode> characteristic_roots(const GuideSpec& guide, int l) {
    return solve_order(guide, l, true);
}

std::vector<GuidedMode> all_guided_modes(const GuideSpec& guide) {
    return all_modes_impl(guide, true);
}

double hexagon_equivalent_diameter(double hex_vertex_to_vertex_nm) {
    if (hex_vertex_to_vertex_nm < 0)
        throw std::invalid_argument("hexagon diameter must be non-negative");
    return hex_vertex_to_vertex_nm / 1.14;
}

double cutoff_v_number(const GuideSpec& guide_template, ModeFamily family, int l, int m,
                       double v_tol) {
    GuideSpec g = guide_template;
    auto exists = [&](double d_nm) {
        g.core_diameter_nm = d_nm;
        for (const auto& mode : solve_order(g, l, false))
            if (mode.family == family && mode.m == m) return true;
        return false;
    };
    double d_hi = guide_template.core_diameter_nm;
    for (int i = 0; i < 60 && !exists(d_hi); ++i) d_hi *= 1.5;
    if (!exists(d_hi)) throw std::runtime_error("cutoff search: mode never appears");
    double v_per_d = guide_template.v_number() / guide_template.core_diameter_nm;
    // Real cutoffs of non-fundamental modes sit at V >= 2.405; a mode still
    // present at V = 1.0 is cutoff-free. Probing lower is pointless: the
    // binding of a cutoff-free mode decays so fast below V ~ 1 that
    // n_eff - n_clad drops under double-precision resolution.
    if (exists(1.0 / v_per_d)) return 0.0;
    double d_lo = d_hi;
    while (exists(d_lo)) d_lo *= 0.5;
    while ((d_hi - d_lo) * v_per_d > v_tol) {
        double mid = 0.5 * (d_lo + d_hi);
        if (exists(mid)) d_hi = mid;
        else d_lo = mid;
    }
    return 0.5 * (d_lo + d_hi) * v_per_d;
}

ModeDispersion dispersion_sweep(const GuideSpec& guide_template,
                                const std::vector<double>& diameters_nm,
                                const std::vector<ModeFamily>& families) {
    if (diameters_nm.empty()) throw std::invalid_argument("empty diameter list");
    for (std::size_t i = 1; i < diameters_nm.size(); ++i)
        if (diameters_nm[i] <= diameters_nm[i - 1])
            throw std::invalid_argument("diameters must be ascending");

    auto keep = [&](ModeFamily f) {
        return families.empty() ||
               std::find(families.begin(), families.end(), f) != families.end();
    };

    std::map<std::string, ModeCurve> curves;
    for (double d : diameters_nm) {
        GuideSpec g = guide_template;
        g.core_diameter_nm = d;
        auto modes = all_modes_impl(g, false);
        for (const auto& mode : modes) {
            if (!keep(mode.family)) continue;
            auto& cv = curves[mode.label()];
            if (cv.diameter_nm.empty()) {
                cv.family = mode.family;
                cv.l = mode.l;
                cv.m = mode.m;
                cv.label = mode.label();
            } else {
                // Continuation guard: each labelled point must sit near the
                // linear prediction of its own curve. The tolerance scales
                // with the remaining headroom to the core index because the
                // rise just past cutoff is convex (successive increments can
                // grow several-fold); near saturation the curve flattens and
                // the guard tightens with it.
                std::size_t k = cv.n_eff.size();
                double predicted = cv.n_eff[k - 1];
                double guard = 1e-3 + 0.5 * (g.core_index - cv.n_eff[k - 1]);
                if (k >= 2) {
                    double slope = (cv.n_eff[k - 1] - cv.n_eff[k - 2]) /
                                   (cv.diameter_nm[k - 1] - cv.diameter_nm[k - 2]);
                    predicted += slope * (d - cv.diameter_nm[k - 1]);
                    guard += 2.0 * std::abs(cv.n_eff[k - 1] - cv.n_eff[k - 2]);
                }
                if (std::abs(mode.n_eff - predicted) > guard)
                    throw std::runtime_error("mode tracking jump for " + cv.label +
                                             ": refine the diameter step");
            }
            cv.diameter_nm.push_back(d);
            cv.n_eff.push_back(mode.n_eff);
        }
    }

    ModeDispersion out;
    for (auto& [label, cv] : curves) out.curves.push_back(std::move(cv));
    std::sort(out.curves.begin(), out.curves.end(), [](const ModeCurve& a, const ModeCurve& b) {
        return a.diameter_nm.front() < b.diameter_nm.front();
    });
    return out;
}

std::vector<GuidedMode> dipole_coupled_modes(const std::vector<GuidedMode>& modes,
                                             double rel_weight_threshold) {
    double max_w = 0.0;
    for (const auto& m : modes) max_w = std::max(max_w, m.axis_coupling_weight());
    std::vector<GuidedMode> out;
    if (max_w <= 0.0) return out;
    for (const auto& m : modes) {
        double w = m.axis_coupling_weight();
        if (w > 0.0 && w >= rel_weight_threshold * max_w) out.push_back(m);
    }
    return out;
}

void export_dispersion(const std::string& path, const ModeDispersion& d) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "# guided mode effective indices vs core diameter\n";
    out << "# diameter_nm\tmode_label\tn_eff\n";
    out.precision(17);
    for (const auto& cv : d.curves)
        for (std::size_t i = 0; i < cv.diameter_nm.size(); ++i)
            out << cv.diameter_nm[i] << '\t' << cv.label << '\t' << cv.n_eff[i] << '\n';
    if (!out) throw std::runtime_error("short write to " + path);
}

} // namespace nwcav::modes
