#pragma once

// Independent cross-checks for the waveguide mode solver. Everything here is
// derived straight from the primitive boundary-value problem, bypassing the
// factored characteristic equation used in production.

#include "nwcav/modes/solver.hpp"
#include "nwcav/units.hpp"

#include <cmath>
#include <vector>

namespace nwcav::test {

inline double oj(int n, double x) {
    if (n < 0) return (((-n) % 2) ? -1.0 : 1.0) * std::cyl_bessel_j(double(-n), x);
    return std::cyl_bessel_j(double(n), x);
}
inline double ok(int n, double x) { return std::cyl_bessel_k(double(std::abs(n)), x); }

inline double oj_prime(int n, double x) { return 0.5 * (oj(n - 1, x) - oj(n + 1, x)); }
inline double ok_prime(int n, double x) { return -0.5 * (ok(n - 1, x) + ok(n + 1, x)); }

// Determinant of the 4x4 continuity system (Ez, Hz, Ephi, Hphi at r = a)
// in amplitudes (A_core, B_core, C_clad, D_clad). Zero exactly at guided
// modes. Rows are scaled to keep the determinant O(1).
inline double boundary_determinant(const nwcav::modes::GuideSpec& g, int l, double ne) {
    using nwcav::pi;
    double n1 = g.core_index, n2 = g.clad_index;
    double ak0 = pi * g.core_diameter_nm / g.wavelength_nm;
    double du2 = n1 * n1 - ne * ne, dw2 = ne * ne - n2 * n2;
    if (du2 <= 0 || dw2 <= 0) return std::nan("");
    double u = ak0 * std::sqrt(du2), w = ak0 * std::sqrt(dw2);

    // Work in units a = 1, omega*mu0 = 1; then beta -> ne*ak0/a etc. Only
    // ratios matter for the determinant's zeros.
    double beta = ne * ak0;
    double wmu = ak0;             // omega*mu0 in these units
    double we1 = ak0 * n1 * n1;   // omega*eps1
    double we2 = ak0 * n2 * n2;

    double jl = oj(l, u), jd = oj_prime(l, u);
    double kl = ok(l, w), kd = ok_prime(l, w);

    double M[4][4] = {
        {jl, 0, -kl, 0},
        {0, jl, 0, -kl},
        {-(beta * l / (u * u)) * jl, -(wmu / u) * jd, -(beta * l / (w * w)) * kl,
         -(wmu / w) * kd},
        {(we1 / u) * jd, (beta * l / (u * u)) * jl, (we2 / w) * kd,
         (beta * l / (w * w)) * kl},
    };
    for (auto& row : M) {
        double mx = 0;
        for (double v : row) mx = std::max(mx, std::abs(v));
        if (mx > 0)
            for (double& v : row) v /= mx;
    }
    auto det3 = [&](int r0, int r1, int r2, int c0, int c1, int c2) {
        return M[r0][c0] * (M[r1][c1] * M[r2][c2] - M[r1][c2] * M[r2][c1]) -
               M[r0][c1] * (M[r1][c0] * M[r2][c2] - M[r1][c2] * M[r2][c0]) +
               M[r0][c2] * (M[r1][c0] * M[r2][c1] - M[r1][c1] * M[r2][c0]);
    };
    return M[0][0] * det3(1, 2, 3, 1, 2, 3) - M[0][1] * det3(1, 2, 3, 0, 2, 3) +
           M[0][2] * det3(1, 2, 3, 0, 1, 3) - M[0][3] * det3(1, 2, 3, 0, 1, 2);
}

// All determinant zeros for one azimuthal order, by dense scan + bisection.
inline std::vector<double> determinant_roots(const nwcav::modes::GuideSpec& g, int l,
                                             double scan_step = 2e-5) {
    std::vector<double> roots;
    double lo = g.clad_index + 0.5 * scan_step;
    double hi = g.core_index;
    double prev = boundary_determinant(g, l, lo);
    for (double ne = lo + scan_step; ne < hi; ne += scan_step) {
        double cur = boundary_determinant(g, l, ne);
        if (std::isfinite(prev) && std::isfinite(cur) && (prev < 0) != (cur < 0)) {
            double a = ne - scan_step, b = ne, fa = prev;
            for (int it = 0; it < 120; ++it) {
                double mid = 0.5 * (a + b);
                if (mid <= a || mid >= b) break;
                double fm = boundary_determinant(g, l, mid);
                if ((fa < 0) == (fm < 0)) { a = mid; fa = fm; }
                else b = mid;
            }
            double root = 0.5 * (a + b);
            // Poles of nothing here: the determinant is continuous, but a
            // J_l zero can still produce a steep crossing that is genuine.
            if (std::abs(boundary_determinant(g, l, root)) < 1e-6) roots.push_back(root);
        }
        prev = cur;
    }
    return roots;
}

// Scalar (weak-guidance) LP01 effective index: u J1(u)/J0(u) = w K1(w)/K0(w).
inline double lp01_effective_index(const nwcav::modes::GuideSpec& g) {
    using nwcav::pi;
    double ak0 = pi * g.core_diameter_nm / g.wavelength_nm;
    double v = g.v_number();
    auto eq = [&](double u) {
        double w = std::sqrt(v * v - u * u);
        return u * oj(1, u) / oj(0, u) - w * ok(1, w) / ok(0, w);
    };
    double lo = 1e-9, hi = std::min(v, 2.404825557695772) - 1e-12;
    double flo = eq(lo);
    for (int it = 0; it < 200; ++it) {
        double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        double fm = eq(mid);
        if ((flo < 0) == (fm < 0)) { lo = mid; flo = fm; }
        else hi = mid;
    }
    double u = 0.5 * (lo + hi);
    double ne2 = g.core_index * g.core_index - (u / ak0) * (u / ak0);
    return std::sqrt(ne2);
}

// Branch-function root count on an independent fine grid, counting pole
// crossings (J_l zeros) separately so they are not mistaken for roots.
inline int dense_root_count(const nwcav::modes::GuideSpec& g, int l, bool plus_branch,
                            double step = 1e-6) {
    using nwcav::pi;
    double n1 = g.core_index, n2 = g.clad_index;
    double nu = (n2 * n2) / (n1 * n1);
    double ak0 = pi * g.core_diameter_nm / g.wavelength_nm;
    auto eval = [&](double ne, double& f, double& jl) {
        double u = ak0 * std::sqrt(n1 * n1 - ne * ne);
        double w = ak0 * std::sqrt(ne * ne - n2 * n2);
        jl = oj(l, u);
        double A = oj_prime(l, u) / (u * jl);
        double B = ok_prime(l, w) / (w * ok(l, w));
        double iu2 = 1.0 / (u * u), iw2 = 1.0 / (w * w);
        double rhs = double(l) * double(l) * (iu2 + iw2) * (iu2 + nu * iw2);
        double R = std::sqrt(0.25 * (1 - nu) * (1 - nu) * B * B + rhs);
        f = A + 0.5 * (1 + nu) * B + (plus_branch ? R : -R);
    };
    int count = 0;
    double prev_f, prev_j;
    double ne = n2 + 0.5 * step;
    eval(ne, prev_f, prev_j);
    for (ne += step; ne < n1; ne += step) {
        double f, jl;
        eval(ne, f, jl);
        if (std::isfinite(prev_f) && std::isfinite(f)) {
            bool flip_f = (prev_f < 0) != (f < 0);
            bool flip_j = (prev_j < 0) != (jl < 0);
            if (flip_f && !flip_j) ++count;          // plain root
            else if (!flip_f && flip_j) ++count;     // root hidden behind a pole
        }
        prev_f = f;
        prev_j = jl;
    }
    return count;
}

} // namespace nwcav::test
