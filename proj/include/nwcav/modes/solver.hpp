#pragma once

#include <string>
#include <vector>

namespace nwcav::modes {

// Infinite circular step-index waveguide at a single vacuum wavelength.
struct GuideSpec {
    double core_index = 3.44;
    double clad_index = 1.0;
    double core_diameter_nm = 400.0;
    double wavelength_nm = 900.0;

    void validate() const;  // throws std::invalid_argument
    double v_number() const;
};

enum class ModeFamily { TE, TM, HE, EH };

std::string family_name(ModeFamily f);

// Radial envelopes of the vector mode on a uniform grid r = i*r_step_nm,
// i = 0..n-1. Angular dependence: for hybrid modes E_r,E_z,H_phi go with
// cos(l phi) and E_phi,H_r,H_z with sin(l phi); l = 0 profiles carry no
// angular factor. Fields are normalized to unit modal power (1 W), so
// er[0]^2 is directly the axis coupling weight of an l = 1 mode.
struct RadialProfile {
    double r_step_nm = 0.0;
    std::vector<double> er, ephi, ez, hr, hphi, hz;
};

struct GuidedMode {
    ModeFamily family = ModeFamily::HE;
    int l = 0;          // azimuthal order
    int m = 0;          // radial order, 1 = largest n_eff of its family
    double n_eff = 0.0;
    double u = 0.0;     // core transverse parameter
    double w = 0.0;     // cladding decay parameter
    double s_ratio = 0.0;   // omega*mu0*Hz / (beta*Ez) amplitude ratio
    double residual = 0.0;  // characteristic equation value at n_eff
    RadialProfile profile;

    std::string label() const;  // e.g. "HE11"
    // |E_transverse(axis)|^2 per unit modal power; zero unless l = 1.
    double axis_coupling_weight() const;
};

// All guided modes of azimuthal order l: sign-bracketed scan of
// n_eff in (clad_index, core_index) at 1e-4 resolution, bisection to
// machine precision. Empty when below cutoff.
std::vector<GuidedMode> characteristic_roots(const GuideSpec& guide, int l);

// Guided modes across all azimuthal orders, sorted by descending n_eff.
std::vector<GuidedMode> all_guided_modes(const GuideSpec& guide);

// Hexagonal cross-section (vertex-to-vertex D) mapped to the equivalent
// circular guide diameter: D_circ = D_hex / 1.14.
double hexagon_equivalent_diameter(double hex_vertex_to_vertex_nm);

// Smallest V with a guided mode of the given family and order, found by
// bisection on the diameter; 0 for cutoff-free modes.
double cutoff_v_number(const GuideSpec& guide_template, ModeFamily family, int l, int m,
                       double v_tol = 1e-6);

struct ModeCurve {
    ModeFamily family;
    int l = 0;
    int m = 0;
    std::string label;
    std::vector<double> diameter_nm;
    std::vector<double> n_eff;
};

struct ModeDispersion {
    std::vector<ModeCurve> curves;
};

// n_eff(D) curves over an ascending diameter list; families filter is
// optional (empty = all). Curves are continued by label with a nearest
// n_eff guard between adjacent diameters.
ModeDispersion dispersion_sweep(const GuideSpec& guide_template,
                                const std::vector<double>& diameters_nm,
                                const std::vector<ModeFamily>& families = {});

// Modes excitable by an on-axis transverse electric dipole: l = 1 hybrids
// with axis coupling weight at least rel_weight_threshold of the strongest.
// The threshold removes barely-confined near-cutoff hybrids whose axis
// amplitude per unit power is negligible.
std::vector<GuidedMode> dipole_coupled_modes(const std::vector<GuidedMode>& modes,
                                             double rel_weight_threshold = 0.05);

void export_dispersion(const std::string& path, const ModeDispersion& d);

} // namespace nwcav::modes
