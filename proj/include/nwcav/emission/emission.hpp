#pragma once

#include <complex>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "nwcav/fdtd/fdtd.hpp"

// Emission post-processing: Purcell spectra from run pairs, peak and linewidth
// extraction, surface-equivalence far fields, collection efficiency through a
// numerical aperture, and overlap with a Gaussian beam.

namespace nwcav::emission {

struct PeakInfo {
    double wavelength_nm = 0.0;  // quadratic interpolation through the top 3 samples
    double value = 0.0;
    double fwhm_nm = 0.0;        // linear interpolation at the half-max crossings
    bool fwhm_is_lower_bound = false;  // a crossing fell outside the band
};

// Throws when the maximum sits on the first or last sample: the band does not
// contain the peak and neither number would mean anything.
PeakInfo find_peak_fwhm(const std::vector<double>& wavelength_nm,
                        const std::vector<double>& value);

// F_p(lambda) = [P_cav / |J_cav|^2] / [P_vac / |J_vac|^2]: normalizing each
// run by its own source spectrum makes the ratio pulse-shape independent and
// exactly reproduces the equal-pulse power ratio.
struct PurcellSpectrum {
    std::vector<double> wavelength_nm;
    std::vector<double> f_p;
    std::string reference;              // identity note for the normalizing run
    bool flagged_under_resolved = false;  // cavity run ended before full decay
    std::optional<PeakInfo> peak;       // absent when the maximum sits on a band edge
};

// Both runs must share the monitor band; the reference run must have
// converged. An under-resolved cavity run still yields a spectrum, flagged.
PurcellSpectrum purcell_spectrum(const fdtd::RunResult& cavity,
                                 const fdtd::RunResult& vacuum_reference,
                                 const std::string& monitor_name = "total_power");

PeakInfo find_peak_fwhm(const PurcellSpectrum& spectrum);

// Far field over the upper hemisphere (theta-major storage: it * n_phi + ip).
// e_theta/e_phi are radiated-field phasors with the 1/r and e^{ikr} factors
// stripped, so |E|^2 / (2 eta0) is directly the power density in W/sr.
struct FarField {
    std::vector<double> theta_deg;  // uniform ascending from 0
    std::vector<double> phi_deg;    // uniform over [0, 360)
    std::vector<std::complex<double>> e_theta, e_phi;
    std::vector<double> power_density;  // W/sr
    double total_power_w = 0.0;         // integrated over the sampled cap
    double wavelength_nm = 0.0;
};

struct FarFieldOptions {
    double theta_step_deg = 0.5;
    double phi_step_deg = 2.0;
    double theta_max_deg = 90.0;
    // Mirror geometries: each surface current also radiates via its image in
    // a conductor plane at this height, which closes the open-bottom surface
    // exactly for a perfect mirror.
    std::optional<double> mirror_plane_z_nm;
};

// Surface equivalence on the box-monitor faces: J = n x H, M = -n x E,
// radiation integrals evaluated with the e^{-iwt} phasor convention the
// monitors record. Every face must be all-air; a face cutting through
// material invalidates the equivalent currents.
FarField near_to_far(const fdtd::MonitorResult& box, const scene::GridLayout& layout,
                     std::size_t wavelength_index, const FarFieldOptions& opt = {});

// Fraction of `total_emitted_power_w` collected within theta <= asin(NA).
// The denominator should be the full emitted power (small closed box around
// the source), so absorbed power correctly lowers the efficiency.
double extraction_efficiency(const FarField& far, double numerical_aperture,
                             double total_emitted_power_w);

struct OverlapResult {
    double efficiency = 0.0;  // best overlap over the waist search
    double theta_deg = 0.0;   // divergence half-angle at the optimum
};

struct OverlapOptions {
    double theta_min_deg = 0.5;
    double theta_max_deg = 60.0;
    // Compare |E| patterns only, discarding phase and polarization. The
    // default field overlap is the physical mode-matching number.
    bool intensity_only = false;
};

// Overlap with an x-polarized angular Gaussian, exp(-theta^2/theta0^2),
// maximized over theta0 by golden-section search after a bracketing scan.
OverlapResult gaussian_overlap(const FarField& far, const OverlapOptions& opt = {});

}  // namespace nwcav::emission
