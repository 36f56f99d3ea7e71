#pragma once

#include <string>

#include "nwcav/emission/emission.hpp"
#include "nwcav/modes/solver.hpp"
#include "nwcav/scene/scene.hpp"
#include "nwcav/sweep/sweep.hpp"

// Result persistence: delimited text with units in the headers, one reader
// per writer so every export round-trips, and gnuplot scripts that plot the
// files as written.

namespace nwcav::cli {

void write_purcell_spectrum(const std::string& path, const emission::PurcellSpectrum& s);
emission::PurcellSpectrum read_purcell_spectrum(const std::string& path);

// Long-format angular table (theta_deg, phi_deg, power density, complex
// field components), theta-major with a blank line between theta blocks so
// gnuplot pm3d consumes it directly.
void write_far_field(const std::string& path, const emission::FarField& f);
emission::FarField read_far_field(const std::string& path);

// Long-format map (parameter, wavelength_nm, f_p, converged_flag), one block
// per parameter row. Failure messages are manifest-level, not cell data;
// the reader reconstructs failed rows as all-NaN non-converged.
void write_purcell_map(const std::string& path, const sweep::PurcellMap& m);
sweep::PurcellMap read_purcell_map(const std::string& path);

void write_anticrossing_report(const std::string& path, const sweep::AnticrossingReport& r);
sweep::AnticrossingReport read_anticrossing_report(const std::string& path);

void write_scaling_fit(const std::string& path, const sweep::ScalingFit& f);
sweep::ScalingFit read_scaling_fit(const std::string& path);

void write_material_model(const std::string& path, const scene::MaterialModel& m);
scene::MaterialModel read_material_model(const std::string& path);

// Reader for modes::export_dispersion output.
modes::ModeDispersion read_dispersion(const std::string& path);

// Gnuplot scripts; data_file paths are relative to the script's directory.
void write_spectrum_plot(const std::string& path, const std::string& data_file);
void write_map_plot(const std::string& path, const std::string& data_file,
                    const std::string& parameter_label);
void write_far_field_plot(const std::string& path, const std::string& data_file);
void write_scaling_plot(const std::string& path, const std::string& fit_file,
                        double slope_nm, double intercept_nm);
void write_dispersion_plot(const std::string& path, const std::string& data_file);

}  // namespace nwcav::cli
