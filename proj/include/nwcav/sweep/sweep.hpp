#pragma once

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "nwcav/emission/emission.hpp"
#include "nwcav/fdtd/fdtd.hpp"
#include "nwcav/scene/scene.hpp"

// Parameter sweeps over cavity geometry: Purcell maps, avoided-crossing
// detection, the geometric scaling-law fit, quasi-BIC counting, and the
// fabrication-tolerance studies.

namespace nwcav::sweep {

struct RowStatus {
    bool failed = false;     // run threw; f_p row is NaN-filled
    bool converged = true;   // run finished but hit the step limit when false
    std::string message;
};

// Rectangular parameter x wavelength map of Purcell factors. Failed rows stay
// in place (NaN values, status flagged) so the grid never loses its shape.
struct PurcellMap {
    std::string parameter_name;
    std::vector<double> parameter;
    std::vector<double> wavelength_nm;
    std::vector<double> f_p;  // row-major [parameter][wavelength]
    std::vector<RowStatus> rows;

    double at(std::size_t row, std::size_t col) const {
        return f_p.at(row * wavelength_nm.size() + col);
    }
};

// One sweep cell: the Purcell spectrum for a single scene variant. The
// default runner executes the cavity FDTD run and normalizes it against a
// shared vacuum reference; tests substitute synthetic runners.
struct RowResult {
    std::vector<double> f_p;
    bool converged = true;
};
using Runner = std::function<RowResult(const scene::SceneSpec&, const fdtd::Numerics&,
                                       const std::vector<double>& wavelengths_nm)>;

struct SweepOptions {
    int workers = 1;                   // bounded pool; each job is one full run
    double wavelength_step_nm = 0.5;
    double domain_padding_nm = 620.0;
    std::optional<scene::MaterialModel> mirror_material;  // required when the scene has a mirror
    Runner runner;                     // empty = FDTD-backed default
};

// One spectrum per height, dipole riding at the spec's fixed offset below the
// moving top facet. Individual run failures are recorded per row and never
// abort the sweep.
PurcellMap sweep_height(const scene::SceneSpec& base, const std::vector<double>& heights_nm,
                        const fdtd::Numerics& numerics, const SweepOptions& options = {});

enum class ToleranceAxis { CrownHeight, LateralOffset };

PurcellMap tolerance_sweep(const scene::SceneSpec& base, ToleranceAxis axis,
                           const std::vector<double>& values_nm, const fdtd::Numerics& numerics,
                           const SweepOptions& options = {});

struct RidgePoint {
    double parameter = 0.0;
    double wavelength_nm = 0.0;
    double f_p = 0.0;
};

struct AnticrossingReport {
    std::vector<RidgePoint> branch_a, branch_b;  // linked ridge traces
    double center_parameter = 0.0;   // parameter at the minimum branch separation
    double center_wavelength_nm = 0.0;
    double gap_nm = 0.0;             // minimum wavelength separation, >= 0
    bool is_crossing = false;        // branches meet within the wavelength resolution
    RidgePoint quasi_bic;            // ridge maximum near the gap
};

struct DetectOptions {
    double prominence_factor = 1.5;  // peak must exceed this times the row median
    double link_tolerance_nm = 25.0; // max wavelength jump between adjacent rows
    int min_ridge_rows = 3;
    int qbic_window_rows = 3;        // rows around the gap searched for the maximum
};

// Per-row peak finding, nearest-neighbor ridge linking, then the closest
// ridge pair. Throws "no anticrossing in range" with fewer than two ridges.
AnticrossingReport detect_avoided_crossing(const PurcellMap& map,
                                           const DetectOptions& options = {});

struct ScalingFit {
    std::vector<double> scale;        // samples that entered the fit
    std::vector<double> peak_nm;
    std::vector<double> excluded_scale;  // band-edge peaks, flagged out
    double slope_nm = 0.0;            // nm per unit scale factor
    double intercept_nm = 0.0;
    double residual_rms_nm = 0.0;
};

// Least-squares line through (scale, peak wavelength) samples.
ScalingFit fit_scaling_law(const std::vector<std::pair<double, double>>& samples);

struct ScaleSweepResult {
    PurcellMap map;
    ScalingFit fit;
};

// Uniform rescale of the wire geometry (D, H, crown) with material indices
// held constant; peak wavelengths fitted linearly against the scale factor.
ScaleSweepResult sweep_scale(const scene::SceneSpec& base, const std::vector<double>& factors,
                             const fdtd::Numerics& numerics, const SweepOptions& options = {});

struct QuasiBicCount {
    int count = 0;
    std::vector<RidgePoint> locations;
};

// Distinct in-window peak occurrences above the threshold along the parameter
// axis, deduplicated by a minimum parameter separation.
QuasiBicCount count_quasi_bic(const PurcellMap& map, double window_lo_nm, double window_hi_nm,
                              double threshold, double min_parameter_separation = 50.0);

// Vacuum normalization run shared by the sweeps and the single-run front
// end: same pulse, numerics, and dipole position as the base design,
// absorbing boundaries on every side. Throws when it fails to converge.
fdtd::RunResult vacuum_reference(const scene::SceneSpec& base, const fdtd::Numerics& numerics,
                                 const std::vector<double>& wavelengths);

}  // namespace nwcav::sweep
