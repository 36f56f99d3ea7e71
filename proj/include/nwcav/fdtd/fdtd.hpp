#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "nwcav/scene/scene.hpp"

// Yee-grid time-domain Maxwell solver: leapfrog E/H updates on a uniform
// grid, convolutional PML absorbers, auxiliary-differential-equation updates
// for pole-model metals, a soft point-dipole current source, and running
// discrete-Fourier monitors.
//
// Conventions:
//  - Unified node indexing: every staggered component is stored in an array
//    of (nx+1)(ny+1)(nz+1) doubles addressed by GridLayout::node_id. Ex(i,j,k)
//    sits at ((i+1/2)dx, j dx, k dx), Hx(i,j,k) at (i dx, (j+1/2)dx, (k+1/2)dx),
//    and cyclically for the other components. Untouched tail entries stay 0.
//  - Phasor convention e^{-i w t}: monitors accumulate sum f(t) e^{+i w t} dt,
//    E sampled at integer steps, H and the source current at half steps.
//  - SI units internally; lengths at the interface are nm, times s.

namespace nwcav::fdtd {

// Gaussian-modulated cosine current moment p(t), units A*m.
struct Pulse {
    double omega0 = 0.0;     // rad/s
    double tau_s = 0.0;      // Gaussian sigma
    double t0_s = 0.0;       // envelope center
    double amplitude = 1.0;  // peak current moment, A*m

    double current(double t_s) const;
    // |spectrum(w)| / |spectrum(omega0)| of the analytic envelope.
    double spectrum_rel(double omega) const;
    double end_time_s() const { return t0_s + 6.5 * tau_s; }

    // tau = 1/(pi (f_hi - f_lo)) puts the band edges at exp(-1/2) of the
    // spectral peak, comfortably above the 1% conditioning floor.
    static Pulse for_band(double center_wavelength_nm, double band_halfwidth_nm,
                          double amplitude = 1.0);
};

enum class Boundary { Cpml, Pec, Pmc };

struct Numerics {
    double resolution_nm = 10.0;
    double courant_fraction = 0.99;
    int absorber_layers = 12;
    double decay_threshold = 1e-5;   // of post-pulse peak interior energy
    long long max_steps = 1'000'000;
    int monitor_stride = 10;         // DFT sampling interval, steps
    int energy_stride = 100;         // termination-check interval, steps
    std::array<std::array<Boundary, 2>, 3> boundary{{
        {Boundary::Cpml, Boundary::Cpml},
        {Boundary::Cpml, Boundary::Cpml},
        {Boundary::Cpml, Boundary::Cpml},
    }};

    void validate() const;
};

// CFL-stable time step for the 3D Yee scheme.
double stable_dt(double resolution_nm, double courant_fraction);

// One Cartesian component of a current source: taps are (node_id, weight)
// pairs; the injected current density is weight * pulse.current(t) / dx^3.
struct CurrentSource {
    int component = 0;  // 0..2 -> Ex/Ey/Ez
    std::vector<std::pair<long long, double>> taps;
    Pulse pulse;
};

// Trilinear 8-edge splat of an oriented point dipole at a continuous
// position, one CurrentSource per nonzero Cartesian component.
std::vector<CurrentSource> make_dipole_sources(const scene::GridLayout& layout,
                                               const std::array<double, 3>& position_nm,
                                               std::array<double, 3> orientation,
                                               const Pulse& pulse);

struct MonitorSpec {
    enum class Geometry { Plane, Box, BoxOpenBottom, SingleCell };
    Geometry geometry = Geometry::Box;
    std::string name;
    std::array<double, 3> min_nm{};  // box corners; Plane: min==max on plane_axis;
    std::array<double, 3> max_nm{};  // SingleCell: min==max point
    int plane_axis = 2;              // Plane only; outward flux counted along +axis
    std::vector<double> wavelengths_nm;
    bool accumulate_time_flux = false;  // time-integrated Poynting flux (J)
};

struct FaceResult {
    int axis = 2;   // normal axis
    int sign = 1;   // outward direction along the axis
    int plane = 0;  // node index of the face plane
    int a0 = 0, a1 = 0, b0 = 0, b1 = 0;  // cell ranges on axes (axis+1)%3, (axis+2)%3
    bool all_air = true;  // no non-air material touches the face
    // Phasors at face-cell centers, wavelength-major: index lam * ncells + cell.
    std::vector<std::complex<double>> e1, e2, h1, h2;

    long long ncells() const {
        return static_cast<long long>(a1 - a0) * (b1 - b0);
    }
};

// Outward power through one face at wavelength index k, watts.
double face_power(const FaceResult& face, std::size_t k, double dx_nm);

struct MonitorResult {
    MonitorSpec spec;
    std::vector<FaceResult> faces;
    std::vector<std::complex<double>> source_current;  // DFT of p(t) per wavelength
    std::vector<double> power_w;                        // net outward flux per wavelength
    double time_integrated_flux_j = 0.0;                // when accumulate_time_flux
};

struct RunResult {
    scene::GridLayout layout;
    double dt_s = 0.0;
    long long steps = 0;
    std::string termination;     // "decayed" | "max_steps"
    bool under_resolved = false;
    double energy_peak_j = 0.0;
    double energy_final_j = 0.0;
    double source_work_j = 0.0;  // total energy delivered by the sources
    std::array<double, 3> source_position_nm{};
    std::vector<MonitorResult> monitors;

    const MonitorResult& monitor(const std::string& name) const;
};

class Simulation {
  public:
    // The grid must outlive the simulation.
    Simulation(const scene::MaterialGrid& grid, std::vector<CurrentSource> sources,
               const Numerics& numerics, const std::vector<MonitorSpec>& monitors);
    ~Simulation();
    Simulation(Simulation&&) noexcept;
    Simulation& operator=(Simulation&&) noexcept;

    void step();
    long long step_index() const;
    double time_s() const;
    double dt_s() const;
    double pulse_end_time_s() const;

    // Field energy outside the absorbing shells, joules. Also feeds the
    // decay tracker, so call it at a fixed stride for reproducible runs.
    double interior_energy_j();
    double energy_peak_j() const;

    // Aborts with location diagnostics when a non-finite field appears.
    void check_finite() const;

    RunResult finish(std::string termination, bool under_resolved) const;

    void save_checkpoint(const std::string& path) const;
    void load_checkpoint(const std::string& path);  // throws on any mismatch

    const std::vector<double>& field(int component) const;  // 0..5 = Ex..Hz
    std::vector<double>& field_mut(int component);
    const scene::GridLayout& layout() const;

  private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

struct RunControl {
    std::string resume_from;        // checkpoint to restore before stepping
    std::string checkpoint_path;    // where to write periodic checkpoints
    long long checkpoint_every = 0; // steps; 0 disables
};

RunResult run_on_grid(const scene::MaterialGrid& grid, std::vector<CurrentSource> sources,
                      const Numerics& numerics, const std::vector<MonitorSpec>& monitors,
                      const RunControl& control = {});

// Rasterizes the scene, builds the dipole source from the spec, and runs.
RunResult run(const scene::SceneSpec& spec, const Numerics& numerics,
              std::vector<MonitorSpec> monitors,
              const std::optional<scene::MaterialModel>& gold = std::nullopt,
              double domain_padding_nm = 620.0, const RunControl& control = {});
RunResult run(const scene::SceneSpec& spec, const Numerics& numerics,
              std::vector<MonitorSpec> monitors,
              const std::optional<scene::MaterialModel>& gold,
              const scene::DomainPadding& padding, const RunControl& control = {});

// Uniform all-air grid spanning [min_nm, max_nm], snapped outward to cells.
scene::MaterialGrid air_grid(const std::array<double, 3>& min_nm,
                             const std::array<double, 3>& max_nm, double resolution_nm);

// Evenly spaced wavelength samples center widthhalf, inclusive.
std::vector<double> default_band(double center_nm, double halfwidth_nm,
                                 double step_nm = 0.5);

// Closed box around a dipole for total-emitted-power spectra.
MonitorSpec total_power_monitor(const std::array<double, 3>& center_nm,
                                double half_size_nm, std::vector<double> wavelengths_nm,
                                std::string name = "total_power");

// Collection box for far-field work: open-bottom resting just above the
// substrate when the mirror is present, closed and centered otherwise.
MonitorSpec emission_box_monitor(const scene::SceneSpec& spec, double side_nm,
                                 std::vector<double> wavelengths_nm,
                                 double resolution_nm,
                                 std::string name = "emission_box");

}  // namespace nwcav::fdtd
