#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

// Parametric device geometry (hexagonal nanowire, crown, oxide buffer, gold
// mirror) and material models, rasterized onto a uniform Yee grid.
//
// Conventions used throughout:
//  - The wire axis is z; the hexagonal cross-section is "pointy-x": vertices
//    on the x-axis, flats facing +/-y. diameter_nm is vertex-to-vertex, so
//    the side length is diameter_nm / 2.
//  - With the mirror enabled the z-stack is gold (z < 0), oxide
//    [0, oxide_thickness), wire [oxide_thickness, oxide_thickness + height).
//    Without the mirror the wire spans [0, height) and there is no oxide.
//  - The lateral domain is square and centered on the wire axis, which keeps
//    the grid exactly invariant under x -> -x and y -> -y.

namespace nwcav::scene {

struct Band {
    double lo_nm = 0.0;
    double hi_nm = 0.0;
    bool contains(double wavelength_nm) const {
        return wavelength_nm >= lo_nm && wavelength_nm <= hi_nm;
    }
};

enum class MaterialKind { ConstantIndex, DispersivePoleModel };

// One susceptibility pole chi(w) = amplitude / (omega0^2 - w^2 - i*gamma*w),
// e^{-i w t} convention, so passive materials have Im(eps) >= 0. A Drude term
// is a pole with omega0 = 0.
struct Pole {
    double amplitude = 0.0;    // rad^2/s^2
    double omega0 = 0.0;       // rad/s
    double gamma = 0.0;        // rad/s, >= 0 (causality)
};

struct MaterialModel {
    MaterialKind kind = MaterialKind::ConstantIndex;
    std::string name;
    double refractive_index = 1.0;    // constant-index materials only
    double epsilon_infinity = 1.0;
    std::vector<Pole> poles;          // empty for constant-index
    Band fit_band_nm;                 // dispersive models only
    double fit_residual = 0.0;        // max relative error on the fit band

    static MaterialModel constant(std::string name, double refractive_index);
};

// Evaluates the model at one wavelength. Dispersive models reject queries
// outside their fit band.
std::complex<double> permittivity_at(const MaterialModel& model, double wavelength_nm);

struct MaterialSample {
    double wavelength_nm = 0.0;
    std::complex<double> eps;
};

// Reads a tabulation with columns (wavelength_nm, re_eps, im_eps), sorted
// ascending by wavelength on return.
std::vector<MaterialSample> read_material_table(const std::string& path);

// Fits eps(w) = eps_inf + sum_p amplitude_p / (omega0_p^2 - w^2 - i gamma_p w)
// to the tabulated points inside the band (plus the interpolated band edges).
// Pole 0 is Drude (omega0 fixed at 0); the rest are Lorentz. Throws if the
// achieved max relative error exceeds `tolerance`; the residual is recorded
// in the returned model either way it is below.
MaterialModel fit_metal_poles(const std::vector<MaterialSample>& table,
                              Band band_nm, int n_poles,
                              std::string name = "metal",
                              double tolerance = 0.02);

struct SceneSpec {
    double diameter_nm = 420.0;             // hexagon vertex-to-vertex (D)
    double height_nm = 1375.0;              // wire height (H)
    double crown_height_nm = 0.0;           // hexagonal-pyramid taper at the top
    double oxide_thickness_nm = 12.0;       // buffer on the mirror
    bool mirror_enabled = true;
    double dipole_offset_from_top_nm = 30.0;
    double dipole_lateral_offset_nm = 0.0;  // along the in-plane polarization axis
    std::array<double, 3> dipole_orientation{1.0, 0.0, 0.0};
    double nanowire_index = 3.44;
    double oxide_index = 1.45;              // assumption: fused silica near 900 nm
    double center_wavelength_nm = 900.0;
    double band_halfwidth_nm = 50.0;

    void validate() const;                  // throws std::invalid_argument

    double wire_base_z_nm() const { return mirror_enabled ? oxide_thickness_nm : 0.0; }
    double wire_top_z_nm() const { return wire_base_z_nm() + height_nm; }
    std::array<double, 3> dipole_position_nm() const;
};

// Point-in-hexagon test for the pointy-x regular hexagon with the given side
// length, symmetric under x -> -x and y -> -y exactly in floating point.
bool inside_hexagon(double x_nm, double y_nm, double side_nm);

struct GridLayout {
    int nx = 0, ny = 0, nz = 0;             // cell counts
    double dx_nm = 0.0;
    double x0_nm = 0.0, y0_nm = 0.0, z0_nm = 0.0;  // node (0,0,0) position

    long long cells() const { return static_cast<long long>(nx) * ny * nz; }
    long long nodes() const {
        return static_cast<long long>(nx + 1) * (ny + 1) * (nz + 1);
    }
    // Unified node index used for every staggered field array.
    long long node_id(int i, int j, int k) const {
        return (static_cast<long long>(k) * (ny + 1) + j) * (nx + 1) + i;
    }
    long long cell_id(int i, int j, int k) const {
        return (static_cast<long long>(k) * ny + j) * nx + i;
    }
    double x_node(int i) const { return x0_nm + i * dx_nm; }
    double y_node(int j) const { return y0_nm + j * dx_nm; }
    double z_node(int k) const { return z0_nm + k * dx_nm; }
};

// Cell material indices plus per-edge relative permittivity at each E-edge
// midpoint (component 0/1/2 = x/y/z edges, unified node indexing). Edges of
// dispersive materials carry epsilon_infinity here; their pole updates come
// from `materials`. The only sub-cell treatment is z-averaging across the
// oxide slab boundaries; everything else is staircase by midpoint material.
struct MaterialGrid {
    GridLayout layout;
    std::vector<MaterialModel> materials;
    std::vector<std::uint8_t> cell_material;               // layout.cells()
    std::array<std::vector<double>, 3> edge_eps_rel;       // layout.nodes() each
    std::array<std::vector<std::uint8_t>, 3> edge_material;
    std::vector<std::string> warnings;

    int material_index(const std::string& name) const;     // -1 if absent
    long long count_cells(const std::string& name) const;
};

// Per-side domain growth beyond the geometry bounding box. Tall collection
// monitors need headroom above the wire without paying for an equally thick
// (and, with the mirror, dispersive) slab underneath.
struct DomainPadding {
    double lateral_nm = 620.0;
    double below_nm = 620.0;
    double above_nm = 620.0;
};

// Rasterizes the scene onto a uniform grid. The domain is the geometry's
// bounding box grown by the padding on each side (the gold half-space runs
// through the bottom padding), snapped outward to whole cells; the caller is
// responsible for making the padding cover its absorber and monitor
// clearance. `gold` supplies the mirror's dispersive model; when absent a
// pole-less placeholder is declared so geometry work can proceed, and the
// solver rejects it at run time.
MaterialGrid rasterize(const SceneSpec& spec, double resolution_nm,
                       const DomainPadding& padding,
                       const std::optional<MaterialModel>& gold = std::nullopt);
MaterialGrid rasterize(const SceneSpec& spec, double resolution_nm,
                       double domain_padding_nm,
                       const std::optional<MaterialModel>& gold = std::nullopt);

}  // namespace nwcav::scene
