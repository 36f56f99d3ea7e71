#include "nwcav/cli/app.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

#include <CLI11.hpp>

#include "nwcav/cli/config.hpp"
#include "nwcav/cli/exports.hpp"
#include "nwcav/cli/manifest.hpp"
#include "nwcav/emission/emission.hpp"
#include "nwcav/fdtd/fdtd.hpp"
#include "nwcav/io/sha256.hpp"
#include "nwcav/io/tsv.hpp"
#include "nwcav/modes/solver.hpp"
#include "nwcav/sweep/sweep.hpp"

namespace nwcav::cli {

namespace fs = std::filesystem;

namespace {

struct GlobalFlags {
    std::string config_path;
    std::string out_override;
    std::string resume_path;
    std::string report_dir;
    std::string table_override;
    double resolution_override = 0.0;
    int threads = 0;
    bool quiet = false;
};

std::ostream& info(const GlobalFlags& g) {
    static std::ofstream sink;  // default-constructed: writes are no-ops
    return g.quiet ? static_cast<std::ostream&>(sink) : std::cout;
}

JobConfig default_config() { return parse_config_text(R"({"schema_version": 1})"); }

JobConfig load_with_overrides(const GlobalFlags& g) {
    JobConfig cfg = g.config_path.empty() ? default_config() : load_config(g.config_path);
    if (g.resolution_override > 0.0) {
        cfg.numerics.resolution_nm = g.resolution_override;
        cfg.applied_defaults.push_back("numerics.resolution_nm = " +
                                       io::format_double(g.resolution_override) +
                                       " (--resolution-nm override)");
    }
    if (!g.out_override.empty()) cfg.output_dir = g.out_override;
    if (g.threads > 0) {
#ifdef _OPENMP
        omp_set_num_threads(g.threads);
#endif
        if (cfg.sweep) cfg.sweep->workers = g.threads;
    }
    return cfg;
}

std::string resolve_material_table(const MaterialConfig& m) {
    if (!m.mirror_table_tsv.empty()) return m.mirror_table_tsv;
    if (const char* d = std::getenv("NWCAV_DATA_DIR")) {
        const std::string p = std::string(d) + "/gold_jc1972.tsv";
        if (fs::exists(p)) return p;
    }
    if (fs::exists("data/gold_jc1972.tsv")) return "data/gold_jc1972.tsv";
    throw std::runtime_error(
        "no mirror material table found; set materials.mirror_table_tsv in the config");
}

scene::Band fit_band(const scene::SceneSpec& s) {
    return {s.center_wavelength_nm - s.band_halfwidth_nm - 10.0,
            s.center_wavelength_nm + s.band_halfwidth_nm + 10.0};
}

std::optional<scene::MaterialModel> mirror_model(const JobConfig& cfg,
                                                 const GlobalFlags& g) {
    if (!cfg.scene.mirror_enabled) return std::nullopt;
    const std::string table = resolve_material_table(cfg.materials);
    auto samples = scene::read_material_table(table);
    auto model = scene::fit_metal_poles(samples, fit_band(cfg.scene), cfg.materials.poles,
                                        "gold", cfg.materials.fit_tolerance);
    info(g) << "mirror material: " << cfg.materials.poles << "-pole fit to " << table
            << ", max relative error " << model.fit_residual << "\n";
    return model;
}

// Domain sized so the collection box clears the absorber on every side
// without paying for an equally tall slab under the mirror.
scene::DomainPadding padding_for(const JobConfig& cfg) {
    const auto& s = cfg.scene;
    const double res = cfg.numerics.resolution_nm;
    const double gap = (cfg.numerics.absorber_layers + 6) * res;
    const double side = cfg.analysis.monitor_box_nm;
    scene::DomainPadding p;
    p.lateral_nm = std::max(620.0, 0.5 * (side - s.diameter_nm) + gap);
    double box_zmin, box_zmax;
    if (s.mirror_enabled) {
        box_zmin = s.oxide_thickness_nm + res;
        box_zmax = box_zmin + side;
        p.below_nm = gap;  // mirror metal fills the bottom padding anyway
    } else {
        const double zc = 0.5 * (s.wire_base_z_nm() + s.wire_top_z_nm());
        box_zmin = zc - 0.5 * side;
        box_zmax = zc + 0.5 * side;
        p.below_nm = std::max(620.0, -box_zmin + gap);
    }
    p.above_nm = std::max(620.0, box_zmax - s.wire_top_z_nm() + gap);
    return p;
}

// Total-power box around the dipole, shrunk when the emitter sits close to
// the oxide so no face dips into the substrate stack.
double total_power_half(const JobConfig& cfg) {
    const auto p = cfg.scene.dipole_position_nm();
    double half = 120.0;
    if (cfg.scene.mirror_enabled)
        half = std::min(half, p[2] - cfg.scene.oxide_thickness_nm -
                                  2.0 * cfg.numerics.resolution_nm);
    return std::max(half, 4.0 * cfg.numerics.resolution_nm);
}

std::size_t nearest_index(const std::vector<double>& grid, double value) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < grid.size(); ++i)
        if (std::abs(grid[i] - value) < std::abs(grid[best] - value)) best = i;
    return best;
}

void write_config_record(JobDir& jd, const JobConfig& cfg) {
    {
        std::ofstream out(jd.path("config_resolved.json"), std::ios::binary);
        out << cfg.canonical_text << "\n";
    }
    jd.record_output("config_resolved.json");
    {
        std::ofstream out(jd.path("defaults.txt"), std::ios::binary);
        out << "# defaults and overrides applied to this job, one per line\n";
        for (const auto& d : cfg.applied_defaults) out << d << "\n";
    }
    jd.record_output("defaults.txt");
}

int cmd_run(const GlobalFlags& g, bool farfield_only) {
    JobConfig cfg = load_with_overrides(g);
    const auto wavelengths = fdtd::default_band(
        cfg.scene.center_wavelength_nm, cfg.scene.band_halfwidth_nm, cfg.wavelength_step_nm);
    const auto gold = mirror_model(cfg, g);

    JobDir jd(cfg.output_dir, farfield_only ? "farfield" : "run", cfg.sha256());
    write_config_record(jd, cfg);

    std::vector<fdtd::MonitorSpec> monitors{
        fdtd::total_power_monitor(cfg.scene.dipole_position_nm(), total_power_half(cfg),
                                  wavelengths),
        fdtd::emission_box_monitor(cfg.scene, cfg.analysis.monitor_box_nm, wavelengths,
                                   cfg.numerics.resolution_nm)};
    fdtd::RunControl rc;
    rc.resume_from = g.resume_path;
    rc.checkpoint_path = jd.path("cavity.ckpt");
    rc.checkpoint_every = cfg.checkpoint_every_steps;

    info(g) << "cavity run: mesh " << cfg.numerics.resolution_nm << " nm, band "
            << wavelengths.front() << "-" << wavelengths.back() << " nm ("
            << wavelengths.size() << " samples)\n";
    const auto cavity =
        fdtd::run(cfg.scene, cfg.numerics, monitors, gold, padding_for(cfg), rc);
    jd.record_convergence(
        {"cavity", cavity.termination, !cavity.under_resolved, cavity.steps});
    info(g) << "cavity run: " << cavity.steps << " steps, " << cavity.termination << "\n";

    std::ostringstream summary;
    summary << "# job summary\n";
    bool converged = !cavity.under_resolved;
    std::size_t wl_index = nearest_index(wavelengths, cfg.scene.center_wavelength_nm);

    if (!farfield_only) {
        const auto vacuum = sweep::vacuum_reference(cfg.scene, cfg.numerics, wavelengths);
        jd.record_convergence(
            {"vacuum_reference", vacuum.termination, !vacuum.under_resolved, vacuum.steps});
        const auto spectrum = emission::purcell_spectrum(cavity, vacuum);
        write_purcell_spectrum(jd.path("purcell.tsv"), spectrum);
        jd.record_output("purcell.tsv");
        write_spectrum_plot(jd.path("purcell.gp"), "purcell.tsv");
        jd.record_output("purcell.gp");
        converged = converged && !spectrum.flagged_under_resolved;
        if (spectrum.peak) {
            wl_index = nearest_index(wavelengths, spectrum.peak->wavelength_nm);
            summary << "peak_wavelength_nm: " << spectrum.peak->wavelength_nm << "\n";
            summary << "peak_purcell: " << spectrum.peak->value << "\n";
            summary << "fwhm_nm: " << spectrum.peak->fwhm_nm
                    << (spectrum.peak->fwhm_is_lower_bound ? " (band-limited lower bound)"
                                                           : "")
                    << "\n";
        } else {
            summary << "peak_wavelength_nm: outside the simulated band\n";
        }
    }

    const auto& box = cavity.monitor("emission_box");
    emission::FarFieldOptions ffopt = cfg.analysis.angular;
    if (cfg.scene.mirror_enabled) ffopt.mirror_plane_z_nm = 0.0;
    const auto ff = emission::near_to_far(box, cavity.layout, wl_index, ffopt);
    write_far_field(jd.path("farfield.tsv"), ff);
    jd.record_output("farfield.tsv");
    write_far_field_plot(jd.path("farfield.gp"), "farfield.tsv");
    jd.record_output("farfield.gp");

    const double total_w = cavity.monitor("total_power").power_w[wl_index];
    summary << "farfield_wavelength_nm: " << wavelengths[wl_index] << "\n";
    for (double na : cfg.analysis.numerical_apertures)
        summary << "extraction_efficiency_na_" << na << ": "
                << emission::extraction_efficiency(ff, na, total_w) << "\n";
    const auto ov = emission::gaussian_overlap(ff, cfg.analysis.overlap);
    summary << "gaussian_overlap: " << ov.efficiency << " (beam half-angle " << ov.theta_deg
            << " deg)\n";
    summary << "cavity_steps: " << cavity.steps << "\n";
    summary << "cavity_termination: " << cavity.termination << "\n";

    {
        std::ofstream out(jd.path("summary.txt"), std::ios::binary);
        out << summary.str();
    }
    jd.record_output("summary.txt");
    info(g) << summary.str();

    std::error_code ec;
    fs::remove(jd.path("cavity.ckpt"), ec);  // keep checkpoints only for failed runs
    jd.finalize(converged);
    return converged ? 0 : 1;
}

int cmd_sweep(const GlobalFlags& g) {
    JobConfig cfg = load_with_overrides(g);
    if (!cfg.sweep)
        throw std::runtime_error("the sweep subcommand needs a sweep block in the config");
    if (cfg.sweep->axis == "diameter")
        throw std::runtime_error("sweep.axis 'diameter' belongs to the modes subcommand");

    sweep::SweepOptions opt;
    opt.workers = cfg.sweep->workers;
    opt.wavelength_step_nm = cfg.wavelength_step_nm;
    opt.mirror_material = mirror_model(cfg, g);

    JobDir jd(cfg.output_dir, "sweep", cfg.sha256());
    write_config_record(jd, cfg);

    info(g) << "sweep over " << cfg.sweep->axis << ": " << cfg.sweep->values.size()
            << " rows, " << opt.workers << " worker(s)\n";

    std::ostringstream summary;
    summary << "# sweep summary\n";
    sweep::PurcellMap map;
    if (cfg.sweep->axis == "height") {
        map = sweep::sweep_height(cfg.scene, cfg.sweep->values, cfg.numerics, opt);
    } else if (cfg.sweep->axis == "crown_height") {
        map = sweep::tolerance_sweep(cfg.scene, sweep::ToleranceAxis::CrownHeight,
                                     cfg.sweep->values, cfg.numerics, opt);
    } else if (cfg.sweep->axis == "lateral_offset") {
        map = sweep::tolerance_sweep(cfg.scene, sweep::ToleranceAxis::LateralOffset,
                                     cfg.sweep->values, cfg.numerics, opt);
    } else {  // "scale"
        auto res = sweep::sweep_scale(cfg.scene, cfg.sweep->values, cfg.numerics, opt);
        map = std::move(res.map);
        write_scaling_fit(jd.path("scaling_fit.tsv"), res.fit);
        jd.record_output("scaling_fit.tsv");
        write_scaling_plot(jd.path("scaling.gp"), "scaling_fit.tsv", res.fit.slope_nm,
                           res.fit.intercept_nm);
        jd.record_output("scaling.gp");
        summary << "scaling_slope_nm: " << res.fit.slope_nm << "\n";
        summary << "scaling_intercept_nm: " << res.fit.intercept_nm << "\n";
        summary << "scaling_residual_rms_nm: " << res.fit.residual_rms_nm << "\n";
    }

    write_purcell_map(jd.path("purcell_map.tsv"), map);
    jd.record_output("purcell_map.tsv");
    write_map_plot(jd.path("purcell_map.gp"), "purcell_map.tsv", map.parameter_name);
    jd.record_output("purcell_map.gp");

    bool all_ok = true;
    for (std::size_t r = 0; r < map.rows.size(); ++r) {
        const auto& st = map.rows[r];
        jd.record_convergence({map.parameter_name + " = " +
                                   io::format_double(map.parameter[r]),
                               st.failed ? st.message : "decayed", st.converged, 0});
        all_ok = all_ok && !st.failed && st.converged;
        if (st.failed)
            summary << "row_failed: " << map.parameter[r] << " (" << st.message << ")\n";
    }

    if (cfg.sweep->axis == "height") {
        try {
            const auto rep = sweep::detect_avoided_crossing(map);
            write_anticrossing_report(jd.path("anticrossing.tsv"), rep);
            jd.record_output("anticrossing.tsv");
            summary << "anticrossing_center_" << map.parameter_name << ": "
                    << rep.center_parameter << "\n";
            summary << "anticrossing_center_wavelength_nm: " << rep.center_wavelength_nm
                    << "\n";
            summary << "anticrossing_gap_nm: " << rep.gap_nm << "\n";
            summary << "is_crossing: " << (rep.is_crossing ? 1 : 0) << "\n";
            summary << "quasi_bic_" << map.parameter_name << ": " << rep.quasi_bic.parameter
                    << "\n";
            summary << "quasi_bic_f_p: " << rep.quasi_bic.f_p << "\n";
        } catch (const std::exception& e) {
            summary << "anticrossing: " << e.what() << "\n";
        }
        const double c = cfg.scene.center_wavelength_nm;
        const auto q = sweep::count_quasi_bic(map, c - 10.0, c + 10.0, 10.0);
        summary << "quasi_bic_count_window_" << c - 10.0 << "_" << c + 10.0
                << "_threshold_10: " << q.count << "\n";
    }

    {
        std::ofstream out(jd.path("summary.txt"), std::ios::binary);
        out << summary.str();
    }
    jd.record_output("summary.txt");
    info(g) << summary.str();

    jd.finalize(all_ok);
    return all_ok ? 0 : 1;
}

int cmd_modes(const GlobalFlags& g) {
    JobConfig cfg = load_with_overrides(g);
    modes::GuideSpec guide;
    guide.core_index = cfg.scene.nanowire_index;
    guide.clad_index = 1.0;
    guide.core_diameter_nm = modes::hexagon_equivalent_diameter(cfg.scene.diameter_nm);
    guide.wavelength_nm = cfg.scene.center_wavelength_nm;

    JobDir jd(cfg.output_dir, "modes", cfg.sha256());
    write_config_record(jd, cfg);

    const auto all = modes::all_guided_modes(guide);
    const auto coupled = modes::dipole_coupled_modes(all);

    std::ostringstream summary;
    summary << "# guided modes of the circular-equivalent wire core\n";
    summary << "# hex vertex-to-vertex " << cfg.scene.diameter_nm
            << " nm -> circular diameter " << guide.core_diameter_nm << " nm, wavelength "
            << guide.wavelength_nm << " nm, V = " << guide.v_number() << "\n";
    bool residual_ok = true;
    for (const auto& m : all) {
        summary << m.label() << ": n_eff " << io::format_double(m.n_eff) << ", residual "
                << m.residual << ", axis_weight " << m.axis_coupling_weight() << "\n";
        residual_ok = residual_ok && std::abs(m.residual) < 1e-8;
    }
    summary << "dipole_coupled:";
    for (const auto& m : coupled) summary << " " << m.label();
    summary << "\n";

    // Dispersion vs the hexagonal diameter; the solver runs on the
    // circular-equivalent guide for each value.
    std::vector<double> hex_d;
    if (cfg.sweep && cfg.sweep->axis == "diameter") {
        hex_d = cfg.sweep->values;
        std::sort(hex_d.begin(), hex_d.end());
    } else {
        for (double d = 150.0; d <= 500.0 + 1e-9; d += 5.0) hex_d.push_back(d);
    }
    std::vector<double> circ_d;
    circ_d.reserve(hex_d.size());
    for (double d : hex_d) circ_d.push_back(modes::hexagon_equivalent_diameter(d));
    auto disp = modes::dispersion_sweep(guide, circ_d);
    for (auto& curve : disp.curves)
        for (auto& d : curve.diameter_nm) {
            const auto it = std::find(circ_d.begin(), circ_d.end(), d);
            d = hex_d[static_cast<std::size_t>(it - circ_d.begin())];
        }
    modes::export_dispersion(jd.path("dispersion.tsv"), disp);
    jd.record_output("dispersion.tsv");
    write_dispersion_plot(jd.path("dispersion.gp"), "dispersion.tsv");
    jd.record_output("dispersion.gp");

    {
        std::ofstream out(jd.path("modes_summary.txt"), std::ios::binary);
        out << summary.str();
    }
    jd.record_output("modes_summary.txt");
    info(g) << summary.str();

    jd.record_convergence({"mode_solver", residual_ok ? "converged" : "residual above 1e-8",
                           residual_ok, 0});
    jd.finalize(residual_ok);
    return residual_ok ? 0 : 1;
}

int cmd_fit_material(const GlobalFlags& g) {
    JobConfig cfg = load_with_overrides(g);
    if (!g.table_override.empty()) cfg.materials.mirror_table_tsv = g.table_override;
    const std::string table = resolve_material_table(cfg.materials);

    JobDir jd(cfg.output_dir, "fit-material", cfg.sha256());
    write_config_record(jd, cfg);

    const auto samples = scene::read_material_table(table);
    const auto band = fit_band(cfg.scene);
    const auto model = scene::fit_metal_poles(samples, band, cfg.materials.poles, "gold",
                                              cfg.materials.fit_tolerance);
    write_material_model(jd.path("material.json"), model);
    jd.record_output("material.json");

    io::Table check;
    check.comments = {"tabulated vs fitted permittivity on the fit band",
                      "units: wavelength nm; permittivity dimensionless"};
    check.columns = {"wavelength_nm", "re_eps_table", "im_eps_table", "re_eps_fit",
                     "im_eps_fit"};
    for (const auto& s : samples) {
        if (!band.contains(s.wavelength_nm)) continue;
        const auto fitted = scene::permittivity_at(model, s.wavelength_nm);
        check.rows.push_back(
            {s.wavelength_nm, s.eps.real(), s.eps.imag(), fitted.real(), fitted.imag()});
    }
    io::write_table(jd.path("fit_check.tsv"), check);
    jd.record_output("fit_check.tsv");

    std::ostringstream summary;
    summary << "# metal fit summary\n";
    summary << "table: " << table << "\n";
    summary << "poles: " << cfg.materials.poles << "\n";
    summary << "band_nm: " << band.lo_nm << " " << band.hi_nm << "\n";
    summary << "max_relative_error: " << model.fit_residual << "\n";
    {
        std::ofstream out(jd.path("summary.txt"), std::ios::binary);
        out << summary.str();
    }
    jd.record_output("summary.txt");
    info(g) << summary.str();

    jd.record_convergence({"material_fit", "within tolerance", true, 0});
    jd.finalize(true);
    return 0;
}

int cmd_report(const GlobalFlags& g) {
    const std::string dir = !g.report_dir.empty() ? g.report_dir
                            : !g.out_override.empty()
                                ? g.out_override
                                : throw std::runtime_error("report needs a job directory");
    const std::string mpath = (fs::path(dir) / "manifest.json").string();
    if (!fs::exists(mpath))
        throw std::runtime_error("no manifest.json in '" + dir + "'; nothing to report");
    const RunManifest m = read_manifest(mpath);

    std::cout << "command: " << m.command << "\n";
    std::cout << "status: " << m.status << "\n";
    std::cout << "artifact_version: " << m.artifact_version << "\n";
    std::cout << "config_sha256: " << m.config_sha256 << "\n";
    std::cout << "wall_clock_s: " << m.wall_clock_s << "\n";
    std::cout << "total_steps: " << m.total_steps << "\n";
    std::cout << "converged: " << (m.converged ? "yes" : "no") << "\n";
    for (const auto& c : m.convergence)
        std::cout << "  run " << c.name << ": " << c.termination
                  << (c.converged ? "" : " [not converged]")
                  << (c.steps ? " (" + std::to_string(c.steps) + " steps)" : "") << "\n";
    bool checksums_ok = true;
    for (const auto& o : m.outputs) {
        const std::string p = (fs::path(dir) / o.file).string();
        std::string state = "missing";
        if (fs::exists(p)) {
            state = io::sha256_file_hex(p) == o.sha256 ? "ok" : "checksum mismatch";
        }
        checksums_ok = checksums_ok && state == "ok";
        std::cout << "  output " << o.file << ": " << state << "\n";
    }
    const std::string spath = (fs::path(dir) / "summary.txt").string();
    if (fs::exists(spath)) {
        std::ifstream in(spath, std::ios::binary);
        std::cout << in.rdbuf();
    }
    return (m.status == "complete" && m.converged && checksums_ok) ? 0 : 1;
}

}  // namespace

int run_app(const std::vector<std::string>& args) {
    CLI::App app{"hexagonal nanowire cavity electromagnetics toolkit"};
    app.require_subcommand(1);
    GlobalFlags g;
    app.add_option("--config", g.config_path, "job configuration file (JSON)");
    app.add_option("--out", g.out_override, "output directory (overrides the config)");
    app.add_option("--resolution-nm", g.resolution_override, "mesh step override (nm)");
    app.add_option("--threads", g.threads, "worker threads for kernels and sweeps");
    app.add_flag("--quiet", g.quiet, "suppress progress and summary output");

    auto* run = app.add_subcommand("run", "cavity run: Purcell spectrum, far field, summary");
    run->add_option("--resume", g.resume_path, "checkpoint file to resume from");
    auto* sweep = app.add_subcommand("sweep", "parameter sweep from the config's sweep block");
    auto* modes = app.add_subcommand("modes", "guided-mode table and dispersion curves");
    auto* farfield = app.add_subcommand("farfield", "far-field pattern only, no vacuum run");
    auto* fitmat = app.add_subcommand("fit-material", "fit the pole model to a permittivity table");
    fitmat->add_option("--table", g.table_override, "permittivity table (wavelength, re, im)");
    auto* report = app.add_subcommand("report", "print a job directory's manifest and summary");
    report->add_option("dir", g.report_dir, "job directory");
    for (auto* sub : {run, sweep, modes, farfield, fitmat, report}) sub->fallthrough();

    std::vector<const char*> argv;
    argv.push_back("nwcav");
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (run->parsed()) return cmd_run(g, false);
        if (farfield->parsed()) return cmd_run(g, true);
        if (sweep->parsed()) return cmd_sweep(g);
        if (modes->parsed()) return cmd_modes(g);
        if (fitmat->parsed()) return cmd_fit_material(g);
        if (report->parsed()) return cmd_report(g);
    } catch (const ConfigError& e) {
        std::cerr << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}

int run_app(int argc, char** argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run_app(args);
}

}  // namespace nwcav::cli
