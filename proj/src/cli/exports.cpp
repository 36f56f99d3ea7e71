#include "nwcav/cli/exports.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "nwcav/io/tsv.hpp"

namespace nwcav::cli {

using nlohmann::json;

namespace {

std::string fmt(double v) { return io::format_double(v); }

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    return out;
}

// Comment lookup: "key: value" within a table's comment block.
const std::string* find_comment(const io::Table& t, const std::string& key) {
    for (const auto& c : t.comments)
        if (c.rfind(key + ": ", 0) == 0) return &c;
    return nullptr;
}

double comment_number(const io::Table& t, const std::string& key, const std::string& path) {
    const std::string* c = find_comment(t, key);
    if (!c) throw std::runtime_error(path + ": missing '" + key + "' comment");
    return std::stod(c->substr(key.size() + 2));
}

}  // namespace

void write_purcell_spectrum(const std::string& path, const emission::PurcellSpectrum& s) {
    io::Table t;
    t.comments = {"Purcell spectrum: emitted power over the vacuum emitted power",
                  "reference: " + s.reference,
                  std::string("under_resolved: ") + (s.flagged_under_resolved ? "1" : "0"),
                  "units: wavelength nm; f_p dimensionless"};
    t.columns = {"wavelength_nm", "f_p"};
    for (std::size_t i = 0; i < s.wavelength_nm.size(); ++i)
        t.rows.push_back({s.wavelength_nm[i], s.f_p[i]});
    io::write_table(path, t);
}

emission::PurcellSpectrum read_purcell_spectrum(const std::string& path) {
    const io::Table t = io::read_table(path);
    emission::PurcellSpectrum s;
    s.wavelength_nm = t.column("wavelength_nm");
    s.f_p = t.column("f_p");
    if (const std::string* c = find_comment(t, "reference")) s.reference = c->substr(11);
    if (const std::string* c = find_comment(t, "under_resolved"))
        s.flagged_under_resolved = c->substr(16) == "1";
    try {
        s.peak = emission::find_peak_fwhm(s.wavelength_nm, s.f_p);
    } catch (const std::exception&) {
        s.peak.reset();
    }
    return s;
}

void write_far_field(const std::string& path, const emission::FarField& f) {
    auto out = open_out(path);
    out << "# far-field radiation pattern on the upper hemisphere\n";
    out << "# wavelength_nm: " << fmt(f.wavelength_nm) << "\n";
    out << "# total_power_w: " << fmt(f.total_power_w) << "\n";
    out << "# units: angles deg; power_density W/sr; field components are\n";
    out << "# r-scaled complex far-zone amplitudes (V) with e^{ikr}/r removed\n";
    out << "# theta_deg\tphi_deg\tpower_density_w_sr\tre_e_theta\tim_e_theta\tre_e_phi\tim_e_phi\n";
    const std::size_t np = f.phi_deg.size();
    for (std::size_t it = 0; it < f.theta_deg.size(); ++it) {
        if (it) out << "\n";  // block per theta scan line, plottable with pm3d
        for (std::size_t ip = 0; ip < np; ++ip) {
            const std::size_t k = it * np + ip;
            out << fmt(f.theta_deg[it]) << '\t' << fmt(f.phi_deg[ip]) << '\t'
                << fmt(f.power_density[k]) << '\t' << fmt(f.e_theta[k].real()) << '\t'
                << fmt(f.e_theta[k].imag()) << '\t' << fmt(f.e_phi[k].real()) << '\t'
                << fmt(f.e_phi[k].imag()) << '\n';
        }
    }
    if (!out) throw std::runtime_error("short write to " + path);
}

emission::FarField read_far_field(const std::string& path) {
    const io::Table t = io::read_table(path);
    emission::FarField f;
    f.wavelength_nm = comment_number(t, "wavelength_nm", path);
    f.total_power_w = comment_number(t, "total_power_w", path);
    if (t.rows.empty()) throw std::runtime_error(path + ": empty far field");
    std::size_t np = 0;
    while (np < t.rows.size() && t.rows[np][0] == t.rows[0][0]) ++np;
    if (np == 0 || t.rows.size() % np != 0)
        throw std::runtime_error(path + ": angular grid is not rectangular");
    const std::size_t nt = t.rows.size() / np;
    for (std::size_t ip = 0; ip < np; ++ip) f.phi_deg.push_back(t.rows[ip][1]);
    for (std::size_t it = 0; it < nt; ++it) f.theta_deg.push_back(t.rows[it * np][0]);
    f.power_density.resize(t.rows.size());
    f.e_theta.resize(t.rows.size());
    f.e_phi.resize(t.rows.size());
    for (std::size_t k = 0; k < t.rows.size(); ++k) {
        const auto& r = t.rows[k];
        f.power_density[k] = r[2];
        f.e_theta[k] = {r[3], r[4]};
        f.e_phi[k] = {r[5], r[6]};
    }
    return f;
}

void write_purcell_map(const std::string& path, const sweep::PurcellMap& m) {
    auto out = open_out(path);
    out << "# Purcell map over " << m.parameter_name << "\n";
    out << "# units: " << m.parameter_name << " and wavelength nm; f_p dimensionless\n";
    out << "# converged: 1 = spectrum from a fully decayed run, 0 = not converged\n";
    out << "# (failed rows carry nan values)\n";
    out << "# " << m.parameter_name << "\twavelength_nm\tf_p\tconverged\n";
    for (std::size_t r = 0; r < m.parameter.size(); ++r) {
        if (r) out << "\n";
        const double flag = (m.rows[r].converged && !m.rows[r].failed) ? 1.0 : 0.0;
        for (std::size_t c = 0; c < m.wavelength_nm.size(); ++c)
            out << fmt(m.parameter[r]) << '\t' << fmt(m.wavelength_nm[c]) << '\t'
                << fmt(m.at(r, c)) << '\t' << fmt(flag) << '\n';
    }
    if (!out) throw std::runtime_error("short write to " + path);
}

sweep::PurcellMap read_purcell_map(const std::string& path) {
    const io::Table t = io::read_table(path);
    if (t.columns.size() != 4 || t.columns[1] != "wavelength_nm")
        throw std::runtime_error(path + ": not a Purcell map table");
    sweep::PurcellMap m;
    m.parameter_name = t.columns[0];
    if (t.rows.empty()) throw std::runtime_error(path + ": empty map");
    std::size_t ncols = 0;
    while (ncols < t.rows.size() && t.rows[ncols][0] == t.rows[0][0]) ++ncols;
    if (ncols == 0 || t.rows.size() % ncols != 0)
        throw std::runtime_error(path + ": map is not rectangular");
    const std::size_t nrows = t.rows.size() / ncols;
    for (std::size_t c = 0; c < ncols; ++c) m.wavelength_nm.push_back(t.rows[c][1]);
    m.f_p.resize(nrows * ncols);
    for (std::size_t r = 0; r < nrows; ++r) {
        m.parameter.push_back(t.rows[r * ncols][0]);
        sweep::RowStatus st;
        st.converged = t.rows[r * ncols][3] == 1.0;
        bool all_nan = true;
        for (std::size_t c = 0; c < ncols; ++c) {
            const double v = t.rows[r * ncols + c][2];
            m.f_p[r * ncols + c] = v;
            all_nan = all_nan && std::isnan(v);
        }
        st.failed = !st.converged && all_nan;
        if (st.failed) st.message = "row failed (see the job manifest for the cause)";
        m.rows.push_back(std::move(st));
    }
    return m;
}

void write_anticrossing_report(const std::string& path, const sweep::AnticrossingReport& r) {
    io::Table t;
    t.comments = {"avoided-crossing report",
                  "center_parameter: " + fmt(r.center_parameter),
                  "center_wavelength_nm: " + fmt(r.center_wavelength_nm),
                  "gap_nm: " + fmt(r.gap_nm),
                  std::string("is_crossing: ") + (r.is_crossing ? "1" : "0"),
                  "quasi_bic_parameter: " + fmt(r.quasi_bic.parameter),
                  "quasi_bic_wavelength_nm: " + fmt(r.quasi_bic.wavelength_nm),
                  "quasi_bic_f_p: " + fmt(r.quasi_bic.f_p),
                  "branch: 0 = lower-index ridge, 1 = its partner"};
    t.columns = {"branch", "parameter", "wavelength_nm", "f_p"};
    for (const auto& p : r.branch_a) t.rows.push_back({0.0, p.parameter, p.wavelength_nm, p.f_p});
    for (const auto& p : r.branch_b) t.rows.push_back({1.0, p.parameter, p.wavelength_nm, p.f_p});
    io::write_table(path, t);
}

sweep::AnticrossingReport read_anticrossing_report(const std::string& path) {
    const io::Table t = io::read_table(path);
    sweep::AnticrossingReport r;
    r.center_parameter = comment_number(t, "center_parameter", path);
    r.center_wavelength_nm = comment_number(t, "center_wavelength_nm", path);
    r.gap_nm = comment_number(t, "gap_nm", path);
    r.is_crossing = comment_number(t, "is_crossing", path) == 1.0;
    r.quasi_bic.parameter = comment_number(t, "quasi_bic_parameter", path);
    r.quasi_bic.wavelength_nm = comment_number(t, "quasi_bic_wavelength_nm", path);
    r.quasi_bic.f_p = comment_number(t, "quasi_bic_f_p", path);
    for (const auto& row : t.rows) {
        sweep::RidgePoint p{row[1], row[2], row[3]};
        (row[0] == 0.0 ? r.branch_a : r.branch_b).push_back(p);
    }
    return r;
}

void write_scaling_fit(const std::string& path, const sweep::ScalingFit& f) {
    std::string excluded = "excluded_scale:";
    for (double s : f.excluded_scale) excluded += " " + fmt(s);
    io::Table t;
    t.comments = {"scaling-law fit: peak_nm = slope_nm * scale + intercept_nm",
                  "slope_nm: " + fmt(f.slope_nm),
                  "intercept_nm: " + fmt(f.intercept_nm),
                  "residual_rms_nm: " + fmt(f.residual_rms_nm),
                  excluded};
    t.columns = {"scale", "peak_nm"};
    for (std::size_t i = 0; i < f.scale.size(); ++i) t.rows.push_back({f.scale[i], f.peak_nm[i]});
    io::write_table(path, t);
}

sweep::ScalingFit read_scaling_fit(const std::string& path) {
    const io::Table t = io::read_table(path);
    sweep::ScalingFit f;
    f.slope_nm = comment_number(t, "slope_nm", path);
    f.intercept_nm = comment_number(t, "intercept_nm", path);
    f.residual_rms_nm = comment_number(t, "residual_rms_nm", path);
    for (const auto& c : t.comments) {
        if (c.rfind("excluded_scale:", 0) != 0) continue;
        std::istringstream is(c.substr(15));
        double v;
        while (is >> v) f.excluded_scale.push_back(v);
    }
    f.scale = t.column("scale");
    f.peak_nm = t.column("peak_nm");
    return f;
}

void write_material_model(const std::string& path, const scene::MaterialModel& m) {
    json j;
    j["kind"] = m.kind == scene::MaterialKind::ConstantIndex ? "constant_index"
                                                             : "dispersive_pole_model";
    j["name"] = m.name;
    j["refractive_index"] = m.refractive_index;
    j["epsilon_infinity"] = m.epsilon_infinity;
    j["fit_band_nm"] = {{"lo", m.fit_band_nm.lo_nm}, {"hi", m.fit_band_nm.hi_nm}};
    j["fit_residual"] = m.fit_residual;
    j["poles"] = json::array();
    for (const auto& p : m.poles)
        j["poles"].push_back(
            {{"amplitude", p.amplitude}, {"omega0", p.omega0}, {"gamma", p.gamma}});
    auto out = open_out(path);
    out << j.dump(2) << "\n";
    if (!out) throw std::runtime_error("short write to " + path);
}

scene::MaterialModel read_material_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path);
    json j;
    in >> j;
    scene::MaterialModel m;
    m.kind = j.at("kind").get<std::string>() == "constant_index"
                 ? scene::MaterialKind::ConstantIndex
                 : scene::MaterialKind::DispersivePoleModel;
    m.name = j.at("name").get<std::string>();
    m.refractive_index = j.at("refractive_index").get<double>();
    m.epsilon_infinity = j.at("epsilon_infinity").get<double>();
    m.fit_band_nm.lo_nm = j.at("fit_band_nm").at("lo").get<double>();
    m.fit_band_nm.hi_nm = j.at("fit_band_nm").at("hi").get<double>();
    m.fit_residual = j.at("fit_residual").get<double>();
    for (const auto& p : j.at("poles"))
        m.poles.push_back({p.at("amplitude").get<double>(), p.at("omega0").get<double>(),
                           p.at("gamma").get<double>()});
    return m;
}

modes::ModeDispersion read_dispersion(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path);
    modes::ModeDispersion d;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream is(line);
        double diameter, neff;
        std::string label;
        if (!(is >> diameter >> label >> neff))
            throw std::runtime_error(path + ": bad dispersion row at line " +
                                     std::to_string(lineno));
        modes::ModeCurve* curve = nullptr;
        for (auto& c : d.curves)
            if (c.label == label) curve = &c;
        if (!curve) {
            modes::ModeCurve c;
            c.label = label;
            if (label.size() >= 4) {
                const std::string fam = label.substr(0, 2);
                c.family = fam == "TE"   ? modes::ModeFamily::TE
                           : fam == "TM" ? modes::ModeFamily::TM
                           : fam == "EH" ? modes::ModeFamily::EH
                                         : modes::ModeFamily::HE;
                c.l = label[2] - '0';
                c.m = label[3] - '0';
            }
            d.curves.push_back(std::move(c));
            curve = &d.curves.back();
        }
        curve->diameter_nm.push_back(diameter);
        curve->n_eff.push_back(neff);
    }
    if (d.curves.empty()) throw std::runtime_error(path + ": no dispersion data");
    return d;
}

void write_spectrum_plot(const std::string& path, const std::string& data_file) {
    auto out = open_out(path);
    out << "set terminal pngcairo size 900,600\n"
        << "set output 'purcell.png'\n"
        << "set xlabel 'wavelength (nm)'\n"
        << "set ylabel 'Purcell factor'\n"
        << "set grid\n"
        << "plot '" << data_file << "' using 1:2 with lines lw 2 title 'F_p'\n";
}

void write_map_plot(const std::string& path, const std::string& data_file,
                    const std::string& parameter_label) {
    auto out = open_out(path);
    out << "set terminal pngcairo size 900,700\n"
        << "set output 'purcell_map.png'\n"
        << "set xlabel '" << parameter_label << "'\n"
        << "set ylabel 'wavelength (nm)'\n"
        << "set cblabel 'F_p'\n"
        << "set pm3d map\n"
        << "splot '" << data_file << "' using 1:2:3 notitle\n";
}

void write_far_field_plot(const std::string& path, const std::string& data_file) {
    auto out = open_out(path);
    out << "set terminal pngcairo size 800,700\n"
        << "set output 'farfield.png'\n"
        << "set xlabel 'theta cos(phi) (deg)'\n"
        << "set ylabel 'theta sin(phi) (deg)'\n"
        << "set cblabel 'power density (W/sr)'\n"
        << "set size square\n"
        << "set pm3d map\n"
        << "d2r = pi / 180.0\n"
        << "splot '" << data_file
        << "' using ($1*cos($2*d2r)):($1*sin($2*d2r)):3 notitle\n";
}

void write_scaling_plot(const std::string& path, const std::string& fit_file, double slope_nm,
                        double intercept_nm) {
    auto out = open_out(path);
    out << "set terminal pngcairo size 900,600\n"
        << "set output 'scaling.png'\n"
        << "set xlabel 'scale factor'\n"
        << "set ylabel 'peak wavelength (nm)'\n"
        << "set grid\n"
        << "f(x) = " << fmt(slope_nm) << " * x + " << fmt(intercept_nm) << "\n"
        << "plot '" << fit_file << "' using 1:2 with points pt 7 title 'sweep', "
        << "f(x) with lines title 'fit'\n";
}

void write_dispersion_plot(const std::string& path, const std::string& data_file) {
    auto out = open_out(path);
    out << "set terminal pngcairo size 900,600\n"
        << "set output 'dispersion.png'\n"
        << "set xlabel 'core diameter (nm)'\n"
        << "set ylabel 'effective index'\n"
        << "set grid\n"
        << "set key outside\n"
        << "plot for [label in system('awk ''!/^#/{print $2}'' " << data_file
        << " | sort -u')] '" << data_file
        << "' using 1:($0, strcol(2) eq label ? $3 : 1/0) with linespoints title label\n";
}

}  // namespace nwcav::cli
