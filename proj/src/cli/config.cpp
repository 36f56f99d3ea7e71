#include "nwcav/cli/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "nwcav/io/sha256.hpp"
#include "nwcav/io/tsv.hpp"

namespace nwcav::cli {

using nlohmann::json;

namespace {

std::string join_path(const std::string& base, const char* key) {
    return base.empty() ? key : base + "." + key;
}

// Collects every violation and every applied default while walking the
// document; nothing throws until the walk is over.
struct Walk {
    std::vector<std::string> errors;
    std::vector<std::string> defaults;

    void fail(const std::string& path, const std::string& msg) {
        errors.push_back(path + ": " + msg);
    }

    void note_default(const std::string& path, const std::string& value, const char* origin) {
        defaults.push_back(path + " = " + value + " (" + origin + ")");
    }

    void reject_unknown(const json& obj, const std::string& base,
                        std::initializer_list<const char*> allowed) {
        for (const auto& item : obj.items()) {
            bool known = false;
            for (const char* k : allowed)
                if (item.key() == k) {
                    known = true;
                    break;
                }
            if (known) continue;
            const std::string path = join_path(base, item.key().c_str());
            if (item.key() == "mesh_order")
                fail(path,
                     "unknown key; the solver runs on a single uniform mesh step "
                     "(numerics.resolution_nm) and graded meshing is intentionally "
                     "unsupported, see the meshing note in the README");
            else
                fail(path, "unknown key");
        }
    }

    const json* block(const json& obj, const std::string& base, const char* key) {
        if (!obj.contains(key)) return nullptr;
        const json& v = obj.at(key);
        if (!v.is_object()) {
            fail(join_path(base, key), "must be an object");
            return nullptr;
        }
        return &v;
    }

    void number(const json* obj, const std::string& base, const char* key, double& out,
                const char* origin) {
        const std::string path = join_path(base, key);
        if (obj && obj->contains(key)) {
            const json& v = obj->at(key);
            if (!v.is_number()) {
                fail(path, "must be a number");
                return;
            }
            out = v.get<double>();
            return;
        }
        note_default(path, io::format_double(out), origin);
    }

    void integer(const json* obj, const std::string& base, const char* key, long long& out,
                 const char* origin) {
        const std::string path = join_path(base, key);
        if (obj && obj->contains(key)) {
            const json& v = obj->at(key);
            if (!v.is_number_integer()) {
                fail(path, "must be an integer");
                return;
            }
            out = v.get<long long>();
            return;
        }
        note_default(path, std::to_string(out), origin);
    }

    void integer(const json* obj, const std::string& base, const char* key, int& out,
                 const char* origin) {
        long long wide = out;
        integer(obj, base, key, wide, origin);
        out = static_cast<int>(wide);
    }

    void boolean(const json* obj, const std::string& base, const char* key, bool& out,
                 const char* origin) {
        const std::string path = join_path(base, key);
        if (obj && obj->contains(key)) {
            const json& v = obj->at(key);
            if (!v.is_boolean()) {
                fail(path, "must be true or false");
                return;
            }
            out = v.get<bool>();
            return;
        }
        note_default(path, out ? "true" : "false", origin);
    }

    void text(const json* obj, const std::string& base, const char* key, std::string& out,
              const char* origin) {
        const std::string path = join_path(base, key);
        if (obj && obj->contains(key)) {
            const json& v = obj->at(key);
            if (!v.is_string()) {
                fail(path, "must be a string");
                return;
            }
            out = v.get<std::string>();
            return;
        }
        note_default(path, out.empty() ? "\"\"" : out, origin);
    }

    bool number_list(const json& v, const std::string& path, std::vector<double>& out) {
        if (!v.is_array() || v.empty()) {
            fail(path, "must be a non-empty array of numbers");
            return false;
        }
        std::vector<double> tmp;
        for (const auto& e : v) {
            if (!e.is_number()) {
                fail(path, "must contain numbers only");
                return false;
            }
            tmp.push_back(e.get<double>());
        }
        out = std::move(tmp);
        return true;
    }
};

std::string list_text(const std::vector<double>& v) {
    std::string s = "[";
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ", ";
        s += io::format_double(v[i]);
    }
    return s + "]";
}

void parse_scene(Walk& w, const json* obj, scene::SceneSpec& s) {
    const std::string base = "scene";
    if (obj)
        w.reject_unknown(*obj, base,
                         {"diameter_nm", "height_nm", "crown_height_nm", "oxide_thickness_nm",
                          "mirror_enabled", "dipole_offset_from_top_nm",
                          "dipole_lateral_offset_nm", "dipole_orientation", "nanowire_index",
                          "oxide_index", "center_wavelength_nm", "band_halfwidth_nm"});
    w.number(obj, base, "diameter_nm", s.diameter_nm, "reference design default");
    w.number(obj, base, "height_nm", s.height_nm, "reference design default");
    w.number(obj, base, "crown_height_nm", s.crown_height_nm, "flat-top default");
    w.number(obj, base, "oxide_thickness_nm", s.oxide_thickness_nm, "reference design default");
    w.boolean(obj, base, "mirror_enabled", s.mirror_enabled, "reference design default");
    w.number(obj, base, "dipole_offset_from_top_nm", s.dipole_offset_from_top_nm,
             "reference design default");
    w.number(obj, base, "dipole_lateral_offset_nm", s.dipole_lateral_offset_nm,
             "on-axis default");
    w.number(obj, base, "nanowire_index", s.nanowire_index, "reference design default");
    w.number(obj, base, "oxide_index", s.oxide_index, "fused-silica default");
    w.number(obj, base, "center_wavelength_nm", s.center_wavelength_nm,
             "reference band default");
    w.number(obj, base, "band_halfwidth_nm", s.band_halfwidth_nm, "reference band default");
    if (obj && obj->contains("dipole_orientation")) {
        std::vector<double> o;
        if (w.number_list(obj->at("dipole_orientation"), "scene.dipole_orientation", o)) {
            if (o.size() != 3)
                w.fail("scene.dipole_orientation", "must have exactly three components");
            else
                s.dipole_orientation = {o[0], o[1], o[2]};
        }
    } else {
        w.note_default("scene.dipole_orientation", "[1, 0, 0]", "in-plane dipole default");
    }
}

void parse_numerics(Walk& w, const json* obj, JobConfig& c) {
    const std::string base = "numerics";
    if (obj)
        w.reject_unknown(*obj, base,
                         {"resolution_nm", "courant_fraction", "absorber_layers",
                          "decay_threshold", "max_steps", "monitor_stride", "energy_stride",
                          "wavelength_step_nm", "checkpoint_every_steps"});
    w.number(obj, base, "resolution_nm", c.numerics.resolution_nm, "reference mesh default");
    w.number(obj, base, "courant_fraction", c.numerics.courant_fraction, "stability default");
    w.integer(obj, base, "absorber_layers", c.numerics.absorber_layers, "absorber default");
    w.number(obj, base, "decay_threshold", c.numerics.decay_threshold,
             "ringdown termination default");
    w.integer(obj, base, "max_steps", c.numerics.max_steps, "runaway guard default");
    w.integer(obj, base, "monitor_stride", c.numerics.monitor_stride, "sampling default");
    w.integer(obj, base, "energy_stride", c.numerics.energy_stride, "sampling default");
    w.number(obj, base, "wavelength_step_nm", c.wavelength_step_nm, "spectral grid default");
    w.integer(obj, base, "checkpoint_every_steps", c.checkpoint_every_steps,
              "checkpoint cadence default");
}

void parse_analysis(Walk& w, const json* obj, AnalysisConfig& a) {
    const std::string base = "analysis";
    if (obj)
        w.reject_unknown(*obj, base,
                         {"numerical_apertures", "monitor_box_nm", "overlap", "angular_grid"});
    if (obj && obj->contains("numerical_apertures")) {
        w.number_list(obj->at("numerical_apertures"), "analysis.numerical_apertures",
                      a.numerical_apertures);
    } else {
        w.note_default("analysis.numerical_apertures", list_text(a.numerical_apertures),
                       "reference collection optics default");
    }
    w.number(obj, base, "monitor_box_nm", a.monitor_box_nm,
             "reference collection box default");

    const json* ov = obj ? w.block(*obj, base, "overlap") : nullptr;
    if (ov)
        w.reject_unknown(*ov, "analysis.overlap",
                         {"theta_min_deg", "theta_max_deg", "intensity_only"});
    w.number(ov, "analysis.overlap", "theta_min_deg", a.overlap.theta_min_deg,
             "beam-waist scan default");
    w.number(ov, "analysis.overlap", "theta_max_deg", a.overlap.theta_max_deg,
             "beam-waist scan default");
    w.boolean(ov, "analysis.overlap", "intensity_only", a.overlap.intensity_only,
              "field-overlap default");

    const json* ang = obj ? w.block(*obj, base, "angular_grid") : nullptr;
    if (ang)
        w.reject_unknown(*ang, "analysis.angular_grid",
                         {"theta_step_deg", "phi_step_deg", "theta_max_deg"});
    w.number(ang, "analysis.angular_grid", "theta_step_deg", a.angular.theta_step_deg,
             "angular grid default");
    w.number(ang, "analysis.angular_grid", "phi_step_deg", a.angular.phi_step_deg,
             "angular grid default");
    w.number(ang, "analysis.angular_grid", "theta_max_deg", a.angular.theta_max_deg,
             "hemisphere default");
}

void parse_sweep(Walk& w, const json* obj, std::optional<SweepConfig>& out) {
    if (!obj) return;  // the sweep block is optional and has no defaults
    SweepConfig s;
    w.reject_unknown(*obj, "sweep", {"axis", "values", "workers"});
    if (obj->contains("axis")) {
        if (obj->at("axis").is_string())
            s.axis = obj->at("axis").get<std::string>();
        else
            w.fail("sweep.axis", "must be a string");
    } else {
        w.fail("sweep.axis", "required when a sweep block is given");
    }
    if (obj->contains("values"))
        w.number_list(obj->at("values"), "sweep.values", s.values);
    else
        w.fail("sweep.values", "required when a sweep block is given");
    w.integer(obj, "sweep", "workers", s.workers, "serial default");
    out = std::move(s);
}

void parse_materials(Walk& w, const json* obj, MaterialConfig& m) {
    const std::string base = "materials";
    if (obj) w.reject_unknown(*obj, base, {"mirror_table_tsv", "poles", "fit_tolerance"});
    w.text(obj, base, "mirror_table_tsv", m.mirror_table_tsv, "bundled table default");
    w.integer(obj, base, "poles", m.poles, "metal fit default");
    w.number(obj, base, "fit_tolerance", m.fit_tolerance, "metal fit default");
}

void semantic_checks(Walk& w, const JobConfig& c) {
    const auto& s = c.scene;
    const bool diameter_ok = s.diameter_nm > 0.0;
    const bool height_ok = s.height_nm > 0.0;
    if (!diameter_ok) w.fail("scene.diameter_nm", "must be positive");
    if (!height_ok) w.fail("scene.height_nm", "must be positive");
    if (s.crown_height_nm < 0.0) w.fail("scene.crown_height_nm", "must be >= 0");
    if (height_ok && s.crown_height_nm >= s.height_nm)
        w.fail("scene.crown_height_nm", "crown taller than the wire");
    if (s.oxide_thickness_nm < 0.0) w.fail("scene.oxide_thickness_nm", "must be >= 0");
    if (height_ok &&
        (s.dipole_offset_from_top_nm < 0.0 || s.dipole_offset_from_top_nm > s.height_nm))
        w.fail("scene.dipole_offset_from_top_nm", "must lie within the wire height");
    if (diameter_ok && std::abs(s.dipole_lateral_offset_nm) >= 0.5 * s.diameter_nm)
        w.fail("scene.dipole_lateral_offset_nm", "dipole leaves the wire cross-section");
    const double onorm2 = s.dipole_orientation[0] * s.dipole_orientation[0] +
                          s.dipole_orientation[1] * s.dipole_orientation[1] +
                          s.dipole_orientation[2] * s.dipole_orientation[2];
    if (!(onorm2 > 0.0)) w.fail("scene.dipole_orientation", "must be a nonzero vector");
    if (s.nanowire_index < 1.0) w.fail("scene.nanowire_index", "must be >= 1");
    if (s.oxide_index < 1.0) w.fail("scene.oxide_index", "must be >= 1");
    const bool center_ok = s.center_wavelength_nm > 0.0;
    if (!center_ok) w.fail("scene.center_wavelength_nm", "must be positive");
    if (center_ok &&
        !(s.band_halfwidth_nm > 0.0 && s.band_halfwidth_nm < s.center_wavelength_nm))
        w.fail("scene.band_halfwidth_nm", "must be positive and below the center wavelength");

    const auto& n = c.numerics;
    if (!(n.resolution_nm > 0.0)) w.fail("numerics.resolution_nm", "must be positive");
    if (!(n.courant_fraction > 0.0 && n.courant_fraction <= 1.0))
        w.fail("numerics.courant_fraction", "must lie in (0, 1]");
    if (n.absorber_layers < 4) w.fail("numerics.absorber_layers", "must be at least 4");
    if (!(n.decay_threshold > 0.0 && n.decay_threshold < 1.0))
        w.fail("numerics.decay_threshold", "must lie in (0, 1)");
    if (n.max_steps < 1) w.fail("numerics.max_steps", "must be positive");
    if (n.monitor_stride < 1) w.fail("numerics.monitor_stride", "must be >= 1");
    if (n.energy_stride < 1) w.fail("numerics.energy_stride", "must be >= 1");
    if (!(c.wavelength_step_nm > 0.0) ||
        (s.band_halfwidth_nm > 0.0 && c.wavelength_step_nm > 2.0 * s.band_halfwidth_nm))
        w.fail("numerics.wavelength_step_nm", "must be positive and fit inside the band");
    if (c.checkpoint_every_steps < 0)
        w.fail("numerics.checkpoint_every_steps", "must be >= 0 (0 disables)");

    const auto& a = c.analysis;
    for (double na : a.numerical_apertures)
        if (!(na > 0.0 && na <= 1.0)) {
            w.fail("analysis.numerical_apertures", "every NA must lie in (0, 1]");
            break;
        }
    if (!(a.monitor_box_nm > 0.0)) w.fail("analysis.monitor_box_nm", "must be positive");
    if (!(a.overlap.theta_min_deg >= 0.0 && a.overlap.theta_min_deg < a.overlap.theta_max_deg &&
          a.overlap.theta_max_deg <= 90.0))
        w.fail("analysis.overlap", "needs 0 <= theta_min_deg < theta_max_deg <= 90");
    if (!(a.angular.theta_step_deg > 0.0 && a.angular.theta_step_deg <= 90.0))
        w.fail("analysis.angular_grid.theta_step_deg", "must lie in (0, 90]");
    if (!(a.angular.phi_step_deg > 0.0 && a.angular.phi_step_deg <= 180.0))
        w.fail("analysis.angular_grid.phi_step_deg", "must lie in (0, 180]");
    if (!(a.angular.theta_max_deg > 0.0 && a.angular.theta_max_deg <= 90.0))
        w.fail("analysis.angular_grid.theta_max_deg", "must lie in (0, 90]");

    if (c.sweep) {
        static const char* axes[] = {"height", "scale", "crown_height", "lateral_offset",
                                     "diameter"};
        bool ok = false;
        for (const char* ax : axes) ok = ok || c.sweep->axis == ax;
        if (!ok)
            w.fail("sweep.axis",
                   "must be one of height, scale, crown_height, lateral_offset, diameter");
        if (c.sweep->values.empty()) w.fail("sweep.values", "must be non-empty");
        if (c.sweep->workers < 1) w.fail("sweep.workers", "must be >= 1");
    }

    if (c.materials.poles < 1) w.fail("materials.poles", "must be >= 1");
    if (!(c.materials.fit_tolerance > 0.0))
        w.fail("materials.fit_tolerance", "must be positive");
}

json resolved_json(const JobConfig& c) {
    json j;
    j["schema_version"] = c.schema_version;
    json& s = j["scene"];
    s["diameter_nm"] = c.scene.diameter_nm;
    s["height_nm"] = c.scene.height_nm;
    s["crown_height_nm"] = c.scene.crown_height_nm;
    s["oxide_thickness_nm"] = c.scene.oxide_thickness_nm;
    s["mirror_enabled"] = c.scene.mirror_enabled;
    s["dipole_offset_from_top_nm"] = c.scene.dipole_offset_from_top_nm;
    s["dipole_lateral_offset_nm"] = c.scene.dipole_lateral_offset_nm;
    s["dipole_orientation"] = c.scene.dipole_orientation;
    s["nanowire_index"] = c.scene.nanowire_index;
    s["oxide_index"] = c.scene.oxide_index;
    s["center_wavelength_nm"] = c.scene.center_wavelength_nm;
    s["band_halfwidth_nm"] = c.scene.band_halfwidth_nm;
    json& n = j["numerics"];
    n["resolution_nm"] = c.numerics.resolution_nm;
    n["courant_fraction"] = c.numerics.courant_fraction;
    n["absorber_layers"] = c.numerics.absorber_layers;
    n["decay_threshold"] = c.numerics.decay_threshold;
    n["max_steps"] = c.numerics.max_steps;
    n["monitor_stride"] = c.numerics.monitor_stride;
    n["energy_stride"] = c.numerics.energy_stride;
    n["wavelength_step_nm"] = c.wavelength_step_nm;
    n["checkpoint_every_steps"] = c.checkpoint_every_steps;
    json& a = j["analysis"];
    a["numerical_apertures"] = c.analysis.numerical_apertures;
    a["monitor_box_nm"] = c.analysis.monitor_box_nm;
    a["overlap"] = {{"theta_min_deg", c.analysis.overlap.theta_min_deg},
                    {"theta_max_deg", c.analysis.overlap.theta_max_deg},
                    {"intensity_only", c.analysis.overlap.intensity_only}};
    a["angular_grid"] = {{"theta_step_deg", c.analysis.angular.theta_step_deg},
                         {"phi_step_deg", c.analysis.angular.phi_step_deg},
                         {"theta_max_deg", c.analysis.angular.theta_max_deg}};
    if (c.sweep)
        j["sweep"] = {{"axis", c.sweep->axis},
                      {"values", c.sweep->values},
                      {"workers", c.sweep->workers}};
    j["materials"] = {{"mirror_table_tsv", c.materials.mirror_table_tsv},
                      {"poles", c.materials.poles},
                      {"fit_tolerance", c.materials.fit_tolerance}};
    j["output_dir"] = c.output_dir;
    j["random_seed"] = c.random_seed;
    return j;
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> errors)
    : std::runtime_error([&errors] {
          std::string msg = "configuration invalid:";
          for (const auto& e : errors) msg += "\n  " + e;
          return msg;
      }()),
      errors_(std::move(errors)) {}

std::string JobConfig::sha256() const { return io::sha256_hex(canonical_text); }

JobConfig parse_config_text(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError({std::string("(document): not valid JSON: ") + e.what()});
    }
    if (!doc.is_object()) throw ConfigError({"(document): must be a JSON object"});

    Walk w;
    JobConfig c;
    w.reject_unknown(doc, "",
                     {"schema_version", "scene", "numerics", "analysis", "sweep", "materials",
                      "output_dir", "random_seed"});

    if (!doc.contains("schema_version"))
        w.fail("schema_version", "required; this artifact writes schema 1");
    else if (!doc.at("schema_version").is_number_integer())
        w.fail("schema_version", "must be an integer");
    else if (doc.at("schema_version").get<int>() != 1)
        w.fail("schema_version",
               "unsupported version " + doc.at("schema_version").dump() + "; expected 1");

    parse_scene(w, w.block(doc, "", "scene"), c.scene);
    parse_numerics(w, w.block(doc, "", "numerics"), c);
    parse_analysis(w, w.block(doc, "", "analysis"), c.analysis);
    parse_sweep(w, w.block(doc, "", "sweep"), c.sweep);
    parse_materials(w, w.block(doc, "", "materials"), c.materials);

    if (doc.contains("output_dir")) {
        if (doc.at("output_dir").is_string())
            c.output_dir = doc.at("output_dir").get<std::string>();
        else
            w.fail("output_dir", "must be a string");
    } else {
        w.note_default("output_dir", c.output_dir, "job directory default");
    }
    if (doc.contains("random_seed")) {
        if (doc.at("random_seed").is_number_unsigned() ||
            (doc.at("random_seed").is_number_integer() &&
             doc.at("random_seed").get<long long>() >= 0))
            c.random_seed = doc.at("random_seed").get<std::uint64_t>();
        else
            w.fail("random_seed", "must be a non-negative integer");
    } else {
        w.note_default("random_seed", "0", "reserved; the physics is deterministic");
    }

    if (w.errors.empty()) semantic_checks(w, c);
    if (!w.errors.empty()) throw ConfigError(std::move(w.errors));

    c.applied_defaults = std::move(w.defaults);
    c.canonical_text = resolved_json(c).dump();
    return c;
}

JobConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError({path + ": cannot read config file"});
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str());
}

}  // namespace nwcav::cli
