#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "nwcav/emission/emission.hpp"
#include "nwcav/fdtd/fdtd.hpp"
#include "nwcav/scene/scene.hpp"

// Versioned job configuration: strict schema (unknown keys rejected), every
// violation reported at once with its path, and a record of every default
// that was filled in. The resolved config has a canonical serialization so
// that semantically identical inputs hash identically.

namespace nwcav::cli {

struct AnalysisConfig {
    std::vector<double> numerical_apertures{0.8};
    double monitor_box_nm = 4000.0;  // collection box side for far-field work
    emission::OverlapOptions overlap;
    emission::FarFieldOptions angular;  // mirror plane filled at run time
};

struct SweepConfig {
    std::string axis;  // height | scale | crown_height | lateral_offset | diameter
    std::vector<double> values;
    int workers = 1;
};

struct MaterialConfig {
    std::string mirror_table_tsv;  // empty: resolved against NWCAV_DATA_DIR, then ./data
    int poles = 3;
    double fit_tolerance = 0.02;
};

struct JobConfig {
    int schema_version = 1;
    scene::SceneSpec scene;
    fdtd::Numerics numerics;
    double wavelength_step_nm = 0.5;
    long long checkpoint_every_steps = 2000;  // 0 disables periodic checkpoints
    AnalysisConfig analysis;
    std::optional<SweepConfig> sweep;
    MaterialConfig materials;
    std::string output_dir = "job";
    std::uint64_t random_seed = 0;  // reserved; the physics is deterministic

    std::vector<std::string> applied_defaults;  // "path = value (origin)" lines
    std::string canonical_text;                 // sorted-key resolved form
    std::string sha256() const;
};

// All schema and range violations collected over the whole document;
// what() joins them, one per line, each prefixed with its config path.
class ConfigError : public std::runtime_error {
  public:
    explicit ConfigError(std::vector<std::string> errors);
    const std::vector<std::string>& errors() const { return errors_; }

  private:
    std::vector<std::string> errors_;
};

JobConfig parse_config_text(const std::string& json_text);
JobConfig load_config(const std::string& path);

}  // namespace nwcav::cli
