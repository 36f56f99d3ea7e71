#pragma once

#include <string>
#include <vector>

namespace nwcav::cli {

// Command-line entry point: subcommands run | sweep | modes | farfield |
// fit-material | report. Returns the process exit code; 0 only when every
// requested output converged.
int run_app(const std::vector<std::string>& args);
int run_app(int argc, char** argv);

}  // namespace nwcav::cli
