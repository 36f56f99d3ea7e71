#include "nwcav/cli/app.hpp"

int main(int argc, char** argv) { return nwcav::cli::run_app(argc, argv); }
