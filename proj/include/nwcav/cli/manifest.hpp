#pragma once

#include <chrono>
#include <string>
#include <vector>

// One directory per job. A lock file keeps concurrent invocations out, the
// manifest is written first (status "incomplete") so interrupted jobs are
// detectable, and completion lands via an atomic rename.

namespace nwcav::cli {

struct OutputEntry {
    std::string file;  // relative to the job directory
    std::string sha256;
};

struct ConvergenceEntry {
    std::string name;  // which run ("cavity", "vacuum_reference", row label...)
    std::string termination;
    bool converged = true;
    long long steps = 0;
};

struct RunManifest {
    std::string artifact_version;
    std::string command;
    std::string config_sha256;
    std::string status = "incomplete";  // "incomplete" | "complete"
    double wall_clock_s = 0.0;
    long long total_steps = 0;
    bool converged = false;
    std::vector<OutputEntry> outputs;
    std::vector<ConvergenceEntry> convergence;
};

extern const char* const kArtifactVersion;

void write_manifest(const std::string& path, const RunManifest& m);  // temp + rename
RunManifest read_manifest(const std::string& path);

class JobDir {
  public:
    // Creates the directory if needed, takes the lock, writes the
    // incomplete manifest. Throws when another run holds the lock.
    JobDir(std::string dir, std::string command, std::string config_sha256);
    ~JobDir();
    JobDir(const JobDir&) = delete;
    JobDir& operator=(const JobDir&) = delete;

    const std::string& dir() const { return dir_; }
    std::string path(const std::string& name) const;

    void record_output(const std::string& name);  // file already written under dir()
    void record_convergence(ConvergenceEntry e);

    // Checksums every recorded output and atomically publishes the complete
    // manifest. Idempotent per job; returns the published manifest.
    RunManifest finalize(bool converged);

  private:
    std::string dir_;
    std::string lock_path_;
    int lock_fd_ = -1;
    RunManifest manifest_;
    std::vector<std::string> outputs_;
    std::chrono::steady_clock::time_point start_;
};

}  // namespace nwcav::cli
