#include "nwcav/cli/manifest.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "nwcav/io/sha256.hpp"

namespace nwcav::cli {

using nlohmann::json;
namespace fs = std::filesystem;

const char* const kArtifactVersion = "0.1.0";

void write_manifest(const std::string& path, const RunManifest& m) {
    json j;
    j["artifact_version"] = m.artifact_version;
    j["command"] = m.command;
    j["config_sha256"] = m.config_sha256;
    j["status"] = m.status;
    j["wall_clock_s"] = m.wall_clock_s;
    j["total_steps"] = m.total_steps;
    j["converged"] = m.converged;
    j["outputs"] = json::array();
    for (const auto& o : m.outputs)
        j["outputs"].push_back({{"file", o.file}, {"sha256", o.sha256}});
    j["convergence"] = json::array();
    for (const auto& c : m.convergence)
        j["convergence"].push_back({{"name", c.name},
                                    {"termination", c.termination},
                                    {"converged", c.converged},
                                    {"steps", c.steps}});
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + tmp);
        out << j.dump(2) << "\n";
        if (!out) throw std::runtime_error("short write to " + tmp);
    }
    fs::rename(tmp, path);  // atomic publish
}

RunManifest read_manifest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path);
    json j;
    in >> j;
    RunManifest m;
    m.artifact_version = j.at("artifact_version").get<std::string>();
    m.command = j.at("command").get<std::string>();
    m.config_sha256 = j.at("config_sha256").get<std::string>();
    m.status = j.at("status").get<std::string>();
    m.wall_clock_s = j.at("wall_clock_s").get<double>();
    m.total_steps = j.at("total_steps").get<long long>();
    m.converged = j.at("converged").get<bool>();
    for (const auto& o : j.at("outputs"))
        m.outputs.push_back({o.at("file").get<std::string>(), o.at("sha256").get<std::string>()});
    for (const auto& c : j.at("convergence"))
        m.convergence.push_back({c.at("name").get<std::string>(),
                                 c.at("termination").get<std::string>(),
                                 c.at("converged").get<bool>(), c.at("steps").get<long long>()});
    return m;
}

JobDir::JobDir(std::string dir, std::string command, std::string config_sha256)
    : dir_(std::move(dir)), start_(std::chrono::steady_clock::now()) {
    fs::create_directories(dir_);
    lock_path_ = (fs::path(dir_) / ".lock").string();
    lock_fd_ = ::open(lock_path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (lock_fd_ < 0)
        throw std::runtime_error("job directory '" + dir_ +
                                 "' is locked; another run may be active (remove " +
                                 lock_path_ + " if it is stale)");
    const std::string pid = std::to_string(::getpid()) + "\n";
    if (::write(lock_fd_, pid.data(), pid.size()) < 0) { /* advisory content only */
    }
    manifest_.artifact_version = kArtifactVersion;
    manifest_.command = std::move(command);
    manifest_.config_sha256 = std::move(config_sha256);
    manifest_.status = "incomplete";
    write_manifest(path("manifest.json"), manifest_);
}

JobDir::~JobDir() {
    if (lock_fd_ >= 0) {
        ::close(lock_fd_);
        ::unlink(lock_path_.c_str());
    }
}

std::string JobDir::path(const std::string& name) const {
    return (fs::path(dir_) / name).string();
}

void JobDir::record_output(const std::string& name) { outputs_.push_back(name); }

void JobDir::record_convergence(ConvergenceEntry e) {
    manifest_.total_steps += e.steps;
    manifest_.convergence.push_back(std::move(e));
}

RunManifest JobDir::finalize(bool converged) {
    manifest_.converged = converged;
    manifest_.status = "complete";
    manifest_.wall_clock_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    manifest_.outputs.clear();
    for (const auto& name : outputs_)
        manifest_.outputs.push_back({name, io::sha256_file_hex(path(name))});
    write_manifest(path("manifest.json"), manifest_);
    return manifest_;
}

}  // namespace nwcav::cli
