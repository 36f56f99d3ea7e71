#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace nwcav::io {

// Incremental SHA-256. Self-contained so that config hashes and file
// checksums do not depend on a system crypto library.
class Sha256 {
public:
    Sha256();
    void update(const void* data, std::size_t len);
    void update(const std::string& s) { update(s.data(), s.size()); }
    // Finalizes and returns the digest as lowercase hex. The object must not
    // be updated afterwards.
    std::string hex_digest();

private:
    void process_block(const std::uint8_t* block);

    std::uint32_t state_[8];
    std::uint64_t total_len_ = 0;
    std::uint8_t buffer_[64];
    std::size_t buffer_len_ = 0;
    bool finalized_ = false;
};

std::string sha256_hex(const std::string& data);
std::string sha256_file_hex(const std::string& path);

} // namespace nwcav::io
