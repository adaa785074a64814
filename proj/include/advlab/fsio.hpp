#pragma once

#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "advlab/common.hpp"

namespace advlab {

inline std::string read_file_bytes(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    ADVLAB_CHECK(f.good(), "cannot open ", path, " for reading");
    std::ostringstream ss;
    ss << f.rdbuf();
    ADVLAB_CHECK(!f.bad(), "read error on ", path);
    return ss.str();
}

// Write through a sibling temp file and rename into place, so readers never
// observe a half-written file and a crashed writer leaves the old content.
inline void atomic_write_file(const std::string& path, const void* data, size_t len) {
    namespace fs = std::filesystem;
    const fs::path p(path);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    fs::path tmp = p;
    tmp += ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        ADVLAB_CHECK(f.good(), "cannot open ", tmp.string(), " for writing");
        f.write(static_cast<const char*>(data), std::streamsize(len));
        f.flush();
        ADVLAB_CHECK(f.good(), "write error on ", tmp.string());
    }
    fs::rename(tmp, p);
}

inline void atomic_write_file(const std::string& path, const std::string& bytes) {
    atomic_write_file(path, bytes.data(), bytes.size());
}

// Binary container shared by model checkpoints and soft-label sets:
//   "ALB1" | u64le manifest length | manifest (JSON text) | raw tensor blob
// The manifest carries names, shapes, offsets and an fnv-1a hash of the blob.
struct Container {
    std::string manifest_json;
    std::string blob;
};

inline constexpr char kContainerMagic[4] = {'A', 'L', 'B', '1'};

inline void write_container(const std::string& path, const std::string& manifest_json,
                            const std::string& blob) {
    std::string out;
    out.reserve(4 + 8 + manifest_json.size() + blob.size());
    out.append(kContainerMagic, 4);
    uint64_t len = manifest_json.size();
    for (int i = 0; i < 8; ++i) out.push_back(char((len >> (8 * i)) & 0xff));
    out += manifest_json;
    out += blob;
    atomic_write_file(path, out);
}

inline Container read_container(const std::string& path) {
    std::string bytes = read_file_bytes(path);
    ADVLAB_CHECK(bytes.size() >= 12 && std::memcmp(bytes.data(), kContainerMagic, 4) == 0,
                 path, " is not an ALB1 container");
    uint64_t len = 0;
    for (int i = 0; i < 8; ++i) len |= uint64_t(uint8_t(bytes[size_t(4 + i)])) << (8 * i);
    ADVLAB_CHECK(12 + len <= bytes.size(), path, " is truncated: manifest claims ", len,
                 " bytes, file holds ", bytes.size() - 12);
    Container c;
    c.manifest_json = bytes.substr(12, size_t(len));
    c.blob = bytes.substr(size_t(12 + len));
    return c;
}

}  // namespace advlab
