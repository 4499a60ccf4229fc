#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace mcva {

// On-disk parameter container: "MCVA" magic, u32 version = 1, u32 entry
// count; per entry u16 name length + UTF-8 name, u8 rank, u32 dims[rank],
// float32 little-endian payload; trailing length-prefixed UTF-8 config echo.
struct CheckpointEntry {
    std::string name;
    std::vector<std::uint32_t> dims;
    std::vector<float> data;
};

struct CheckpointFile {
    std::vector<CheckpointEntry> entries;
    std::string config_echo;

    const CheckpointEntry* find(const std::string& name) const {
        for (const auto& e : entries) {
            if (e.name == name) return &e;
        }
        return nullptr;
    }
};

void write_checkpoint_file(const std::string& path, const CheckpointFile& file);
CheckpointFile read_checkpoint_file(const std::string& path);

} // namespace mcva
