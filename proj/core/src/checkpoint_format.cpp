#include "mcva/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <limits>

#include "mcva/errors.hpp"

namespace mcva {

namespace {

constexpr char kMagic[4] = {'M', 'C', 'V', 'A'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void put(std::ofstream& f, T v) {
    char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    f.write(b, sizeof(T));
}

template <class T>
T get(std::ifstream& f, const std::string& path) {
    char b[sizeof(T)];
    f.read(b, sizeof(T));
    if (f.gcount() != sizeof(T)) throw FormatError("checkpoint truncated: " + path);
    T v;
    std::memcpy(&v, b, sizeof(T));
    return v;
}

} // namespace

void write_checkpoint_file(const std::string& path, const CheckpointFile& file) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw FormatError("cannot open checkpoint for writing: " + path);
    f.write(kMagic, 4);
    put<std::uint32_t>(f, kVersion);
    put<std::uint32_t>(f, static_cast<std::uint32_t>(file.entries.size()));
    for (const auto& e : file.entries) {
        if (e.name.size() > std::numeric_limits<std::uint16_t>::max()) {
            throw FormatError("checkpoint entry name too long: " + e.name);
        }
        put<std::uint16_t>(f, static_cast<std::uint16_t>(e.name.size()));
        f.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
        put<std::uint8_t>(f, static_cast<std::uint8_t>(e.dims.size()));
        std::uint64_t numel = 1;
        for (const std::uint32_t d : e.dims) {
            put<std::uint32_t>(f, d);
            numel *= d;
        }
        if (numel != e.data.size()) {
            throw FormatError("checkpoint entry " + e.name + " dims/payload mismatch");
        }
        f.write(reinterpret_cast<const char*>(e.data.data()),
                static_cast<std::streamsize>(e.data.size() * sizeof(float)));
    }
    put<std::uint32_t>(f, static_cast<std::uint32_t>(file.config_echo.size()));
    f.write(file.config_echo.data(), static_cast<std::streamsize>(file.config_echo.size()));
    if (!f) throw FormatError("short write to checkpoint: " + path);
}

CheckpointFile read_checkpoint_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw FormatError("cannot open checkpoint: " + path);
    char magic[4];
    f.read(magic, 4);
    if (f.gcount() != 4 || std::memcmp(magic, kMagic, 4) != 0) {
        throw FormatError("bad checkpoint magic in " + path);
    }
    const auto version = get<std::uint32_t>(f, path);
    if (version != kVersion) {
        throw FormatError("unsupported checkpoint version " + std::to_string(version) +
                          " in " + path);
    }
    const auto count = get<std::uint32_t>(f, path);
    CheckpointFile file;
    file.entries.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        CheckpointEntry e;
        const auto name_len = get<std::uint16_t>(f, path);
        e.name.resize(name_len);
        f.read(e.name.data(), name_len);
        if (f.gcount() != name_len) throw FormatError("checkpoint truncated: " + path);
        const auto rank = get<std::uint8_t>(f, path);
        std::uint64_t numel = 1;
        e.dims.resize(rank);
        for (int d = 0; d < rank; ++d) {
            e.dims[static_cast<std::size_t>(d)] = get<std::uint32_t>(f, path);
            numel *= e.dims[static_cast<std::size_t>(d)];
        }
        if (numel > (1ull << 31)) throw FormatError("checkpoint entry too large in " + path);
        e.data.resize(numel);
        f.read(reinterpret_cast<char*>(e.data.data()),
               static_cast<std::streamsize>(numel * sizeof(float)));
        if (f.gcount() != static_cast<std::streamsize>(numel * sizeof(float))) {
            throw FormatError("checkpoint truncated: " + path);
        }
        file.entries.push_back(std::move(e));
    }
    const auto echo_len = get<std::uint32_t>(f, path);
    file.config_echo.resize(echo_len);
    f.read(file.config_echo.data(), echo_len);
    if (f.gcount() != static_cast<std::streamsize>(echo_len)) {
        throw FormatError("checkpoint truncated: " + path);
    }
    return file;
}

} // namespace mcva
