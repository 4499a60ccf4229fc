#include "mcva/flow_io.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

#include "mcva/errors.hpp"

namespace mcva {

namespace {
constexpr float kFloMagic = 202021.25f;

void put_f32(std::ofstream& f, float v) {
    char b[4];
    std::memcpy(b, &v, 4);
    f.write(b, 4);
}

void put_i32(std::ofstream& f, std::int32_t v) {
    char b[4];
    std::memcpy(b, &v, 4);
    f.write(b, 4);
}

template <class T>
T get_le(std::ifstream& f, const std::string& path) {
    char b[sizeof(T)];
    f.read(b, sizeof(T));
    if (f.gcount() != sizeof(T)) throw FormatError("read_flo: truncated file " + path);
    T v;
    std::memcpy(&v, b, sizeof(T));
    return v;
}
} // namespace

void write_flo(const std::string& path, const Flow& flow) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw FormatError("write_flo: cannot open " + path);
    put_f32(f, kFloMagic);
    put_i32(f, flow.w);
    put_i32(f, flow.h);
    for (int y = 0; y < flow.h; ++y) {
        for (int x = 0; x < flow.w; ++x) {
            put_f32(f, flow.u(y, x));
            put_f32(f, flow.v(y, x));
        }
    }
    if (!f) throw FormatError("write_flo: short write to " + path);
}

Flow read_flo(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw FormatError("read_flo: cannot open " + path);
    const float magic = get_le<float>(f, path);
    if (magic != kFloMagic) {
        throw FormatError("read_flo: wrong magic in " + path);
    }
    const auto w = get_le<std::int32_t>(f, path);
    const auto h = get_le<std::int32_t>(f, path);
    if (w <= 0 || h <= 0 || static_cast<std::int64_t>(w) * h > (1 << 28)) {
        throw FormatError("read_flo: implausible extents in " + path);
    }
    Flow flow;
    flow.w = w;
    flow.h = h;
    flow.data.resize(static_cast<std::size_t>(2) * h * w);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            flow.u(y, x) = get_le<float>(f, path);
            flow.v(y, x) = get_le<float>(f, path);
        }
    }
    return flow;
}

} // namespace mcva
