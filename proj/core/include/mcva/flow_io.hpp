#pragma once

#include <string>
#include <vector>

namespace mcva {

// Dense flow field in image pixels, layout [2, h, w]; channel 0 = u
// (column displacement), channel 1 = v (row displacement).
struct Flow {
    int h = 0, w = 0;
    std::vector<float> data;

    float& u(int y, int x) { return data[static_cast<std::size_t>(y) * w + x]; }
    float& v(int y, int x) {
        return data[(static_cast<std::size_t>(h) + y) * w + x];
    }
    float u(int y, int x) const { return data[static_cast<std::size_t>(y) * w + x]; }
    float v(int y, int x) const {
        return data[(static_cast<std::size_t>(h) + y) * w + x];
    }
};

// Middlebury .flo container: little-endian float magic 202021.25, int32
// width, int32 height, then row-major interleaved (u, v) float32 pairs.
void write_flo(const std::string& path, const Flow& flow);
Flow read_flo(const std::string& path);

} // namespace mcva
