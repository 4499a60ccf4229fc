#pragma once

#include <string>
#include <vector>

namespace mcva {

// Planar RGB image, values in [0,1], layout [3, h, w].
struct Image {
    int h = 0, w = 0;
    std::vector<float> data;

    float& at(int c, int y, int x) {
        return data[(static_cast<std::size_t>(c) * h + y) * w + x];
    }
    float at(int c, int y, int x) const {
        return data[(static_cast<std::size_t>(c) * h + y) * w + x];
    }
};

// Binary PPM ("P6", maxval 255). Values are quantized to 8 bits on write.
void write_ppm(const std::string& path, const Image& img);
Image read_ppm(const std::string& path);

} // namespace mcva
