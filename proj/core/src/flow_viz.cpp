#include "mcva/flow_viz.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace mcva {

Image flow_to_color(const Flow& flow, float max_mag) {
    if (max_mag <= 0.f) {
        for (int y = 0; y < flow.h; ++y) {
            for (int x = 0; x < flow.w; ++x) {
                const float m = std::hypot(flow.u(y, x), flow.v(y, x));
                max_mag = std::max(max_mag, m);
            }
        }
        if (max_mag <= 0.f) max_mag = 1.f;
    }
    Image img;
    img.h = flow.h;
    img.w = flow.w;
    img.data.resize(static_cast<std::size_t>(3) * flow.h * flow.w);
    for (int y = 0; y < flow.h; ++y) {
        for (int x = 0; x < flow.w; ++x) {
            const float u = flow.u(y, x), v = flow.v(y, x);
            const float mag = std::min(1.f, std::hypot(u, v) / max_mag);
            const float ang = std::atan2(-v, -u) / static_cast<float>(std::numbers::pi);
            const float h6 = (ang + 1.f) * 3.f; // hue sector in [0, 6)
            const int i = static_cast<int>(h6) % 6;
            const float f = h6 - std::floor(h6);
            const float q = 1.f - mag * f;
            const float t = 1.f - mag * (1.f - f);
            const float p = 1.f - mag;
            float r = 1.f, g = 1.f, b = 1.f;
            switch (i) {
                case 0: r = 1.f; g = t; b = p; break;
                case 1: r = q; g = 1.f; b = p; break;
                case 2: r = p; g = 1.f; b = t; break;
                case 3: r = p; g = q; b = 1.f; break;
                case 4: r = t; g = p; b = 1.f; break;
                default: r = 1.f; g = p; b = q; break;
            }
            img.at(0, y, x) = r;
            img.at(1, y, x) = g;
            img.at(2, y, x) = b;
        }
    }
    return img;
}

} // namespace mcva
