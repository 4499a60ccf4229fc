#pragma once

#include <array>
#include <cmath>
#include <memory>
#include <vector>

#include "mcva/ops.hpp"

namespace mcva {

// Bilinear sample of one map at (y, x); locations outside [0,h-1]x[0,w-1]
// are exactly zero.
template <class S>
S bilinear_sample_zero(const S* map, int h, int w, double y, double x) {
    if (!(y >= 0.0 && y <= h - 1 && x >= 0.0 && x <= w - 1)) return S(0);
    const int y0 = static_cast<int>(std::floor(y));
    const int x0 = static_cast<int>(std::floor(x));
    const S fy = static_cast<S>(y - y0);
    const S fx = static_cast<S>(x - x0);
    const S v00 = map[y0 * w + x0];
    const S v01 = (fx > 0) ? map[y0 * w + x0 + 1] : S(0);
    const S v10 = (fy > 0) ? map[(y0 + 1) * w + x0] : S(0);
    const S v11 = (fy > 0 && fx > 0) ? map[(y0 + 1) * w + x0 + 1] : S(0);
    return (S(1) - fy) * ((S(1) - fx) * v00 + fx * v01) +
           fy * ((S(1) - fx) * v10 + fx * v11);
}

// Non-recorded patch crop (used for reconstruction targets).
template <class S>
void crop_patch_plain(const S* map, int h, int w, double cy, double cx, int size, S* out) {
    const int r = (size - 1) / 2;
    for (int oy = -r; oy <= r; ++oy) {
        for (int ox = -r; ox <= r; ++ox) {
            out[(oy + r) * size + (ox + r)] =
                bilinear_sample_zero(map, h, w, cy + oy, cx + ox);
        }
    }
}

// Bilinear patch cropping. maps: [N, H, W]; centers: one continuous (row, col)
// per map; out: [N, size*size] sampled at unit-spaced integer offsets around
// the center. Sample locations outside [0,H-1]x[0,W-1] are exactly zero.
// Differentiable with respect to the maps; centers are plain data.
template <class S>
TensorPtr<S> crop_patches(Tape<S>& tape, TensorPtr<S> maps,
                          std::shared_ptr<const std::vector<std::array<double, 2>>> centers,
                          int size) {
    if (size % 2 == 0) throw ConfigError("crop_patches: size must be odd");
    if (maps->rank() != 3) throw ShapeError("crop_patches: maps must be [N,H,W]");
    const int n = maps->dim(0), h = maps->dim(1), w = maps->dim(2);
    if (static_cast<int>(centers->size()) != n) {
        throw ShapeError("crop_patches: one center per map required");
    }
    const int r = (size - 1) / 2;
    auto out = make_tensor<S>({n, size * size});
    const S* pm = maps->ptr();
    S* po = out->ptr();

    parallel_for(0, n, [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t i = lo; i < hi; ++i) {
            crop_patch_plain(pm + i * h * w, h, w,
                             (*centers)[static_cast<std::size_t>(i)][0],
                             (*centers)[static_cast<std::size_t>(i)][1], size,
                             po + i * size * size);
        }
    });

    return tape.record(out, {maps}, "crop_patches",
                       [maps, out, centers, size, n, h, w, r](Tape<S>& t) {
        if (!t.needs_grad(*maps)) return;
        const S* g = t.grad(out).data();
        S* gm = t.grad(maps).data();
        parallel_for(0, n, [&](std::int64_t lo, std::int64_t hi) {
            for (std::int64_t i = lo; i < hi; ++i) {
                const double cy = (*centers)[static_cast<std::size_t>(i)][0];
                const double cx = (*centers)[static_cast<std::size_t>(i)][1];
                S* gmap = gm + i * h * w;
                const S* gpatch = g + i * size * size;
                for (int oy = -r; oy <= r; ++oy) {
                    for (int ox = -r; ox <= r; ++ox) {
                        const double y = cy + oy;
                        const double x = cx + ox;
                        if (!(y >= 0.0 && y <= h - 1 && x >= 0.0 && x <= w - 1)) continue;
                        const S gv = gpatch[(oy + r) * size + (ox + r)];
                        if (gv == S(0)) continue;
                        const int y0 = static_cast<int>(std::floor(y));
                        const int x0 = static_cast<int>(std::floor(x));
                        const S fy = static_cast<S>(y - y0);
                        const S fx = static_cast<S>(x - x0);
                        gmap[y0 * w + x0] += gv * (S(1) - fy) * (S(1) - fx);
                        if (fx > 0) gmap[y0 * w + x0 + 1] += gv * (S(1) - fy) * fx;
                        if (fy > 0) gmap[(y0 + 1) * w + x0] += gv * fy * (S(1) - fx);
                        if (fy > 0 && fx > 0) gmap[(y0 + 1) * w + x0 + 1] += gv * fy * fx;
                    }
                }
            }
        });
    });
}

// Fixed 2D sinusoidal positional encoding of a continuous (row, col)
// location. First half encodes the row, second half the column; each half is
// interleaved sin/cos over a geometric frequency ladder.
template <class S>
void sinusoidal_pe_2d(double y, double x, int dim, S* out) {
    const int half = dim / 2;
    const int pairs = half / 2;
    for (int i = 0; i < pairs; ++i) {
        const double freq = std::pow(10000.0, -2.0 * i / half);
        out[2 * i] = static_cast<S>(std::sin(y * freq));
        out[2 * i + 1] = static_cast<S>(std::cos(y * freq));
        out[half + 2 * i] = static_cast<S>(std::sin(x * freq));
        out[half + 2 * i + 1] = static_cast<S>(std::cos(x * freq));
    }
}

template <class S>
std::vector<S> sinusoidal_pe_2d(double y, double x, int dim) {
    if (dim % 4 != 0) throw ConfigError("sinusoidal_pe_2d: dim must be divisible by 4");
    std::vector<S> out(static_cast<std::size_t>(dim));
    sinusoidal_pe_2d(y, x, dim, out.data());
    return out;
}

// PE table for all integer positions of an h x w grid, row-major [h*w, dim].
template <class S>
std::shared_ptr<std::vector<S>> pe_table(int h, int w, int dim) {
    if (dim % 4 != 0) throw ConfigError("pe_table: dim must be divisible by 4");
    auto table = std::make_shared<std::vector<S>>(
        static_cast<std::size_t>(h) * w * dim);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            sinusoidal_pe_2d<S>(y, x, dim, table->data() + (static_cast<std::size_t>(y) * w + x) * dim);
        }
    }
    return table;
}

} // namespace mcva
