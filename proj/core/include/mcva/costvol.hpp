#pragma once

#include <array>
#include <memory>

#include "mcva/encoders.hpp"
#include "mcva/sampling.hpp"

namespace mcva {

// All-pairs 4D correlation volume. values[x1,x2,y1,y2] = <f1(x), f2(y)> / sqrt(D).
// The [H,W,H,W] buffer doubles as H*W cost maps of extent H x W.
template <class S>
struct CostVolume {
    TensorPtr<S> values; // [H, W, H, W]
    S scale = 1;         // divisor applied at construction (sqrt(D))
    int h = 0, w = 0;

    // View of the same tensor as [H*W, H, W] source-pixel cost maps.
    TensorPtr<S> maps;
};

template <class S>
CostVolume<S> build_cost_volume(Tape<S>& tape, const FeatureMap<S>& f1,
                                const FeatureMap<S>& f2) {
    const int d = f1.channels(), h = f1.height(), w = f1.width();
    if (f2.channels() != d || f2.height() != h || f2.width() != w) {
        throw ShapeError("build_cost_volume: feature maps differ " +
                         shape_str(f1.values->shape) + " vs " + shape_str(f2.values->shape));
    }
    const std::int64_t cells = static_cast<std::int64_t>(h) * w;
    auto out = make_tensor<S>({h, w, h, w});
    const S scale = std::sqrt(static_cast<S>(d));
    const S* p1 = f1.values->ptr();
    const S* p2 = f2.values->ptr();
    S* po = out->ptr();

    // out[x, y] accumulates in channel order, then one divide by sqrt(D).
    std::vector<S> f1t(static_cast<std::size_t>(cells) * d);
    for (int c = 0; c < d; ++c) {
        for (std::int64_t x = 0; x < cells; ++x) {
            f1t[static_cast<std::size_t>(x) * d + c] = p1[c * cells + x];
        }
    }
    parallel_for(0, cells, [&](std::int64_t lo, std::int64_t hi) {
        kern::gemm_rows(f1t.data(), p2, static_cast<const S*>(nullptr), po, lo, hi, d,
                        static_cast<int>(cells));
        for (std::int64_t x = lo; x < hi; ++x) {
            S* row = po + x * cells;
            for (std::int64_t y = 0; y < cells; ++y) row[y] /= scale;
        }
    });

    auto f1v = f1.values;
    auto f2v = f2.values;
    auto rec = tape.record(out, {f1v, f2v}, "cost_volume",
                           [f1v, f2v, out, d, cells, scale](Tape<S>& t) {
        const S* g = t.grad(out).data();
        const S* p1b = f1v->ptr();
        const S* p2b = f2v->ptr();
        if (t.needs_grad(*f1v)) {
            S* g1 = t.grad(f1v).data();
            parallel_for(0, cells, [&](std::int64_t lo, std::int64_t hi) {
                for (std::int64_t x = lo; x < hi; ++x) {
                    const S* grow = g + x * cells;
                    for (int c = 0; c < d; ++c) {
                        const S* f2row = p2b + static_cast<std::int64_t>(c) * cells;
                        S acc = 0;
                        for (std::int64_t y = 0; y < cells; ++y) acc += grow[y] * f2row[y];
                        g1[c * cells + x] += acc / scale;
                    }
                }
            });
        }
        if (t.needs_grad(*f2v)) {
            S* g2 = t.grad(f2v).data();
            // per-chunk partials reduced in order (all x contribute to every y)
            const std::int64_t chunk = 64;
            const std::int64_t n_chunks = (cells + chunk - 1) / chunk;
            std::vector<std::vector<S>> parts(
                static_cast<std::size_t>(n_chunks),
                std::vector<S>(static_cast<std::size_t>(d) * cells, S(0)));
            parallel_for(0, n_chunks, [&](std::int64_t clo, std::int64_t chi) {
                for (std::int64_t ch = clo; ch < chi; ++ch) {
                    auto& part = parts[static_cast<std::size_t>(ch)];
                    const std::int64_t x_hi = (ch + 1) * chunk < cells ? (ch + 1) * chunk : cells;
                    for (std::int64_t x = ch * chunk; x < x_hi; ++x) {
                        const S* grow = g + x * cells;
                        for (int c = 0; c < d; ++c) {
                            const S a = p1b[c * cells + x];
                            S* prow = part.data() + static_cast<std::int64_t>(c) * cells;
                            for (std::int64_t y = 0; y < cells; ++y) prow[y] += a * grow[y];
                        }
                    }
                }
            });
            for (const auto& part : parts) {
                for (std::size_t i = 0; i < part.size(); ++i) {
                    g2[i] += part[i] / scale;
                }
            }
        }
    });

    CostVolume<S> cv;
    cv.values = rec;
    cv.scale = scale;
    cv.h = h;
    cv.w = w;
    cv.maps = make_tensor<S>({h * w, h, w}, rec->data);
    cv.maps = tape.record(cv.maps, {rec}, "reshape", [rec, m = cv.maps](Tape<S>& t) {
        if (!t.needs_grad(*rec)) return;
        const S* g = t.grad(m).data();
        S* gx = t.grad(rec).data();
        for (std::int64_t i = 0; i < m->size(); ++i) gx[i] += g[i];
    });
    return cv;
}

// Bilinear patch crop for one source pixel of the volume.
template <class S>
struct CostPatch {
    std::array<double, 2> center{0, 0}; // (row, col) in cost-map grid units
    int size = 9;
    TensorPtr<S> values; // [size, size]
};

template <class S>
CostPatch<S> crop_patch(Tape<S>& tape, const CostVolume<S>& cv, int src_y, int src_x,
                        std::array<double, 2> center, int size) {
    if (size % 2 == 0) throw ConfigError("crop_patch: size must be odd");
    if (src_y < 0 || src_y >= cv.h || src_x < 0 || src_x >= cv.w) {
        throw ShapeError("crop_patch: source pixel outside grid");
    }
    auto idx = std::make_shared<std::vector<std::int64_t>>(
        1, static_cast<std::int64_t>(src_y) * cv.w + src_x);
    auto map_row = gather_rows(tape, cv.maps,
                               std::shared_ptr<const std::vector<std::int64_t>>(idx),
                               cv.h * cv.w);
    auto map3 = make_tensor<S>({1, cv.h, cv.w}, map_row->data);
    auto map3r = tape.record(map3, {map_row}, "reshape", [map_row, map3](Tape<S>& t) {
        if (!t.needs_grad(*map_row)) return;
        const S* g = t.grad(map3).data();
        S* gx = t.grad(map_row).data();
        for (std::int64_t i = 0; i < map3->size(); ++i) gx[i] += g[i];
    });
    auto centers = std::make_shared<std::vector<std::array<double, 2>>>(1, center);
    auto patch = crop_patches(tape, map3r,
                              std::shared_ptr<const std::vector<std::array<double, 2>>>(centers),
                              size);
    auto out = make_tensor<S>({size, size}, patch->data);
    auto out_r = tape.record(out, {patch}, "reshape", [patch, out](Tape<S>& t) {
        if (!t.needs_grad(*patch)) return;
        const S* g = t.grad(out).data();
        S* gx = t.grad(patch).data();
        for (std::int64_t i = 0; i < out->size(); ++i) gx[i] += g[i];
    });
    return CostPatch<S>{center, size, out_r};
}

} // namespace mcva
