#include "mcva/masking.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mcva {

BlockPartition partition_blocks(int h, int w, int side_min, int side_max, Rng& rng) {
    if (side_min < 1 || side_min > side_max) {
        throw ConfigError("partition_blocks: invalid side range [" +
                          std::to_string(side_min) + ", " + std::to_string(side_max) + "]");
    }
    BlockPartition p;
    p.h = h;
    p.w = w;
    p.side_min = side_min;
    p.side_max = side_max;
    p.block_id.assign(static_cast<std::size_t>(h) * w, -1);

    int next_id = 0;
    int y = 0;
    while (y < h) {
        int band = static_cast<int>(rng.uniform_int(side_min, side_max));
        if (y + band > h) band = h - y; // clip the last band
        int x = 0;
        while (x < w) {
            int width = static_cast<int>(rng.uniform_int(side_min, side_max));
            if (x + width > w) width = w - x;
            for (int yy = y; yy < y + band; ++yy) {
                for (int xx = x; xx < x + width; ++xx) {
                    p.block_id[static_cast<std::size_t>(yy) * w + xx] = next_id;
                }
            }
            ++next_id;
            x += width;
        }
        y += band;
    }
    p.num_blocks = next_id;
    return p;
}

BlockPartition partition_singletons(int h, int w) {
    BlockPartition p;
    p.h = h;
    p.w = w;
    p.side_min = p.side_max = 1;
    p.num_blocks = h * w;
    p.block_id.resize(static_cast<std::size_t>(h) * w);
    std::iota(p.block_id.begin(), p.block_id.end(), 0);
    return p;
}

BitGrid sample_base_mask(int h8, int w8, double ratio, Rng& rng) {
    if (ratio < 0.0 || ratio > 1.0) {
        throw ConfigError("sample_base_mask: ratio must lie in [0,1]");
    }
    const int cells = h8 * w8;
    const int masked = static_cast<int>(std::llround(ratio * cells));
    BitGrid grid(static_cast<std::size_t>(cells), 1);
    // partial Fisher-Yates over cell indices
    std::vector<int> idx(static_cast<std::size_t>(cells));
    std::iota(idx.begin(), idx.end(), 0);
    for (int i = 0; i < masked; ++i) {
        const int j = i + static_cast<int>(rng.bounded(static_cast<std::uint64_t>(cells - i)));
        std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
        grid[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])] = 0;
    }
    return grid;
}

MaskPyramid build_pyramid(const BitGrid& base, int hc, int wc) {
    if (hc % 8 != 0 || wc % 8 != 0) {
        throw ShapeError("build_pyramid: cost-map extents " + std::to_string(hc) + "x" +
                         std::to_string(wc) + " must be divisible by 8");
    }
    const int h8 = hc / 8, w8 = wc / 8;
    if (static_cast<int>(base.size()) != h8 * w8) {
        throw ShapeError("build_pyramid: base mask size mismatch");
    }
    MaskPyramid p;
    p.h0 = hc;
    p.w0 = wc;
    p.levels[3] = base;
    for (int level = 2; level >= 0; --level) {
        const int hi = hc >> level, wi = wc >> level;
        const int shift = 3 - level;
        BitGrid g(static_cast<std::size_t>(hi) * wi);
        for (int u = 0; u < hi; ++u) {
            const int u8 = u >> shift;
            for (int v = 0; v < wi; ++v) {
                g[static_cast<std::size_t>(u) * wi + v] =
                    base[static_cast<std::size_t>(u8) * w8 + (v >> shift)];
            }
        }
        p.levels[static_cast<std::size_t>(level)] = std::move(g);
    }
    return p;
}

MaskPyramidSet generate_block_sharing_masks(BlockPartition partition, int hc, int wc,
                                            double ratio, Rng& rng) {
    if (hc % 8 != 0 || wc % 8 != 0) {
        throw ShapeError("generate_block_sharing_masks: extents must be divisible by 8");
    }
    MaskPyramidSet set;
    set.ratio = ratio;
    set.hc = hc;
    set.wc = wc;
    set.per_block.reserve(static_cast<std::size_t>(partition.num_blocks));
    for (int b = 0; b < partition.num_blocks; ++b) {
        set.per_block.push_back(build_pyramid(sample_base_mask(hc / 8, wc / 8, ratio, rng), hc, wc));
    }
    set.partition = std::move(partition);
    return set;
}

std::shared_ptr<std::vector<std::uint8_t>> materialize_level(const MaskPyramidSet& set,
                                                             int level) {
    const int hi = set.hc >> level, wi = set.wc >> level;
    const std::size_t plane = static_cast<std::size_t>(hi) * wi;
    const std::size_t n = static_cast<std::size_t>(set.partition.h) * set.partition.w;
    auto out = std::make_shared<std::vector<std::uint8_t>>(n * plane);
    for (std::size_t p = 0; p < n; ++p) {
        const auto& src = set.per_block[static_cast<std::size_t>(set.partition.block_id[p])]
                              .levels[static_cast<std::size_t>(level)];
        std::copy(src.begin(), src.end(), out->begin() + static_cast<std::ptrdiff_t>(p * plane));
    }
    return out;
}

namespace {

// Nearest visible source pixel for (py, px) at a fixed cost-map cell, or -1.
// Chebyshev rings with exact Euclidean comparison; ties by row-major index.
int nearest_donor(const std::vector<std::uint8_t>& cell_visible, int h, int w, int py,
                  int px) {
    std::int64_t best_d2 = -1;
    int best_idx = -1;
    const auto consider = [&](int y, int x) {
        if (y < 0 || y >= h || x < 0 || x >= w) return;
        const int idx = y * w + x;
        if (!cell_visible[static_cast<std::size_t>(idx)]) return;
        const std::int64_t dy = y - py, dx = x - px;
        const std::int64_t d2 = dy * dy + dx * dx;
        if (best_d2 < 0 || d2 < best_d2 || (d2 == best_d2 && idx < best_idx)) {
            best_d2 = d2;
            best_idx = idx;
        }
    };
    const int max_r = std::max(h, w);
    for (int r = 0; r <= max_r; ++r) {
        // pixels on Chebyshev ring r sit at Euclidean distance >= r
        if (best_d2 >= 0 && static_cast<std::int64_t>(r) * r > best_d2) break;
        if (r == 0) {
            consider(py, px);
            continue;
        }
        for (int x = px - r; x <= px + r; ++x) {
            consider(py - r, x);
            consider(py + r, x);
        }
        for (int y = py - r + 1; y <= py + r - 1; ++y) {
            consider(y, px - r);
            consider(y, px + r);
        }
    }
    return best_idx;
}

} // namespace

double leakage_oracle_mse(const float* cost_maps, int h, int w,
                          const MaskPyramidSet& masks) {
    if (masks.partition.h != h || masks.partition.w != w || masks.hc != h || masks.wc != w) {
        throw ShapeError("leakage_oracle_mse: mask extents do not match the volume");
    }
    const int cells = h * w; // cost-map cells per source pixel
    const int n_pix = h * w;
    const int w8 = w / 8;

    double acc = 0.0;
    std::int64_t count = 0;
    std::vector<std::uint8_t> cell_visible(static_cast<std::size_t>(n_pix));
    std::vector<std::uint8_t> block_visible(static_cast<std::size_t>(masks.partition.num_blocks));

    for (int u = 0; u < h; ++u) {
        for (int v = 0; v < w; ++v) {
            const int cell = u * w + v;
            const int u8 = u >> 3, v8 = v >> 3;
            bool any_visible = false;
            for (int b = 0; b < masks.partition.num_blocks; ++b) {
                const auto& base = masks.per_block[static_cast<std::size_t>(b)].levels[3];
                const bool vis = base[static_cast<std::size_t>(u8) * w8 + v8] != 0;
                block_visible[static_cast<std::size_t>(b)] = vis ? 1 : 0;
                any_visible = any_visible || vis;
            }
            for (int p = 0; p < n_pix; ++p) {
                cell_visible[static_cast<std::size_t>(p)] =
                    block_visible[static_cast<std::size_t>(masks.partition.block_id[static_cast<std::size_t>(p)])];
            }
            for (int p = 0; p < n_pix; ++p) {
                if (cell_visible[static_cast<std::size_t>(p)]) continue; // visible for p
                const double truth = cost_maps[static_cast<std::int64_t>(p) * cells + cell];
                double pred = 0.0;
                if (any_visible) {
                    const int donor = nearest_donor(cell_visible, h, w, p / w, p % w);
                    if (donor >= 0) {
                        pred = cost_maps[static_cast<std::int64_t>(donor) * cells + cell];
                    }
                }
                const double d = truth - pred;
                acc += d * d;
                ++count;
            }
        }
    }
    return count == 0 ? 0.0 : acc / static_cast<double>(count);
}

} // namespace mcva
