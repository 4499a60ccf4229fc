#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <vector>

#include "mcva/errors.hpp"
#include "mcva/rng.hpp"

namespace mcva {

// Axis-aligned rectangular tiling of the source grid. Every pixel carries
// exactly one block id; blocks tile the grid with no overlap or gaps.
struct BlockPartition {
    int h = 0, w = 0;
    int num_blocks = 0;
    std::vector<int> block_id; // h*w, row-major
    int side_min = 1, side_max = 1;

    int id_at(int y, int x) const { return block_id[static_cast<std::size_t>(y) * w + x]; }
};

// Greedy row-band/column tiling: sample band heights from [side_min, side_max]
// until the grid is covered (clipping the last), then sample widths per band.
BlockPartition partition_blocks(int h, int w, int side_min, int side_max, Rng& rng);

// Partition of singletons; the random-masking ablation runs the identical
// pipeline over it.
BlockPartition partition_singletons(int h, int w);

using BitGrid = std::vector<std::uint8_t>; // row-major, 1 = visible, 0 = masked

// Exactly round(ratio*h8*w8) zeros, positions uniform without replacement.
BitGrid sample_base_mask(int h8, int w8, double ratio, Rng& rng);

// One block's mask pyramid. levels[i] has extents (h0/2^i, w0/2^i);
// levels[3] is the base mask, levels[0] full cost-map resolution;
// level i is the nearest-neighbor upsampling of the base.
struct MaskPyramid {
    std::array<BitGrid, 4> levels;
    int h0 = 0, w0 = 0;

    int level_h(int i) const { return h0 >> i; }
    int level_w(int i) const { return w0 >> i; }
};

// Builds the pyramid for one base mask targeting cost-map extents (hc, wc).
MaskPyramid build_pyramid(const BitGrid& base, int hc, int wc);

// Per-block pyramids plus the partition tying source pixels to them.
struct MaskPyramidSet {
    BlockPartition partition;
    std::vector<MaskPyramid> per_block;
    double ratio = 0;
    int hc = 0, wc = 0;

    const MaskPyramid& pyramid_for(int y, int x) const {
        return per_block[static_cast<std::size_t>(partition.id_at(y, x))];
    }
    bool base_visible(int block, int u8, int v8) const {
        const auto& b = per_block[static_cast<std::size_t>(block)].levels[3];
        return b[static_cast<std::size_t>(u8) * (wc / 8) + v8] != 0;
    }
};

// One base mask per block; every source pixel shares its block's pyramid.
MaskPyramidSet generate_block_sharing_masks(BlockPartition partition, int hc, int wc,
                                            double ratio, Rng& rng);

// Materializes level `level` per source pixel: [n_pixels * (hc>>level) * (wc>>level)]
// bytes suitable for mask_select.
std::shared_ptr<std::vector<std::uint8_t>> materialize_level(const MaskPyramidSet& set,
                                                             int level);

// Copy-oracle leakage metric: predict each masked cost value (at full
// resolution) by copying from the nearest source pixel (Euclidean, ties by
// row-major index) whose mask leaves that cell visible; 0 when no donor
// exists. Returns the MSE over all masked cells.
double leakage_oracle_mse(const float* cost_maps, int h, int w,
                          const MaskPyramidSet& masks);

} // namespace mcva
