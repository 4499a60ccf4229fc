#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "mcva/decoder.hpp"

namespace mcva {

enum class Phase { kPretrain, kFinetune };
enum class MaskStrategy { kBlock, kRandom, kNone };

// Flat key=value training configuration. Unset phase-dependent fields
// (steps, lr_max, freeze.context_encoder) resolve to phase defaults at load.
struct TrainConfig {
    Phase phase = Phase::kPretrain;
    int steps = 2000;
    int batch_size = 2;
    double lr_max = 5e-4;
    std::uint64_t seed = 42;
    std::string data_dir;
    std::string eval_dir;
    int eval_every = 0; // finetuning validation cadence; 0 = off

    double mask_ratio = 0.5;
    MaskStrategy mask_strategy = MaskStrategy::kBlock;
    int block_min = 0, block_max = 0; // 0 = auto from the grid

    LocationMode pretext_location = LocationMode::kRandom;
    QueryMode pretext_query = QueryMode::kPePlusPatch;
    NormalizeSide pretext_normalize = NormalizeSide::kTarget;

    bool freeze_image_encoder = true;
    bool freeze_context_encoder = true;

    int n_iters = 4;
    double grad_clip = 0.0;
    double weight_decay = 1e-4;
    bool f1_rule_or = true;

    int feature_dim = 32;       // D
    int context_dim = 32;       // D_ctx
    int patch_feature_dim = 32; // D_f
    int token_dim = 64;         // D_t
    int latent_tokens = 8;      // K
    int agt_pairs = 2;

    int threads = 0;
    std::string log_path;

    // Block side range for an h x w source grid: configured values, the
    // 32..120 range when the grid accommodates it, else [grid/4, grid].
    std::pair<int, int> block_range(int h, int w) const {
        if (block_min > 0 && block_max > 0) return {block_min, block_max};
        const int g = h < w ? h : w;
        if (g >= 32) return {32, g < 120 ? g : 120};
        return {g / 4 > 0 ? g / 4 : 1, g};
    }
};

// Parses the flat `key = value` format ('#' comments, unknown keys rejected
// with their line number). An empty file yields all defaults.
TrainConfig load_config(const std::string& path);
TrainConfig parse_config_text(const std::string& text, const std::string& origin);

// Canonical serialization; parse(serialize(c)) == c.
std::string serialize_config(const TrainConfig& cfg);

bool operator==(const TrainConfig& a, const TrainConfig& b);

const char* phase_name(Phase p);
const char* strategy_name(MaskStrategy s);

} // namespace mcva
