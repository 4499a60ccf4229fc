#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mcva/checkpoint.hpp"
#include "mcva/config.hpp"
#include "mcva/cost_encoder.hpp"
#include "mcva/decoder.hpp"
#include "mcva/encoders.hpp"
#include "mcva/metrics.hpp"
#include "mcva/optim.hpp"
#include "mcva/synthdata.hpp"

namespace mcva {

// Full parameter bundle. The same named parameter set exists in both phases;
// trainability flags differ (image encoder always frozen in pretraining,
// pretext head only trained in pretraining, flow updater only in finetuning).
struct Model {
    TrainConfig cfg;
    EncoderWeights<float> img_enc, ctx_enc;
    CostEncoderParams<float> cenc;
    DecoderParams<float> dec;
    PretextHead<float> head;
    FlowUpdateParams<float> flow;
    ParamSet<float> params;

    static Model init(const TrainConfig& cfg);
    void apply_phase_trainability();
};

CheckpointFile checkpoint_from_model(const Model& model, std::uint64_t rng_state);
void save_checkpoint(const std::string& path, const Model& model, std::uint64_t rng_state);

// Full restore: every registered parameter must be present with its shape.
void restore_model(Model& model, const CheckpointFile& ckpt);
// Warm start: copies the intersection by name (shape mismatches still throw).
int warm_start_model(Model& model, const CheckpointFile& ckpt);

// Rebuilds the model recorded in a checkpoint (config echo + tensors).
Model model_from_checkpoint(const std::string& path);

struct TrainOutput {
    std::string checkpoint_path;
    std::vector<double> losses; // one per step
    std::vector<std::pair<int, FlowMetrics>> eval_history;
    std::uint64_t frozen_checksum_before = 0, frozen_checksum_after = 0;
};

// Self-supervised pretraining over masked cost volumes.
TrainOutput run_pretraining(const TrainConfig& cfg, const std::string& out_ckpt);

// Supervised finetuning of the recurrent flow decoder (masks disabled);
// `init_ckpt` warm-starts the shared parameters when given.
TrainOutput run_finetuning(const TrainConfig& cfg, const std::string* init_ckpt,
                           const std::string& out_ckpt);

// AEPE / F1-all over a labeled dataset (image-pixel units, final iteration).
FlowMetrics evaluate_model(Model& model, const Dataset& data);

// Predicted flow for one pair (grid resolution, image-pixel units).
Flow predict_flow_field(Model& model, const ScenePair& pair);
FlowMetrics evaluate(const std::string& ckpt_path, const std::string& data_dir,
                     const std::string* report_path);

// ---- ablations & diagnostics ------------------------------------------------

struct AblationRow {
    std::string table;
    std::string label;
    double final_loss = 0.0;
};

// Sweeps masking strategy, masking ratio, and pre-text query design; each row
// is a short pretraining run reporting its trailing mean pretext loss.
std::vector<AblationRow> run_mask_ablation(const TrainConfig& base,
                                           const std::string& out_dir);

struct LeakageRow {
    std::uint64_t seed = 0;
    double block_mse = 0.0;
    double random_mse = 0.0;
};

// Copy-oracle leakage comparison between block-sharing and per-pixel random
// masking over the first pairs of a dataset.
std::vector<LeakageRow> leakage_report(const std::string& data_dir, double ratio,
                                       int n_seeds, int max_pairs = 32);

// ---- shared helpers (also used by tests) ------------------------------------

TensorPtr<float> image_tensor(const Image& img);

// Ground-truth flow sampled at feature-cell centers, converted to grid units;
// rows of (u, v) matching the model's flow layout.
std::vector<float> flow_gt_grid_rows(const Flow& gt, int grid_h, int grid_w, int stride);

} // namespace mcva
