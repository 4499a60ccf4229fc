#include "mcva/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "mcva/parallel.hpp"

namespace fs = std::filesystem;

namespace mcva {

namespace {

constexpr double kSeqLossGamma = 0.8;

// stream ids for derived seeds
enum : std::uint64_t {
    kStreamModel = 0x10,
    kStreamBatch = 0x20,
    kStreamMask = 0x30,
    kStreamLoc = 0x40,
};

std::string loss_log_path(const TrainConfig& cfg, const std::string& out_ckpt) {
    return cfg.log_path.empty() ? out_ckpt + ".log" : cfg.log_path;
}

struct PairCache {
    const Dataset& ds;
    std::vector<std::optional<ScenePair>> slots;

    explicit PairCache(const Dataset& d)
        : ds(d), slots(static_cast<std::size_t>(d.size())) {}

    const ScenePair& get(int i) {
        auto& slot = slots[static_cast<std::size_t>(i)];
        if (!slot) slot = ds.load(i);
        return *slot;
    }
};

struct GridDims {
    int h = 0, w = 0, stride = 4;
};

GridDims grid_for(const Dataset& ds) {
    GridDims g;
    g.stride = EncoderWeights<float>::kStrideToImage;
    if (ds.manifest.height % g.stride != 0 || ds.manifest.width % g.stride != 0) {
        throw ShapeError("dataset image size must be divisible by " +
                         std::to_string(g.stride));
    }
    g.h = ds.manifest.height / g.stride;
    g.w = ds.manifest.width / g.stride;
    return g;
}

// Context feature map [D,H,W] -> rows [H*W, D].
TensorPtr<float> context_rows(Tape<float>& tape, const FeatureMap<float>& ctx) {
    const int d = ctx.channels(), h = ctx.height(), w = ctx.width();
    const std::int64_t n = static_cast<std::int64_t>(h) * w;
    auto perm = std::make_shared<std::vector<std::int64_t>>(
        static_cast<std::size_t>(n) * d);
    for (std::int64_t p = 0; p < n; ++p) {
        for (std::int64_t c = 0; c < d; ++c) (*perm)[p * d + c] = c * n + p;
    }
    return permute_elements(tape, ctx.values,
                            std::shared_ptr<const std::vector<std::int64_t>>(perm),
                            {static_cast<int>(n), d});
}

MaskPyramidSet make_masks(const TrainConfig& cfg, const GridDims& grid, Rng& rng) {
    BlockPartition part;
    if (cfg.mask_strategy == MaskStrategy::kBlock) {
        const auto range = cfg.block_range(grid.h, grid.w);
        part = partition_blocks(grid.h, grid.w, range.first, range.second, rng);
    } else {
        part = partition_singletons(grid.h, grid.w);
    }
    return generate_block_sharing_masks(std::move(part), grid.h, grid.w, cfg.mask_ratio,
                                        rng);
}

// One sample's pretext loss on the given tape.
TensorPtr<float> pretext_sample_loss(Tape<float>& tape, Model& model,
                                     const ScenePair& pair, const GridDims& grid,
                                     std::uint64_t mask_seed, std::uint64_t loc_seed) {
    const TrainConfig& cfg = model.cfg;
    auto f1 = encode_image(tape, image_tensor(pair.frame1), model.img_enc);
    auto f2 = encode_image(tape, image_tensor(pair.frame2), model.img_enc);
    auto cv = build_cost_volume(tape, f1, f2);

    std::optional<MaskPyramidSet> masks;
    if (cfg.mask_strategy != MaskStrategy::kNone) {
        Rng rng(mask_seed);
        masks = make_masks(cfg, grid, rng);
    }
    auto memory = encode_cost_volume(tape, cv, masks ? &*masks : nullptr, model.cenc);

    const std::int64_t n = static_cast<std::int64_t>(grid.h) * grid.w;
    Rng loc_rng(loc_seed);
    auto centers = std::make_shared<std::vector<std::array<double, 2>>>(
        static_cast<std::size_t>(n));
    for (auto& c : *centers) {
        c = sample_pretext_location(loc_rng, grid.h, grid.w, cfg.pretext_location);
    }

    TensorPtr<float> patches;
    if (cfg.pretext_query == QueryMode::kPePlusPatch) {
        patches = crop_patches(tape, cv.maps,
                               std::shared_ptr<const std::vector<std::array<double, 2>>>(centers),
                               DecoderParams<float>::kQueryPatch);
    }
    auto c = decode_cost_feature(tape, memory, patches, *centers, cfg.pretext_query,
                                 model.dec);
    auto pred = pretext_predict(tape, c, model.head);

    const int tp = PretextHead<float>::kTargetPatch;
    std::vector<PretextTarget<float>> targets;
    targets.reserve(static_cast<std::size_t>(n));
    std::vector<float> raw(static_cast<std::size_t>(tp) * tp);
    const float* maps = cv.maps->ptr();
    for (std::int64_t p = 0; p < n; ++p) {
        crop_patch_plain(maps + p * grid.h * grid.w, grid.h, grid.w,
                         (*centers)[static_cast<std::size_t>(p)][0],
                         (*centers)[static_cast<std::size_t>(p)][1], tp, raw.data());
        targets.push_back(make_pretext_target<float>(raw));
    }
    return pretext_loss(tape, pred, targets, cfg.pretext_normalize);
}

// One sample's supervised sequence loss on the given tape.
TensorPtr<float> finetune_sample_loss(Tape<float>& tape, Model& model,
                                      const ScenePair& pair, const GridDims& grid) {
    if (!pair.flow_gt) throw DatasetError("finetuning requires labeled pairs (flow.flo)");
    auto f1 = encode_image(tape, image_tensor(pair.frame1), model.img_enc);
    auto f2 = encode_image(tape, image_tensor(pair.frame2), model.img_enc);
    auto ctx = encode_context(tape, image_tensor(pair.frame1), model.ctx_enc);
    auto cv = build_cost_volume(tape, f1, f2);
    auto memory = encode_cost_volume(tape, cv, nullptr, model.cenc);
    auto ctx_r = context_rows(tape, ctx);
    auto flows = run_recurrent_decoder(tape, memory, cv, ctx_r, model.cfg.n_iters,
                                       model.dec, model.flow);

    auto gt = std::make_shared<std::vector<float>>(
        flow_gt_grid_rows(*pair.flow_gt, grid.h, grid.w, grid.stride));
    TensorPtr<float> loss;
    const int n_iters = static_cast<int>(flows.size());
    for (int i = 0; i < n_iters; ++i) {
        const float wgt = static_cast<float>(std::pow(kSeqLossGamma, n_iters - 1 - i));
        auto term = scale(tape, l1_against(tape, flows[static_cast<std::size_t>(i)],
                                           std::shared_ptr<const std::vector<float>>(gt)),
                          wgt);
        loss = loss ? add(tape, loss, term) : term;
    }
    return loss;
}

// Final-iteration flow for evaluation (plain forward).
std::vector<float> predict_final_flow(Tape<float>& tape, Model& model,
                                      const ScenePair& pair, const GridDims& grid) {
    auto f1 = encode_image(tape, image_tensor(pair.frame1), model.img_enc);
    auto f2 = encode_image(tape, image_tensor(pair.frame2), model.img_enc);
    auto ctx = encode_context(tape, image_tensor(pair.frame1), model.ctx_enc);
    auto cv = build_cost_volume(tape, f1, f2);
    auto memory = encode_cost_volume(tape, cv, nullptr, model.cenc);
    auto ctx_r = context_rows(tape, ctx);
    auto flows = run_recurrent_decoder(tape, memory, cv, ctx_r, model.cfg.n_iters,
                                       model.dec, model.flow);
    return flows.back()->data;
}

struct StepLogger {
    std::ofstream out;

    StepLogger(const std::string& path) : out(path, std::ios::app) {
        if (!out) throw ConfigError("cannot open loss log " + path);
    }
    void log(std::int64_t step, const char* phase, double loss, double lr) {
        char line[160];
        std::snprintf(line, sizeof(line), "step=%lld phase=%s loss=%.9g lr=%.9g\n",
                      static_cast<long long>(step), phase, loss, lr);
        out << line;
        out.flush();
    }
};

std::vector<TensorPtr<float>> frozen_tensors(const Model& model) {
    std::vector<TensorPtr<float>> out;
    for (const auto& p : model.params.items) {
        if (!p->requires_grad) out.push_back(p);
    }
    return out;
}

TrainOutput run_training(Model& model, const std::string& out_ckpt) {
    const TrainConfig& cfg = model.cfg;
    set_num_threads(cfg.threads);
    if (cfg.data_dir.empty()) throw ConfigError("config missing data.dir");
    Dataset ds = open_dataset(cfg.data_dir);
    const GridDims grid = grid_for(ds);
    const bool pretrain = cfg.phase == Phase::kPretrain;

    if (pretrain && cfg.mask_strategy != MaskStrategy::kNone) {
        const int cells = (grid.h / 8 > 0 ? grid.h / 8 : 1) * (grid.w / 8 > 0 ? grid.w / 8 : 1);
        if (grid.h % 8 != 0 || grid.w % 8 != 0) {
            throw ShapeError("pretraining needs a feature grid divisible by 8; got " +
                             std::to_string(grid.h) + "x" + std::to_string(grid.w));
        }
        if (std::llround(cfg.mask_ratio * cells) >= cells) {
            throw ConfigError("mask.ratio leaves no visible base-mask cell at this grid");
        }
    }

    std::optional<Dataset> eval_ds;
    if (!cfg.eval_dir.empty()) eval_ds = open_dataset(cfg.eval_dir);

    PairCache cache(ds);
    const auto trainable = model.params.trainable();
    const auto frozen = frozen_tensors(model);
    TrainOutput result;
    result.checkpoint_path = out_ckpt;
    result.frozen_checksum_before = param_checksum(frozen);

    OptimizerState<float> opt;
    opt.cfg.weight_decay = cfg.weight_decay;

    StepLogger logger(loss_log_path(cfg, out_ckpt));
    std::vector<std::vector<float>> grad_accum(trainable.size());

    for (int step = 0; step < cfg.steps; ++step) {
        const double lr = onecycle_lr(step, cfg.steps, cfg.lr_max);
        Rng batch_rng(Rng::mix(cfg.seed, kStreamBatch, static_cast<std::uint64_t>(step)));
        for (auto& g : grad_accum) g.clear();
        double loss_value = 0.0;

        for (int b = 0; b < cfg.batch_size; ++b) {
            const int pair_idx = static_cast<int>(batch_rng.uniform_int(0, ds.size() - 1));
            Tape<float> tape;
            tape.check_finite = false; // divergence is caught on the loss and gradients
            TensorPtr<float> loss;
            try {
                const ScenePair& pair = cache.get(pair_idx);
                const auto sid = static_cast<std::uint64_t>(step) * 1000003ull +
                                 static_cast<std::uint64_t>(b);
                loss = pretrain
                           ? pretext_sample_loss(tape, model, pair, grid,
                                                 Rng::mix(cfg.seed, kStreamMask, sid),
                                                 Rng::mix(cfg.seed, kStreamLoc, sid))
                           : finetune_sample_loss(tape, model, pair, grid);
            } catch (const NumericalError& e) {
                throw DivergedError("step " + std::to_string(step) + ": " + e.what());
            }
            loss = scale(tape, loss, 1.0f / static_cast<float>(cfg.batch_size));
            tape.backward(loss);
            loss_value += static_cast<double>(loss->data[0]);
            for (std::size_t pi = 0; pi < trainable.size(); ++pi) {
                const auto* g = tape.find_grad(trainable[pi].get());
                if (!g) continue;
                auto& acc = grad_accum[pi];
                if (acc.empty()) {
                    acc = *g;
                } else {
                    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += (*g)[i];
                }
            }
        }

        if (!std::isfinite(loss_value)) {
            throw DivergedError("loss diverged at step " + std::to_string(step));
        }
        std::vector<const std::vector<float>*> grads(trainable.size(), nullptr);
        for (std::size_t pi = 0; pi < trainable.size(); ++pi) {
            if (!grad_accum[pi].empty()) grads[pi] = &grad_accum[pi];
        }
        try {
            adamw_step(opt, trainable, grads, lr, cfg.grad_clip);
        } catch (const NumericalError& e) {
            throw DivergedError("step " + std::to_string(step) + ": " + e.what());
        }

        logger.log(step, phase_name(cfg.phase), loss_value, lr);
        result.losses.push_back(loss_value);

        if (eval_ds && cfg.eval_every > 0 && (step + 1) % cfg.eval_every == 0) {
            result.eval_history.emplace_back(step + 1, evaluate_model(model, *eval_ds));
        }
    }

    result.frozen_checksum_after = param_checksum(frozen);
    if (result.frozen_checksum_after != result.frozen_checksum_before) {
        throw NumericalError("frozen parameters changed during training");
    }
    if (eval_ds && cfg.eval_every > 0) {
        std::ofstream ef(loss_log_path(cfg, out_ckpt) + ".eval");
        for (const auto& [s, m] : result.eval_history) {
            char line[160];
            std::snprintf(line, sizeof(line), "step=%d aepe=%.9g f1=%.9g\n", s, m.aepe,
                          m.f1_all);
            ef << line;
        }
    }
    save_checkpoint(out_ckpt, model, Rng::mix(cfg.seed, static_cast<std::uint64_t>(cfg.steps)));
    return result;
}

} // namespace

// ---- model assembly ---------------------------------------------------------

Model Model::init(const TrainConfig& cfg) {
    Model m;
    m.cfg = cfg;
    m.img_enc = EncoderWeights<float>::init("img_enc", cfg.feature_dim,
                                            Rng::mix(cfg.seed, kStreamModel, 1));
    m.ctx_enc = EncoderWeights<float>::init("ctx_enc", cfg.context_dim,
                                            Rng::mix(cfg.seed, kStreamModel, 2));
    Rng rng(Rng::mix(cfg.seed, kStreamModel, 3));
    m.cenc = CostEncoderParams<float>::init(cfg.patch_feature_dim, cfg.token_dim,
                                            cfg.latent_tokens, cfg.agt_pairs, rng);
    m.dec = DecoderParams<float>::init(cfg.token_dim, rng);
    m.head = PretextHead<float>::init(cfg.token_dim, rng);
    m.flow = FlowUpdateParams<float>::init(cfg.token_dim, cfg.context_dim, rng);
    m.img_enc.register_params(m.params);
    m.ctx_enc.register_params(m.params);
    m.cenc.register_params(m.params);
    m.dec.register_params(m.params);
    m.head.register_params(m.params);
    m.flow.register_params(m.params);
    m.apply_phase_trainability();
    return m;
}

void Model::apply_phase_trainability() {
    const bool pretrain = cfg.phase == Phase::kPretrain;
    img_enc.set_trainable(!cfg.freeze_image_encoder);
    ctx_enc.set_trainable(!cfg.freeze_context_encoder);
    for (const auto& t : {head.w1, head.b1, head.w2, head.b2}) {
        t->requires_grad = pretrain;
    }
    for (const auto& t : {flow.fe_w, flow.fe_b, flow.gz_w, flow.gz_b, flow.gr_w, flow.gr_b,
                          flow.gh_w, flow.gh_b, flow.fh_w1, flow.fh_b1, flow.fh_w2,
                          flow.fh_b2}) {
        t->requires_grad = !pretrain;
    }
}

// ---- checkpoint bridging ------------------------------------------------------

CheckpointFile checkpoint_from_model(const Model& model, std::uint64_t rng_state) {
    CheckpointFile file;
    file.config_echo = serialize_config(model.cfg);
    for (const auto& p : model.params.items) {
        CheckpointEntry e;
        e.name = p->name;
        for (const int d : p->shape) e.dims.push_back(static_cast<std::uint32_t>(d));
        e.data = p->data;
        file.entries.push_back(std::move(e));
    }
    CheckpointEntry rng;
    rng.name = "__rng.state";
    rng.dims = {2};
    rng.data.resize(2);
    const auto lo = static_cast<std::uint32_t>(rng_state & 0xffffffffull);
    const auto hi = static_cast<std::uint32_t>(rng_state >> 32);
    std::memcpy(&rng.data[0], &lo, 4);
    std::memcpy(&rng.data[1], &hi, 4);
    file.entries.push_back(std::move(rng));
    return file;
}

void save_checkpoint(const std::string& path, const Model& model, std::uint64_t rng_state) {
    write_checkpoint_file(path, checkpoint_from_model(model, rng_state));
}

namespace {

void copy_entry(const CheckpointEntry& e, const TensorPtr<float>& p) {
    Shape shape;
    for (const auto d : e.dims) shape.push_back(static_cast<int>(d));
    if (shape != p->shape) {
        throw ShapeError("checkpoint entry " + e.name + " has shape " + shape_str(shape) +
                         ", model expects " + shape_str(p->shape));
    }
    p->data = e.data;
}

} // namespace

void restore_model(Model& model, const CheckpointFile& ckpt) {
    for (const auto& p : model.params.items) {
        const auto* e = ckpt.find(p->name);
        if (!e) throw FormatError("checkpoint is missing parameter " + p->name);
        copy_entry(*e, p);
    }
}

int warm_start_model(Model& model, const CheckpointFile& ckpt) {
    int copied = 0;
    for (const auto& p : model.params.items) {
        const auto* e = ckpt.find(p->name);
        if (!e) continue;
        copy_entry(*e, p);
        ++copied;
    }
    if (copied == 0) throw FormatError("checkpoint shares no parameters with the model");
    return copied;
}

Model model_from_checkpoint(const std::string& path) {
    const CheckpointFile ckpt = read_checkpoint_file(path);
    TrainConfig cfg = parse_config_text(ckpt.config_echo, path + " (config echo)");
    Model model = Model::init(cfg);
    restore_model(model, ckpt);
    return model;
}

// ---- public entry points ------------------------------------------------------

TrainOutput run_pretraining(const TrainConfig& cfg, const std::string& out_ckpt) {
    if (cfg.phase != Phase::kPretrain) throw ConfigError("run_pretraining: phase must be pretrain");
    Model model = Model::init(cfg);
    return run_training(model, out_ckpt);
}

TrainOutput run_finetuning(const TrainConfig& cfg, const std::string* init_ckpt,
                           const std::string& out_ckpt) {
    if (cfg.phase != Phase::kFinetune) throw ConfigError("run_finetuning: phase must be finetune");
    Model model = Model::init(cfg);
    if (init_ckpt) warm_start_model(model, read_checkpoint_file(*init_ckpt));
    Dataset ds = open_dataset(cfg.data_dir);
    if (!ds.manifest.labeled) {
        throw DatasetError("finetuning requires a labeled dataset (gen-data --labeled)");
    }
    return run_training(model, out_ckpt);
}

FlowMetrics evaluate_model(Model& model, const Dataset& data) {
    const GridDims grid = grid_for(data);
    FlowMetricsAccum accum(model.cfg.f1_rule_or);
    for (int i = 0; i < data.size(); ++i) {
        const ScenePair pair = data.load(i);
        if (!pair.flow_gt) {
            throw DatasetError("evaluate: pair " + std::to_string(i) + " has no flow label");
        }
        Tape<float> tape;
        tape.check_finite = false;
        const auto pred = predict_final_flow(tape, model, pair, grid);
        const auto gt = flow_gt_grid_rows(*pair.flow_gt, grid.h, grid.w, grid.stride);
        for (std::int64_t p = 0; p < static_cast<std::int64_t>(grid.h) * grid.w; ++p) {
            accum.add(static_cast<double>(pred[p * 2]) * grid.stride,
                      static_cast<double>(pred[p * 2 + 1]) * grid.stride,
                      static_cast<double>(gt[p * 2]) * grid.stride,
                      static_cast<double>(gt[p * 2 + 1]) * grid.stride);
        }
    }
    return accum.result();
}

Flow predict_flow_field(Model& model, const ScenePair& pair) {
    GridDims grid;
    grid.stride = EncoderWeights<float>::kStrideToImage;
    if (pair.frame1.h % grid.stride != 0 || pair.frame1.w % grid.stride != 0) {
        throw ShapeError("predict_flow_field: image size must be divisible by " +
                         std::to_string(grid.stride));
    }
    grid.h = pair.frame1.h / grid.stride;
    grid.w = pair.frame1.w / grid.stride;
    Tape<float> tape;
    const auto pred = predict_final_flow(tape, model, pair, grid);
    Flow out;
    out.h = grid.h;
    out.w = grid.w;
    out.data.resize(static_cast<std::size_t>(2) * grid.h * grid.w);
    for (int y = 0; y < grid.h; ++y) {
        for (int x = 0; x < grid.w; ++x) {
            const std::size_t p = static_cast<std::size_t>(y) * grid.w + x;
            out.u(y, x) = pred[p * 2] * static_cast<float>(grid.stride);
            out.v(y, x) = pred[p * 2 + 1] * static_cast<float>(grid.stride);
        }
    }
    return out;
}

FlowMetrics evaluate(const std::string& ckpt_path, const std::string& data_dir,
                     const std::string* report_path) {
    Model model = model_from_checkpoint(ckpt_path);
    set_num_threads(model.cfg.threads);
    const Dataset ds = open_dataset(data_dir);
    const FlowMetrics m = evaluate_model(model, ds);
    if (report_path) {
        std::ofstream f(*report_path);
        if (!f) throw ConfigError("cannot write report file " + *report_path);
        f << "aepe=" << m.aepe << "\n"
          << "f1_all=" << m.f1_all << "\n"
          << "pixels=" << m.pixels << "\n";
    }
    return m;
}

std::vector<AblationRow> run_mask_ablation(const TrainConfig& base,
                                           const std::string& out_dir) {
    fs::create_directories(out_dir);
    std::vector<AblationRow> rows;
    const auto run_one = [&](const std::string& table, const std::string& label,
                             TrainConfig cfg) {
        cfg.log_path = out_dir + "/" + table + "_" + label + ".log";
        std::error_code ec;
        fs::remove(cfg.log_path, ec);
        const auto out = run_pretraining(cfg, out_dir + "/" + table + "_" + label + ".ckpt");
        const std::size_t tail = std::min<std::size_t>(out.losses.size(),
                                                       std::max<std::size_t>(1, out.losses.size() / 4));
        double mean = 0;
        for (std::size_t i = out.losses.size() - tail; i < out.losses.size(); ++i) {
            mean += out.losses[i];
        }
        mean /= static_cast<double>(tail);
        rows.push_back(AblationRow{table, label, mean});
    };

    // masking strategy (block-sharing vs per-pixel random)
    for (const MaskStrategy s : {MaskStrategy::kBlock, MaskStrategy::kRandom}) {
        TrainConfig cfg = base;
        cfg.mask_strategy = s;
        run_one("strategy", strategy_name(s), cfg);
    }
    // masking ratio
    for (const double r : {0.2, 0.5, 0.8}) {
        TrainConfig cfg = base;
        cfg.mask_ratio = r;
        char label[16];
        std::snprintf(label, sizeof(label), "%d%%", static_cast<int>(r * 100 + 0.5));
        run_one("ratio", label, cfg);
    }
    // pre-text query design
    {
        TrainConfig cfg = base;
        cfg.pretext_location = LocationMode::kFixed;
        cfg.pretext_query = QueryMode::kPeOnly;
        run_one("query", "fixed+pe", cfg);
    }
    {
        TrainConfig cfg = base;
        cfg.pretext_location = LocationMode::kRandom;
        cfg.pretext_query = QueryMode::kPeOnly;
        run_one("query", "random+pe", cfg);
    }
    {
        TrainConfig cfg = base;
        cfg.pretext_location = LocationMode::kRandom;
        cfg.pretext_query = QueryMode::kPePlusPatch;
        run_one("query", "random+pe+patch", cfg);
    }
    return rows;
}

std::vector<LeakageRow> leakage_report(const std::string& data_dir, double ratio,
                                       int n_seeds, int max_pairs) {
    Dataset ds = open_dataset(data_dir);
    const GridDims grid = grid_for(ds);
    if (grid.h % 8 != 0 || grid.w % 8 != 0) {
        throw ShapeError("leakage_report: grid must be divisible by 8");
    }
    TrainConfig cfg; // defaults; only encoder dims matter here
    Model model = Model::init(cfg);
    const int n_pairs = std::min(ds.size(), max_pairs);

    std::vector<LeakageRow> rows;
    for (int s = 0; s < n_seeds; ++s) {
        LeakageRow row;
        row.seed = static_cast<std::uint64_t>(s);
        for (int i = 0; i < n_pairs; ++i) {
            const ScenePair pair = ds.load(i);
            Tape<float> tape;
            auto f1 = encode_image(tape, image_tensor(pair.frame1), model.img_enc);
            auto f2 = encode_image(tape, image_tensor(pair.frame2), model.img_enc);
            auto cv = build_cost_volume(tape, f1, f2);

            Rng rng_b(Rng::mix(static_cast<std::uint64_t>(s), 11, static_cast<std::uint64_t>(i)));
            TrainConfig block_cfg = cfg;
            block_cfg.mask_ratio = ratio;
            block_cfg.mask_strategy = MaskStrategy::kBlock;
            const auto masks_b = make_masks(block_cfg, grid, rng_b);
            row.block_mse += leakage_oracle_mse(cv.maps->ptr(), grid.h, grid.w, masks_b);

            Rng rng_r(Rng::mix(static_cast<std::uint64_t>(s), 12, static_cast<std::uint64_t>(i)));
            TrainConfig rand_cfg = block_cfg;
            rand_cfg.mask_strategy = MaskStrategy::kRandom;
            const auto masks_r = make_masks(rand_cfg, grid, rng_r);
            row.random_mse += leakage_oracle_mse(cv.maps->ptr(), grid.h, grid.w, masks_r);
        }
        row.block_mse /= n_pairs;
        row.random_mse /= n_pairs;
        rows.push_back(row);
    }
    return rows;
}

// ---- helpers ------------------------------------------------------------------

TensorPtr<float> image_tensor(const Image& img) {
    return make_tensor<float>({3, img.h, img.w}, img.data);
}

std::vector<float> flow_gt_grid_rows(const Flow& gt, int grid_h, int grid_w, int stride) {
    std::vector<float> rows(static_cast<std::size_t>(grid_h) * grid_w * 2);
    const double off = (stride - 1) / 2.0;
    for (int y = 0; y < grid_h; ++y) {
        for (int x = 0; x < grid_w; ++x) {
            const double py = y * stride + off;
            const double px = x * stride + off;
            const float u = bilinear_sample_zero(gt.data.data(), gt.h, gt.w, py, px);
            const float v = bilinear_sample_zero(gt.data.data() + static_cast<std::size_t>(gt.h) * gt.w,
                                                 gt.h, gt.w, py, px);
            rows[(static_cast<std::size_t>(y) * grid_w + x) * 2] =
                u / static_cast<float>(stride);
            rows[(static_cast<std::size_t>(y) * grid_w + x) * 2 + 1] =
                v / static_cast<float>(stride);
        }
    }
    return rows;
}

} // namespace mcva
