#pragma once

#include <array>
#include <memory>
#include <vector>

#include "mcva/attention.hpp"
#include "mcva/cost_encoder.hpp"
#include "mcva/costvol.hpp"
#include "mcva/params.hpp"
#include "mcva/sampling.hpp"

namespace mcva {

enum class QueryMode { kPeOnly, kPePlusPatch };
enum class LocationMode { kFixed, kRandom, kFlowPredicted };

// Cross-attention decode path (shared between pretraining and finetuning):
// Q = FFN(FFN(patch) + PE(location)), K/V = FFN(memory tokens).
template <class S>
struct DecoderParams {
    TensorPtr<S> patch_w1, patch_b1, patch_w2, patch_b2; // 81 -> dt -> dt
    TensorPtr<S> q_w1, q_b1, q_w2, q_b2;                 // dt -> dt -> dt
    TensorPtr<S> k_w1, k_b1, k_w2, k_b2;
    TensorPtr<S> v_w1, v_b1, v_w2, v_b2;
    int dt = 64;
    static constexpr int kQueryPatch = 9;

    static DecoderParams init(int dt, Rng& rng) {
        DecoderParams p;
        p.dt = dt;
        const int ps = kQueryPatch * kQueryPatch;
        p.patch_w1 = param_xavier<S>("dec.q.patch.w1", {ps, dt}, ps, dt, rng);
        p.patch_b1 = param_zeros<S>("dec.q.patch.b1", {dt});
        p.patch_w2 = param_xavier<S>("dec.q.patch.w2", {dt, dt}, dt, dt, rng);
        p.patch_b2 = param_zeros<S>("dec.q.patch.b2", {dt});
        auto ffn = [&](const char* stem, TensorPtr<S>& w1, TensorPtr<S>& b1,
                       TensorPtr<S>& w2, TensorPtr<S>& b2) {
            w1 = param_xavier<S>(std::string(stem) + ".w1", {dt, dt}, dt, dt, rng);
            b1 = param_zeros<S>(std::string(stem) + ".b1", {dt});
            w2 = param_xavier<S>(std::string(stem) + ".w2", {dt, dt}, dt, dt, rng);
            b2 = param_zeros<S>(std::string(stem) + ".b2", {dt});
        };
        ffn("dec.q.out", p.q_w1, p.q_b1, p.q_w2, p.q_b2);
        ffn("dec.kv.k", p.k_w1, p.k_b1, p.k_w2, p.k_b2);
        ffn("dec.kv.v", p.v_w1, p.v_b1, p.v_w2, p.v_b2);
        return p;
    }

    void register_params(ParamSet<S>& set) {
        for (const auto& t :
             {patch_w1, patch_b1, patch_w2, patch_b2, q_w1, q_b1, q_w2, q_b2, k_w1, k_b1,
              k_w2, k_b2, v_w1, v_b1, v_w2, v_b2}) {
            set.add(t);
        }
    }
};

template <class S>
struct PretextHead {
    TensorPtr<S> w1, b1, w2, b2; // dt -> 256 -> 225
    static constexpr int kHidden = 256;
    static constexpr int kTargetPatch = 15;

    static PretextHead init(int dt, Rng& rng) {
        PretextHead h;
        const int out = kTargetPatch * kTargetPatch;
        h.w1 = param_xavier<S>("pretext.head.w1", {dt, kHidden}, dt, kHidden, rng);
        h.b1 = param_zeros<S>("pretext.head.b1", {kHidden});
        h.w2 = param_xavier<S>("pretext.head.w2", {kHidden, out}, kHidden, out, rng);
        h.b2 = param_zeros<S>("pretext.head.b2", {out});
        return h;
    }
    void register_params(ParamSet<S>& set) {
        for (const auto& t : {w1, b1, w2, b2}) set.add(t);
    }
};

// Gated recurrent flow update cell plus the delta-flow head (zero-initialized
// so the first update leaves the flow unchanged).
template <class S>
struct FlowUpdateParams {
    TensorPtr<S> fe_w, fe_b;                         // 2 -> fe_dim
    TensorPtr<S> gz_w, gz_b, gr_w, gr_b, gh_w, gh_b; // [dh+din] -> dh
    TensorPtr<S> fh_w1, fh_b1, fh_w2, fh_b2;         // dh -> 128 -> 2
    int hidden = 64, fe_dim = 16, ctx_dim = 32, dt = 64;

    static FlowUpdateParams init(int dt, int ctx_dim, Rng& rng) {
        FlowUpdateParams p;
        p.dt = dt;
        p.ctx_dim = ctx_dim;
        const int din = dt + ctx_dim + p.fe_dim;
        const int dh = p.hidden;
        p.fe_w = param_xavier<S>("dec.flow.fe.w", {2, p.fe_dim}, 2, p.fe_dim, rng);
        p.fe_b = param_zeros<S>("dec.flow.fe.b", {p.fe_dim});
        auto gate = [&](const char* stem, TensorPtr<S>& w, TensorPtr<S>& b) {
            w = param_xavier<S>(std::string(stem) + ".w", {dh + din, dh}, dh + din, dh, rng);
            b = param_zeros<S>(std::string(stem) + ".b", {dh});
        };
        gate("dec.flow.gz", p.gz_w, p.gz_b);
        gate("dec.flow.gr", p.gr_w, p.gr_b);
        gate("dec.flow.gh", p.gh_w, p.gh_b);
        p.fh_w1 = param_xavier<S>("dec.flow.head.w1", {dh, 128}, dh, 128, rng);
        p.fh_b1 = param_zeros<S>("dec.flow.head.b1", {128});
        p.fh_w2 = param_zeros<S>("dec.flow.head.w2", {128, 2});
        p.fh_b2 = param_zeros<S>("dec.flow.head.b2", {2});
        return p;
    }

    void register_params(ParamSet<S>& set) {
        for (const auto& t : {fe_w, fe_b, gz_w, gz_b, gr_w, gr_b, gh_w, gh_b, fh_w1, fh_b1,
                              fh_w2, fh_b2}) {
            set.add(t);
        }
    }
};

namespace detail {

template <class S>
TensorPtr<S> ffn2(Tape<S>& tape, TensorPtr<S> x, TensorPtr<S> w1, TensorPtr<S> b1,
                  TensorPtr<S> w2, TensorPtr<S> b2) {
    return linear(tape, relu(tape, linear(tape, x, w1, b1)), w2, b2);
}

template <class S>
TensorPtr<S> pe_rows(const std::vector<std::array<double, 2>>& locations, int dim) {
    auto t = make_tensor<S>({static_cast<int>(locations.size()), dim});
    for (std::size_t i = 0; i < locations.size(); ++i) {
        sinusoidal_pe_2d<S>(locations[i][0], locations[i][1], dim,
                            t->ptr() + i * static_cast<std::size_t>(dim));
    }
    return t;
}

} // namespace detail

// Key/value projections of the cost memory; computed once and reused across
// recurrent iterations.
template <class S>
struct DecodeKV {
    TensorPtr<S> keys, values;
};

template <class S>
DecodeKV<S> decode_memory_kv(Tape<S>& tape, const CostMemory<S>& memory,
                             const DecoderParams<S>& params) {
    return DecodeKV<S>{detail::ffn2(tape, memory.tokens, params.k_w1, params.k_b1,
                                    params.k_w2, params.k_b2),
                       detail::ffn2(tape, memory.tokens, params.v_w1, params.v_b1,
                                    params.v_w2, params.v_b2)};
}

template <class S>
TensorPtr<S> decode_with_kv(Tape<S>& tape, const DecodeKV<S>& kv, int h, int w, int k,
                            TensorPtr<S> patches,
                            const std::vector<std::array<double, 2>>& locations,
                            QueryMode mode, const DecoderParams<S>& params) {
    const std::int64_t n = static_cast<std::int64_t>(h) * w;
    if (static_cast<std::int64_t>(locations.size()) != n) {
        throw ShapeError("decode_cost_feature: one location per source pixel required");
    }
    if (mode == QueryMode::kPePlusPatch && !patches) {
        throw ConfigError("decode_cost_feature: query mode pe_plus_patch requires a patch");
    }
    auto pe = detail::pe_rows<S>(locations, params.dt);
    TensorPtr<S> q0;
    if (mode == QueryMode::kPePlusPatch) {
        auto emb = detail::ffn2(tape, patches, params.patch_w1, params.patch_b1,
                                params.patch_w2, params.patch_b2);
        q0 = add(tape, emb, tape.record(pe, {}, "pe_const", nullptr));
    } else {
        q0 = tape.record(pe, {}, "pe_const", nullptr);
    }
    auto q = detail::ffn2(tape, q0, params.q_w1, params.q_b1, params.q_w2, params.q_b2);
    return attention_grouped(tape, q, kv.keys, kv.values, uniform_offsets(n, k),
                             /*tq=*/1, /*shared_q=*/false);
}

// Retrieves one aggregated cost feature per source pixel from its K memory
// tokens. patches: [N, 81] query patches (null in PE-only mode); locations:
// one continuous (row, col) per pixel.
template <class S>
TensorPtr<S> decode_cost_feature(Tape<S>& tape, const CostMemory<S>& memory,
                                 TensorPtr<S> patches,
                                 const std::vector<std::array<double, 2>>& locations,
                                 QueryMode mode, const DecoderParams<S>& params) {
    const auto kv = decode_memory_kv(tape, memory, params);
    return decode_with_kv(tape, kv, memory.h, memory.w, memory.k, patches, locations,
                          mode, params);
}

// Uniform pre-text location over the cost-map domain (or the grid center in
// fixed mode).
inline std::array<double, 2> sample_pretext_location(Rng& rng, int hc, int wc,
                                                     LocationMode mode) {
    if (mode == LocationMode::kFixed) {
        return {(hc - 1) / 2.0, (wc - 1) / 2.0};
    }
    return {rng.uniform(0.0, static_cast<double>(hc - 1)),
            rng.uniform(0.0, static_cast<double>(wc - 1))};
}

// Light-weight reconstruction head: [N, dt] -> [N, 225].
template <class S>
TensorPtr<S> pretext_predict(Tape<S>& tape, TensorPtr<S> c, const PretextHead<S>& head) {
    return detail::ffn2(tape, c, head.w1, head.b1, head.w2, head.b2);
}

// Raw 15x15 target patch and its standardized form.
template <class S>
struct PretextTarget {
    std::vector<S> raw, standardized;
    S mean = 0, std_dev = 0;
    static constexpr S kEps = S(1e-6);
};

template <class S>
PretextTarget<S> make_pretext_target(std::vector<S> raw) {
    PretextTarget<S> t;
    const std::int64_t n = static_cast<std::int64_t>(raw.size());
    S mu = 0;
    for (const S v : raw) mu += v;
    mu /= static_cast<S>(n);
    S var = 0;
    for (const S v : raw) var += (v - mu) * (v - mu);
    var /= static_cast<S>(n);
    t.mean = mu;
    t.std_dev = std::sqrt(var);
    t.standardized.resize(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
        t.standardized[i] = (raw[i] - mu) / (t.std_dev + PretextTarget<S>::kEps);
    }
    t.raw = std::move(raw);
    return t;
}

enum class NormalizeSide { kTarget, kPrediction };

// Mean squared reconstruction error over all source pixels. Target-side
// standardization by default; the prediction-side variant standardizes the
// head output and compares against raw targets.
template <class S>
TensorPtr<S> pretext_loss(Tape<S>& tape, TensorPtr<S> pred,
                          const std::vector<PretextTarget<S>>& targets,
                          NormalizeSide side) {
    const std::int64_t n = pred->dim(0);
    if (n == 0 || targets.empty()) throw ConfigError("pretext_loss: empty pixel set");
    if (static_cast<std::int64_t>(targets.size()) != n) {
        throw ShapeError("pretext_loss: one target per prediction row required");
    }
    const int patch = pred->shape.back();
    auto flat = std::make_shared<std::vector<S>>();
    flat->reserve(static_cast<std::size_t>(n) * patch);
    for (const auto& t : targets) {
        const auto& src = side == NormalizeSide::kTarget ? t.standardized : t.raw;
        if (static_cast<int>(src.size()) != patch) {
            throw ShapeError("pretext_loss: target patch size mismatch");
        }
        flat->insert(flat->end(), src.begin(), src.end());
    }
    if (side == NormalizeSide::kPrediction) {
        pred = standardize_rows(tape, pred, PretextTarget<S>::kEps);
    }
    return mse_against(tape, pred, std::shared_ptr<const std::vector<S>>(flat));
}

// One gated recurrent update: consumes [cost feature, context, flow encoding]
// and emits the next hidden state and a flow delta.
template <class S>
std::pair<TensorPtr<S>, TensorPtr<S>> flow_update_step(Tape<S>& tape, TensorPtr<S> hidden,
                                                       TensorPtr<S> cost_feature,
                                                       TensorPtr<S> ctx, TensorPtr<S> flow,
                                                       const FlowUpdateParams<S>& params) {
    auto fe = relu(tape, linear(tape, flow, params.fe_w, params.fe_b));
    auto inp = concat_cols<S>(tape, {cost_feature, ctx, fe});
    auto hx = concat_cols<S>(tape, {hidden, inp});
    auto z = sigmoid(tape, linear(tape, hx, params.gz_w, params.gz_b));
    auto r = sigmoid(tape, linear(tape, hx, params.gr_w, params.gr_b));
    auto rhx = concat_cols<S>(tape, {mul(tape, r, hidden), inp});
    auto cand = tanh_op(tape, linear(tape, rhx, params.gh_w, params.gh_b));
    auto ones = make_tensor<S>(z->shape);
    for (auto& v : ones->data) v = S(1);
    auto keep = sub(tape, tape.record(ones, {}, "const_ones", nullptr), z);
    auto next_hidden = add(tape, mul(tape, keep, hidden), mul(tape, z, cand));
    auto dflow = detail::ffn2(tape, next_hidden, params.fh_w1, params.fh_b1, params.fh_w2,
                              params.fh_b2);
    return {next_hidden, dflow};
}

// Recurrent decoding: flow starts at zero; each iteration crops the 9x9
// query patch at p = x + f(x) from the raw cost map, decodes the cost
// feature at that location, and applies one update. Returns every
// intermediate flow ([N, 2] tensors, grid units).
template <class S>
std::vector<TensorPtr<S>> run_recurrent_decoder(Tape<S>& tape, const CostMemory<S>& memory,
                                                const CostVolume<S>& cv, TensorPtr<S> ctx_rows,
                                                int n_iters, const DecoderParams<S>& dec,
                                                const FlowUpdateParams<S>& upd) {
    if (n_iters < 1) throw ConfigError("run_recurrent_decoder: n_iters must be >= 1");
    const int h = memory.h, w = memory.w;
    const std::int64_t n = static_cast<std::int64_t>(h) * w;
    if (ctx_rows->dim(0) != n) throw ShapeError("run_recurrent_decoder: context rows mismatch");

    auto flow = make_tensor<S>({static_cast<int>(n), 2});
    auto hidden = make_tensor<S>({static_cast<int>(n), upd.hidden});
    TensorPtr<S> flow_t = tape.record(flow, {}, "const_zero_flow", nullptr);
    TensorPtr<S> hidden_t = tape.record(hidden, {}, "const_zero_hidden", nullptr);
    const auto kv = decode_memory_kv(tape, memory, dec);

    std::vector<TensorPtr<S>> flows;
    flows.reserve(static_cast<std::size_t>(n_iters));
    for (int it = 0; it < n_iters; ++it) {
        // p = x + f(x); lookups use current flow values (no gradient through
        // the sampling location)
        auto centers = std::make_shared<std::vector<std::array<double, 2>>>(
            static_cast<std::size_t>(n));
        const S* fp = flow_t->ptr();
        for (std::int64_t p = 0; p < n; ++p) {
            const double u = static_cast<double>(fp[p * 2]);
            const double v = static_cast<double>(fp[p * 2 + 1]);
            (*centers)[static_cast<std::size_t>(p)] = {static_cast<double>(p / w) + v,
                                                       static_cast<double>(p % w) + u};
        }
        auto patches = crop_patches(tape, cv.maps,
                                    std::shared_ptr<const std::vector<std::array<double, 2>>>(centers),
                                    DecoderParams<S>::kQueryPatch);
        auto c = decode_with_kv(tape, kv, memory.h, memory.w, memory.k, patches, *centers,
                                QueryMode::kPePlusPatch, dec);
        auto [next_hidden, dflow] = flow_update_step(tape, hidden_t, c, ctx_rows, flow_t, upd);
        hidden_t = next_hidden;
        flow_t = add(tape, flow_t, dflow);
        flows.push_back(flow_t);
    }
    return flows;
}

} // namespace mcva
