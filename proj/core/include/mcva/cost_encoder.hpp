#pragma once

#include <array>
#include <numeric>
#include <string>
#include <vector>

#include "mcva/attention.hpp"
#include "mcva/conv.hpp"
#include "mcva/costvol.hpp"
#include "mcva/masking.hpp"
#include "mcva/params.hpp"
#include "mcva/sampling.hpp"

namespace mcva {

// K latent tokens of dimension dt per source pixel, flat [H*W*K, dt].
template <class S>
struct CostMemory {
    TensorPtr<S> tokens;
    int h = 0, w = 0, k = 0, dt = 0;
};

// Parameters of the pretrainable cost-volume encoder: three stride-2
// tokenizer convolutions, K learned latent queries with cross-attention
// projections, and the alternate-group transformer stack. The identical
// parameter set serves the masked (pretraining) and vanilla (finetuning)
// paths.
template <class S>
struct CostEncoderParams {
    std::array<TensorPtr<S>, 3> conv_w, conv_b;
    TensorPtr<S> latents; // [K, dt]
    TensorPtr<S> wq, wk, wv, wo;

    struct AgtLayer {
        TensorPtr<S> ln1_g, ln1_b, wq, wk, wv, wo;
        TensorPtr<S> ln2_g, ln2_b, ffn_w1, ffn_b1, ffn_w2, ffn_b2;
    };
    std::vector<AgtLayer> agt; // 2 per pair: even = intra-map, odd = inter-map

    int df = 64, dt = 64, k_latents = 8, pairs = 2, ffn_hidden = 128;

    static CostEncoderParams init(int df, int dt, int k_latents, int pairs, Rng& rng) {
        CostEncoderParams p;
        p.df = df;
        p.dt = dt;
        p.k_latents = k_latents;
        p.pairs = pairs;
        p.ffn_hidden = dt;
        const std::string pre = "cenc.";
        for (int i = 0; i < 3; ++i) {
            const int cin = i == 0 ? 1 : df;
            p.conv_w[static_cast<std::size_t>(i)] =
                param_he<S>(pre + "tok.conv" + std::to_string(i) + ".w", {df, cin, 3, 3},
                            static_cast<std::int64_t>(cin) * 9, rng);
            p.conv_b[static_cast<std::size_t>(i)] =
                param_zeros<S>(pre + "tok.conv" + std::to_string(i) + ".b", {df});
        }
        p.latents = param_xavier<S>(pre + "proj.latents", {k_latents, dt}, dt, dt, rng);
        p.wq = param_xavier<S>(pre + "proj.wq", {dt, dt}, dt, dt, rng);
        p.wk = param_xavier<S>(pre + "proj.wk", {df, dt}, df, dt, rng);
        p.wv = param_xavier<S>(pre + "proj.wv", {df, dt}, df, dt, rng);
        p.wo = param_xavier<S>(pre + "proj.wo", {dt, dt}, dt, dt, rng);
        for (int l = 0; l < 2 * pairs; ++l) {
            const std::string lp = pre + "agt" + std::to_string(l) + ".";
            AgtLayer layer;
            layer.ln1_g = param_full<S>(lp + "ln1.g", {dt}, S(1));
            layer.ln1_b = param_zeros<S>(lp + "ln1.b", {dt});
            layer.wq = param_xavier<S>(lp + "wq", {dt, dt}, dt, dt, rng);
            layer.wk = param_xavier<S>(lp + "wk", {dt, dt}, dt, dt, rng);
            layer.wv = param_xavier<S>(lp + "wv", {dt, dt}, dt, dt, rng);
            layer.wo = param_xavier<S>(lp + "wo", {dt, dt}, dt, dt, rng);
            layer.ln2_g = param_full<S>(lp + "ln2.g", {dt}, S(1));
            layer.ln2_b = param_zeros<S>(lp + "ln2.b", {dt});
            layer.ffn_w1 = param_xavier<S>(lp + "ffn.w1", {dt, p.ffn_hidden}, dt,
                                           p.ffn_hidden, rng);
            layer.ffn_b1 = param_zeros<S>(lp + "ffn.b1", {p.ffn_hidden});
            layer.ffn_w2 = param_xavier<S>(lp + "ffn.w2", {p.ffn_hidden, dt}, p.ffn_hidden,
                                           dt, rng);
            layer.ffn_b2 = param_zeros<S>(lp + "ffn.b2", {dt});
            p.agt.push_back(layer);
        }
        return p;
    }

    void register_params(ParamSet<S>& set) {
        for (int i = 0; i < 3; ++i) {
            set.add(conv_w[static_cast<std::size_t>(i)]);
            set.add(conv_b[static_cast<std::size_t>(i)]);
        }
        set.add(latents);
        set.add(wq);
        set.add(wk);
        set.add(wv);
        set.add(wo);
        for (auto& l : agt) {
            for (const auto& t : {l.ln1_g, l.ln1_b, l.wq, l.wk, l.wv, l.wo, l.ln2_g,
                                  l.ln2_b, l.ffn_w1, l.ffn_b1, l.ffn_w2, l.ffn_b2}) {
                set.add(t);
            }
        }
    }
};

// Masked cost-map tokenization: three rounds of mask -> ReLU -> stride-2
// convolution. With no mask set the same convolutions run densely (the
// finetuning path). maps: [N, hc, wc] cost maps; returns [N, df, h3, w3].
template <class S>
TensorPtr<S> masked_patchify(Tape<S>& tape, TensorPtr<S> maps, const MaskPyramidSet* masks,
                             const CostEncoderParams<S>& params) {
    if (maps->rank() != 3) throw ShapeError("masked_patchify: maps must be [N,hc,wc]");
    const int n = maps->dim(0), hc = maps->dim(1), wc = maps->dim(2);
    if (masks) {
        if (masks->hc != hc || masks->wc != wc ||
            masks->partition.h * masks->partition.w != n) {
            throw ShapeError("masked_patchify: mask extents do not match cost maps");
        }
        if (hc % 8 != 0 || wc % 8 != 0) {
            throw ShapeError("masked_patchify: masked path needs extents divisible by 8");
        }
    }
    auto x = make_tensor<S>({n, 1, hc, wc}, maps->data);
    x = tape.record(x, {maps}, "reshape", [maps, x](Tape<S>& t) {
        if (!t.needs_grad(*maps)) return;
        const S* g = t.grad(x).data();
        S* gm = t.grad(maps).data();
        for (std::int64_t i = 0; i < x->size(); ++i) gm[i] += g[i];
    });
    for (int level = 0; level < 3; ++level) {
        if (masks) {
            const std::int64_t plane =
                static_cast<std::int64_t>(hc >> level) * (wc >> level);
            x = mask_select(tape, x, materialize_level(*masks, level), x->dim(1), plane);
        }
        x = relu(tape, x);
        x = conv2d_batched(tape, x, params.conv_w[static_cast<std::size_t>(level)],
                           params.conv_b[static_cast<std::size_t>(level)], 2);
    }
    return x;
}

// Removes masked F^3 tokens and cross-attends K learned latent queries over
// the remaining ones (plus 2D positional encodings) to produce the
// per-source-pixel cost memory [N*K, dt].
template <class S>
TensorPtr<S> project_latent(Tape<S>& tape, TensorPtr<S> f3, const MaskPyramidSet* masks,
                            const CostEncoderParams<S>& params) {
    if (f3->rank() != 4) throw ShapeError("project_latent: expected [N,df,h3,w3]");
    const int n = f3->dim(0), df = f3->dim(1), h3 = f3->dim(2), w3 = f3->dim(3);
    if (df != params.df) throw ShapeError("project_latent: channel mismatch");
    const int t_tokens = h3 * w3;

    // [N, df, h3*w3] -> token rows [N*T, df]
    auto perm = std::make_shared<std::vector<std::int64_t>>(
        static_cast<std::size_t>(n) * t_tokens * df);
    for (std::int64_t p = 0; p < n; ++p) {
        for (std::int64_t t = 0; t < t_tokens; ++t) {
            for (std::int64_t c = 0; c < df; ++c) {
                (*perm)[(p * t_tokens + t) * df + c] = (p * df + c) * t_tokens + t;
            }
        }
    }
    auto tokens = permute_elements(tape, f3,
                                   std::shared_ptr<const std::vector<std::int64_t>>(perm),
                                   {n * t_tokens, df});
    tokens = add_const_tiled(tape, tokens,
                             std::shared_ptr<const std::vector<S>>(pe_table<S>(h3, w3, df)));

    // visible-token index list per source pixel
    auto vis = std::make_shared<std::vector<std::int64_t>>();
    auto offsets = std::make_shared<std::vector<std::int64_t>>();
    offsets->reserve(static_cast<std::size_t>(n) + 1);
    offsets->push_back(0);
    if (masks) {
        if (masks->hc >> 3 != h3 || masks->wc >> 3 != w3) {
            throw ShapeError("project_latent: base mask does not match token grid");
        }
        const int w_grid = masks->partition.w;
        for (int p = 0; p < n; ++p) {
            const auto& base = masks->pyramid_for(p / w_grid, p % w_grid).levels[3];
            std::int64_t added = 0;
            for (int t = 0; t < t_tokens; ++t) {
                if (base[static_cast<std::size_t>(t)]) {
                    vis->push_back(static_cast<std::int64_t>(p) * t_tokens + t);
                    ++added;
                }
            }
            if (added == 0) {
                throw AllTokensMasked("project_latent: source pixel " + std::to_string(p) +
                                      " has no visible tokens");
            }
            offsets->push_back(static_cast<std::int64_t>(vis->size()));
        }
    } else {
        vis->resize(static_cast<std::size_t>(n) * t_tokens);
        std::iota(vis->begin(), vis->end(), 0);
        for (int p = 1; p <= n; ++p) {
            offsets->push_back(static_cast<std::int64_t>(p) * t_tokens);
        }
    }
    auto visible = gather_rows(tape, tokens,
                               std::shared_ptr<const std::vector<std::int64_t>>(vis), df);

    auto keys = linear(tape, visible, params.wk, TensorPtr<S>{});
    auto values = linear(tape, visible, params.wv, TensorPtr<S>{});
    auto q = matmul(tape, params.latents, params.wq);
    auto att = attention_grouped(tape, q, keys, values,
                                 std::shared_ptr<const std::vector<std::int64_t>>(offsets),
                                 params.k_latents, /*shared_q=*/true);
    return linear(tape, att, params.wo, TensorPtr<S>{});
}

namespace detail {

// Row permutations regrouping [H*W*K] token rows for inter-map attention.
struct AgtPerms {
    std::shared_ptr<std::vector<std::int64_t>> rows, rows_inv, cols, cols_inv;
};

inline AgtPerms agt_perms(int h, int w, int k) {
    AgtPerms p;
    const std::int64_t n = static_cast<std::int64_t>(h) * w * k;
    p.rows = std::make_shared<std::vector<std::int64_t>>(n);
    p.rows_inv = std::make_shared<std::vector<std::int64_t>>(n);
    p.cols = std::make_shared<std::vector<std::int64_t>>(n);
    p.cols_inv = std::make_shared<std::vector<std::int64_t>>(n);
    for (std::int64_t y = 0; y < h; ++y) {
        for (std::int64_t x = 0; x < w; ++x) {
            for (std::int64_t kk = 0; kk < k; ++kk) {
                const std::int64_t flat = (y * w + x) * k + kk;
                const std::int64_t by_row = (y * k + kk) * w + x;
                const std::int64_t by_col = (x * k + kk) * h + y;
                (*p.rows)[by_row] = flat;
                (*p.rows_inv)[flat] = by_row;
                (*p.cols)[by_col] = flat;
                (*p.cols_inv)[flat] = by_col;
            }
        }
    }
    return p;
}

} // namespace detail

// Alternate-group transformer: pairs of (intra-map attention over each source
// pixel's K tokens) and (inter-map attention over source pixels sharing a
// latent index, grouped by rows then by columns on alternating pairs), each
// sublayer pre-normalized with residual connections.
template <class S>
CostMemory<S> agt_encode(Tape<S>& tape, CostMemory<S> memory,
                         const CostEncoderParams<S>& params) {
    const int h = memory.h, w = memory.w, k = memory.k, dt = memory.dt;
    const auto perms = detail::agt_perms(h, w, k);
    auto x = memory.tokens;

    const auto attention_block =
        [&](const typename CostEncoderParams<S>::AgtLayer& layer, TensorPtr<S> input,
            const std::shared_ptr<std::vector<std::int64_t>>& perm,
            const std::shared_ptr<std::vector<std::int64_t>>& inv, std::int64_t groups,
            int group_size) {
        auto y = layer_norm(tape, input, layer.ln1_g, layer.ln1_b);
        if (perm) {
            y = gather_rows(tape, y,
                            std::shared_ptr<const std::vector<std::int64_t>>(perm), dt);
        }
        auto q = linear(tape, y, layer.wq, TensorPtr<S>{});
        auto kk = linear(tape, y, layer.wk, TensorPtr<S>{});
        auto vv = linear(tape, y, layer.wv, TensorPtr<S>{});
        auto att = attention_grouped(tape, q, kk, vv,
                                     std::shared_ptr<const std::vector<std::int64_t>>(
                                         uniform_offsets(groups, group_size)),
                                     group_size, /*shared_q=*/false);
        auto o = linear(tape, att, layer.wo, TensorPtr<S>{});
        if (inv) {
            o = gather_rows(tape, o,
                            std::shared_ptr<const std::vector<std::int64_t>>(inv), dt);
        }
        return add(tape, input, o);
    };

    const auto ffn_block = [&](const typename CostEncoderParams<S>::AgtLayer& layer,
                               TensorPtr<S> input) {
        auto y = layer_norm(tape, input, layer.ln2_g, layer.ln2_b);
        auto f = linear(tape, y, layer.ffn_w1, layer.ffn_b1);
        f = relu(tape, f);
        f = linear(tape, f, layer.ffn_w2, layer.ffn_b2);
        return add(tape, input, f);
    };

    for (int pair = 0; pair < params.pairs; ++pair) {
        const auto& intra = params.agt[static_cast<std::size_t>(2 * pair)];
        x = attention_block(intra, x, nullptr, nullptr,
                            static_cast<std::int64_t>(h) * w, k);
        x = ffn_block(intra, x);

        const auto& inter = params.agt[static_cast<std::size_t>(2 * pair + 1)];
        const bool by_rows = pair % 2 == 0;
        x = attention_block(inter, x, by_rows ? perms.rows : perms.cols,
                            by_rows ? perms.rows_inv : perms.cols_inv,
                            by_rows ? static_cast<std::int64_t>(h) * k
                                    : static_cast<std::int64_t>(w) * k,
                            by_rows ? w : h);
        x = ffn_block(inter, x);
    }
    return CostMemory<S>{x, h, w, k, dt};
}

// Full encoder: tokenize (masked or vanilla), project to latents, aggregate.
template <class S>
CostMemory<S> encode_cost_volume(Tape<S>& tape, const CostVolume<S>& cv,
                                 const MaskPyramidSet* masks,
                                 const CostEncoderParams<S>& params) {
    auto f3 = masked_patchify(tape, cv.maps, masks, params);
    auto tokens = project_latent(tape, f3, masks, params);
    CostMemory<S> mem{tokens, cv.h, cv.w, params.k_latents, params.dt};
    return agt_encode(tape, mem, params);
}

} // namespace mcva
