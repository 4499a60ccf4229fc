#include <doctest.h>

#include <cstring>

#include "mcva/cost_encoder.hpp"
#include "support/oracles.hpp"

using namespace mcva;

namespace {

template <class S>
TensorPtr<S> rand_maps(int n, int hc, int wc, Rng& rng) {
    auto t = make_tensor<S>({n, hc, wc});
    oracle::fill_uniform(t->data, rng);
    return t;
}

MaskPyramidSet masks_for(int grid, double ratio, std::uint64_t seed, bool random_mode = false) {
    Rng rng(seed);
    auto part = random_mode ? partition_singletons(grid, grid)
                            : partition_blocks(grid, grid, grid / 4, grid, rng);
    return generate_block_sharing_masks(std::move(part), grid, grid, ratio, rng);
}

} // namespace

TEST_CASE("masked_patchify: all-ones pyramid equals the vanilla path bitwise") {
    Rng rng(3);
    const int g = 16;
    auto maps = rand_maps<float>(g * g, g, g, rng);
    Rng prng(5);
    auto params = CostEncoderParams<float>::init(32, 64, 8, 2, prng);
    auto masks = masks_for(g, 0.0, 7); // ratio 0 -> every mask is all ones

    Tape<float> t1, t2;
    auto masked = masked_patchify(t1, maps, &masks, params);
    auto vanilla = masked_patchify(t2, maps, nullptr, params);
    REQUIRE(masked->shape == vanilla->shape);
    CHECK(std::memcmp(masked->ptr(), vanilla->ptr(),
                      masked->data.size() * sizeof(float)) == 0);
}

TEST_CASE("masked_patchify: values under masked cells never reach F3 (bitwise)") {
    Rng rng(11);
    const int g = 16;
    auto maps = rand_maps<float>(g * g, g, g, rng);
    Rng prng(13);
    auto params = CostEncoderParams<float>::init(32, 64, 8, 2, prng);
    auto masks = masks_for(g, 0.5, 17);

    auto perturbed = make_tensor<float>(maps->shape, maps->data);
    auto level0 = materialize_level(masks, 0);
    int changed = 0;
    for (std::size_t i = 0; i < perturbed->data.size(); ++i) {
        if (!(*level0)[i]) {
            perturbed->data[i] += static_cast<float>(rng.uniform(-50.0, 50.0));
            ++changed;
        }
    }
    REQUIRE(changed > 0);

    Tape<float> t1, t2;
    auto f3a = masked_patchify(t1, maps, &masks, params);
    auto f3b = masked_patchify(t2, perturbed, &masks, params);
    CHECK(std::memcmp(f3a->ptr(), f3b->ptr(), f3a->data.size() * sizeof(float)) == 0);
}

TEST_CASE("masked_patchify: 32x32 maps give 4x4 token grids") {
    Rng rng(19);
    const int g = 32;
    auto maps = rand_maps<float>(4, g, g, rng); // four source pixels is enough for shapes
    Rng prng(23);
    auto params = CostEncoderParams<float>::init(16, 32, 4, 1, prng);
    Tape<float> tape;
    auto f3 = masked_patchify(tape, maps, nullptr, params);
    CHECK(f3->shape == Shape{4, 16, 4, 4}); // 16 spatial tokens per source pixel
}

TEST_CASE("masked_patchify rejects mismatched masks") {
    Rng rng(29);
    auto maps = rand_maps<float>(64, 8, 8, rng);
    Rng prng(31);
    auto params = CostEncoderParams<float>::init(16, 32, 4, 1, prng);
    auto masks = masks_for(16, 0.5, 37); // built for a 16x16 grid
    Tape<float> tape;
    CHECK_THROWS_AS(masked_patchify(tape, maps, &masks, params), ShapeError);
}

TEST_CASE("project_latent: no mask equals an all-ones base mask") {
    Rng rng(41);
    const int g = 16;
    auto maps = rand_maps<float>(g * g, g, g, rng);
    Rng prng(43);
    auto params = CostEncoderParams<float>::init(32, 64, 8, 2, prng);
    auto ones = masks_for(g, 0.0, 47);

    Tape<float> t1, t2;
    auto f3 = masked_patchify(t1, maps, nullptr, params);
    auto a = project_latent(t1, f3, nullptr, params);
    auto f3b = masked_patchify(t2, maps, &ones, params);
    auto b = project_latent(t2, f3b, &ones, params);
    REQUIRE(a->shape == b->shape);
    CHECK(std::memcmp(a->ptr(), b->ptr(), a->data.size() * sizeof(float)) == 0);
}

TEST_CASE("project_latent matches a brute-force attention oracle") {
    Rng rng(53);
    const int n = 3, df = 8, dt = 12, k_lat = 2, h3 = 2, w3 = 2;
    auto f3 = make_tensor<double>({n, df, h3, w3});
    oracle::fill_uniform(f3->data, rng);
    Rng prng(59);
    auto params = CostEncoderParams<double>::init(df, dt, k_lat, 1, prng);

    Tape<double> tape;
    auto out = project_latent(tape, f3, nullptr, params);
    REQUIRE(out->shape == Shape{n * k_lat, dt});

    // oracle: tokens + PE, dense K/V projection, shared-queries attention
    const auto pe = *pe_table<double>(h3, w3, df);
    const int t_tokens = h3 * w3;
    const auto q = oracle::matmul(params.latents->data, k_lat, dt, params.wq->data, dt);
    for (int p = 0; p < n; ++p) {
        std::vector<double> tok(static_cast<std::size_t>(t_tokens) * df);
        for (int t = 0; t < t_tokens; ++t) {
            for (int c = 0; c < df; ++c) {
                tok[static_cast<std::size_t>(t) * df + c] =
                    f3->data[(static_cast<std::size_t>(p) * df + c) * t_tokens + t] +
                    pe[static_cast<std::size_t>(t) * df + c];
            }
        }
        const auto keys = oracle::matmul(tok, t_tokens, df, params.wk->data, dt);
        const auto vals = oracle::matmul(tok, t_tokens, df, params.wv->data, dt);
        const auto att = oracle::attention(q, k_lat, dt, keys, t_tokens, vals, dt);
        const auto proj = oracle::matmul(att, k_lat, dt, params.wo->data, dt);
        for (int i = 0; i < k_lat * dt; ++i) {
            REQUIRE(out->data[static_cast<std::size_t>(p) * k_lat * dt + i] ==
                    doctest::Approx(proj[static_cast<std::size_t>(i)]).epsilon(1e-12));
        }
    }
}

TEST_CASE("project_latent: single visible token feeds every latent") {
    // one block covering the whole grid whose base mask keeps exactly one cell
    const int g = 16; // base 2x2
    Rng rng(61);
    auto part = partition_blocks(g, g, g, g, rng);
    auto set = generate_block_sharing_masks(std::move(part), g, g, 0.75, rng);
    int visible = 0;
    for (auto v : set.per_block[0].levels[3]) visible += v;
    REQUIRE(visible == 1);

    auto maps = rand_maps<float>(g * g, g, g, rng);
    Rng prng(67);
    auto params = CostEncoderParams<float>::init(32, 64, 8, 1, prng);
    Tape<float> tape;
    auto f3 = masked_patchify(tape, maps, &set, params);
    auto out = project_latent(tape, f3, &set, params);
    CHECK(out->shape == Shape{g * g * 8, 64});
    for (float v : out->data) REQUIRE(std::isfinite(v));
}

TEST_CASE("project_latent raises AllTokensMasked when a pixel has no visible tokens") {
    const int g = 16;
    Rng rng(71);
    auto part = partition_blocks(g, g, g, g, rng);
    auto set = generate_block_sharing_masks(std::move(part), g, g, 0.5, rng);
    // force the single block's base mask to all zeros
    for (auto& lvl : set.per_block[0].levels) std::fill(lvl.begin(), lvl.end(), 0);

    auto maps = rand_maps<float>(g * g, g, g, rng);
    Rng prng(73);
    auto params = CostEncoderParams<float>::init(32, 64, 8, 1, prng);
    Tape<float> tape;
    auto f3 = masked_patchify(tape, maps, &set, params);
    CHECK_THROWS_AS(project_latent(tape, f3, &set, params), AllTokensMasked);
}

TEST_CASE("agt_encode preserves shape and is deterministic") {
    Rng rng(79);
    const int h = 4, w = 4, k = 4, dt = 32;
    auto tokens = make_tensor<float>({h * w * k, dt});
    oracle::fill_uniform(tokens->data, rng);
    Rng prng(83);
    auto params = CostEncoderParams<float>::init(16, dt, k, 2, prng);

    Tape<float> t1, t2;
    auto a = agt_encode(t1, CostMemory<float>{tokens, h, w, k, dt}, params);
    auto b = agt_encode(t2, CostMemory<float>{tokens, h, w, k, dt}, params);
    CHECK(a.tokens->shape == Shape{h * w * k, dt});
    CHECK(a.tokens->data == b.tokens->data);
}

TEST_CASE("agt_encode routes gradients into every layer parameter") {
    Rng rng(89);
    const int h = 2, w = 2, k = 2, dt = 8;
    auto tokens = make_tensor<double>({h * w * k, dt});
    oracle::fill_uniform(tokens->data, rng);
    tokens->requires_grad = true;
    Rng prng(97);
    auto params = CostEncoderParams<double>::init(8, dt, k, 1, prng);
    ParamSet<double> set;
    params.register_params(set);

    Tape<double> tape;
    auto out = agt_encode(tape, CostMemory<double>{tokens, h, w, k, dt}, params);
    auto tgt = std::make_shared<std::vector<double>>(out.tokens->data.size());
    oracle::fill_uniform(*tgt, rng);
    auto loss = mse_against(tape, out.tokens, std::shared_ptr<const std::vector<double>>(tgt));
    tape.backward(loss);

    for (const auto& p : set.items) {
        if (p->name.rfind("cenc.agt", 0) != 0) continue;
        const auto* g = tape.find_grad(p.get());
        REQUIRE_MESSAGE(g != nullptr, p->name);
        double mag = 0;
        for (double v : *g) mag += std::abs(v);
        CHECK_MESSAGE(mag > 0, p->name);
    }
}

TEST_CASE("information blocking holds end to end through the encoder") {
    Rng rng(101);
    const int g = 16;
    Rng prng(103);
    auto params = CostEncoderParams<float>::init(32, 64, 8, 2, prng);
    auto masks = masks_for(g, 0.5, 107);
    auto maps = rand_maps<float>(g * g, g, g, rng);

    auto perturbed = make_tensor<float>(maps->shape, maps->data);
    auto level0 = materialize_level(masks, 0);
    for (std::size_t i = 0; i < perturbed->data.size(); ++i) {
        if (!(*level0)[i]) perturbed->data[i] = static_cast<float>(rng.uniform(-80.0, 80.0));
    }

    const auto encode = [&](TensorPtr<float> m) {
        Tape<float> tape;
        auto f3 = masked_patchify(tape, m, &masks, params);
        auto proj = project_latent(tape, f3, &masks, params);
        auto mem = agt_encode(tape, CostMemory<float>{proj, g, g, 8, 64}, params);
        return mem.tokens->data;
    };
    const auto a = encode(maps);
    const auto b = encode(perturbed);
    CHECK(std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0);
}

TEST_CASE("identical parameter set serves the masked and vanilla paths") {
    Rng prng(109);
    auto params = CostEncoderParams<float>::init(32, 64, 8, 2, prng);
    ParamSet<float> set;
    params.register_params(set);
    const auto names_before = set.items;

    Rng rng(113);
    const int g = 16;
    auto maps = rand_maps<float>(g * g, g, g, rng);
    auto masks = masks_for(g, 0.5, 127);
    Tape<float> t1, t2;
    auto masked = project_latent(t1, masked_patchify(t1, maps, &masks, params), &masks, params);
    auto vanilla = project_latent(t2, masked_patchify(t2, maps, nullptr, params), nullptr, params);
    CHECK(masked->shape == vanilla->shape);
    // same tensors, same names/shapes; nothing was re-created per path
    REQUIRE(set.items.size() == names_before.size());
    for (std::size_t i = 0; i < set.items.size(); ++i) {
        CHECK(set.items[i].get() == names_before[i].get());
    }
}

TEST_CASE("encoder outputs stay finite for costs up to |100|") {
    Rng rng(131);
    const int g = 16;
    auto maps = make_tensor<float>({g * g, g, g});
    for (auto& v : maps->data) v = static_cast<float>(rng.uniform(-100.0, 100.0));
    Rng prng(137);
    auto params = CostEncoderParams<float>::init(32, 64, 8, 2, prng);
    auto masks = masks_for(g, 0.5, 139);
    Tape<float> tape;
    auto f3 = masked_patchify(tape, maps, &masks, params);
    auto proj = project_latent(tape, f3, &masks, params);
    auto mem = agt_encode(tape, CostMemory<float>{proj, g, g, 8, 64}, params);
    for (float v : mem.tokens->data) REQUIRE(std::isfinite(v));
}
