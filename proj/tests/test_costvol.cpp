#include <doctest.h>

#include "mcva/costvol.hpp"
#include "support/oracles.hpp"

using namespace mcva;

namespace {

template <class S>
FeatureMap<S> feature_map(Shape shape, Rng& rng, bool grad = false) {
    auto t = make_tensor<S>(std::move(shape));
    oracle::fill_uniform(t->data, rng);
    t->requires_grad = grad;
    return FeatureMap<S>{t, 4};
}

} // namespace

TEST_CASE("build_cost_volume: constant feature fields give |v|^2 / sqrt(D)") {
    const int d = 4, g = 3;
    auto f = make_tensor<double>({d, g, g});
    for (int c = 0; c < d; ++c) {
        for (int i = 0; i < g * g; ++i) f->data[static_cast<std::size_t>(c) * g * g + i] = 0.5 * (c + 1);
    }
    FeatureMap<double> fm{f, 4};
    Tape<double> tape;
    auto cv = build_cost_volume(tape, fm, fm);
    double sq = 0;
    for (int c = 0; c < d; ++c) sq += 0.25 * (c + 1) * (c + 1);
    for (double v : cv.values->data) CHECK(v == doctest::Approx(sq / std::sqrt(4.0)));
}

TEST_CASE("build_cost_volume: D = 1 entries are products of the scalars") {
    auto f1 = make_tensor<double>({1, 1, 2}, std::vector<double>{2.0, 3.0});
    auto f2 = make_tensor<double>({1, 1, 2}, std::vector<double>{-1.0, 5.0});
    Tape<double> tape;
    auto cv = build_cost_volume(tape, FeatureMap<double>{f1, 4}, FeatureMap<double>{f2, 4});
    // scale = sqrt(1) = 1
    CHECK(cv.values->data[0] == doctest::Approx(-2.0));
    CHECK(cv.values->data[1] == doctest::Approx(10.0));
    CHECK(cv.values->data[2] == doctest::Approx(-3.0));
    CHECK(cv.values->data[3] == doctest::Approx(15.0));
}

TEST_CASE("build_cost_volume matches the nested-loop oracle") {
    Rng rng(7);
    for (int trial = 0; trial < 25; ++trial) {
        const int d = 1 + static_cast<int>(rng.uniform_int(0, 5));
        const int g = 2 + static_cast<int>(rng.uniform_int(0, 2));
        Tape<double> tape;
        auto f1 = feature_map<double>({d, g, g}, rng);
        auto f2 = feature_map<double>({d, g, g}, rng);
        auto cv = build_cost_volume(tape, f1, f2);
        const auto ref = oracle::cost_volume(f1.values->data, f2.values->data, d, g, g);
        REQUIRE(cv.values->data.size() == ref.size());
        for (std::size_t i = 0; i < ref.size(); ++i) {
            CHECK(oracle::ulp_distance(cv.values->data[i], ref[i]) <= 4);
        }
    }
}

TEST_CASE("build_cost_volume rejects mismatched feature maps") {
    Rng rng(9);
    Tape<float> tape;
    auto f1 = feature_map<float>({4, 3, 3}, rng);
    auto f2 = feature_map<float>({5, 3, 3}, rng);
    CHECK_THROWS_AS(build_cost_volume(tape, f1, f2), ShapeError);
}

TEST_CASE("cost volume is bilinear: scaling f1 scales every entry") {
    Rng rng(11);
    Tape<double> tape;
    auto f1 = feature_map<double>({3, 2, 2}, rng);
    auto f2 = feature_map<double>({3, 2, 2}, rng);
    auto cv1 = build_cost_volume(tape, f1, f2);
    auto scaled = make_tensor<double>(f1.values->shape, f1.values->data);
    for (auto& v : scaled->data) v *= 2.5;
    auto cv2 = build_cost_volume(tape, FeatureMap<double>{scaled, 4}, f2);
    for (std::size_t i = 0; i < cv1.values->data.size(); ++i) {
        CHECK(cv2.values->data[i] == doctest::Approx(2.5 * cv1.values->data[i]));
    }
}

TEST_CASE("cost volume symmetry: swap arguments, transpose indices") {
    Rng rng(13);
    Tape<double> tape;
    const int g = 3, d = 4;
    auto f1 = feature_map<double>({d, g, g}, rng);
    auto f2 = feature_map<double>({d, g, g}, rng);
    auto a = build_cost_volume(tape, f1, f2);
    auto b = build_cost_volume(tape, f2, f1);
    const int cells = g * g;
    for (int x = 0; x < cells; ++x) {
        for (int y = 0; y < cells; ++y) {
            CHECK(a.values->data[static_cast<std::size_t>(x) * cells + y] ==
                  doctest::Approx(b.values->data[static_cast<std::size_t>(y) * cells + x]));
        }
    }
}

TEST_CASE("crop_patch: integer interior center extracts the subarray") {
    Rng rng(17);
    Tape<double> tape;
    auto f1 = feature_map<double>({2, 5, 5}, rng);
    auto f2 = feature_map<double>({2, 5, 5}, rng);
    auto cv = build_cost_volume(tape, f1, f2);
    const int src_y = 2, src_x = 3;
    auto patch = crop_patch(tape, cv, src_y, src_x, {2.0, 2.0}, 3);
    CHECK(patch.values->shape == Shape{3, 3});
    const int cells = 25;
    const double* map = cv.values->ptr() + (src_y * 5 + src_x) * cells;
    for (int oy = -1; oy <= 1; ++oy) {
        for (int ox = -1; ox <= 1; ++ox) {
            CHECK(patch.values->data[static_cast<std::size_t>((oy + 1) * 3 + ox + 1)] ==
                  map[(2 + oy) * 5 + 2 + ox]);
        }
    }
}

TEST_CASE("crop_patch: zero padding at the grid corner and even-size rejection") {
    Rng rng(19);
    Tape<double> tape;
    auto f1 = feature_map<double>({2, 5, 5}, rng);
    auto f2 = feature_map<double>({2, 5, 5}, rng);
    auto cv = build_cost_volume(tape, f1, f2);
    auto patch = crop_patch(tape, cv, 0, 0, {0.0, 0.0}, 9);
    for (int oy = -4; oy <= 4; ++oy) {
        for (int ox = -4; ox <= 4; ++ox) {
            if (oy < 0 || ox < 0) {
                CHECK(patch.values->data[static_cast<std::size_t>((oy + 4) * 9 + ox + 4)] == 0.0);
            }
        }
    }
    CHECK_THROWS_AS(crop_patch(tape, cv, 0, 0, {0.0, 0.0}, 4), ConfigError);
    CHECK_THROWS_AS(crop_patch(tape, cv, 7, 0, {0.0, 0.0}, 3), ShapeError);
}

TEST_CASE("crop_patch gradient with respect to the volume passes finite differences") {
    Rng rng(23);
    auto mk = [&] {
        auto t = make_tensor<double>({2, 3, 3});
        oracle::fill_uniform(t->data, rng);
        t->requires_grad = true;
        return FeatureMap<double>{t, 4};
    };
    auto f1 = mk();
    auto f2 = mk();
    auto tgt = std::make_shared<std::vector<double>>(9);
    oracle::fill_uniform(*tgt, rng);

    const auto build = [&](Tape<double>& t) {
        auto cv = build_cost_volume(t, f1, f2);
        auto patch = crop_patch(t, cv, 1, 1, {1.3, 0.6}, 3);
        return mse_against(t, patch.values,
                           std::shared_ptr<const std::vector<double>>(tgt));
    };
    Tape<double> tape;
    auto loss = build(tape);
    tape.backward(loss);
    for (const auto& fm : {f1, f2}) {
        const auto* g = tape.find_grad(fm.values.get());
        REQUIRE(g != nullptr);
        const auto fd = oracle::fd_gradient(fm.values, [&] {
            Tape<double> t2;
            return build(t2)->data[0];
        });
        CHECK(oracle::max_grad_rel_err(*g, fd) < 1e-4);
    }
}
