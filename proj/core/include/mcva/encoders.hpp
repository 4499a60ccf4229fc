#pragma once

#include <string>

#include "mcva/conv.hpp"
#include "mcva/params.hpp"

namespace mcva {

// Dense per-image feature grid. stride_to_image = image pixels per cell.
template <class S>
struct FeatureMap {
    TensorPtr<S> values; // [D, H, W]
    int stride_to_image = 1;

    int channels() const { return values->dim(0); }
    int height() const { return values->dim(1); }
    int width() const { return values->dim(2); }
};

// Small convolutional encoder: 3x3 convs at strides 2, 2, 1 (stride_to_image
// 4), ReLU between layers. Weights come from a seeded init and stay frozen
// while `frozen` is set.
template <class S>
struct EncoderWeights {
    TensorPtr<S> w1, b1, w2, b2, w3, b3;
    bool frozen = true;
    std::uint64_t init_seed = 0;
    int out_channels = 32;

    static constexpr int kStrideToImage = 4;

    static EncoderWeights init(const std::string& prefix, int out_channels,
                               std::uint64_t seed) {
        EncoderWeights e;
        e.init_seed = seed;
        e.out_channels = out_channels;
        Rng rng(seed);
        const int c1 = out_channels / 2 > 0 ? out_channels / 2 : 1;
        const int c2 = out_channels;
        e.w1 = param_he<S>(prefix + ".w1", {c1, 3, 3, 3}, 3 * 9, rng);
        e.b1 = param_zeros<S>(prefix + ".b1", {c1});
        e.w2 = param_he<S>(prefix + ".w2", {c2, c1, 3, 3}, static_cast<std::int64_t>(c1) * 9, rng);
        e.b2 = param_zeros<S>(prefix + ".b2", {c2});
        e.w3 = param_he<S>(prefix + ".w3", {out_channels, c2, 3, 3},
                           static_cast<std::int64_t>(c2) * 9, rng);
        e.b3 = param_zeros<S>(prefix + ".b3", {out_channels});
        e.set_trainable(false);
        return e;
    }

    void register_params(ParamSet<S>& set) {
        for (const auto& t : {w1, b1, w2, b2, w3, b3}) set.add(t);
    }

    void set_trainable(bool trainable) {
        frozen = !trainable;
        for (const auto& t : {w1, b1, w2, b2, w3, b3}) t->requires_grad = trainable;
    }

    std::vector<TensorPtr<S>> tensors() const { return {w1, b1, w2, b2, w3, b3}; }
};

namespace detail {

template <class S>
FeatureMap<S> encode_with(Tape<S>& tape, TensorPtr<S> img, const EncoderWeights<S>& w,
                          const char* what) {
    if (img->rank() != 3 || img->dim(0) != 3) {
        throw ShapeError(std::string(what) + ": image must be [3,H,W]");
    }
    const int s = EncoderWeights<S>::kStrideToImage;
    if (img->dim(1) % s != 0 || img->dim(2) % s != 0) {
        throw ShapeError(std::string(what) + ": image size " +
                         std::to_string(img->dim(1)) + "x" + std::to_string(img->dim(2)) +
                         " must be divisible by " + std::to_string(s));
    }
    auto x4 = make_tensor<S>({1, 3, img->dim(1), img->dim(2)}, img->data);
    auto h1 = relu(tape, conv2d_batched(tape, x4, w.w1, w.b1, 2));
    auto h2 = relu(tape, conv2d_batched(tape, h1, w.w2, w.b2, 2));
    auto h3 = conv2d_batched(tape, h2, w.w3, w.b3, 1);
    auto out = make_tensor<S>({h3->dim(1), h3->dim(2), h3->dim(3)}, h3->data);
    auto out_r = tape.record(out, {h3}, "squeeze", [h3, out](Tape<S>& t) {
        if (!t.needs_grad(*h3)) return;
        const S* g = t.grad(out).data();
        S* gx = t.grad(h3).data();
        for (std::int64_t i = 0; i < out->size(); ++i) gx[i] += g[i];
    });
    return FeatureMap<S>{out_r, s};
}

} // namespace detail

// Visual features feeding the cost volume.
template <class S>
FeatureMap<S> encode_image(Tape<S>& tape, TensorPtr<S> img, const EncoderWeights<S>& w) {
    return detail::encode_with(tape, img, w, "encode_image");
}

// Context features feeding the flow decoder; separate weights.
template <class S>
FeatureMap<S> encode_context(Tape<S>& tape, TensorPtr<S> img, const EncoderWeights<S>& w) {
    return detail::encode_with(tape, img, w, "encode_context");
}

} // namespace mcva
