#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "mcva/tape.hpp"
#include "mcva/tensor.hpp"

namespace mcva {

// One-cycle schedule: linear warmup from lr_max/25 to lr_max over the first
// 5% of steps, then linear decay to lr_max/1e4 at total_steps.
inline double onecycle_lr(std::int64_t step, std::int64_t total_steps, double lr_max) {
    if (total_steps <= 0) throw ConfigError("onecycle_lr: total_steps must be positive");
    if (step < 0 || step > total_steps) {
        throw ConfigError("onecycle_lr: step " + std::to_string(step) +
                          " outside [0, " + std::to_string(total_steps) + "]");
    }
    const double warmup = 0.05 * static_cast<double>(total_steps);
    const double lr_start = lr_max / 25.0;
    const double lr_final = lr_max / 1e4;
    const double s = static_cast<double>(step);
    if (s <= warmup && warmup > 0.0) {
        return lr_start + (lr_max - lr_start) * (s / warmup);
    }
    const double span = static_cast<double>(total_steps) - warmup;
    if (span <= 0.0) return lr_final;
    return lr_max + (lr_final - lr_max) * ((s - warmup) / span);
}

struct AdamWConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 1e-4;
};

// Decoupled-weight-decay Adam. Moment buffers are keyed by parameter name.
template <class S>
struct OptimizerState {
    AdamWConfig cfg;
    std::int64_t step = 0;

    struct Moments {
        std::vector<S> m, v;
    };
    std::unordered_map<std::string, Moments> moments;

    Moments& slot(const TensorPtr<S>& p) {
        auto it = moments.find(p->name);
        if (it == moments.end()) {
            it = moments.emplace(p->name,
                                 Moments{std::vector<S>(p->data.size(), S(0)),
                                         std::vector<S>(p->data.size(), S(0))}).first;
        } else if (it->second.m.size() != p->data.size()) {
            throw ShapeError("optimizer moments shape mismatch for " + p->name);
        }
        return it->second;
    }
};

// Applies one AdamW update: decoupled decay w *= (1 - lr*wd) first, then the
// bias-corrected Adam step using gradients supplied per parameter.
template <class S>
void adamw_step(OptimizerState<S>& st, const std::vector<TensorPtr<S>>& params,
                const std::vector<const std::vector<S>*>& grads, double lr,
                double grad_clip = 0.0) {
    if (lr < 0) throw ConfigError("adamw_step: negative learning rate");
    if (params.size() != grads.size()) throw ShapeError("adamw_step: params/grads mismatch");
    st.step += 1;
    const double b1 = st.cfg.beta1, b2 = st.cfg.beta2;
    const double bc1 = 1.0 - std::pow(b1, static_cast<double>(st.step));
    const double bc2 = 1.0 - std::pow(b2, static_cast<double>(st.step));

    // Optional global-norm clipping (off by default; enabled via config).
    double scale = 1.0;
    if (grad_clip > 0.0) {
        double sq = 0.0;
        for (const auto* g : grads) {
            if (!g) continue;
            for (const S v : *g) sq += static_cast<double>(v) * static_cast<double>(v);
        }
        const double norm = std::sqrt(sq);
        if (norm > grad_clip) scale = grad_clip / norm;
    }

    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        const auto& p = params[pi];
        auto& slot = st.slot(p);
        const std::vector<S>* g = grads[pi];
        static const std::vector<S> kEmpty;
        const std::vector<S>& gv = g ? *g : kEmpty;
        if (g && gv.size() != p->data.size()) {
            throw ShapeError("adamw_step: gradient shape mismatch for " + p->name);
        }
        for (std::size_t i = 0; i < p->data.size(); ++i) {
            const double gi = g ? static_cast<double>(gv[i]) * scale : 0.0;
            if (!std::isfinite(gi)) {
                throw NumericalError("non-finite gradient for parameter " + p->name);
            }
            double w = static_cast<double>(p->data[i]);
            w *= 1.0 - lr * st.cfg.weight_decay;
            double m = static_cast<double>(slot.m[i]) * b1 + (1.0 - b1) * gi;
            double v = static_cast<double>(slot.v[i]) * b2 + (1.0 - b2) * gi * gi;
            slot.m[i] = static_cast<S>(m);
            slot.v[i] = static_cast<S>(v);
            const double mhat = m / bc1;
            const double vhat = v / bc2;
            w -= lr * mhat / (std::sqrt(vhat) + st.cfg.eps);
            p->data[i] = static_cast<S>(w);
        }
    }
}

// Convenience overload pulling gradients from a tape.
template <class S>
void adamw_step(OptimizerState<S>& st, const std::vector<TensorPtr<S>>& params,
                Tape<S>& tape, double lr, double grad_clip = 0.0) {
    std::vector<const std::vector<S>*> grads;
    grads.reserve(params.size());
    for (const auto& p : params) grads.push_back(tape.find_grad(p.get()));
    adamw_step(st, params, grads, lr, grad_clip);
}

} // namespace mcva
