#pragma once

#include <cmath>
#include <string>
#include <unordered_map>
#include <vector>

#include "mcva/rng.hpp"
#include "mcva/tensor.hpp"

namespace mcva {

// Flat registry of named parameter tensors. Names are stable across
// pretraining and finetuning so checkpoints transfer by name.
template <class S>
struct ParamSet {
    std::vector<TensorPtr<S>> items;
    std::unordered_map<std::string, TensorPtr<S>> by_name;

    TensorPtr<S> add(TensorPtr<S> t) {
        if (t->name.empty()) throw ConfigError("ParamSet: parameter must be named");
        if (by_name.count(t->name)) throw ConfigError("ParamSet: duplicate name " + t->name);
        items.push_back(t);
        by_name.emplace(t->name, t);
        return t;
    }

    TensorPtr<S> find(const std::string& name) const {
        auto it = by_name.find(name);
        return it == by_name.end() ? nullptr : it->second;
    }

    void merge(const ParamSet<S>& other) {
        for (const auto& t : other.items) add(t);
    }

    // Trainable subset (requires_grad).
    std::vector<TensorPtr<S>> trainable() const {
        std::vector<TensorPtr<S>> out;
        for (const auto& t : items) {
            if (t->requires_grad) out.push_back(t);
        }
        return out;
    }
};

// FNV-1a over raw parameter bytes; used for frozen-weight checks.
template <class S>
std::uint64_t param_checksum(const std::vector<TensorPtr<S>>& params) {
    std::uint64_t h = 1469598103934665603ull;
    for (const auto& p : params) {
        const auto* bytes = reinterpret_cast<const unsigned char*>(p->data.data());
        const std::size_t n = p->data.size() * sizeof(S);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= bytes[i];
            h *= 1099511628211ull;
        }
    }
    return h;
}

// ---- initializers ----------------------------------------------------------

template <class S>
TensorPtr<S> param_zeros(const std::string& name, Shape shape, bool trainable = true) {
    auto t = make_tensor<S>(std::move(shape));
    t->name = name;
    t->requires_grad = trainable;
    return t;
}

template <class S>
TensorPtr<S> param_full(const std::string& name, Shape shape, S value, bool trainable = true) {
    auto t = param_zeros<S>(name, std::move(shape), trainable);
    for (auto& v : t->data) v = value;
    return t;
}

// He-style fan-in scaled normal init.
template <class S>
TensorPtr<S> param_he(const std::string& name, Shape shape, std::int64_t fan_in, Rng& rng,
                      bool trainable = true) {
    auto t = param_zeros<S>(name, std::move(shape), trainable);
    const double std_dev = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (auto& v : t->data) v = static_cast<S>(rng.normal() * std_dev);
    return t;
}

// Xavier-style init for attention/linear projections.
template <class S>
TensorPtr<S> param_xavier(const std::string& name, Shape shape, std::int64_t fan_in,
                          std::int64_t fan_out, Rng& rng, bool trainable = true) {
    auto t = param_zeros<S>(name, std::move(shape), trainable);
    const double std_dev = std::sqrt(2.0 / static_cast<double>(fan_in + fan_out));
    for (auto& v : t->data) v = static_cast<S>(rng.normal() * std_dev);
    return t;
}

} // namespace mcva
