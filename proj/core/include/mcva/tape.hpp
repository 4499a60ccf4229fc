#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "mcva/errors.hpp"
#include "mcva/tensor.hpp"

namespace mcva {

// Records operations for reverse-mode differentiation. Gradient buffers are
// keyed by tensor identity and owned by the tape, so separate tapes can run
// concurrently over shared (read-only) parameters. Single-owner: a tape must
// not be shared across concurrent executors.
template <class S>
class Tape {
public:
    bool check_finite = true;

    // Registers an op output. `back` is invoked during backward() and should
    // read grad(out) and accumulate into grad(parent) for parents with
    // needs_grad(). Returns `out` for chaining.
    TensorPtr<S> record(TensorPtr<S> out, std::vector<TensorPtr<S>> parents,
                        const char* op_name, std::function<void(Tape<S>&)> back) {
        bool needs = out->requires_grad;
        for (const auto& p : parents) {
            if (p && needs_grad(*p)) {
                needs = true;
                break;
            }
        }
        if (needs) needs_.emplace(out.get(), true);
        if (check_finite) {
            for (const S v : out->data) {
                if (!std::isfinite(static_cast<double>(v))) {
                    throw NumericalError(std::string(op_name) +
                                         " produced a non-finite value");
                }
            }
        }
        nodes_.push_back(Node{out, std::move(parents), std::move(back)});
        return out;
    }

    bool needs_grad(const Tensor<S>& t) const {
        if (t.requires_grad) return true;
        return needs_.count(&t) != 0;
    }

    // Gradient buffer for `t`, zero-initialized on first access.
    std::vector<S>& grad(const TensorPtr<S>& t) { return grad(t.get()); }

    std::vector<S>& grad(const Tensor<S>* t) {
        auto it = grads_.find(t);
        if (it == grads_.end()) {
            it = grads_.emplace(t, std::vector<S>(t->data.size(), S(0))).first;
        } else if (it->second.size() != t->data.size()) {
            throw ShapeError("gradient buffer size mismatch for tensor");
        }
        return it->second;
    }

    const std::vector<S>* find_grad(const Tensor<S>* t) const {
        auto it = grads_.find(t);
        return it == grads_.end() ? nullptr : &it->second;
    }

    // Reverse sweep from a scalar loss. Visits recorded operations in strict
    // reverse order; gradients of tensors not on a path to the loss stay zero.
    void backward(const TensorPtr<S>& loss) {
        if (loss->size() != 1) {
            throw ShapeError("backward requires a scalar loss, got shape " +
                             shape_str(loss->shape));
        }
        grad(loss).assign(1, S(1));
        for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
            if (!it->back) continue;
            const auto* g = find_grad(it->out.get());
            if (g == nullptr) continue; // unreached by the loss
            it->back(*this);
        }
    }

    // Drops recorded nodes and gradient buffers (parameters keep their values).
    void clear() {
        nodes_.clear();
        grads_.clear();
        needs_.clear();
    }

    std::size_t num_nodes() const { return nodes_.size(); }

private:
    struct Node {
        TensorPtr<S> out;
        std::vector<TensorPtr<S>> parents;
        std::function<void(Tape<S>&)> back;
    };
    std::vector<Node> nodes_;
    std::unordered_map<const Tensor<S>*, std::vector<S>> grads_;
    std::unordered_map<const Tensor<S>*, bool> needs_;
};

} // namespace mcva
