#pragma once

#include <cmath>
#include <cstring>
#include <string>
#include <vector>

#include "mcva/kernels.hpp"
#include "mcva/parallel.hpp"
#include "mcva/tape.hpp"
#include "mcva/tensor.hpp"

// Tape-recorded tensor operations. Forward kernels that feed oracle-equality
// tests keep a canonical reduction order (left-to-right over the contraction
// axis); backward kernels only need determinism, which fixed loop order and
// disjoint parallel writes provide.

namespace mcva {

namespace detail {

constexpr std::int64_t kParallelCutoff = 1 << 14;

template <class S, class F>
void for_each_elem(std::int64_t n, F&& f) {
    if (n >= kParallelCutoff) {
        parallel_for(0, n, [&](std::int64_t lo, std::int64_t hi) {
            for (std::int64_t i = lo; i < hi; ++i) f(i);
        });
    } else {
        for (std::int64_t i = 0; i < n; ++i) f(i);
    }
}

template <class S>
void check_same_shape(const Tensor<S>& a, const Tensor<S>& b, const char* op) {
    if (a.shape != b.shape) {
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape) +
                         " vs " + shape_str(b.shape));
    }
}

} // namespace detail

// ---- elementwise -------------------------------------------------------

template <class S>
TensorPtr<S> add(Tape<S>& tape, TensorPtr<S> a, TensorPtr<S> b) {
    detail::check_same_shape(*a, *b, "add");
    auto out = make_tensor<S>(a->shape);
    const std::int64_t n = out->size();
    const S* pa = a->ptr();
    const S* pb = b->ptr();
    S* po = out->ptr();
    detail::for_each_elem<S>(n, [&](std::int64_t i) { po[i] = pa[i] + pb[i]; });
    return tape.record(out, {a, b}, "add", [a, b, out, n](Tape<S>& t) {
        const S* g = t.grad(out).data();
        if (t.needs_grad(*a)) {
            S* ga = t.grad(a).data();
            for (std::int64_t i = 0; i < n; ++i) ga[i] += g[i];
        }
        if (t.needs_grad(*b)) {
            S* gb = t.grad(b).data();
            for (std::int64_t i = 0; i < n; ++i) gb[i] += g[i];
        }
    });
}

template <class S>
TensorPtr<S> sub(Tape<S>& tape, TensorPtr<S> a, TensorPtr<S> b) {
    detail::check_same_shape(*a, *b, "sub");
    auto out = make_tensor<S>(a->shape);
    const std::int64_t n = out->size();
    const S* pa = a->ptr();
    const S* pb = b->ptr();
    S* po = out->ptr();
    detail::for_each_elem<S>(n, [&](std::int64_t i) { po[i] = pa[i] - pb[i]; });
    return tape.record(out, {a, b}, "sub", [a, b, out, n](Tape<S>& t) {
        const S* g = t.grad(out).data();
        if (t.needs_grad(*a)) {
            S* ga = t.grad(a).data();
            for (std::int64_t i = 0; i < n; ++i) ga[i] += g[i];
        }
        if (t.needs_grad(*b)) {
            S* gb = t.grad(b).data();
            for (std::int64_t i = 0; i < n; ++i) gb[i] -= g[i];
        }
    });
}

template <class S>
TensorPtr<S> mul(Tape<S>& tape, TensorPtr<S> a, TensorPtr<S> b) {
    detail::check_same_shape(*a, *b, "mul");
    auto out = make_tensor<S>(a->shape);
    const std::int64_t n = out->size();
    const S* pa = a->ptr();
    const S* pb = b->ptr();
    S* po = out->ptr();
    detail::for_each_elem<S>(n, [&](std::int64_t i) { po[i] = pa[i] * pb[i]; });
    return tape.record(out, {a, b}, "mul", [a, b, out, n](Tape<S>& t) {
        const S* g = t.grad(out).data();
        const S* pa2 = a->ptr();
        const S* pb2 = b->ptr();
        if (t.needs_grad(*a)) {
            S* ga = t.grad(a).data();
            for (std::int64_t i = 0; i < n; ++i) ga[i] += g[i] * pb2[i];
        }
        if (t.needs_grad(*b)) {
            S* gb = t.grad(b).data();
            for (std::int64_t i = 0; i < n; ++i) gb[i] += g[i] * pa2[i];
        }
    });
}

template <class S>
TensorPtr<S> scale(Tape<S>& tape, TensorPtr<S> a, S c) {
    auto out = make_tensor<S>(a->shape);
    const std::int64_t n = out->size();
    const S* pa = a->ptr();
    S* po = out->ptr();
    detail::for_each_elem<S>(n, [&](std::int64_t i) { po[i] = pa[i] * c; });
    return tape.record(out, {a}, "scale", [a, out, n, c](Tape<S>& t) {
        if (!t.needs_grad(*a)) return;
        const S* g = t.grad(out).data();
        S* ga = t.grad(a).data();
        for (std::int64_t i = 0; i < n; ++i) ga[i] += g[i] * c;
    });
}

template <class S>
TensorPtr<S> relu(Tape<S>& tape, TensorPtr<S> a) {
    auto out = make_tensor<S>(a->shape);
    const std::int64_t n = out->size();
    const S* pa = a->ptr();
    S* po = out->ptr();
    detail::for_each_elem<S>(n, [&](std::int64_t i) { po[i] = pa[i] > S(0) ? pa[i] : S(0); });
    return tape.record(out, {a}, "relu", [a, out, n](Tape<S>& t) {
        if (!t.needs_grad(*a)) return;
        const S* g = t.grad(out).data();
        const S* pa2 = a->ptr();
        S* ga = t.grad(a).data();
        for (std::int64_t i = 0; i < n; ++i) ga[i] += pa2[i] > S(0) ? g[i] : S(0);
    });
}

template <class S>
TensorPtr<S> sigmoid(Tape<S>& tape, TensorPtr<S> a) {
    auto out = make_tensor<S>(a->shape);
    const std::int64_t n = out->size();
    const S* pa = a->ptr();
    S* po = out->ptr();
    detail::for_each_elem<S>(n, [&](std::int64_t i) {
        po[i] = S(1) / (S(1) + std::exp(-pa[i]));
    });
    return tape.record(out, {a}, "sigmoid", [a, out, n](Tape<S>& t) {
        if (!t.needs_grad(*a)) return;
        const S* g = t.grad(out).data();
        const S* po2 = out->ptr();
        S* ga = t.grad(a).data();
        for (std::int64_t i = 0; i < n; ++i) ga[i] += g[i] * po2[i] * (S(1) - po2[i]);
    });
}

template <class S>
TensorPtr<S> tanh_op(Tape<S>& tape, TensorPtr<S> a) {
    auto out = make_tensor<S>(a->shape);
    const std::int64_t n = out->size();
    const S* pa = a->ptr();
    S* po = out->ptr();
    detail::for_each_elem<S>(n, [&](std::int64_t i) { po[i] = std::tanh(pa[i]); });
    return tape.record(out, {a}, "tanh", [a, out, n](Tape<S>& t) {
        if (!t.needs_grad(*a)) return;
        const S* g = t.grad(out).data();
        const S* po2 = out->ptr();
        S* ga = t.grad(a).data();
        for (std::int64_t i = 0; i < n; ++i) ga[i] += g[i] * (S(1) - po2[i] * po2[i]);
    });
}

// out = x where the mask byte is nonzero, exact +0 elsewhere. x is viewed as
// [groups, channels, plane]; mask has one byte per (group, plane) cell and
// broadcasts across channels. Exact zeros (not multiplication) so masked
// inputs cannot leak through signed zeros or NaNs.
template <class S>
TensorPtr<S> mask_select(Tape<S>& tape, TensorPtr<S> x,
                         std::shared_ptr<const std::vector<std::uint8_t>> mask,
                         std::int64_t channels, std::int64_t plane) {
    const std::int64_t n = x->size();
    if (channels <= 0 || plane <= 0 || n % (channels * plane) != 0) {
        throw ShapeError("mask_select: tensor not divisible into [groups,channels,plane]");
    }
    const std::int64_t groups = n / (channels * plane);
    if (static_cast<std::int64_t>(mask->size()) != groups * plane) {
        throw ShapeError("mask_select: mask size " + std::to_string(mask->size()) +
                         " != groups*plane " + std::to_string(groups * plane));
    }
    auto out = make_tensor<S>(x->shape);
    const S* px = x->ptr();
    S* po = out->ptr();
    const std::uint8_t* pm = mask->data();
    parallel_for(0, groups * channels, [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t gc = lo; gc < hi; ++gc) {
            const std::int64_t g = gc / channels;
            const S* src = px + gc * plane;
            S* dst = po + gc * plane;
            const std::uint8_t* m = pm + g * plane;
            for (std::int64_t j = 0; j < plane; ++j) dst[j] = m[j] ? src[j] : S(0);
        }
    });
    return tape.record(out, {x}, "mask_select",
                       [x, out, mask, channels, plane, groups](Tape<S>& t) {
        if (!t.needs_grad(*x)) return;
        const S* g = t.grad(out).data();
        S* gx = t.grad(x).data();
        const std::uint8_t* pm = mask->data();
        for (std::int64_t gc = 0; gc < groups * channels; ++gc) {
            const std::int64_t grp = gc / channels;
            const S* src = g + gc * plane;
            S* dst = gx + gc * plane;
            const std::uint8_t* m = pm + grp * plane;
            for (std::int64_t j = 0; j < plane; ++j) {
                if (m[j]) dst[j] += src[j];
            }
        }
    });
}

// ---- reductions and losses ----------------------------------------------

template <class S>
TensorPtr<S> mean_all(Tape<S>& tape, TensorPtr<S> a) {
    const std::int64_t n = a->size();
    if (n == 0) throw ShapeError("mean_all of empty tensor");
    S acc = 0;
    const S* pa = a->ptr();
    for (std::int64_t i = 0; i < n; ++i) acc += pa[i];
    auto out = make_scalar<S>(acc / static_cast<S>(n));
    return tape.record(out, {a}, "mean_all", [a, out, n](Tape<S>& t) {
        if (!t.needs_grad(*a)) return;
        const S g = t.grad(out)[0] / static_cast<S>(n);
        S* ga = t.grad(a).data();
        for (std::int64_t i = 0; i < n; ++i) ga[i] += g;
    });
}

// mean((pred - target)^2) against a constant target.
template <class S>
TensorPtr<S> mse_against(Tape<S>& tape, TensorPtr<S> pred,
                         std::shared_ptr<const std::vector<S>> target) {
    const std::int64_t n = pred->size();
    if (n != static_cast<std::int64_t>(target->size())) {
        throw ShapeError("mse_against: size mismatch");
    }
    if (n == 0) throw ShapeError("mse_against: empty tensors");
    const S* pp = pred->ptr();
    const S* pt = target->data();
    S acc = 0;
    for (std::int64_t i = 0; i < n; ++i) {
        const S d = pp[i] - pt[i];
        acc += d * d;
    }
    auto out = make_scalar<S>(acc / static_cast<S>(n));
    return tape.record(out, {pred}, "mse_against", [pred, out, target, n](Tape<S>& t) {
        if (!t.needs_grad(*pred)) return;
        const S g = t.grad(out)[0] * S(2) / static_cast<S>(n);
        const S* pp2 = pred->ptr();
        const S* pt2 = target->data();
        S* gp = t.grad(pred).data();
        for (std::int64_t i = 0; i < n; ++i) gp[i] += g * (pp2[i] - pt2[i]);
    });
}

// mean(|pred - target|) against a constant target.
template <class S>
TensorPtr<S> l1_against(Tape<S>& tape, TensorPtr<S> pred,
                        std::shared_ptr<const std::vector<S>> target) {
    const std::int64_t n = pred->size();
    if (n != static_cast<std::int64_t>(target->size())) {
        throw ShapeError("l1_against: size mismatch");
    }
    if (n == 0) throw ShapeError("l1_against: empty tensors");
    const S* pp = pred->ptr();
    const S* pt = target->data();
    S acc = 0;
    for (std::int64_t i = 0; i < n; ++i) acc += std::abs(pp[i] - pt[i]);
    auto out = make_scalar<S>(acc / static_cast<S>(n));
    return tape.record(out, {pred}, "l1_against", [pred, out, target, n](Tape<S>& t) {
        if (!t.needs_grad(*pred)) return;
        const S g = t.grad(out)[0] / static_cast<S>(n);
        const S* pp2 = pred->ptr();
        const S* pt2 = target->data();
        S* gp = t.grad(pred).data();
        for (std::int64_t i = 0; i < n; ++i) {
            const S d = pp2[i] - pt2[i];
            gp[i] += d > S(0) ? g : (d < S(0) ? -g : S(0));
        }
    });
}

// ---- linear algebra -------------------------------------------------------

// y[..., j] = sum_k x[..., k] * w[k, j] + b[j]. Canonical k-ordered
// accumulation per output row (matches the naive loop oracle bit for bit).
template <class S>
TensorPtr<S> linear(Tape<S>& tape, TensorPtr<S> x, TensorPtr<S> w, TensorPtr<S> b) {
    if (w->rank() != 2) throw ShapeError("linear: weight must be rank 2");
    const int din = w->dim(0);
    const int dout = w->dim(1);
    if (x->rank() < 1 || x->shape.back() != din) {
        throw ShapeError("linear: input last dim " + shape_str(x->shape) +
                         " does not match weight " + shape_str(w->shape));
    }
    if (b && (b->rank() != 1 || b->dim(0) != dout)) {
        throw ShapeError("linear: bias shape " + shape_str(b->shape));
    }
    const std::int64_t rows = x->size() / din;
    Shape out_shape = x->shape;
    out_shape.back() = dout;
    auto out = make_tensor<S>(std::move(out_shape));

    const S* px = x->ptr();
    const S* pw = w->ptr();
    const S* pb = b ? b->ptr() : nullptr;
    S* po = out->ptr();
    parallel_for(0, rows, [&](std::int64_t lo, std::int64_t hi) {
        kern::gemm_rows(px, pw, pb, po, lo, hi, din, dout);
    });

    return tape.record(out, {x, w, b}, "linear",
                       [x, w, b, out, rows, din, dout](Tape<S>& t) {
        const S* g = t.grad(out).data();
        const S* px2 = x->ptr();
        const S* pw2 = w->ptr();
        if (t.needs_grad(*x)) {
            // dx = g . w^T ; transpose w once for contiguous accumulation
            std::vector<S> wt(static_cast<std::size_t>(din) * dout);
            for (int k = 0; k < din; ++k)
                for (int j = 0; j < dout; ++j)
                    wt[static_cast<std::size_t>(j) * din + k] =
                        pw2[static_cast<std::size_t>(k) * dout + j];
            S* gx = t.grad(x).data();
            parallel_for(0, rows, [&](std::int64_t lo, std::int64_t hi) {
                kern::gemm_rows_add(g, wt.data(), gx, lo, hi, dout, din);
            });
        }
        if (t.needs_grad(*w)) {
            S* gw = t.grad(w).data();
            // parallel over weight rows; fixed i-order accumulation per row
            std::vector<S> xt(static_cast<std::size_t>(din) * rows);
            kern::transpose(px2, xt.data(), rows, din);
            parallel_for(0, din, [&](std::int64_t klo, std::int64_t khi) {
                kern::gemm_update_w_xt(xt.data(), g, gw, rows, klo, khi, dout);
            });
        }
        if (b && t.needs_grad(*b)) {
            S* gb = t.grad(b).data();
            for (std::int64_t i = 0; i < rows; ++i) {
                const S* gr = g + i * dout;
                for (int j = 0; j < dout; ++j) gb[j] += gr[j];
            }
        }
    });
}

template <class S>
TensorPtr<S> matmul(Tape<S>& tape, TensorPtr<S> a, TensorPtr<S> b) {
    if (a->rank() != 2 || b->rank() != 2 || a->dim(1) != b->dim(0)) {
        throw ShapeError("matmul: incompatible shapes " + shape_str(a->shape) + " x " +
                         shape_str(b->shape));
    }
    return linear(tape, a, b, TensorPtr<S>{});
}

// ---- row-wise normalizations ---------------------------------------------

// Per-row layer norm over the last dimension: gamma * (x - mu)/sqrt(var+eps) + beta.
template <class S>
TensorPtr<S> layer_norm(Tape<S>& tape, TensorPtr<S> x, TensorPtr<S> gamma,
                        TensorPtr<S> beta, S eps = S(1e-5)) {
    const int d = x->shape.back();
    if (gamma->size() != d || beta->size() != d) {
        throw ShapeError("layer_norm: parameter size mismatch");
    }
    const std::int64_t rows = x->size() / d;
    auto out = make_tensor<S>(x->shape);
    auto rstd = std::make_shared<std::vector<S>>(static_cast<std::size_t>(rows));
    auto xhat = std::make_shared<std::vector<S>>(x->data.size());

    const S* px = x->ptr();
    const S* pg = gamma->ptr();
    const S* pb = beta->ptr();
    S* po = out->ptr();
    parallel_for(0, rows, [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t i = lo; i < hi; ++i) {
            const S* xr = px + i * d;
            S mu = 0;
            for (int j = 0; j < d; ++j) mu += xr[j];
            mu /= static_cast<S>(d);
            S var = 0;
            for (int j = 0; j < d; ++j) {
                const S c = xr[j] - mu;
                var += c * c;
            }
            var /= static_cast<S>(d);
            const S rs = S(1) / std::sqrt(var + eps);
            (*rstd)[static_cast<std::size_t>(i)] = rs;
            S* xh = xhat->data() + i * d;
            S* yr = po + i * d;
            for (int j = 0; j < d; ++j) {
                xh[j] = (xr[j] - mu) * rs;
                yr[j] = pg[j] * xh[j] + pb[j];
            }
        }
    });

    return tape.record(out, {x, gamma, beta}, "layer_norm",
                       [x, gamma, beta, out, rstd, xhat, rows, d](Tape<S>& t) {
        const S* g = t.grad(out).data();
        const S* pg2 = gamma->ptr();
        if (t.needs_grad(*x)) {
            S* gx = t.grad(x).data();
            parallel_for(0, rows, [&](std::int64_t lo, std::int64_t hi) {
                for (std::int64_t i = lo; i < hi; ++i) {
                    const S* gr = g + i * d;
                    const S* xh = xhat->data() + i * d;
                    S sum_gy = 0, sum_gyx = 0;
                    for (int j = 0; j < d; ++j) {
                        const S gy = gr[j] * pg2[j];
                        sum_gy += gy;
                        sum_gyx += gy * xh[j];
                    }
                    const S inv_d = S(1) / static_cast<S>(d);
                    const S rs = (*rstd)[static_cast<std::size_t>(i)];
                    S* gxr = gx + i * d;
                    for (int j = 0; j < d; ++j) {
                        const S gy = gr[j] * pg2[j];
                        gxr[j] += rs * (gy - inv_d * sum_gy - xh[j] * inv_d * sum_gyx);
                    }
                }
            });
        }
        if (t.needs_grad(*gamma)) {
            S* gg = t.grad(gamma).data();
            for (std::int64_t i = 0; i < rows; ++i) {
                const S* gr = g + i * d;
                const S* xh = xhat->data() + i * d;
                for (int j = 0; j < d; ++j) gg[j] += gr[j] * xh[j];
            }
        }
        if (t.needs_grad(*beta)) {
            S* gb = t.grad(beta).data();
            for (std::int64_t i = 0; i < rows; ++i) {
                const S* gr = g + i * d;
                for (int j = 0; j < d; ++j) gb[j] += gr[j];
            }
        }
    });
}

// Per-row standardization y = (x - mu) / (sigma + eps), sigma = sqrt(var).
template <class S>
TensorPtr<S> standardize_rows(Tape<S>& tape, TensorPtr<S> x, S eps) {
    const int d = x->shape.back();
    const std::int64_t rows = x->size() / d;
    auto out = make_tensor<S>(x->shape);
    auto sigma = std::make_shared<std::vector<S>>(static_cast<std::size_t>(rows));
    auto centered = std::make_shared<std::vector<S>>(x->data.size());

    const S* px = x->ptr();
    S* po = out->ptr();
    parallel_for(0, rows, [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t i = lo; i < hi; ++i) {
            const S* xr = px + i * d;
            S mu = 0;
            for (int j = 0; j < d; ++j) mu += xr[j];
            mu /= static_cast<S>(d);
            S var = 0;
            S* cr = centered->data() + i * d;
            for (int j = 0; j < d; ++j) {
                cr[j] = xr[j] - mu;
                var += cr[j] * cr[j];
            }
            var /= static_cast<S>(d);
            const S sg = std::sqrt(var);
            (*sigma)[static_cast<std::size_t>(i)] = sg;
            const S inv = S(1) / (sg + eps);
            S* yr = po + i * d;
            for (int j = 0; j < d; ++j) yr[j] = cr[j] * inv;
        }
    });

    return tape.record(out, {x}, "standardize_rows",
                       [x, out, sigma, centered, rows, d, eps](Tape<S>& t) {
        if (!t.needs_grad(*x)) return;
        const S* g = t.grad(out).data();
        S* gx = t.grad(x).data();
        parallel_for(0, rows, [&](std::int64_t lo, std::int64_t hi) {
            for (std::int64_t i = lo; i < hi; ++i) {
                const S* gr = g + i * d;
                const S* cr = centered->data() + i * d;
                const S sg = (*sigma)[static_cast<std::size_t>(i)];
                const S tdenom = sg + eps;
                S gmean = 0, gdot = 0;
                for (int j = 0; j < d; ++j) {
                    gmean += gr[j];
                    gdot += gr[j] * cr[j];
                }
                gmean /= static_cast<S>(d);
                const S a = S(1) / tdenom;
                // d sigma / dx_k = c_k / (n * sigma); zero for constant rows
                const S bterm = sg > S(0)
                    ? gdot / (tdenom * tdenom * static_cast<S>(d) * sg)
                    : S(0);
                S* gxr = gx + i * d;
                for (int j = 0; j < d; ++j) {
                    gxr[j] += a * (gr[j] - gmean) - bterm * cr[j];
                }
            }
        });
    });
}

// ---- shape plumbing --------------------------------------------------------

// out row i = x row idx[i]; rows of length `width` (x viewed as [n, width]).
template <class S>
TensorPtr<S> gather_rows(Tape<S>& tape, TensorPtr<S> x,
                         std::shared_ptr<const std::vector<std::int64_t>> idx, int width) {
    const std::int64_t rows_in = x->size() / width;
    for (std::int64_t r : *idx) {
        if (r < 0 || r >= rows_in) throw ShapeError("gather_rows: index out of range");
    }
    const std::int64_t rows_out = static_cast<std::int64_t>(idx->size());
    auto out = make_tensor<S>({static_cast<int>(rows_out), width});
    const S* px = x->ptr();
    S* po = out->ptr();
    parallel_for(0, rows_out, [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t i = lo; i < hi; ++i) {
            std::memcpy(po + i * width, px + (*idx)[static_cast<std::size_t>(i)] * width,
                        sizeof(S) * static_cast<std::size_t>(width));
        }
    });
    return tape.record(out, {x}, "gather_rows", [x, out, idx, width](Tape<S>& t) {
        if (!t.needs_grad(*x)) return;
        const S* g = t.grad(out).data();
        S* gx = t.grad(x).data();
        const std::int64_t rows_out = static_cast<std::int64_t>(idx->size());
        for (std::int64_t i = 0; i < rows_out; ++i) {
            S* dst = gx + (*idx)[static_cast<std::size_t>(i)] * width;
            const S* src = g + i * width;
            for (int j = 0; j < width; ++j) dst[j] += src[j];
        }
    });
}

// Pure element permutation: out[i] = x[perm[i]]; perm must be a bijection.
template <class S>
TensorPtr<S> permute_elements(Tape<S>& tape, TensorPtr<S> x,
                              std::shared_ptr<const std::vector<std::int64_t>> perm,
                              Shape out_shape) {
    if (static_cast<std::int64_t>(perm->size()) != x->size() ||
        shape_numel(out_shape) != x->size()) {
        throw ShapeError("permute_elements: size mismatch");
    }
    auto out = make_tensor<S>(std::move(out_shape));
    const S* px = x->ptr();
    S* po = out->ptr();
    const std::int64_t n = x->size();
    detail::for_each_elem<S>(n, [&](std::int64_t i) {
        po[i] = px[(*perm)[static_cast<std::size_t>(i)]];
    });
    return tape.record(out, {x}, "permute_elements", [x, out, perm, n](Tape<S>& t) {
        if (!t.needs_grad(*x)) return;
        const S* g = t.grad(out).data();
        S* gx = t.grad(x).data();
        for (std::int64_t i = 0; i < n; ++i) {
            gx[(*perm)[static_cast<std::size_t>(i)]] += g[i];
        }
    });
}

// Column-wise concat of [n, w_i] blocks into [n, sum w_i].
template <class S>
TensorPtr<S> concat_cols(Tape<S>& tape, const std::vector<TensorPtr<S>>& parts) {
    if (parts.empty()) throw ShapeError("concat_cols: no inputs");
    const std::int64_t rows = parts[0]->size() / parts[0]->shape.back();
    int total = 0;
    for (const auto& p : parts) {
        if (p->size() / p->shape.back() != rows) {
            throw ShapeError("concat_cols: row count mismatch");
        }
        total += p->shape.back();
    }
    auto out = make_tensor<S>({static_cast<int>(rows), total});
    S* po = out->ptr();
    int off = 0;
    for (const auto& p : parts) {
        const int w = p->shape.back();
        const S* pp = p->ptr();
        parallel_for(0, rows, [&](std::int64_t lo, std::int64_t hi) {
            for (std::int64_t i = lo; i < hi; ++i) {
                std::memcpy(po + i * total + off, pp + i * w,
                            sizeof(S) * static_cast<std::size_t>(w));
            }
        });
        off += w;
    }
    std::vector<TensorPtr<S>> parents = parts;
    return tape.record(out, parents, "concat_cols", [parts, out, rows, total](Tape<S>& t) {
        const S* g = t.grad(out).data();
        int off2 = 0;
        for (const auto& p : parts) {
            const int w = p->shape.back();
            if (t.needs_grad(*p)) {
                S* gp = t.grad(p).data();
                for (std::int64_t i = 0; i < rows; ++i) {
                    const S* src = g + i * total + off2;
                    S* dst = gp + i * static_cast<std::int64_t>(w);
                    for (int j = 0; j < w; ++j) dst[j] += src[j];
                }
            }
            off2 += w;
        }
    });
}

// Adds a constant table, tiled across rows: out row i = x row i + table.
template <class S>
TensorPtr<S> add_const_tiled(Tape<S>& tape, TensorPtr<S> x,
                             std::shared_ptr<const std::vector<S>> table) {
    const std::int64_t tn = static_cast<std::int64_t>(table->size());
    if (tn == 0 || x->size() % tn != 0) {
        throw ShapeError("add_const_tiled: table size does not divide tensor size");
    }
    auto out = make_tensor<S>(x->shape);
    const S* px = x->ptr();
    const S* pt = table->data();
    S* po = out->ptr();
    const std::int64_t n = x->size();
    detail::for_each_elem<S>(n, [&](std::int64_t i) { po[i] = px[i] + pt[i % tn]; });
    return tape.record(out, {x}, "add_const_tiled", [x, out, n](Tape<S>& t) {
        if (!t.needs_grad(*x)) return;
        const S* g = t.grad(out).data();
        S* gx = t.grad(x).data();
        for (std::int64_t i = 0; i < n; ++i) gx[i] += g[i];
    });
}

} // namespace mcva
