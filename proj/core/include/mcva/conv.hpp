#pragma once

#include <cstring>
#include <string>
#include <vector>

#include "mcva/ops.hpp"

namespace mcva {

namespace detail {

// Zero-padded patch matrix for one [Cin, H, W] plane stack:
// col[(yo*wo + xo), ((ci*k + ky)*k + kx)] = x[ci][yo*s+ky-p][xo*s+kx-p].
template <class S>
void im2col(const S* x, int cin, int h, int w, int k, int stride, int pad, int ho,
            int wo, S* col) {
    const int k9 = cin * k * k;
    for (int yo = 0; yo < ho; ++yo) {
        for (int xo = 0; xo < wo; ++xo) {
            S* row = col + (static_cast<std::int64_t>(yo) * wo + xo) * k9;
            for (int ci = 0; ci < cin; ++ci) {
                const S* plane = x + static_cast<std::int64_t>(ci) * h * w;
                for (int ky = 0; ky < k; ++ky) {
                    const int yi = yo * stride + ky - pad;
                    for (int kx = 0; kx < k; ++kx) {
                        const int xi = xo * stride + kx - pad;
                        row[(ci * k + ky) * k + kx] =
                            (yi >= 0 && yi < h && xi >= 0 && xi < w)
                                ? plane[static_cast<std::int64_t>(yi) * w + xi]
                                : S(0);
                    }
                }
            }
        }
    }
}

} // namespace detail

// Batched 2D cross-correlation, odd kernel, "same" padding p = (k-1)/2,
// stride in {1,2}; output spatial size ceil(H/stride) x ceil(W/stride).
// x: [N, Cin, H, W], w: [Cout, Cin, k, k], b: [Cout] or null. Runs as
// im2col + GEMM; per output element the reduction follows (ci, ky, kx)
// order, matching the naive loop oracle.
template <class S>
TensorPtr<S> conv2d_batched(Tape<S>& tape, TensorPtr<S> x, TensorPtr<S> w,
                            TensorPtr<S> b, int stride) {
    if (x->rank() != 4 || w->rank() != 4) {
        throw ShapeError("conv2d: input must be [N,Cin,H,W], weight [Cout,Cin,k,k]");
    }
    const int n_batch = x->dim(0), cin = x->dim(1), h = x->dim(2), wth = x->dim(3);
    const int cout = w->dim(0), k = w->dim(2);
    if (w->dim(1) != cin) {
        throw ShapeError("conv2d: input channels " + std::to_string(cin) +
                         " do not match weight channels " + std::to_string(w->dim(1)));
    }
    if (w->dim(3) != k || k % 2 == 0) throw ShapeError("conv2d: kernel must be square and odd");
    if (stride != 1 && stride != 2) throw ShapeError("conv2d: stride must be 1 or 2");
    if (b && b->size() != cout) throw ShapeError("conv2d: bias size mismatch");
    const int pad = (k - 1) / 2;
    const int ho = (h + stride - 1) / stride;
    const int wo = (wth + stride - 1) / stride;
    const int k9 = cin * k * k;
    const int plane_out = ho * wo;

    auto out = make_tensor<S>({n_batch, cout, ho, wo});
    const S* px = x->ptr();
    const S* pw = w->ptr();
    const S* pb = b ? b->ptr() : nullptr;
    S* po = out->ptr();

    // weights transposed once to [k9, cout] for the row-accumulator kernel
    std::vector<S> wt(static_cast<std::size_t>(k9) * cout);
    for (int co = 0; co < cout; ++co) {
        for (int kk = 0; kk < k9; ++kk) {
            wt[static_cast<std::size_t>(kk) * cout + co] =
                pw[static_cast<std::size_t>(co) * k9 + kk];
        }
    }

    parallel_for(0, n_batch, [&](std::int64_t lo, std::int64_t hi) {
        std::vector<S> col(static_cast<std::size_t>(plane_out) * k9);
        std::vector<S> gout(static_cast<std::size_t>(plane_out) * cout);
        for (std::int64_t n = lo; n < hi; ++n) {
            detail::im2col(px + n * cin * h * wth, cin, h, wth, k, stride, pad, ho, wo,
                           col.data());
            kern::gemm_rows(col.data(), wt.data(), pb, gout.data(), 0, plane_out, k9,
                            cout);
            // [pos, cout] -> [cout, pos]
            S* dst = po + n * cout * plane_out;
            for (int pos = 0; pos < plane_out; ++pos) {
                const S* src = gout.data() + static_cast<std::int64_t>(pos) * cout;
                for (int co = 0; co < cout; ++co) {
                    dst[static_cast<std::int64_t>(co) * plane_out + pos] = src[co];
                }
            }
        }
    });

    return tape.record(out, {x, w, b}, "conv2d",
                       [x, w, b, out, n_batch, cin, cout, h, wth, ho, wo, k, pad, stride,
                        k9, plane_out](Tape<S>& t) {
        const S* g = t.grad(out).data();
        const S* px2 = x->ptr();
        const S* pw2 = w->ptr();
        const bool need_x = t.needs_grad(*x);
        const bool need_w = t.needs_grad(*w);
        const bool need_b = b && t.needs_grad(*b);
        if (!need_x && !need_w && !need_b) return;

        S* gx = need_x ? t.grad(x).data() : nullptr;
        S* gw = need_w ? t.grad(w).data() : nullptr;
        S* gb = need_b ? t.grad(b).data() : nullptr;

        // per-chunk dW partials, combined in fixed chunk order
        const std::int64_t chunk = 8;
        const std::int64_t n_chunks = (n_batch + chunk - 1) / chunk;
        std::vector<std::vector<S>> dw_parts;
        std::vector<std::vector<S>> db_parts;
        if (need_w) {
            dw_parts.assign(static_cast<std::size_t>(n_chunks),
                            std::vector<S>(static_cast<std::size_t>(k9) * cout, S(0)));
        }
        if (need_b) {
            db_parts.assign(static_cast<std::size_t>(n_chunks),
                            std::vector<S>(static_cast<std::size_t>(cout), S(0)));
        }

        parallel_for(0, n_chunks, [&](std::int64_t clo, std::int64_t chi) {
            std::vector<S> gt(static_cast<std::size_t>(plane_out) * cout);
            std::vector<S> col, colt, dcol;
            if (need_w) {
                col.resize(static_cast<std::size_t>(plane_out) * k9);
                colt.resize(static_cast<std::size_t>(plane_out) * k9);
            }
            if (need_x) dcol.resize(static_cast<std::size_t>(plane_out) * k9);
            for (std::int64_t c = clo; c < chi; ++c) {
                const std::int64_t n_hi = (c + 1) * chunk < n_batch ? (c + 1) * chunk : n_batch;
                for (std::int64_t n = c * chunk; n < n_hi; ++n) {
                    const S* gsrc = g + n * cout * plane_out;
                    // [cout, pos] -> [pos, cout]
                    for (int co = 0; co < cout; ++co) {
                        const S* src = gsrc + static_cast<std::int64_t>(co) * plane_out;
                        for (int pos = 0; pos < plane_out; ++pos) {
                            gt[static_cast<std::int64_t>(pos) * cout + co] = src[pos];
                        }
                    }
                    if (need_b) {
                        S* dbp = db_parts[static_cast<std::size_t>(c)].data();
                        for (int pos = 0; pos < plane_out; ++pos) {
                            const S* gr = gt.data() + static_cast<std::int64_t>(pos) * cout;
                            for (int co = 0; co < cout; ++co) dbp[co] += gr[co];
                        }
                    }
                    if (need_w) {
                        detail::im2col(px2 + n * cin * h * wth, cin, h, wth, k, stride,
                                       pad, ho, wo, col.data());
                        kern::transpose(col.data(), colt.data(), plane_out, k9);
                        kern::gemm_update_w_xt(colt.data(), gt.data(),
                                               dw_parts[static_cast<std::size_t>(c)].data(),
                                               plane_out, 0, k9, cout);
                    }
                    if (need_x) {
                        // dcol = gt . w2, w2 = weights viewed [cout, k9]
                        kern::gemm_rows(gt.data(), pw2, static_cast<const S*>(nullptr),
                                        dcol.data(), 0, plane_out, cout, k9);
                        // col2im scatter-add
                        S* gx_n = gx + n * cin * h * wth;
                        for (int yo = 0; yo < ho; ++yo) {
                            for (int xo = 0; xo < wo; ++xo) {
                                const S* row = dcol.data() +
                                               (static_cast<std::int64_t>(yo) * wo + xo) * k9;
                                for (int ci = 0; ci < cin; ++ci) {
                                    S* plane = gx_n + static_cast<std::int64_t>(ci) * h * wth;
                                    for (int ky = 0; ky < k; ++ky) {
                                        const int yi = yo * stride + ky - pad;
                                        if (yi < 0 || yi >= h) continue;
                                        for (int kx = 0; kx < k; ++kx) {
                                            const int xi = xo * stride + kx - pad;
                                            if (xi < 0 || xi >= wth) continue;
                                            plane[static_cast<std::int64_t>(yi) * wth + xi] +=
                                                row[(ci * k + ky) * k + kx];
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
        });

        if (need_w) {
            // dw_parts rows are [k9, cout]; dw layout is [cout, k9]
            for (std::int64_t c = 0; c < n_chunks; ++c) {
                const auto& part = dw_parts[static_cast<std::size_t>(c)];
                for (int kk = 0; kk < k9; ++kk) {
                    for (int co = 0; co < cout; ++co) {
                        gw[static_cast<std::int64_t>(co) * k9 + kk] +=
                            part[static_cast<std::size_t>(kk) * cout + co];
                    }
                }
            }
        }
        if (need_b) {
            for (std::int64_t c = 0; c < n_chunks; ++c) {
                const auto& part = db_parts[static_cast<std::size_t>(c)];
                for (int co = 0; co < cout; ++co) gb[co] += part[static_cast<std::size_t>(co)];
            }
        }
    });
}

// Single-image convenience wrapper: x [Cin,H,W] -> [Cout,H',W'].
template <class S>
TensorPtr<S> conv2d_stride(Tape<S>& tape, TensorPtr<S> x, TensorPtr<S> w,
                           TensorPtr<S> b, int stride) {
    if (x->rank() != 3) throw ShapeError("conv2d_stride: input must be [Cin,H,W]");
    auto x4 = make_tensor<S>({1, x->dim(0), x->dim(1), x->dim(2)}, x->data);
    auto x4r = tape.record(x4, {x}, "reshape", [x, x4](Tape<S>& t) {
        if (!t.needs_grad(*x)) return;
        const S* g = t.grad(x4).data();
        S* gx = t.grad(x).data();
        for (std::int64_t i = 0; i < x->size(); ++i) gx[i] += g[i];
    });
    auto out4 = conv2d_batched(tape, x4r, w, b, stride);
    auto out = make_tensor<S>({out4->dim(1), out4->dim(2), out4->dim(3)}, out4->data);
    return tape.record(out, {out4}, "reshape", [out4, out](Tape<S>& t) {
        if (!t.needs_grad(*out4)) return;
        const S* g = t.grad(out).data();
        S* gx = t.grad(out4).data();
        for (std::int64_t i = 0; i < out->size(); ++i) gx[i] += g[i];
    });
}

} // namespace mcva
