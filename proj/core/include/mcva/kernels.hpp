#pragma once

#include <cmath>
#include <cstdint>

// Register-blocked row-accumulator GEMM. Per output element the reduction
// runs strictly in k order (left to right), so results match naive loop
// oracles; tiles only split the output columns. The elementary multiply-add
// is a fused fma wherever the target has one, keeping results independent of
// compiler contraction choices.

namespace mcva::kern {

#if defined(__FMA__) || defined(FP_FAST_FMA)
template <class S>
inline S mac(S a, S b, S acc) {
    return std::fma(a, b, acc);
}
#else
template <class S>
inline S mac(S a, S b, S acc) {
    return acc + a * b;
}
#endif

template <class S, int NT>
inline void rowacc_tile(const S* xr, const S* w, const S* bias, S* y, int din,
                        int stride) {
    S acc[NT];
    for (int j = 0; j < NT; ++j) acc[j] = bias ? bias[j] : S(0);
    for (int k = 0; k < din; ++k) {
        const S a = xr[k];
        const S* wr = w + static_cast<std::int64_t>(k) * stride;
        for (int j = 0; j < NT; ++j) acc[j] = mac(a, wr[j], acc[j]);
    }
    for (int j = 0; j < NT; ++j) y[j] = acc[j];
}

// Accumulating variant: y += x . w (no bias).
template <class S, int NT>
inline void rowacc_tile_add(const S* xr, const S* w, S* y, int din, int stride) {
    S acc[NT];
    for (int j = 0; j < NT; ++j) acc[j] = y[j];
    for (int k = 0; k < din; ++k) {
        const S a = xr[k];
        const S* wr = w + static_cast<std::int64_t>(k) * stride;
        for (int j = 0; j < NT; ++j) acc[j] = mac(a, wr[j], acc[j]);
    }
    for (int j = 0; j < NT; ++j) y[j] = acc[j];
}

// y[i, :] = x[i, :] . w (+ bias) for rows [r0, r1); w is [din, dout] row-major.
template <class S>
void gemm_rows(const S* x, const S* w, const S* bias, S* y, std::int64_t r0,
               std::int64_t r1, int din, int dout) {
    for (std::int64_t i = r0; i < r1; ++i) {
        const S* xr = x + i * din;
        S* yr = y + i * dout;
        int j0 = 0;
        while (j0 < dout) {
            const int rem = dout - j0;
            const S* wj = w + j0;
            const S* bj = bias ? bias + j0 : nullptr;
            if (rem >= 64) {
                rowacc_tile<S, 64>(xr, wj, bj, yr + j0, din, dout);
                j0 += 64;
            } else if (rem >= 16) {
                rowacc_tile<S, 16>(xr, wj, bj, yr + j0, din, dout);
                j0 += 16;
            } else if (rem >= 4) {
                rowacc_tile<S, 4>(xr, wj, bj, yr + j0, din, dout);
                j0 += 4;
            } else {
                rowacc_tile<S, 1>(xr, wj, bj, yr + j0, din, dout);
                j0 += 1;
            }
        }
    }
}

// y[i, :] += x[i, :] . w for rows [r0, r1).
template <class S>
void gemm_rows_add(const S* x, const S* w, S* y, std::int64_t r0, std::int64_t r1,
                   int din, int dout) {
    for (std::int64_t i = r0; i < r1; ++i) {
        const S* xr = x + i * din;
        S* yr = y + i * dout;
        int j0 = 0;
        while (j0 < dout) {
            const int rem = dout - j0;
            const S* wj = w + j0;
            if (rem >= 64) {
                rowacc_tile_add<S, 64>(xr, wj, yr + j0, din, dout);
                j0 += 64;
            } else if (rem >= 16) {
                rowacc_tile_add<S, 16>(xr, wj, yr + j0, din, dout);
                j0 += 16;
            } else if (rem >= 4) {
                rowacc_tile_add<S, 4>(xr, wj, yr + j0, din, dout);
                j0 += 4;
            } else {
                rowacc_tile_add<S, 1>(xr, wj, yr + j0, din, dout);
                j0 += 1;
            }
        }
    }
}

// dw[k, :] += sum_i xt[k, i] * g[i, :] for k in [k0, k1); xt is x transposed
// to [din, rows] so the accumulation runs register-blocked.
template <class S>
void gemm_update_w_xt(const S* xt, const S* g, S* dw, std::int64_t rows, std::int64_t k0,
                      std::int64_t k1, int dout) {
    for (std::int64_t k = k0; k < k1; ++k) {
        const S* xr = xt + k * rows;
        S* dwr = dw + k * dout;
        int j0 = 0;
        while (j0 < dout) {
            const int rem = dout - j0;
            const S* gj = g + j0;
            if (rem >= 64) {
                rowacc_tile_add<S, 64>(xr, gj, dwr + j0, static_cast<int>(rows), dout);
                j0 += 64;
            } else if (rem >= 16) {
                rowacc_tile_add<S, 16>(xr, gj, dwr + j0, static_cast<int>(rows), dout);
                j0 += 16;
            } else if (rem >= 4) {
                rowacc_tile_add<S, 4>(xr, gj, dwr + j0, static_cast<int>(rows), dout);
                j0 += 4;
            } else {
                rowacc_tile_add<S, 1>(xr, gj, dwr + j0, static_cast<int>(rows), dout);
                j0 += 1;
            }
        }
    }
}

template <class S>
void transpose(const S* x, S* xt, std::int64_t rows, std::int64_t cols) {
    for (std::int64_t i = 0; i < rows; ++i) {
        for (std::int64_t j = 0; j < cols; ++j) xt[j * rows + i] = x[i * cols + j];
    }
}

} // namespace mcva::kern
