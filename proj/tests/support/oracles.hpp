#pragma once

// Independent naive reference implementations used to pin expected values.
// These deliberately mirror the written definitions (plain nested loops) and
// stay independent of the library's kernels.

#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <vector>

#include "mcva/kernels.hpp"
#include "mcva/masking.hpp"
#include "mcva/rng.hpp"
#include "mcva/tape.hpp"
#include "mcva/tensor.hpp"

namespace oracle {

// ---- numeric comparison helpers -------------------------------------------

inline std::int64_t ulp_distance(double a, double b) {
    if (a == b) return 0;
    if (!std::isfinite(a) || !std::isfinite(b)) return INT64_MAX;
    std::int64_t ia, ib;
    std::memcpy(&ia, &a, 8);
    std::memcpy(&ib, &b, 8);
    if (ia < 0) ia = std::numeric_limits<std::int64_t>::min() - ia;
    if (ib < 0) ib = std::numeric_limits<std::int64_t>::min() - ib;
    const std::int64_t d = ia - ib;
    return d < 0 ? -d : d;
}

inline double rel_err(double got, double want) {
    const double denom = std::max(std::abs(want), 1e-12);
    return std::abs(got - want) / denom;
}

template <class S>
void fill_uniform(std::vector<S>& v, mcva::Rng& rng, double lo = -1.0, double hi = 1.0) {
    for (auto& x : v) x = static_cast<S>(rng.uniform(lo, hi));
}

// ---- naive reference kernels ------------------------------------------------

// Cross-correlation, stride s, pad (k-1)/2, out ceil(H/s) x ceil(W/s).
template <class S>
std::vector<S> conv2d(const std::vector<S>& x, int cin, int h, int w,
                      const std::vector<S>& wgt, int cout, int k,
                      const std::vector<S>& bias, int stride) {
    const int pad = (k - 1) / 2;
    const int ho = (h + stride - 1) / stride;
    const int wo = (w + stride - 1) / stride;
    std::vector<S> out(static_cast<std::size_t>(cout) * ho * wo);
    for (int co = 0; co < cout; ++co) {
        for (int yo = 0; yo < ho; ++yo) {
            for (int xo = 0; xo < wo; ++xo) {
                S acc = bias.empty() ? S(0) : bias[static_cast<std::size_t>(co)];
                for (int ci = 0; ci < cin; ++ci) {
                    for (int ky = 0; ky < k; ++ky) {
                        for (int kx = 0; kx < k; ++kx) {
                            const int yi = yo * stride + ky - pad;
                            const int xi = xo * stride + kx - pad;
                            if (yi < 0 || yi >= h || xi < 0 || xi >= w) continue;
                            acc = mcva::kern::mac(
                                wgt[((static_cast<std::size_t>(co) * cin + ci) * k + ky) * k + kx],
                                x[(static_cast<std::size_t>(ci) * h + yi) * w + xi], acc);
                        }
                    }
                }
                out[(static_cast<std::size_t>(co) * ho + yo) * wo + xo] = acc;
            }
        }
    }
    return out;
}

// softmax(Q K^T / sqrt(d)) V with max-subtraction, key order preserved.
template <class S>
std::vector<S> attention(const std::vector<S>& q, int m, int d, const std::vector<S>& k,
                         int n, const std::vector<S>& v, int dv) {
    std::vector<S> out(static_cast<std::size_t>(m) * dv, S(0));
    const S sqrt_d = std::sqrt(static_cast<S>(d));
    std::vector<S> logits(static_cast<std::size_t>(n));
    for (int i = 0; i < m; ++i) {
        for (int t = 0; t < n; ++t) {
            S acc = 0;
            for (int j = 0; j < d; ++j) {
                acc = mcva::kern::mac(q[static_cast<std::size_t>(i) * d + j],
                                      k[static_cast<std::size_t>(t) * d + j], acc);
            }
            logits[static_cast<std::size_t>(t)] = acc / sqrt_d;
        }
        S mx = logits[0];
        for (int t = 1; t < n; ++t) mx = std::max(mx, logits[static_cast<std::size_t>(t)]);
        S z = 0;
        for (int t = 0; t < n; ++t) {
            logits[static_cast<std::size_t>(t)] = std::exp(logits[static_cast<std::size_t>(t)] - mx);
            z += logits[static_cast<std::size_t>(t)];
        }
        for (int t = 0; t < n; ++t) {
            const S a = logits[static_cast<std::size_t>(t)] / z;
            for (int j = 0; j < dv; ++j) {
                out[static_cast<std::size_t>(i) * dv + j] = mcva::kern::mac(
                    a, v[static_cast<std::size_t>(t) * dv + j],
                    out[static_cast<std::size_t>(i) * dv + j]);
            }
        }
    }
    return out;
}

template <class S>
std::vector<S> matmul(const std::vector<S>& a, int m, int k, const std::vector<S>& b,
                      int n) {
    std::vector<S> out(static_cast<std::size_t>(m) * n, S(0));
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
            S acc = 0;
            for (int p = 0; p < k; ++p) {
                acc = mcva::kern::mac(a[static_cast<std::size_t>(i) * k + p],
                                      b[static_cast<std::size_t>(p) * n + j], acc);
            }
            out[static_cast<std::size_t>(i) * n + j] = acc;
        }
    }
    return out;
}

// All-pairs dot products divided by sqrt(D): explicit double loop.
template <class S>
std::vector<S> cost_volume(const std::vector<S>& f1, const std::vector<S>& f2, int d,
                           int h, int w) {
    const int cells = h * w;
    std::vector<S> out(static_cast<std::size_t>(cells) * cells);
    const S scale = std::sqrt(static_cast<S>(d));
    for (int x = 0; x < cells; ++x) {
        for (int y = 0; y < cells; ++y) {
            S acc = 0;
            for (int c = 0; c < d; ++c) {
                acc = mcva::kern::mac(f1[static_cast<std::size_t>(c) * cells + x],
                                      f2[static_cast<std::size_t>(c) * cells + y], acc);
            }
            out[static_cast<std::size_t>(x) * cells + y] = acc / scale;
        }
    }
    return out;
}

// ---- finite differences -------------------------------------------------------

// Central-difference gradient of a scalar function with respect to `param`,
// evaluated entry by entry. `eval` must rebuild the computation from scratch.
inline std::vector<double> fd_gradient(const mcva::TensorPtr<double>& param,
                                       const std::function<double()>& eval,
                                       double eps = 1e-5) {
    std::vector<double> grad(param->data.size());
    for (std::size_t i = 0; i < param->data.size(); ++i) {
        const double saved = param->data[i];
        param->data[i] = saved + eps;
        const double up = eval();
        param->data[i] = saved - eps;
        const double down = eval();
        param->data[i] = saved;
        grad[i] = (up - down) / (2 * eps);
    }
    return grad;
}

// Central differences at a chosen subset of entries.
inline std::vector<double> fd_gradient_sampled(const mcva::TensorPtr<double>& param,
                                               const std::function<double()>& eval,
                                               const std::vector<std::size_t>& idx,
                                               double eps = 1e-5) {
    std::vector<double> grad(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
        const std::size_t j = idx[i];
        const double saved = param->data[j];
        param->data[j] = saved + eps;
        const double up = eval();
        param->data[j] = saved - eps;
        const double down = eval();
        param->data[j] = saved;
        grad[i] = (up - down) / (2 * eps);
    }
    return grad;
}

// Largest relative error between an analytic gradient and finite differences,
// with an absolute floor to ignore roundoff near zero.
inline double max_grad_rel_err(const std::vector<double>& analytic,
                               const std::vector<double>& fd, double abs_floor = 1e-7) {
    double worst = 0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        const double denom = std::max({std::abs(analytic[i]), std::abs(fd[i]), abs_floor});
        const double err = std::abs(analytic[i] - fd[i]);
        if (err > abs_floor) worst = std::max(worst, err / denom);
    }
    return worst;
}

// ---- masking validators ---------------------------------------------------------

// Exhaustive coverage/overlap check: every pixel has exactly one id in range,
// every block is a filled axis-aligned rectangle.
inline bool partition_valid(const mcva::BlockPartition& p) {
    if (p.num_blocks <= 0) return false;
    const int n = p.h * p.w;
    if (static_cast<int>(p.block_id.size()) != n) return false;
    std::vector<int> min_y(static_cast<std::size_t>(p.num_blocks), p.h);
    std::vector<int> max_y(static_cast<std::size_t>(p.num_blocks), -1);
    std::vector<int> min_x(static_cast<std::size_t>(p.num_blocks), p.w);
    std::vector<int> max_x(static_cast<std::size_t>(p.num_blocks), -1);
    std::vector<std::int64_t> count(static_cast<std::size_t>(p.num_blocks), 0);
    for (int y = 0; y < p.h; ++y) {
        for (int x = 0; x < p.w; ++x) {
            const int id = p.block_id[static_cast<std::size_t>(y) * p.w + x];
            if (id < 0 || id >= p.num_blocks) return false;
            min_y[id] = std::min(min_y[id], y);
            max_y[id] = std::max(max_y[id], y);
            min_x[id] = std::min(min_x[id], x);
            max_x[id] = std::max(max_x[id], x);
            ++count[id];
        }
    }
    for (int b = 0; b < p.num_blocks; ++b) {
        if (count[b] == 0) return false;
        const std::int64_t area = static_cast<std::int64_t>(max_y[b] - min_y[b] + 1) *
                                  (max_x[b] - min_x[b] + 1);
        if (area != count[b]) return false; // not a filled rectangle
        for (int y = min_y[b]; y <= max_y[b]; ++y) {
            for (int x = min_x[b]; x <= max_x[b]; ++x) {
                if (p.block_id[static_cast<std::size_t>(y) * p.w + x] != b) return false;
            }
        }
    }
    return true;
}

} // namespace oracle
