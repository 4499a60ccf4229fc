#pragma once

#include <cmath>
#include <memory>
#include <vector>

#include "mcva/ops.hpp"

namespace mcva {

// Grouped scaled dot-product attention over ragged key/value groups.
//
//   q:       [B*Tq, d], or [Tq, d] shared across groups when shared_q
//   k:       [total_keys, d], group g owns rows [offsets[g], offsets[g+1])
//   v:       [total_keys, dv]
//   returns  [B*Tq, dv]
//
// Softmax is stabilized by max subtraction. Logits, softmax sums and value
// aggregation all run in key order so results match a naive oracle.
template <class S>
TensorPtr<S> attention_grouped(Tape<S>& tape, TensorPtr<S> q, TensorPtr<S> k,
                               TensorPtr<S> v,
                               std::shared_ptr<const std::vector<std::int64_t>> offsets,
                               int tq, bool shared_q) {
    const int d = q->shape.back();
    const int dv = v->shape.back();
    const std::int64_t groups = static_cast<std::int64_t>(offsets->size()) - 1;
    if (groups < 1) throw ShapeError("attention: no groups");
    if (k->shape.back() != d) throw ShapeError("attention: Q/K dims differ");
    const std::int64_t total_keys = k->size() / d;
    if (v->size() / dv != total_keys) throw ShapeError("attention: K/V row counts differ");
    if (offsets->back() != total_keys || offsets->front() != 0) {
        throw ShapeError("attention: offsets do not cover key rows");
    }
    for (std::int64_t g = 0; g < groups; ++g) {
        if ((*offsets)[g + 1] <= (*offsets)[g]) {
            throw EmptyKeySet("attention: group " + std::to_string(g) + " has no keys");
        }
    }
    const std::int64_t q_rows = q->size() / d;
    if (shared_q) {
        if (q_rows != tq) throw ShapeError("attention: shared q row count mismatch");
    } else if (q_rows != groups * tq) {
        throw ShapeError("attention: q rows != groups * tq");
    }

    auto out = make_tensor<S>({static_cast<int>(groups * tq), dv});
    // softmax weights per (group, query, key); group g starts at tq*offsets[g]
    auto alpha = std::make_shared<std::vector<S>>(static_cast<std::size_t>(tq * total_keys));
    const S sqrt_d = std::sqrt(static_cast<S>(d));

    const S* pq = q->ptr();
    const S* pk = k->ptr();
    const S* pv = v->ptr();
    S* po = out->ptr();
    parallel_for(0, groups, [&](std::int64_t glo, std::int64_t ghi) {
        std::vector<S> logits, kt;
        for (std::int64_t g = glo; g < ghi; ++g) {
            const std::int64_t k_lo = (*offsets)[g];
            const std::int64_t k_hi = (*offsets)[g + 1];
            const std::int64_t tk = k_hi - k_lo;
            logits.resize(static_cast<std::size_t>(tk));
            // keys transposed per group so logits run register-blocked; the
            // per-logit reduction stays in j (channel) order
            kt.resize(static_cast<std::size_t>(tk) * d);
            kern::transpose(pk + k_lo * d, kt.data(), tk, d);
            for (int i = 0; i < tq; ++i) {
                const S* qrow = pq + (shared_q ? i : g * tq + i) * d;
                kern::gemm_rows(qrow, kt.data(), static_cast<const S*>(nullptr),
                                logits.data(), 0, 1, d, static_cast<int>(tk));
                for (std::int64_t t = 0; t < tk; ++t) logits[static_cast<std::size_t>(t)] /= sqrt_d;
                S m = logits[0];
                for (std::int64_t t = 1; t < tk; ++t) m = logits[static_cast<std::size_t>(t)] > m ? logits[static_cast<std::size_t>(t)] : m;
                S z = 0;
                S* arow = alpha->data() + tq * k_lo + i * tk;
                for (std::int64_t t = 0; t < tk; ++t) {
                    const S e = std::exp(logits[static_cast<std::size_t>(t)] - m);
                    arow[t] = e;
                    z += e;
                }
                for (std::int64_t t = 0; t < tk; ++t) arow[t] /= z;
                S* orow = po + (g * tq + i) * dv;
                kern::gemm_rows(arow, pv + k_lo * dv, static_cast<const S*>(nullptr), orow,
                                0, 1, static_cast<int>(tk), dv);
            }
        }
    });

    return tape.record(out, {q, k, v}, "attention",
                       [q, k, v, out, offsets, alpha, tq, shared_q, groups, d,
                        dv, sqrt_d](Tape<S>& t) {
        const S* g_out = t.grad(out).data();
        const S* pq2 = q->ptr();
        const S* pk2 = k->ptr();
        const S* pv2 = v->ptr();
        const bool need_q = t.needs_grad(*q);
        const bool need_k = t.needs_grad(*k);
        const bool need_v = t.needs_grad(*v);
        if (!need_q && !need_k && !need_v) return;

        S* gq = need_q ? t.grad(q).data() : nullptr;
        S* gk = need_k ? t.grad(k).data() : nullptr;
        S* gv = need_v ? t.grad(v).data() : nullptr;

        // shared q accumulates across groups: per-chunk partials combined in
        // fixed chunk order so results do not depend on the thread count
        const std::int64_t chunk = 16;
        const std::int64_t n_chunks = (groups + chunk - 1) / chunk;
        std::vector<std::vector<S>> gq_parts;
        if (need_q && shared_q) {
            gq_parts.assign(static_cast<std::size_t>(n_chunks),
                            std::vector<S>(static_cast<std::size_t>(tq) * d, S(0)));
        }

        parallel_for(0, n_chunks, [&](std::int64_t clo, std::int64_t chi) {
            std::vector<S> dlog, vt, at;
            for (std::int64_t c = clo; c < chi; ++c) {
                S* gq_local = nullptr;
                if (need_q) {
                    gq_local = shared_q ? gq_parts[static_cast<std::size_t>(c)].data() : gq;
                }
                for (std::int64_t g = c * chunk;
                     g < ((c + 1) * chunk < groups ? (c + 1) * chunk : groups); ++g) {
                    const std::int64_t k_lo = (*offsets)[g];
                    const std::int64_t k_hi = (*offsets)[g + 1];
                    const std::int64_t tk = k_hi - k_lo;
                    dlog.resize(static_cast<std::size_t>(tk));
                    vt.resize(static_cast<std::size_t>(tk) * dv);
                    kern::transpose(pv2 + k_lo * dv, vt.data(), tk, dv);
                    for (int i = 0; i < tq; ++i) {
                        const S* arow = alpha->data() + tq * k_lo + i * tk;
                        const S* grow = g_out + (g * tq + i) * dv;
                        // d_alpha and softmax backward
                        kern::gemm_rows(grow, vt.data(), static_cast<const S*>(nullptr),
                                        dlog.data(), 0, 1, dv, static_cast<int>(tk));
                        S dot_ad = 0;
                        for (std::int64_t tt = 0; tt < tk; ++tt) dot_ad += arow[tt] * dlog[static_cast<std::size_t>(tt)];
                        for (std::int64_t tt = 0; tt < tk; ++tt) {
                            dlog[static_cast<std::size_t>(tt)] =
                                arow[tt] * (dlog[static_cast<std::size_t>(tt)] - dot_ad) / sqrt_d;
                        }
                        const S* qrow = pq2 + (shared_q ? i : g * tq + i) * d;
                        if (need_q) {
                            S* gq_row = gq_local + (shared_q ? i : g * tq + i) * d;
                            kern::gemm_rows_add(dlog.data(), pk2 + k_lo * d, gq_row, 0, 1,
                                                static_cast<int>(tk), d);
                        }
                        if (need_k) {
                            for (std::int64_t tt = 0; tt < tk; ++tt) {
                                const S dl = dlog[static_cast<std::size_t>(tt)];
                                S* gk_row = gk + (k_lo + tt) * d;
                                for (int j = 0; j < d; ++j) gk_row[j] += dl * qrow[j];
                            }
                        }
                    }
                    if (need_v) {
                        // dV = alpha^T . G over this group's queries
                        at.resize(static_cast<std::size_t>(tk) * tq);
                        kern::transpose(alpha->data() + tq * k_lo, at.data(), tq, tk);
                        kern::gemm_rows_add(at.data(), g_out + g * tq * dv, gv + k_lo * dv,
                                            0, tk, tq, dv);
                    }
                }
            }
        });

        if (need_q && shared_q) {
            for (std::int64_t c = 0; c < n_chunks; ++c) {
                const auto& part = gq_parts[static_cast<std::size_t>(c)];
                for (std::size_t i = 0; i < part.size(); ++i) gq[i] += part[i];
            }
        }
    });
}

inline std::shared_ptr<std::vector<std::int64_t>> uniform_offsets(std::int64_t groups,
                                                                  std::int64_t per_group) {
    auto off = std::make_shared<std::vector<std::int64_t>>();
    off->reserve(static_cast<std::size_t>(groups) + 1);
    for (std::int64_t g = 0; g <= groups; ++g) off->push_back(g * per_group);
    return off;
}

// Plain single-group attention: softmax(Q K^T / sqrt(d)) V.
template <class S>
TensorPtr<S> scaled_dot_attention(Tape<S>& tape, TensorPtr<S> q, TensorPtr<S> k,
                                  TensorPtr<S> v) {
    if (q->rank() != 2 || k->rank() != 2 || v->rank() != 2) {
        throw ShapeError("scaled_dot_attention: Q, K, V must be rank 2");
    }
    const std::int64_t n = k->dim(0);
    if (n == 0) throw EmptyKeySet("scaled_dot_attention: empty key set");
    if (k->dim(1) != q->dim(1)) throw ShapeError("scaled_dot_attention: Q/K dim mismatch");
    if (v->dim(0) != n) throw ShapeError("scaled_dot_attention: K/V row mismatch");
    auto off = uniform_offsets(1, n);
    return attention_grouped(tape, q, k, v,
                             std::shared_ptr<const std::vector<std::int64_t>>(off),
                             q->dim(0), /*shared_q=*/false);
}

} // namespace mcva
