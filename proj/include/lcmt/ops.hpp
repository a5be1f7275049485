#pragma once

// Forward + backward definitions for every op the transformer needs.
// Matrix products go through Eigen maps (single-threaded, deterministic);
// everything else is plain loops. Each op validates shapes up front and
// throws ShapeError with the offending dimensions.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <vector>

#include "lcmt/rng.hpp"
#include "lcmt/tensor.hpp"

namespace lcmt::ops {

namespace detail {

template <class S>
using EMat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class S>
using Map = Eigen::Map<EMat<S>>;
template <class S>
using CMap = Eigen::Map<const EMat<S>>;

template <class S>
void require_rank2(const Tensor<S>& t, const char* op) {
    if (t.rank() != 2)
        throw ShapeError(std::string(op) + ": expected rank-2 tensor, got " + shape_str(t.shape()));
}

template <class S>
void require_nonempty(const Tensor<S>& t, const char* op) {
    if (!t.defined() || t.numel() == 0)
        throw ShapeError(std::string(op) + ": empty tensor rejected");
}

}  // namespace detail

// c = a @ b, rank-2 only
template <class S>
Tensor<S> matmul(const Tensor<S>& a, const Tensor<S>& b) {
    detail::require_nonempty(a, "matmul");
    detail::require_nonempty(b, "matmul");
    detail::require_rank2(a, "matmul");
    detail::require_rank2(b, "matmul");
    const int m = a.shape()[0], k = a.shape()[1], k2 = b.shape()[0], n = b.shape()[1];
    if (k != k2)
        throw ShapeError("matmul: inner dimensions differ, " + shape_str(a.shape()) + " @ " +
                         shape_str(b.shape()));

    std::vector<S> out(static_cast<size_t>(m) * n);
    {
        detail::CMap<S> A(a.value().data(), m, k);
        detail::CMap<S> B(b.value().data(), k, n);
        detail::Map<S> C(out.data(), m, n);
        C.noalias() = A * B;
    }
    auto* ai = a.raw();
    auto* bi = b.raw();
    return lcmt::detail::make_node<S>(
        {m, n}, std::move(out), {a, b},
        [ai, bi, m, k, n](lcmt::detail::TensorImpl<S>& self) {
            detail::CMap<S> G(self.grad.data(), m, n);
            if (ai->needs_grad) {
                ai->ensure_grad();
                detail::Map<S> dA(ai->grad.data(), m, k);
                detail::CMap<S> B(bi->value.data(), k, n);
                dA.noalias() += G * B.transpose();
            }
            if (bi->needs_grad) {
                bi->ensure_grad();
                detail::Map<S> dB(bi->grad.data(), k, n);
                detail::CMap<S> A(ai->value.data(), m, k);
                dB.noalias() += A.transpose() * G;
            }
        });
}

// same-shape add, or [n,m] + [m] broadcast over rows
template <class S>
Tensor<S> add(const Tensor<S>& a, const Tensor<S>& b) {
    detail::require_nonempty(a, "add");
    detail::require_nonempty(b, "add");
    if (a.shape() == b.shape()) {
        std::vector<S> out(a.value());
        for (size_t i = 0; i < out.size(); ++i) out[i] += b.value()[i];
        auto* ai = a.raw();
        auto* bi = b.raw();
        return lcmt::detail::make_node<S>(
            a.shape(), std::move(out), {a, b}, [ai, bi](lcmt::detail::TensorImpl<S>& self) {
                if (ai->needs_grad) {
                    ai->ensure_grad();
                    for (size_t i = 0; i < self.grad.size(); ++i) ai->grad[i] += self.grad[i];
                }
                if (bi->needs_grad) {
                    bi->ensure_grad();
                    for (size_t i = 0; i < self.grad.size(); ++i) bi->grad[i] += self.grad[i];
                }
            });
    }
    if (a.rank() == 2 && b.rank() == 1 && a.shape()[1] == b.shape()[0]) {
        const int n = a.shape()[0], m = a.shape()[1];
        std::vector<S> out(a.value());
        for (int r = 0; r < n; ++r)
            for (int c = 0; c < m; ++c) out[static_cast<size_t>(r) * m + c] += b.value()[c];
        auto* ai = a.raw();
        auto* bi = b.raw();
        return lcmt::detail::make_node<S>(
            a.shape(), std::move(out), {a, b}, [ai, bi, n, m](lcmt::detail::TensorImpl<S>& self) {
                if (ai->needs_grad) {
                    ai->ensure_grad();
                    for (size_t i = 0; i < self.grad.size(); ++i) ai->grad[i] += self.grad[i];
                }
                if (bi->needs_grad) {
                    bi->ensure_grad();
                    for (int r = 0; r < n; ++r)
                        for (int c = 0; c < m; ++c)
                            bi->grad[c] += self.grad[static_cast<size_t>(r) * m + c];
                }
            });
    }
    throw ShapeError("add: incompatible shapes " + shape_str(a.shape()) + " + " +
                     shape_str(b.shape()));
}

template <class S>
Tensor<S> scale(const Tensor<S>& a, S c) {
    detail::require_nonempty(a, "scale");
    std::vector<S> out(a.value());
    for (auto& v : out) v *= c;
    auto* ai = a.raw();
    return lcmt::detail::make_node<S>(a.shape(), std::move(out), {a},
                                      [ai, c](lcmt::detail::TensorImpl<S>& self) {
                                          if (!ai->needs_grad) return;
                                          ai->ensure_grad();
                                          for (size_t i = 0; i < self.grad.size(); ++i)
                                              ai->grad[i] += c * self.grad[i];
                                      });
}

// elementwise product
template <class S>
Tensor<S> mul(const Tensor<S>& a, const Tensor<S>& b) {
    detail::require_nonempty(a, "mul");
    detail::require_nonempty(b, "mul");
    if (a.shape() != b.shape())
        throw ShapeError("mul: shapes differ, " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
    std::vector<S> out(a.value());
    for (size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
    auto* ai = a.raw();
    auto* bi = b.raw();
    return lcmt::detail::make_node<S>(
        a.shape(), std::move(out), {a, b}, [ai, bi](lcmt::detail::TensorImpl<S>& self) {
            if (ai->needs_grad) {
                ai->ensure_grad();
                for (size_t i = 0; i < self.grad.size(); ++i)
                    ai->grad[i] += bi->value[i] * self.grad[i];
            }
            if (bi->needs_grad) {
                bi->ensure_grad();
                for (size_t i = 0; i < self.grad.size(); ++i)
                    bi->grad[i] += ai->value[i] * self.grad[i];
            }
        });
}

template <class S>
Tensor<S> relu(const Tensor<S>& a) {
    detail::require_nonempty(a, "relu");
    std::vector<S> out(a.value());
    for (auto& v : out) v = v > S(0) ? v : S(0);
    auto* ai = a.raw();
    return lcmt::detail::make_node<S>(a.shape(), std::move(out), {a},
                                      [ai](lcmt::detail::TensorImpl<S>& self) {
                                          if (!ai->needs_grad) return;
                                          ai->ensure_grad();
                                          for (size_t i = 0; i < self.grad.size(); ++i)
                                              if (ai->value[i] > S(0)) ai->grad[i] += self.grad[i];
                                      });
}

template <class S>
Tensor<S> transpose(const Tensor<S>& a) {
    detail::require_nonempty(a, "transpose");
    detail::require_rank2(a, "transpose");
    const int n = a.shape()[0], m = a.shape()[1];
    std::vector<S> out(a.value().size());
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < m; ++c)
            out[static_cast<size_t>(c) * n + r] = a.value()[static_cast<size_t>(r) * m + c];
    auto* ai = a.raw();
    return lcmt::detail::make_node<S>(
        {m, n}, std::move(out), {a}, [ai, n, m](lcmt::detail::TensorImpl<S>& self) {
            if (!ai->needs_grad) return;
            ai->ensure_grad();
            for (int r = 0; r < m; ++r)
                for (int c = 0; c < n; ++c)
                    ai->grad[static_cast<size_t>(c) * m + r] +=
                        self.grad[static_cast<size_t>(r) * n + c];
        });
}

// concatenate rank-2 tensors along the last dim
template <class S>
Tensor<S> concat_last_dim(const std::vector<Tensor<S>>& parts) {
    if (parts.empty()) throw ShapeError("concat_last_dim: no inputs");
    const int n = parts[0].shape()[0];
    int total = 0;
    for (const auto& p : parts) {
        detail::require_nonempty(p, "concat_last_dim");
        detail::require_rank2(p, "concat_last_dim");
        if (p.shape()[0] != n)
            throw ShapeError("concat_last_dim: row counts differ, " + shape_str(parts[0].shape()) +
                             " vs " + shape_str(p.shape()));
        total += p.shape()[1];
    }
    std::vector<S> out(static_cast<size_t>(n) * total);
    int off = 0;
    for (const auto& p : parts) {
        const int w = p.shape()[1];
        for (int r = 0; r < n; ++r)
            std::copy_n(p.value().data() + static_cast<size_t>(r) * w, w,
                        out.data() + static_cast<size_t>(r) * total + off);
        off += w;
    }
    std::vector<int> widths;
    std::vector<lcmt::detail::TensorImpl<S>*> impls;
    for (const auto& p : parts) {
        widths.push_back(p.shape()[1]);
        impls.push_back(p.raw());
    }
    return lcmt::detail::make_node<S>(
        {n, total}, std::move(out), parts,
        [impls, widths, n, total](lcmt::detail::TensorImpl<S>& self) {
            int off = 0;
            for (size_t i = 0; i < impls.size(); ++i) {
                const int w = widths[i];
                if (impls[i]->needs_grad) {
                    impls[i]->ensure_grad();
                    for (int r = 0; r < n; ++r)
                        for (int c = 0; c < w; ++c)
                            impls[i]->grad[static_cast<size_t>(r) * w + c] +=
                                self.grad[static_cast<size_t>(r) * total + off + c];
                }
                off += w;
            }
        });
}

// columns [start, start+len) of a rank-2 tensor
template <class S>
Tensor<S> slice_last_dim(const Tensor<S>& a, int start, int len) {
    detail::require_nonempty(a, "slice_last_dim");
    detail::require_rank2(a, "slice_last_dim");
    const int n = a.shape()[0], m = a.shape()[1];
    if (start < 0 || len <= 0 || start + len > m)
        throw ShapeError("slice_last_dim: range [" + std::to_string(start) + ", " +
                         std::to_string(start + len) + ") out of " + shape_str(a.shape()));
    std::vector<S> out(static_cast<size_t>(n) * len);
    for (int r = 0; r < n; ++r)
        std::copy_n(a.value().data() + static_cast<size_t>(r) * m + start, len,
                    out.data() + static_cast<size_t>(r) * len);
    auto* ai = a.raw();
    return lcmt::detail::make_node<S>(
        {n, len}, std::move(out), {a}, [ai, start, len, n, m](lcmt::detail::TensorImpl<S>& self) {
            if (!ai->needs_grad) return;
            ai->ensure_grad();
            for (int r = 0; r < n; ++r)
                for (int c = 0; c < len; ++c)
                    ai->grad[static_cast<size_t>(r) * m + start + c] +=
                        self.grad[static_cast<size_t>(r) * len + c];
        });
}

// row-wise softmax over the last dim, max-subtracted
template <class S>
Tensor<S> softmax(const Tensor<S>& a) {
    detail::require_nonempty(a, "softmax");
    detail::require_rank2(a, "softmax");
    const int n = a.shape()[0], m = a.shape()[1];
    std::vector<S> out(a.value().size());
    for (int r = 0; r < n; ++r) {
        const S* x = a.value().data() + static_cast<size_t>(r) * m;
        S* y = out.data() + static_cast<size_t>(r) * m;
        S mx = x[0];
        for (int c = 1; c < m; ++c) mx = std::max(mx, x[c]);
        S sum = S(0);
        for (int c = 0; c < m; ++c) {
            y[c] = std::exp(x[c] - mx);
            sum += y[c];
        }
        for (int c = 0; c < m; ++c) y[c] /= sum;
    }
    auto* ai = a.raw();
    return lcmt::detail::make_node<S>(
        a.shape(), std::move(out), {a}, [ai, n, m](lcmt::detail::TensorImpl<S>& self) {
            if (!ai->needs_grad) return;
            ai->ensure_grad();
            for (int r = 0; r < n; ++r) {
                const S* y = self.value.data() + static_cast<size_t>(r) * m;
                const S* dy = self.grad.data() + static_cast<size_t>(r) * m;
                S dot = S(0);
                for (int c = 0; c < m; ++c) dot += y[c] * dy[c];
                S* dx = ai->grad.data() + static_cast<size_t>(r) * m;
                for (int c = 0; c < m; ++c) dx[c] += y[c] * (dy[c] - dot);
            }
        });
}

template <class S>
Tensor<S> log_softmax(const Tensor<S>& a) {
    detail::require_nonempty(a, "log_softmax");
    detail::require_rank2(a, "log_softmax");
    const int n = a.shape()[0], m = a.shape()[1];
    std::vector<S> out(a.value().size());
    for (int r = 0; r < n; ++r) {
        const S* x = a.value().data() + static_cast<size_t>(r) * m;
        S* y = out.data() + static_cast<size_t>(r) * m;
        S mx = x[0];
        for (int c = 1; c < m; ++c) mx = std::max(mx, x[c]);
        S sum = S(0);
        for (int c = 0; c < m; ++c) sum += std::exp(x[c] - mx);
        const S lse = mx + std::log(sum);
        for (int c = 0; c < m; ++c) y[c] = x[c] - lse;
    }
    auto* ai = a.raw();
    return lcmt::detail::make_node<S>(
        a.shape(), std::move(out), {a}, [ai, n, m](lcmt::detail::TensorImpl<S>& self) {
            if (!ai->needs_grad) return;
            ai->ensure_grad();
            for (int r = 0; r < n; ++r) {
                const S* y = self.value.data() + static_cast<size_t>(r) * m;
                const S* dy = self.grad.data() + static_cast<size_t>(r) * m;
                S total = S(0);
                for (int c = 0; c < m; ++c) total += dy[c];
                S* dx = ai->grad.data() + static_cast<size_t>(r) * m;
                for (int c = 0; c < m; ++c) dx[c] += dy[c] - std::exp(y[c]) * total;
            }
        });
}

// row-wise layer norm with learned gain/bias over the last dim
template <class S>
Tensor<S> layer_norm(const Tensor<S>& a, const Tensor<S>& gain, const Tensor<S>& bias,
                     S eps = S(1e-5)) {
    detail::require_nonempty(a, "layer_norm");
    detail::require_rank2(a, "layer_norm");
    const int n = a.shape()[0], m = a.shape()[1];
    if (gain.rank() != 1 || gain.shape()[0] != m || bias.rank() != 1 || bias.shape()[0] != m)
        throw ShapeError("layer_norm: gain/bias must be [" + std::to_string(m) + "], got " +
                         shape_str(gain.shape()) + " / " + shape_str(bias.shape()));

    std::vector<S> out(a.value().size());
    std::vector<S> xhat(a.value().size());
    std::vector<S> inv_std(n);
    for (int r = 0; r < n; ++r) {
        const S* x = a.value().data() + static_cast<size_t>(r) * m;
        S mean = S(0);
        for (int c = 0; c < m; ++c) mean += x[c];
        mean /= S(m);
        S var = S(0);
        for (int c = 0; c < m; ++c) var += (x[c] - mean) * (x[c] - mean);
        var /= S(m);
        const S is = S(1) / std::sqrt(var + eps);
        inv_std[r] = is;
        for (int c = 0; c < m; ++c) {
            const size_t k = static_cast<size_t>(r) * m + c;
            xhat[k] = (x[c] - mean) * is;
            out[k] = xhat[k] * gain.value()[c] + bias.value()[c];
        }
    }
    auto* ai = a.raw();
    auto* gi = gain.raw();
    auto* bi = bias.raw();
    return lcmt::detail::make_node<S>(
        a.shape(), std::move(out), {a, gain, bias},
        [ai, gi, bi, n, m, xhat = std::move(xhat),
         inv_std = std::move(inv_std)](lcmt::detail::TensorImpl<S>& self) {
            for (int r = 0; r < n; ++r) {
                const size_t base = static_cast<size_t>(r) * m;
                const S* dy = self.grad.data() + base;
                const S* xh = xhat.data() + base;
                if (gi->needs_grad) {
                    gi->ensure_grad();
                    for (int c = 0; c < m; ++c) gi->grad[c] += dy[c] * xh[c];
                }
                if (bi->needs_grad) {
                    bi->ensure_grad();
                    for (int c = 0; c < m; ++c) bi->grad[c] += dy[c];
                }
                if (ai->needs_grad) {
                    ai->ensure_grad();
                    // dxhat = dy * gain; dx = (dxhat - mean(dxhat) - xhat*mean(dxhat*xhat)) * inv_std
                    S sum_dxh = S(0), sum_dxh_xh = S(0);
                    for (int c = 0; c < m; ++c) {
                        const S dxh = dy[c] * gi->value[c];
                        sum_dxh += dxh;
                        sum_dxh_xh += dxh * xh[c];
                    }
                    const S inv_m = S(1) / S(m);
                    for (int c = 0; c < m; ++c) {
                        const S dxh = dy[c] * gi->value[c];
                        ai->grad[base + c] +=
                            (dxh - sum_dxh * inv_m - xh[c] * sum_dxh_xh * inv_m) * inv_std[r];
                    }
                }
            }
        });
}

// rows of `table` selected by ids; grad scatters back into the table
template <class S>
Tensor<S> embedding_lookup(const Tensor<S>& table, const std::vector<int>& ids) {
    detail::require_nonempty(table, "embedding_lookup");
    detail::require_rank2(table, "embedding_lookup");
    if (ids.empty()) throw ShapeError("embedding_lookup: empty id list rejected");
    const int v = table.shape()[0], d = table.shape()[1];
    for (int id : ids)
        if (id < 0 || id >= v)
            throw ShapeError("embedding_lookup: id " + std::to_string(id) + " out of table " +
                             shape_str(table.shape()));
    const int n = static_cast<int>(ids.size());
    std::vector<S> out(static_cast<size_t>(n) * d);
    for (int r = 0; r < n; ++r)
        std::copy_n(table.value().data() + static_cast<size_t>(ids[r]) * d, d,
                    out.data() + static_cast<size_t>(r) * d);
    auto* ti = table.raw();
    return lcmt::detail::make_node<S>(
        {n, d}, std::move(out), {table}, [ti, ids, n, d](lcmt::detail::TensorImpl<S>& self) {
            if (!ti->needs_grad) return;
            ti->ensure_grad();
            for (int r = 0; r < n; ++r)
                for (int c = 0; c < d; ++c)
                    ti->grad[static_cast<size_t>(ids[r]) * d + c] +=
                        self.grad[static_cast<size_t>(r) * d + c];
        });
}

// x @ W + b
template <class S>
Tensor<S> linear(const Tensor<S>& x, const Tensor<S>& w, const Tensor<S>& b) {
    return add(matmul(x, w), b);
}

// inverted dropout; identity when not training. p in [0, 1).
template <class S>
Tensor<S> dropout(const Tensor<S>& x, double p, Rng& rng, bool training) {
    detail::require_nonempty(x, "dropout");
    if (p < 0.0 || p >= 1.0)
        throw Error("dropout: p must be in [0, 1), got " + std::to_string(p));
    if (!training || p == 0.0) return x;
    const S keep_scale = S(1.0 / (1.0 - p));
    std::vector<S> mask(x.numel());
    for (auto& m : mask) m = rng.uniform() < p ? S(0) : keep_scale;
    std::vector<S> out(x.value());
    for (size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
    auto* xi = x.raw();
    return lcmt::detail::make_node<S>(x.shape(), std::move(out), {x},
                                      [xi, mask = std::move(mask)](lcmt::detail::TensorImpl<S>& self) {
                                          if (!xi->needs_grad) return;
                                          xi->ensure_grad();
                                          for (size_t i = 0; i < self.grad.size(); ++i)
                                              xi->grad[i] += mask[i] * self.grad[i];
                                      });
}

// summed token-level cross entropy of row-wise logits against target ids
template <class S>
Tensor<S> cross_entropy(const Tensor<S>& logits, const std::vector<int>& targets) {
    detail::require_nonempty(logits, "cross_entropy");
    detail::require_rank2(logits, "cross_entropy");
    const int n = logits.shape()[0], m = logits.shape()[1];
    if (static_cast<int>(targets.size()) != n)
        throw ShapeError("cross_entropy: " + std::to_string(targets.size()) + " targets for " +
                         std::to_string(n) + " rows");
    for (int t : targets)
        if (t < 0 || t >= m)
            throw ShapeError("cross_entropy: target id " + std::to_string(t) + " out of vocab " +
                             std::to_string(m));

    std::vector<S> probs(logits.value().size());
    S total = S(0);
    for (int r = 0; r < n; ++r) {
        const S* x = logits.value().data() + static_cast<size_t>(r) * m;
        S* pr = probs.data() + static_cast<size_t>(r) * m;
        S mx = x[0];
        for (int c = 1; c < m; ++c) mx = std::max(mx, x[c]);
        S sum = S(0);
        for (int c = 0; c < m; ++c) {
            pr[c] = std::exp(x[c] - mx);
            sum += pr[c];
        }
        for (int c = 0; c < m; ++c) pr[c] /= sum;
        total += mx + std::log(sum) - x[targets[r]];
    }
    auto* li = logits.raw();
    return lcmt::detail::make_node<S>(
        {1}, {total}, {logits},
        [li, targets, n, m, probs = std::move(probs)](lcmt::detail::TensorImpl<S>& self) {
            if (!li->needs_grad) return;
            li->ensure_grad();
            const S g = self.grad[0];
            for (int r = 0; r < n; ++r) {
                const size_t base = static_cast<size_t>(r) * m;
                for (int c = 0; c < m; ++c) li->grad[base + c] += g * probs[base + c];
                li->grad[base + targets[r]] -= g;
            }
        });
}

template <class S>
Tensor<S> sum_all(const Tensor<S>& a) {
    detail::require_nonempty(a, "sum_all");
    S total = S(0);
    for (S v : a.value()) total += v;
    auto* ai = a.raw();
    return lcmt::detail::make_node<S>({1}, {total}, {a},
                                      [ai](lcmt::detail::TensorImpl<S>& self) {
                                          if (!ai->needs_grad) return;
                                          ai->ensure_grad();
                                          for (auto& g : ai->grad) g += self.grad[0];
                                      });
}

}  // namespace lcmt::ops
