#pragma once

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "abnn/tensor.hpp"

namespace abnn {

/// Handle to a node on a GradTape.
struct Var {
    std::int32_t id = -1;
    bool valid() const { return id >= 0; }
};

/// Reverse-mode tape over dense tensors. Forward calls append primitive
/// records; backward() replays them in exact reverse order, accumulating
/// into parent gradients. Single-owner, single-threaded.
template <typename T>
class Tape {
public:
    Var leaf(Tensor<T> value, bool requires_grad) {
        check_finite(value, "leaf");
        return push(std::move(value), requires_grad, {});
    }

    Var constant(Tensor<T> value) { return leaf(std::move(value), false); }

    const Tensor<T>& value(Var v) const { return nodes_[check(v)].value; }

    /// Gradient of the last backward() root w.r.t. node v.
    const Tensor<T>& grad(Var v) const {
        const Node& n = nodes_[check(v)];
        if (n.grad.size() == 0)
            fail(Errc::numeric_error, "grad requested before backward, or for a no-grad node");
        return n.grad;
    }

    std::size_t size() const { return nodes_.size(); }

    // ---- primitive operations ----

    /// y = a + b (same shape)
    Var add(Var a, Var b) {
        Tensor<T> v = abnn::add(value(a), value(b));
        check_finite(v, "add");
        Var out = push(std::move(v), requires(a) || requires(b), {a, b});
        set_backward(out, [a, b](Tape& t, const Tensor<T>& g) {
            t.accumulate(a, g);
            t.accumulate(b, g);
        });
        return out;
    }

    /// y = a - b
    Var sub(Var a, Var b) {
        Tensor<T> v = abnn::sub(value(a), value(b));
        check_finite(v, "sub");
        Var out = push(std::move(v), requires(a) || requires(b), {a, b});
        set_backward(out, [a, b](Tape& t, const Tensor<T>& g) {
            t.accumulate(a, g);
            t.accumulate(b, scale(g, T(-1)));
        });
        return out;
    }

    /// y = a ⊙ b elementwise
    Var mul(Var a, Var b) {
        Tensor<T> v = abnn::mul(value(a), value(b));
        check_finite(v, "mul");
        Var out = push(std::move(v), requires(a) || requires(b), {a, b});
        set_backward(out, [a, b](Tape& t, const Tensor<T>& g) {
            t.accumulate(a, abnn::mul(g, t.value(b)));
            t.accumulate(b, abnn::mul(g, t.value(a)));
        });
        return out;
    }

    /// y = k · a
    Var scale_by(Var a, T k) {
        Tensor<T> v = scale(value(a), k);
        check_finite(v, "scale");
        Var out = push(std::move(v), requires(a), {a});
        set_backward(out, [a, k](Tape& t, const Tensor<T>& g) { t.accumulate(a, scale(g, k)); });
        return out;
    }

    /// y = Σᵢ aᵢ (scalar)
    Var sum(Var a) {
        T s = T(0);
        for (const T& x : value(a).data) s += x;
        Tensor<T> v(Shape{1});
        v.data[0] = s;
        check_finite(v, "sum");
        Var out = push(std::move(v), requires(a), {a});
        set_backward(out, [a](Tape& t, const Tensor<T>& g) {
            t.accumulate(a, Tensor<T>::full(t.value(a).shape, g.data[0]));
        });
        return out;
    }

    /// y = max(a, 0)
    Var relu(Var a) {
        const Tensor<T>& x = value(a);
        Tensor<T> v(x.shape);
        for (std::size_t i = 0; i < x.size(); ++i) v.data[i] = x.data[i] > T(0) ? x.data[i] : T(0);
        Var out = push(std::move(v), requires(a), {a});
        set_backward(out, [a](Tape& t, const Tensor<T>& g) {
            const Tensor<T>& x2 = t.value(a);
            Tensor<T> gx(x2.shape);
            for (std::size_t i = 0; i < x2.size(); ++i)
                gx.data[i] = x2.data[i] > T(0) ? g.data[i] : T(0);
            t.accumulate(a, std::move(gx));
        });
        return out;
    }

    /// C = A·B
    Var matmul(Var a, Var b) {
        Tensor<T> v = abnn::matmul(value(a), value(b));
        check_finite(v, "matmul");
        Var out = push(std::move(v), requires(a) || requires(b), {a, b});
        set_backward(out, [a, b](Tape& t, const Tensor<T>& g) {
            if (t.requires(a)) t.accumulate(a, matmul_bt(g, t.value(b)));
            if (t.requires(b)) t.accumulate(b, matmul_at(t.value(a), g));
        });
        return out;
    }

    /// y = x·Wᵀ with x:[B x in], W:[out x in]  (linear layer, no bias)
    Var linear(Var x, Var w) {
        Tensor<T> v = matmul_bt(value(x), value(w));
        check_finite(v, "linear");
        Var out = push(std::move(v), requires(x) || requires(w), {x, w});
        set_backward(out, [x, w](Tape& t, const Tensor<T>& g) {
            if (t.requires(x)) t.accumulate(x, abnn::matmul(g, t.value(w)));
            if (t.requires(w)) t.accumulate(w, matmul_at(g, t.value(x)));
        });
        return out;
    }

    /// y = x + b with x:[B x n], b:[n] broadcast across rows
    Var add_rowvec(Var x, Var b) {
        const Tensor<T>& xv = value(x);
        const Tensor<T>& bv = value(b);
        if (xv.ndim() != 2 || bv.size() != xv.shape[1])
            fail(Errc::dimension_mismatch, "add_rowvec: " + shape_str(xv.shape) + " + " + shape_str(bv.shape));
        Tensor<T> v(xv.shape);
        const std::size_t B = xv.shape[0], n = xv.shape[1];
        for (std::size_t i = 0; i < B; ++i)
            for (std::size_t j = 0; j < n; ++j) v.data[i * n + j] = xv.data[i * n + j] + bv.data[j];
        check_finite(v, "add_rowvec");
        Var out = push(std::move(v), requires(x) || requires(b), {x, b});
        set_backward(out, [x, b, B, n](Tape& t, const Tensor<T>& g) {
            t.accumulate(x, g);
            if (t.requires(b)) {
                Tensor<T> gb(Shape{n});
                for (std::size_t i = 0; i < B; ++i)
                    for (std::size_t j = 0; j < n; ++j) gb.data[j] += g.data[i * n + j];
                t.accumulate(b, std::move(gb));
            }
        });
        return out;
    }

    /// w = mu + exp(s) ⊙ eps, eps held constant
    Var reparam(Var mu, Var s, const Tensor<T>& eps) {
        const Tensor<T>& m = value(mu);
        const Tensor<T>& sv = value(s);
        require_same_shape(m, sv, "reparam");
        require_same_shape(m, eps, "reparam eps");
        Tensor<T> delta(m.shape);
        for (std::size_t i = 0; i < m.size(); ++i)
            delta.data[i] = std::exp(sv.data[i]) * eps.data[i];
        Tensor<T> v = abnn::add(m, delta);
        check_finite(v, "reparam");
        Var out = push(std::move(v), requires(mu) || requires(s), {mu, s});
        set_backward(out, [mu, s, delta = std::move(delta)](Tape& t, const Tensor<T>& g) {
            t.accumulate(mu, g);
            if (t.requires(s)) t.accumulate(s, abnn::mul(g, delta));
        });
        return out;
    }

    /// reshape without data movement
    Var reshape(Var a, Shape shape) {
        const Tensor<T>& x = value(a);
        if (shape_numel(shape) != x.size())
            fail(Errc::dimension_mismatch, "reshape to " + shape_str(shape));
        Tensor<T> v(shape, x.data);
        Var out = push(std::move(v), requires(a), {a});
        set_backward(out, [a](Tape& t, const Tensor<T>& g) {
            t.accumulate(a, Tensor<T>(t.value(a).shape, g.data));
        });
        return out;
    }

    /// flatten to [B x rest]
    Var flatten(Var a) {
        const Tensor<T>& x = value(a);
        if (x.ndim() < 1) fail(Errc::dimension_mismatch, "flatten: scalar input");
        return reshape(a, Shape{x.shape[0], x.size() / x.shape[0]});
    }

    /// Cross-correlation, x:[B,Ci,H,W], w:[Co,Ci,kh,kw], zero padding.
    Var conv2d(Var x, Var w, std::size_t stride, std::size_t pad) {
        Tensor<T> v = conv2d_forward(value(x), value(w), stride, pad);
        check_finite(v, "conv2d");
        Var out = push(std::move(v), requires(x) || requires(w), {x, w});
        set_backward(out, [x, w, stride, pad](Tape& t, const Tensor<T>& g) {
            const Tensor<T>& xv2 = t.value(x);
            const Tensor<T>& wv2 = t.value(w);
            const std::size_t B = xv2.shape[0], Ci = xv2.shape[1], H = xv2.shape[2], W = xv2.shape[3];
            const std::size_t Co = wv2.shape[0], kh = wv2.shape[2], kw = wv2.shape[3];
            const std::size_t Ho = g.shape[2], Wo = g.shape[3];
            Tensor<T> gx(xv2.shape);
            Tensor<T> gw(wv2.shape);
            const bool need_x = t.requires(x), need_w = t.requires(w);
            for (std::size_t b = 0; b < B; ++b)
                for (std::size_t co = 0; co < Co; ++co)
                    for (std::size_t oh = 0; oh < Ho; ++oh)
                        for (std::size_t ow = 0; ow < Wo; ++ow) {
                            const T go = g.at4(b, co, oh, ow);
                            if (go == T(0)) continue;
                            for (std::size_t ci = 0; ci < Ci; ++ci)
                                for (std::size_t i = 0; i < kh; ++i)
                                    for (std::size_t j = 0; j < kw; ++j) {
                                        const std::ptrdiff_t hh = static_cast<std::ptrdiff_t>(oh * stride + i) - static_cast<std::ptrdiff_t>(pad);
                                        const std::ptrdiff_t ww = static_cast<std::ptrdiff_t>(ow * stride + j) - static_cast<std::ptrdiff_t>(pad);
                                        if (hh < 0 || ww < 0 || hh >= static_cast<std::ptrdiff_t>(H) || ww >= static_cast<std::ptrdiff_t>(W))
                                            continue;
                                        const auto h2 = static_cast<std::size_t>(hh), w2 = static_cast<std::size_t>(ww);
                                        if (need_x) gx.at4(b, ci, h2, w2) += go * wv2.at4(co, ci, i, j);
                                        if (need_w) gw.at4(co, ci, i, j) += go * xv2.at4(b, ci, h2, w2);
                                    }
                        }
            if (need_x) t.accumulate(x, std::move(gx));
            if (need_w) t.accumulate(w, std::move(gw));
        });
        return out;
    }

    /// Mean cross-entropy of row-softmax(logits) against integer labels.
    /// Numerically stabilized by row-max subtraction.
    Var softmax_cross_entropy(Var logits, const std::vector<int>& labels) {
        const Tensor<T>& z = value(logits);
        if (z.ndim() != 2) fail(Errc::dimension_mismatch, "softmax_cross_entropy: logits must be 2-d");
        const std::size_t B = z.shape[0], C = z.shape[1];
        if (C < 2) fail(Errc::dimension_mismatch, "softmax_cross_entropy: need >= 2 classes");
        if (labels.size() != B)
            fail(Errc::dimension_mismatch, "softmax_cross_entropy: batch/label count mismatch");
        for (int y : labels)
            if (y < 0 || static_cast<std::size_t>(y) >= C)
                fail(Errc::index_out_of_range, "label " + std::to_string(y) + " for " + std::to_string(C) + " classes");

        Tensor<T> probs(z.shape);
        T loss = T(0);
        for (std::size_t i = 0; i < B; ++i) {
            const T* row = &z.data[i * C];
            T mx = row[0];
            for (std::size_t j = 1; j < C; ++j) mx = std::max(mx, row[j]);
            T denom = T(0);
            for (std::size_t j = 0; j < C; ++j) {
                const T e = std::exp(row[j] - mx);
                probs.data[i * C + j] = e;
                denom += e;
            }
            for (std::size_t j = 0; j < C; ++j) probs.data[i * C + j] /= denom;
            loss += std::log(denom) - (row[static_cast<std::size_t>(labels[i])] - mx);
        }
        loss /= static_cast<T>(B);
        Tensor<T> v(Shape{1});
        v.data[0] = loss;
        check_finite(v, "softmax_cross_entropy");
        Var out = push(std::move(v), requires(logits), {logits});
        set_backward(out, [logits, labels, probs = std::move(probs), B, C](Tape& t, const Tensor<T>& g) {
            Tensor<T> gz = probs;
            for (std::size_t i = 0; i < B; ++i) gz.data[i * C + static_cast<std::size_t>(labels[i])] -= T(1);
            const T k = g.data[0] / static_cast<T>(B);
            for (T& x : gz.data) x *= k;
            t.accumulate(logits, std::move(gz));
        });
        return out;
    }

    /// Σᵢ KL(N(muᵢ, exp(2 sᵢ)) ‖ N(0, σ₀²)), closed form (scalar node).
    Var gaussian_prior_kl(Var mu, Var s, T sigma0) {
        if (sigma0 <= T(0)) fail(Errc::domain_error, "gaussian_prior_kl: sigma0 must be positive");
        const Tensor<T>& m = value(mu);
        const Tensor<T>& sv = value(s);
        require_same_shape(m, sv, "gaussian_prior_kl");
        const T log_s0 = std::log(sigma0);
        const T inv_2var = T(1) / (T(2) * sigma0 * sigma0);
        T kl = T(0);
        for (std::size_t i = 0; i < m.size(); ++i) {
            const T e2s = std::exp(T(2) * sv.data[i]);
            kl += log_s0 - sv.data[i] + (e2s + m.data[i] * m.data[i]) * inv_2var - T(0.5);
        }
        Tensor<T> v(Shape{1});
        v.data[0] = kl;
        check_finite(v, "gaussian_prior_kl");
        Var out = push(std::move(v), requires(mu) || requires(s), {mu, s});
        set_backward(out, [mu, s, sigma0](Tape& t, const Tensor<T>& g) {
            const Tensor<T>& m2 = t.value(mu);
            const Tensor<T>& s2 = t.value(s);
            const T k = g.data[0];
            const T inv_var = T(1) / (sigma0 * sigma0);
            if (t.requires(mu)) {
                Tensor<T> gm(m2.shape);
                for (std::size_t i = 0; i < m2.size(); ++i) gm.data[i] = k * m2.data[i] * inv_var;
                t.accumulate(mu, std::move(gm));
            }
            if (t.requires(s)) {
                Tensor<T> gs(s2.shape);
                for (std::size_t i = 0; i < s2.size(); ++i)
                    gs.data[i] = k * (std::exp(T(2) * s2.data[i]) * inv_var - T(1));
                t.accumulate(s, std::move(gs));
            }
        });
        return out;
    }

    // ---- reverse sweep ----

    /// Backward from a scalar root (seed gradient 1).
    void backward(Var root) {
        const Tensor<T>& v = value(root);
        if (v.size() != 1) fail(Errc::dimension_mismatch, "backward: root must be scalar");
        backward(root, Tensor<T>::full(Shape{1}, T(1)));
    }

    /// Backward with an explicit output gradient.
    void backward(Var root, Tensor<T> seed) {
        const std::int32_t r = check(root);
        require_same_shape(value(root), seed, "backward seed");
        for (Node& n : nodes_) n.grad = Tensor<T>();
        nodes_[r].grad = std::move(seed);
        for (std::int32_t i = r; i >= 0; --i) {
            Node& n = nodes_[i];
            if (!n.requires_grad || !n.backward_fn || n.grad.size() == 0) continue;
            n.backward_fn(*this, n.grad);
        }
    }

    bool requires(Var v) const { return nodes_[check(v)].requires_grad; }

    /// g += delta, allocating the gradient on first touch. Only called
    /// from backward closures.
    void accumulate(Var v, Tensor<T> delta) {
        Node& n = nodes_[check(v)];
        if (!n.requires_grad) return;
        check_finite(delta, "gradient");
        if (n.grad.size() == 0) {
            require_same_shape(n.value, delta, "accumulate");
            n.grad = std::move(delta);
        } else {
            require_same_shape(n.grad, delta, "accumulate");
            for (std::size_t i = 0; i < n.grad.size(); ++i) n.grad.data[i] += delta.data[i];
        }
    }

private:
    struct Node {
        Tensor<T> value;
        Tensor<T> grad;
        bool requires_grad = false;
        std::function<void(Tape&, const Tensor<T>&)> backward_fn;
    };

    std::vector<Node> nodes_;

    Var push(Tensor<T> value, bool requires_grad, std::initializer_list<Var> parents) {
        bool req = requires_grad;
        for (Var p : parents) req = req || requires(p);
        Node n;
        n.value = std::move(value);
        n.requires_grad = req;
        nodes_.push_back(std::move(n));
        return Var{static_cast<std::int32_t>(nodes_.size() - 1)};
    }

    void set_backward(Var v, std::function<void(Tape&, const Tensor<T>&)> fn) {
        Node& n = nodes_[check(v)];
        if (n.requires_grad) n.backward_fn = std::move(fn);
    }

    std::int32_t check(Var v) const {
        if (!v.valid() || static_cast<std::size_t>(v.id) >= nodes_.size())
            fail(Errc::index_out_of_range, "invalid tape var");
        return v.id;
    }
};

} // namespace abnn
