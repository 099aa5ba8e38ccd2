#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "abnn/error.hpp"

namespace abnn {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& s) {
    std::size_t n = 1;
    for (std::size_t d : s) n *= d;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
    os << "]";
    return os.str();
}

/// Dense row-major n-d array. No views, no strides; data is always owned
/// and contiguous.
template <typename T>
struct Tensor {
    Shape shape;
    std::vector<T> data;

    Tensor() = default;

    explicit Tensor(Shape s) : shape(std::move(s)), data(shape_numel(shape), T(0)) {}

    Tensor(Shape s, std::vector<T> d) : shape(std::move(s)), data(std::move(d)) {
        if (shape_numel(shape) != data.size())
            fail(Errc::dimension_mismatch,
                 "tensor " + shape_str(shape) + " cannot hold " + std::to_string(data.size()) + " values");
    }

    static Tensor zeros(Shape s) { return Tensor(std::move(s)); }

    static Tensor full(Shape s, T v) {
        Tensor t(std::move(s));
        for (T& x : t.data) x = v;
        return t;
    }

    static Tensor identity(std::size_t n) {
        Tensor t(Shape{n, n});
        for (std::size_t i = 0; i < n; ++i) t.data[i * n + i] = T(1);
        return t;
    }

    std::size_t size() const { return data.size(); }
    std::size_t ndim() const { return shape.size(); }

    std::size_t dim(std::size_t i) const {
        if (i >= shape.size()) fail(Errc::index_out_of_range, "dim " + std::to_string(i));
        return shape[i];
    }

    T& operator[](std::size_t i) { return data[i]; }
    const T& operator[](std::size_t i) const { return data[i]; }

    T& at2(std::size_t i, std::size_t j) { return data[i * shape[1] + j]; }
    const T& at2(std::size_t i, std::size_t j) const { return data[i * shape[1] + j]; }

    // NCHW addressing for 4-d tensors
    T& at4(std::size_t n, std::size_t c, std::size_t h, std::size_t w) {
        return data[((n * shape[1] + c) * shape[2] + h) * shape[3] + w];
    }
    const T& at4(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
        return data[((n * shape[1] + c) * shape[2] + h) * shape[3] + w];
    }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }
};

template <typename T>
inline void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* where) {
    if (!a.same_shape(b))
        fail(Errc::dimension_mismatch,
             std::string(where) + ": " + shape_str(a.shape) + " vs " + shape_str(b.shape));
}

/// NaN policy: surface non-finite values immediately instead of letting
/// them propagate through training.
template <typename T>
inline void check_finite(const Tensor<T>& t, const char* where) {
    for (const T& x : t.data)
        if (!std::isfinite(static_cast<double>(x)))
            fail(Errc::numeric_error, std::string(where) + ": non-finite element");
}

template <typename T>
inline Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    require_same_shape(a, b, "add");
    Tensor<T> r(a.shape);
    for (std::size_t i = 0; i < a.size(); ++i) r.data[i] = a.data[i] + b.data[i];
    return r;
}

template <typename T>
inline Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
    require_same_shape(a, b, "sub");
    Tensor<T> r(a.shape);
    for (std::size_t i = 0; i < a.size(); ++i) r.data[i] = a.data[i] - b.data[i];
    return r;
}

template <typename T>
inline Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
    require_same_shape(a, b, "mul");
    Tensor<T> r(a.shape);
    for (std::size_t i = 0; i < a.size(); ++i) r.data[i] = a.data[i] * b.data[i];
    return r;
}

template <typename T>
inline Tensor<T> scale(const Tensor<T>& a, T k) {
    Tensor<T> r(a.shape);
    for (std::size_t i = 0; i < a.size(); ++i) r.data[i] = a.data[i] * k;
    return r;
}

template <typename T>
inline Tensor<T> exp_elem(const Tensor<T>& a) {
    Tensor<T> r(a.shape);
    for (std::size_t i = 0; i < a.size(); ++i) r.data[i] = std::exp(a.data[i]);
    return r;
}

template <typename T>
inline Tensor<T> sign_elem(const Tensor<T>& a) {
    Tensor<T> r(a.shape);
    for (std::size_t i = 0; i < a.size(); ++i)
        r.data[i] = a.data[i] > T(0) ? T(1) : (a.data[i] < T(0) ? T(-1) : T(0));
    return r;
}

template <typename T>
inline Tensor<T> clamp_elem(const Tensor<T>& a, T lo, T hi) {
    Tensor<T> r(a.shape);
    for (std::size_t i = 0; i < a.size(); ++i)
        r.data[i] = a.data[i] < lo ? lo : (a.data[i] > hi ? hi : a.data[i]);
    return r;
}

template <typename T>
inline T linf_dist(const Tensor<T>& a, const Tensor<T>& b) {
    require_same_shape(a, b, "linf_dist");
    T m = T(0);
    for (std::size_t i = 0; i < a.size(); ++i) {
        T d = std::abs(a.data[i] - b.data[i]);
        if (d > m) m = d;
    }
    return m;
}

template <typename T>
inline T max_abs(const Tensor<T>& a) {
    T m = T(0);
    for (const T& x : a.data) m = std::max(m, static_cast<T>(std::abs(x)));
    return m;
}

/// C = A·B for 2-d tensors, [m x k]·[k x n] -> [m x n].
template <typename T>
inline Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.ndim() != 2 || b.ndim() != 2)
        fail(Errc::dimension_mismatch, "matmul: operands must be 2-d");
    if (a.shape[1] != b.shape[0])
        fail(Errc::dimension_mismatch,
             "matmul: inner dims " + shape_str(a.shape) + " vs " + shape_str(b.shape));
    const std::size_t m = a.shape[0], k = a.shape[1], n = b.shape[1];
    Tensor<T> c(Shape{m, n});
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
            const T av = a.data[i * k + p];
            if (av == T(0)) continue;
            const T* brow = &b.data[p * n];
            T* crow = &c.data[i * n];
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
    return c;
}

/// C = A·Bᵀ, [m x k]·[n x k]ᵀ -> [m x n]. The linear-layer forward.
template <typename T>
inline Tensor<T> matmul_bt(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.ndim() != 2 || b.ndim() != 2 || a.shape[1] != b.shape[1])
        fail(Errc::dimension_mismatch,
             "matmul_bt: " + shape_str(a.shape) + " vs " + shape_str(b.shape));
    const std::size_t m = a.shape[0], k = a.shape[1], n = b.shape[0];
    Tensor<T> c(Shape{m, n});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            T s = T(0);
            const T* ar = &a.data[i * k];
            const T* br = &b.data[j * k];
            for (std::size_t p = 0; p < k; ++p) s += ar[p] * br[p];
            c.data[i * n + j] = s;
        }
    return c;
}

/// C = Aᵀ·B, [k x m]ᵀ·[k x n] -> [m x n]. Used by linear-layer weight grads.
template <typename T>
inline Tensor<T> matmul_at(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.ndim() != 2 || b.ndim() != 2 || a.shape[0] != b.shape[0])
        fail(Errc::dimension_mismatch,
             "matmul_at: " + shape_str(a.shape) + " vs " + shape_str(b.shape));
    const std::size_t k = a.shape[0], m = a.shape[1], n = b.shape[1];
    Tensor<T> c(Shape{m, n});
    for (std::size_t p = 0; p < k; ++p) {
        const T* ar = &a.data[p * m];
        const T* br = &b.data[p * n];
        for (std::size_t i = 0; i < m; ++i) {
            const T av = ar[i];
            if (av == T(0)) continue;
            T* crow = &c.data[i * n];
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * br[j];
        }
    }
    return c;
}

template <typename T, typename U>
inline Tensor<U> cast_tensor(const Tensor<T>& a) {
    Tensor<U> r(a.shape);
    for (std::size_t i = 0; i < a.size(); ++i) r.data[i] = static_cast<U>(a.data[i]);
    return r;
}

/// Output spatial extent of a conv with zero padding, floor semantics.
inline Shape conv2d_out_shape(const Shape& x, const Shape& w, std::size_t stride, std::size_t pad) {
    if (x.size() != 4 || w.size() != 4)
        fail(Errc::dimension_mismatch, "conv2d: need 4-d input and kernel");
    if (x[1] != w[1]) fail(Errc::dimension_mismatch, "conv2d: channel mismatch");
    if (stride == 0) fail(Errc::dimension_mismatch, "conv2d: stride must be >= 1");
    const std::size_t H = x[2], W = x[3], kh = w[2], kw = w[3];
    if (kh == 0 || kw == 0 || kh > H + 2 * pad || kw > W + 2 * pad)
        fail(Errc::dimension_mismatch, "conv2d: kernel larger than padded input");
    return Shape{x[0], w[0], (H + 2 * pad - kh) / stride + 1, (W + 2 * pad - kw) / stride + 1};
}

/// Cross-correlation, x:[B,Ci,H,W] * w:[Co,Ci,kh,kw] -> [B,Co,Ho,Wo].
template <typename T>
inline Tensor<T> conv2d_forward(const Tensor<T>& x, const Tensor<T>& w, std::size_t stride,
                                std::size_t pad) {
    Tensor<T> y(conv2d_out_shape(x.shape, w.shape, stride, pad));
    const std::size_t B = x.shape[0], Ci = x.shape[1], H = x.shape[2], W = x.shape[3];
    const std::size_t Co = w.shape[0], kh = w.shape[2], kw = w.shape[3];
    const std::size_t Ho = y.shape[2], Wo = y.shape[3];
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t co = 0; co < Co; ++co)
            for (std::size_t oh = 0; oh < Ho; ++oh)
                for (std::size_t ow = 0; ow < Wo; ++ow) {
                    T s = T(0);
                    for (std::size_t ci = 0; ci < Ci; ++ci)
                        for (std::size_t i = 0; i < kh; ++i)
                            for (std::size_t j = 0; j < kw; ++j) {
                                const std::ptrdiff_t hh =
                                    static_cast<std::ptrdiff_t>(oh * stride + i) - static_cast<std::ptrdiff_t>(pad);
                                const std::ptrdiff_t ww =
                                    static_cast<std::ptrdiff_t>(ow * stride + j) - static_cast<std::ptrdiff_t>(pad);
                                if (hh < 0 || ww < 0 || hh >= static_cast<std::ptrdiff_t>(H) ||
                                    ww >= static_cast<std::ptrdiff_t>(W))
                                    continue;
                                s += x.at4(b, ci, static_cast<std::size_t>(hh), static_cast<std::size_t>(ww)) *
                                     w.at4(co, ci, i, j);
                            }
                    y.at4(b, co, oh, ow) = s;
                }
    return y;
}

/// Row-wise softmax of a [B x C] tensor, max-stabilized.
template <typename T>
inline Tensor<T> softmax_rows(const Tensor<T>& z) {
    if (z.ndim() != 2) fail(Errc::dimension_mismatch, "softmax_rows: need 2-d logits");
    const std::size_t B = z.shape[0], C = z.shape[1];
    Tensor<T> p(z.shape);
    for (std::size_t i = 0; i < B; ++i) {
        const T* row = &z.data[i * C];
        T mx = row[0];
        for (std::size_t j = 1; j < C; ++j) mx = std::max(mx, row[j]);
        T denom = T(0);
        for (std::size_t j = 0; j < C; ++j) {
            const T e = std::exp(row[j] - mx);
            p.data[i * C + j] = e;
            denom += e;
        }
        for (std::size_t j = 0; j < C; ++j) p.data[i * C + j] /= denom;
    }
    return p;
}

/// Row-wise log-softmax of a [B x C] tensor.
template <typename T>
inline Tensor<T> log_softmax_rows(const Tensor<T>& z) {
    if (z.ndim() != 2) fail(Errc::dimension_mismatch, "log_softmax_rows: need 2-d logits");
    const std::size_t B = z.shape[0], C = z.shape[1];
    Tensor<T> p(z.shape);
    for (std::size_t i = 0; i < B; ++i) {
        const T* row = &z.data[i * C];
        T mx = row[0];
        for (std::size_t j = 1; j < C; ++j) mx = std::max(mx, row[j]);
        T denom = T(0);
        for (std::size_t j = 0; j < C; ++j) denom += std::exp(row[j] - mx);
        const T lse = mx + std::log(denom);
        for (std::size_t j = 0; j < C; ++j) p.data[i * C + j] = row[j] - lse;
    }
    return p;
}

} // namespace abnn
