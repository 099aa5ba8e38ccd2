#pragma once

#include <cmath>
#include <utility>

#include "abnn/rng.hpp"
#include "abnn/tensor.hpp"

namespace abnn {

/// Factorized Gaussian posterior N(mu, exp(2s)) per weight. s is the log
/// standard deviation, unconstrained, so std = exp(s) stays positive.
template <typename T>
struct VariationalParams {
    Tensor<T> mu;
    Tensor<T> s;

    void validate() const { require_same_shape(mu, s, "VariationalParams"); }
    std::size_t size() const { return mu.size(); }
};

/// Isotropic Gaussian prior N(0, sigma0² I).
template <typename T>
struct Prior {
    T sigma0 = T(1);
};

/// mu ~ uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)); s = log(sigma0), so
/// the initial posterior equals the prior wherever mu lands on 0.
template <typename T>
inline VariationalParams<T> init_variational(Shape shape, T sigma0, std::size_t fan_in,
                                             const StreamKey& key) {
    if (sigma0 <= T(0)) fail(Errc::domain_error, "init_variational: sigma0 must be positive");
    if (fan_in < 1) fail(Errc::domain_error, "init_variational: fan_in must be >= 1");
    const T bound = T(1) / std::sqrt(static_cast<T>(fan_in));
    VariationalParams<T> p;
    p.mu = rng_uniform<T>(key, shape, -bound, bound);
    p.s = Tensor<T>::full(shape, std::log(sigma0));
    return p;
}

/// w = mu + exp(s) ⊙ eps
template <typename T>
inline Tensor<T> sample_weights(const VariationalParams<T>& p, const Tensor<T>& eps) {
    require_same_shape(p.mu, eps, "sample_weights");
    Tensor<T> w(p.mu.shape);
    for (std::size_t i = 0; i < w.size(); ++i)
        w.data[i] = p.mu.data[i] + std::exp(p.s.data[i]) * eps.data[i];
    check_finite(w, "sample_weights");
    return w;
}

/// Fused backward of the reparameterized sample plus the per-example KL
/// regularizer g(mu,s)/N:
///   grad_mu = grad_out + mu/(σ₀²N)
///   grad_s  = grad_out ⊙ exp(s) ⊙ eps − 1/N + exp(2s)/(σ₀²N)
template <typename T>
inline std::pair<Tensor<T>, Tensor<T>> rand_layer_backward(const Tensor<T>& grad_out,
                                                           const VariationalParams<T>& p,
                                                           const Tensor<T>& eps, T sigma0,
                                                           std::size_t n_train) {
    require_same_shape(grad_out, p.mu, "rand_layer_backward");
    require_same_shape(eps, p.mu, "rand_layer_backward eps");
    if (sigma0 <= T(0)) fail(Errc::domain_error, "rand_layer_backward: sigma0 must be positive");
    if (n_train < 1) fail(Errc::domain_error, "rand_layer_backward: N must be >= 1");
    const T inv_var_n = T(1) / (sigma0 * sigma0 * static_cast<T>(n_train));
    const T inv_n = T(1) / static_cast<T>(n_train);
    Tensor<T> gmu(p.mu.shape);
    Tensor<T> gs(p.mu.shape);
    for (std::size_t i = 0; i < p.mu.size(); ++i) {
        const T es = std::exp(p.s.data[i]);
        gmu.data[i] = grad_out.data[i] + p.mu.data[i] * inv_var_n;
        gs.data[i] = grad_out.data[i] * es * eps.data[i] - inv_n + es * es * inv_var_n;
    }
    return {std::move(gmu), std::move(gs)};
}

} // namespace abnn
