#pragma once

#include <functional>

#include "abnn/tensor.hpp"

namespace abnn {

/// Central-difference gradient of a scalar function, one coordinate at a
/// time: (f(x + h·eᵢ) − f(x − h·eᵢ)) / 2h. Verification oracle; run in
/// 64-bit mode.
template <typename T>
inline Tensor<T> finite_diff_grad(const std::function<T(const Tensor<T>&)>& f,
                                  const Tensor<T>& x, T h) {
    if (h <= T(0)) fail(Errc::domain_error, "finite_diff_grad: step must be positive");
    Tensor<T> g(x.shape);
    Tensor<T> probe = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const T xi = x.data[i];
        probe.data[i] = xi + h;
        const T fp = f(probe);
        probe.data[i] = xi - h;
        const T fm = f(probe);
        probe.data[i] = xi;
        if (!std::isfinite(static_cast<double>(fp)) || !std::isfinite(static_cast<double>(fm)))
            fail(Errc::numeric_error, "finite_diff_grad: non-finite function value");
        g.data[i] = (fp - fm) / (T(2) * h);
    }
    return g;
}

} // namespace abnn
