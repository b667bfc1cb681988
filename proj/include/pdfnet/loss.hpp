#pragma once

#include <cmath>
#include <stdexcept>

#include "pdfnet/tensor.hpp"

namespace pdfnet {

inline constexpr double kBceClamp = 1e-7;

namespace detail {
template <typename T>
void check_bce_args(const Tensor<T>& z, const Tensor<T>& y) {
    if (!z.same_shape(y)) {
        throw std::invalid_argument("bce_loss: shape mismatch " + z.shape_str() + " vs " + y.shape_str());
    }
    if (z.empty()) throw std::invalid_argument("bce_loss: empty tensors");
    const T* yp = y.data();
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (yp[i] != T(0) && yp[i] != T(1)) {
            throw std::invalid_argument("bce_loss: targets must be exactly 0 or 1");
        }
    }
}
}  // namespace detail

// Mean binary cross-entropy with predictions clamped to [eps, 1-eps].
template <typename T>
double bce_loss(const Tensor<T>& z, const Tensor<T>& y) {
    detail::check_bce_args(z, y);
    const double eps = kBceClamp;
    const T* zp = z.data();
    const T* yp = y.data();
    double acc = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        double zc = static_cast<double>(zp[i]);
        zc = std::min(std::max(zc, eps), 1.0 - eps);
        acc -= yp[i] == T(1) ? std::log(zc) : std::log(1.0 - zc);
    }
    return acc / static_cast<double>(z.size());
}

template <typename T>
struct LossResult {
    double value = 0.0;
    Tensor<T> grad;  // d(loss)/dz, zero where the clamp was active
};

template <typename T>
LossResult<T> bce_loss_with_grad(const Tensor<T>& z, const Tensor<T>& y) {
    detail::check_bce_args(z, y);
    const double eps = kBceClamp;
    const double inv_n = 1.0 / static_cast<double>(z.size());
    LossResult<T> r;
    r.grad = Tensor<T>::zeros_like(z);
    const T* zp = z.data();
    const T* yp = y.data();
    T* gp = r.grad.data();
    double acc = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        const double zv = static_cast<double>(zp[i]);
        const bool clamped = zv < eps || zv > 1.0 - eps;
        const double zc = std::min(std::max(zv, eps), 1.0 - eps);
        if (yp[i] == T(1)) {
            acc -= std::log(zc);
            if (!clamped) gp[i] = static_cast<T>(-inv_n / zc);
        } else {
            acc -= std::log(1.0 - zc);
            if (!clamped) gp[i] = static_cast<T>(inv_n / (1.0 - zc));
        }
    }
    r.value = acc * inv_n;
    return r;
}

}  // namespace pdfnet
