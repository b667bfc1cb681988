#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "pdfnet/loss.hpp"
#include "pdfnet/model.hpp"
#include "pdfnet/optim.hpp"
#include "pdfnet/rng.hpp"
#include "pdfnet/tensor.hpp"

namespace pdfnet {

struct TrainConfig {
    int batch_size = 8;
    double learning_rate = 1e-4;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    std::int64_t max_steps = 0;  // must be set explicitly
    std::uint64_t seed = 0;
    double init_weight_std = 0.01;
    double init_bias = 0.0;

    void validate() const {
        if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
        if (!(learning_rate > 0)) throw std::invalid_argument("learning_rate must be > 0");
        if (max_steps < 1) throw std::invalid_argument("max_steps must be >= 1");
        if (!(init_weight_std > 0)) throw std::invalid_argument("init_weight_std must be > 0");
    }

    AdamConfig adam() const { return AdamConfig{learning_rate, adam_beta1, adam_beta2, adam_eps}; }
};

// Gaussian weights, constant biases; fully determined by tc.seed.
template <typename T>
void init_params(Model<T>& model, const TrainConfig& tc) {
    Rng rng(Rng::mix(tc.seed, 0x696e6974));
    for (auto& p : model.params()) {
        T* d = p.value.data();
        if (p.value.rank() == 1) {
            for (std::size_t i = 0; i < p.value.size(); ++i) d[i] = static_cast<T>(tc.init_bias);
        } else {
            for (std::size_t i = 0; i < p.value.size(); ++i) {
                d[i] = static_cast<T>(rng.normal(0.0, tc.init_weight_std));
            }
        }
    }
}

// Forward + backward + one ADAM update on a single batch; returns the loss.
template <typename T>
double train_step(Model<T>& model, Adam<T>& opt, const Tensor<T>& images, const Tensor<T>& gt) {
    std::vector<Tensor<T>> acts;
    const Tensor<T> z = model.forward(images, acts);
    LossResult<T> loss = bce_loss_with_grad(z, gt);
    if (!std::isfinite(loss.value)) {
        throw NumericError("loss", "non-finite training loss at optimizer step " +
                                       std::to_string(opt.step_count() + 1));
    }
    model.params().zero_grads();
    model.backward(acts, loss.grad);
    opt.step(model.params());
    return loss.value;
}

// Central finite differences (step h) against the analytic gradient for every
// parameter scalar. Relative error uses max(|ga|, |gn|) as denominator;
// differences below `atol` count as exact. Run with T = double.
template <typename T>
double gradient_check(Model<T>& model, const Tensor<T>& images, const Tensor<T>& gt,
                      double h = 1e-5, double atol = 1e-9) {
    std::vector<Tensor<T>> acts;
    const Tensor<T> z = model.forward(images, acts);
    const LossResult<T> loss = bce_loss_with_grad(z, gt);
    model.params().zero_grads();
    model.backward(acts, loss.grad);
    acts.clear();

    double max_err = 0.0;
    for (auto& p : model.params()) {
        T* w = p.value.data();
        const T* g = p.grad.data();
        for (std::size_t i = 0; i < p.value.size(); ++i) {
            const T orig = w[i];
            w[i] = orig + static_cast<T>(h);
            const double lp = bce_loss(model.forward(images), gt);
            w[i] = orig - static_cast<T>(h);
            const double lm = bce_loss(model.forward(images), gt);
            w[i] = orig;
            const double gn = (lp - lm) / (2.0 * h);
            const double ga = static_cast<double>(g[i]);
            const double diff = std::abs(ga - gn);
            if (diff <= atol) continue;
            max_err = std::max(max_err, diff / std::max(std::abs(ga), std::abs(gn)));
        }
    }
    return max_err;
}

}  // namespace pdfnet
