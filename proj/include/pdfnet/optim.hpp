#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "pdfnet/graph.hpp"
#include "pdfnet/tensor.hpp"

namespace pdfnet {

struct AdamConfig {
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

template <typename T>
class Adam {
public:
    explicit Adam(const AdamConfig& cfg) : cfg_(cfg) {
        if (cfg.learning_rate < 0) throw std::invalid_argument("adam: learning rate must be >= 0");
        if (cfg.beta1 < 0 || cfg.beta1 >= 1 || cfg.beta2 < 0 || cfg.beta2 >= 1) {
            throw std::invalid_argument("adam: betas must lie in [0, 1)");
        }
    }

    const AdamConfig& config() const { return cfg_; }
    std::int64_t step_count() const { return t_; }

    // One update from the gradients currently held in `params`.
    void step(ParamStore<T>& params) {
        if (m_.empty()) {
            for (const auto& p : params) {
                m_.push_back(Tensor<T>::zeros_like(p.value));
                v_.push_back(Tensor<T>::zeros_like(p.value));
            }
        } else if (m_.size() != params.size()) {
            throw std::invalid_argument("adam: parameter set changed under the optimizer");
        }
        ++t_;
        const double corr1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
        const double corr2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
        const T alpha = static_cast<T>(cfg_.learning_rate * std::sqrt(corr2) / corr1);
        const T b1 = static_cast<T>(cfg_.beta1), b2 = static_cast<T>(cfg_.beta2);
        const T eps = static_cast<T>(cfg_.eps);
        for (std::size_t i = 0; i < params.size(); ++i) {
            auto& p = params.at(static_cast<int>(i));
            if (p.grad.empty()) throw std::invalid_argument("adam: missing gradient for " + p.name);
            T* w = p.value.data();
            const T* g = p.grad.data();
            T* m = m_[i].data();
            T* v = v_[i].data();
            for (std::size_t j = 0; j < p.value.size(); ++j) {
                m[j] = b1 * m[j] + (T(1) - b1) * g[j];
                v[j] = b2 * v[j] + (T(1) - b2) * g[j] * g[j];
                w[j] -= alpha * m[j] / (std::sqrt(v[j]) + eps);
            }
        }
    }

private:
    AdamConfig cfg_;
    std::int64_t t_ = 0;
    std::vector<Tensor<T>> m_, v_;
};

}  // namespace pdfnet
