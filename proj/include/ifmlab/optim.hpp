#pragma once

#include <vector>

#include "layers.hpp"

namespace ifm {

// Plain SGD with classical momentum: v = mu*v + g; p -= lr*v.
// Gradients are zeroed after each step; entries without a gradient tensor
// (running statistics) are left untouched.
template <typename T>
class SgdMomentum {
public:
    SgdMomentum(T lr, T momentum) : lr_(lr), momentum_(momentum) {}

    void step(std::vector<ParamRef<T>>& params) {
        if (velocity_.size() != params.size()) {
            velocity_.clear();
            velocity_.resize(params.size());
            for (size_t i = 0; i < params.size(); ++i) {
                if (params[i].grad) {
                    velocity_[i] = *params[i].value;
                    velocity_[i].zero();
                }
            }
        }
        for (size_t i = 0; i < params.size(); ++i) {
            if (!params[i].grad) continue;
            Tensor<T>& v = velocity_[i];
            Tensor<T>& p = *params[i].value;
            Tensor<T>& g = *params[i].grad;
            for (int64_t k = 0; k < p.size(); ++k) {
                v[k] = momentum_ * v[k] + g[k];
                p[k] -= lr_ * v[k];
                g[k] = T(0);
            }
        }
    }

    T lr() const { return lr_; }

private:
    T lr_, momentum_;
    std::vector<Tensor<T>> velocity_;
};

}  // namespace ifm
