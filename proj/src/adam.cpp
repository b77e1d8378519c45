#include "slac/adam.hpp"

#include <cmath>

#include "slac/error.hpp"

namespace slac::nn {

Adam::Adam(std::vector<Parameter*> params, AdamConfig cfg)
    : params_(std::move(params)), cfg_(cfg) {
    moments_.reserve(params_.size());
    for (Parameter* p : params_) {
        moments_.push_back({Tensor::zeros(p->value.shape()), Tensor::zeros(p->value.shape())});
    }
}

void Adam::step() {
    ++step_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
    for (std::size_t pi = 0; pi < params_.size(); ++pi) {
        Parameter& p = *params_[pi];
        if (!p.trainable) continue;
        if (!p.grad.same_shape(p.value))
            throw ShapeError("adam: grad shape " + p.grad.shape_str() + " != value shape " +
                             p.value.shape_str() + " for " + p.name);
        Tensor& m = moments_[pi].m;
        Tensor& v = moments_[pi].v;
        for (std::size_t i = 0; i < p.value.size(); ++i) {
            const double g = p.grad[i];
            m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g;
            v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g * g;
            const double m_hat = m[i] / bc1;
            const double v_hat = v[i] / bc2;
            p.value[i] -= cfg_.learning_rate * m_hat / (std::sqrt(v_hat) + cfg_.eps);
        }
        require_finite(p.value, "adam");
    }
}

void Adam::zero_grad() {
    for (Parameter* p : params_) p->grad.fill(0.0);
}

}  // namespace slac::nn
