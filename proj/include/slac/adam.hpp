#pragma once

#include <cstddef>
#include <vector>

#include "slac/tape.hpp"

namespace slac::nn {

struct AdamConfig {
    double learning_rate = 5e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Standard Adam with bias correction. Owns per-parameter moment state; one
// trainer owns one optimizer instance.
class Adam {
public:
    Adam(std::vector<Parameter*> params, AdamConfig cfg = {});

    // Applies one update using each parameter's current .grad.
    void step();
    void zero_grad();
    std::size_t step_count() const { return step_; }

private:
    struct Moments {
        Tensor m;
        Tensor v;
    };

    std::vector<Parameter*> params_;
    std::vector<Moments> moments_;
    AdamConfig cfg_;
    std::size_t step_ = 0;
};

}  // namespace slac::nn
