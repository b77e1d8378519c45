#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "slac/tape.hpp"

// Central-finite-difference gradient oracle, independent of the backward
// implementation it checks.
namespace testutil {

struct FdReport {
    double max_rel_err = 0.0;
    std::size_t entries_checked = 0;
    std::string worst_param;
};

// run(want_grads): rebuilds the whole forward pass from the parameters'
// current values and returns the scalar loss; with want_grads it must also
// run backward so that every parameter's .grad is populated. Any internal
// randomness (dropout masks) must be re-seeded identically on every call.
inline FdReport check_gradients(const std::vector<slac::nn::Parameter*>& params,
                                const std::function<double(bool)>& run, double h = 1e-5) {
    FdReport report;
    run(true);
    std::vector<std::vector<double>> analytic;
    analytic.reserve(params.size());
    for (auto* p : params) analytic.push_back(p->grad.data());

    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        slac::nn::Parameter& p = *params[pi];
        for (std::size_t i = 0; i < p.value.size(); ++i) {
            const double saved = p.value[i];
            p.value[i] = saved + h;
            const double up = run(false);
            p.value[i] = saved - h;
            const double down = run(false);
            p.value[i] = saved;
            const double fd = (up - down) / (2.0 * h);
            const double g = analytic[pi][i];
            const double rel = std::fabs(g - fd) / std::max({std::fabs(g), std::fabs(fd), 1e-3});
            ++report.entries_checked;
            if (rel > report.max_rel_err) {
                report.max_rel_err = rel;
                report.worst_param = p.name + "[" + std::to_string(i) + "]";
            }
        }
    }
    return report;
}

}  // namespace testutil
