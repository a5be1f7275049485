#pragma once

// Adam with the transformer inverse-square-root warmup schedule:
// lr(t) = factor * d_model^-0.5 * min(t^-0.5, t * warmup^-1.5).
// warmup_steps == 0 switches to a constant learning rate.

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "lcmt/error.hpp"
#include "lcmt/tensor.hpp"

namespace lcmt {

struct AdamConfig {
    double lr = 1.0;  // factor when scheduled, absolute rate when warmup_steps == 0
    double beta1 = 0.9;
    double beta2 = 0.98;
    double eps = 1e-9;
    int warmup_steps = 400;
    int d_model = 64;  // schedule scale

    double rate(int64_t step) const {
        if (warmup_steps <= 0) return lr;
        const double t = static_cast<double>(step);
        const double w = static_cast<double>(warmup_steps);
        return lr * std::pow(static_cast<double>(d_model), -0.5) *
               std::min(1.0 / std::sqrt(t), t * std::pow(w, -1.5));
    }
};

template <class S>
struct AdamState {
    struct Slot {
        std::vector<double> m;
        std::vector<double> v;
    };
    std::map<std::string, Slot> slots;
    int64_t step = 0;
};

// one Adam update over a named parameter map; grads are read from each
// parameter's grad buffer and must be finite
template <class S>
void adam_step(std::map<std::string, Tensor<S>>& params, AdamState<S>& state,
               const AdamConfig& cfg) {
    state.step += 1;
    const double lr = cfg.rate(state.step);
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));

    for (auto& [name, p] : params) {
        auto& slot = state.slots[name];
        if (slot.m.empty()) {
            slot.m.assign(p.numel(), 0.0);
            slot.v.assign(p.numel(), 0.0);
        }
        if (static_cast<int64_t>(slot.m.size()) != p.numel())
            throw ShapeError("adam_step: moment shape mismatch for " + name);
        if (!p.has_grad()) continue;  // parameter unused this step

        auto& val = p.value();
        auto& grad = p.grad();
        for (size_t i = 0; i < val.size(); ++i) {
            const double g = static_cast<double>(grad[i]);
            if (!std::isfinite(g))
                throw Error("adam_step: non-finite gradient in parameter " + name);
            slot.m[i] = cfg.beta1 * slot.m[i] + (1.0 - cfg.beta1) * g;
            slot.v[i] = cfg.beta2 * slot.v[i] + (1.0 - cfg.beta2) * g * g;
            const double mhat = slot.m[i] / bc1;
            const double vhat = slot.v[i] / bc2;
            val[i] = static_cast<S>(static_cast<double>(val[i]) -
                                    lr * mhat / (std::sqrt(vhat) + cfg.eps));
        }
    }
}

template <class S>
void zero_grads(std::map<std::string, Tensor<S>>& params) {
    for (auto& [name, p] : params) p.zero_grad();
}

}  // namespace lcmt
