#pragma once

#include <cmath>
#include <vector>

#include "bdgx/tensor.hpp"

namespace bdgx {

/// Adam with bias correction, operating on a fixed list of parameter tensors.
struct AdamState {
    std::size_t step = 0;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::vector<Tensor> m;
    std::vector<Tensor> v;

    static AdamState create(const std::vector<const Tensor*>& params, double lr) {
        AdamState s;
        s.learning_rate = lr;
        s.m.reserve(params.size());
        s.v.reserve(params.size());
        for (const Tensor* p : params) {
            s.m.push_back(Tensor(p->shape));
            s.v.push_back(Tensor(p->shape));
        }
        return s;
    }
};

inline void adam_step(AdamState& state, const std::vector<Tensor*>& params,
                      const std::vector<const Tensor*>& grads) {
    if (params.size() != state.m.size() || grads.size() != state.m.size()) {
        throw DimensionError("adam: parameter/gradient list length mismatch");
    }
    state.step += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor& p = *params[i];
        const Tensor& g = *grads[i];
        if (!p.same_shape(state.m[i]) || !g.same_shape(state.m[i])) {
            throw DimensionError("adam: tensor " + std::to_string(i) + " shape mismatch");
        }
        double* mp = state.m[i].data.data();
        double* vp = state.v[i].data.data();
        const double* gp = g.data.data();
        double* pp = p.data.data();
        const double b1 = state.beta1, b2 = state.beta2;
        const double lr = state.learning_rate, eps = state.epsilon;
        for (std::size_t n = 0; n < p.numel(); ++n) {
            mp[n] = b1 * mp[n] + (1.0 - b1) * gp[n];
            vp[n] = b2 * vp[n] + (1.0 - b2) * gp[n] * gp[n];
            const double mhat = mp[n] / bc1;
            const double vhat = vp[n] / bc2;
            pp[n] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
    }
}

/// Convenience view builders for whole networks.
template <typename Net>
std::vector<Tensor*> mlp_params(Net& net) {
    std::vector<Tensor*> out;
    for (std::size_t i = 0; i < net.weights.size(); ++i) {
        out.push_back(&net.weights[i]);
        out.push_back(&net.biases[i]);
    }
    return out;
}

template <typename Net>
std::vector<const Tensor*> mlp_params_const(const Net& net) {
    std::vector<const Tensor*> out;
    for (std::size_t i = 0; i < net.weights.size(); ++i) {
        out.push_back(&net.weights[i]);
        out.push_back(&net.biases[i]);
    }
    return out;
}

template <typename Grads>
std::vector<const Tensor*> grad_views(const Grads& grads) {
    std::vector<const Tensor*> out;
    for (std::size_t i = 0; i < grads.weights.size(); ++i) {
        out.push_back(&grads.weights[i]);
        out.push_back(&grads.biases[i]);
    }
    return out;
}

}  // namespace bdgx
