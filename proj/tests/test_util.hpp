#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "bdgx/mlp.hpp"
#include "bdgx/tensor.hpp"

namespace bdgx::test {

/// Scalar probe loss L = sum(output * probe) used by the finite-difference
/// gradient oracle; its analytic gradient wrt the output is exactly `probe`.
inline double probe_loss(const Mlp& net, const Tensor& x, const Tensor& probe) {
    Tensor out = net.forward(x);
    double loss = 0.0;
    for (std::size_t n = 0; n < out.numel(); ++n) loss += out.data[n] * probe.data[n];
    return loss;
}

struct GradCheckReport {
    double max_rel_error = 0.0;
    std::size_t components_checked = 0;
};

/// Central finite differences over every parameter of the net (and the input
/// when requested), compared against Mlp::backward. The oracle only evaluates
/// the forward pass, so it is independent of the backward implementation.
inline GradCheckReport finite_difference_check(Mlp net, const Tensor& x, const Tensor& probe,
                                               double h = 1e-5, bool check_input = true) {
    MlpCache cache = net.forward_cached(x);
    Tensor input_grad;
    MlpGrads grads = net.backward(cache, probe, &input_grad);

    GradCheckReport report;
    auto rel = [](double fd, double an) {
        const double denom = std::max({std::abs(fd), std::abs(an), 1e-6});
        return std::abs(fd - an) / denom;
    };

    for (std::size_t l = 0; l < net.layer_count(); ++l) {
        for (Tensor* param : {&net.weights[l], &net.biases[l]}) {
            const Tensor& analytic =
                param == &net.weights[l] ? grads.weights[l] : grads.biases[l];
            for (std::size_t n = 0; n < param->numel(); ++n) {
                const double orig = param->data[n];
                param->data[n] = orig + h;
                const double up = probe_loss(net, x, probe);
                param->data[n] = orig - h;
                const double down = probe_loss(net, x, probe);
                param->data[n] = orig;
                const double fd = (up - down) / (2.0 * h);
                report.max_rel_error = std::max(report.max_rel_error, rel(fd, analytic.data[n]));
                ++report.components_checked;
            }
        }
    }
    if (check_input) {
        Tensor xm = x;
        for (std::size_t n = 0; n < xm.numel(); ++n) {
            const double orig = xm.data[n];
            xm.data[n] = orig + h;
            const double up = probe_loss(net, xm, probe);
            xm.data[n] = orig - h;
            const double down = probe_loss(net, xm, probe);
            xm.data[n] = orig;
            const double fd = (up - down) / (2.0 * h);
            report.max_rel_error = std::max(report.max_rel_error, rel(fd, input_grad.data[n]));
            ++report.components_checked;
        }
    }
    return report;
}

}  // namespace bdgx::test
