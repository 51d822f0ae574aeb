#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "bdgx/rng.hpp"
#include "bdgx/tensor.hpp"

namespace bdgx {

enum class Activation { tanh, relu };
enum class OutputActivation { identity, tanh };

inline const char* to_string(Activation a) {
    return a == Activation::tanh ? "tanh" : "relu";
}
inline const char* to_string(OutputActivation a) {
    return a == OutputActivation::identity ? "identity" : "tanh";
}

inline Activation activation_from_string(const std::string& s) {
    if (s == "tanh") return Activation::tanh;
    if (s == "relu") return Activation::relu;
    throw ConfigError("unknown activation '" + s + "'");
}
inline OutputActivation output_activation_from_string(const std::string& s) {
    if (s == "identity") return OutputActivation::identity;
    if (s == "tanh") return OutputActivation::tanh;
    throw ConfigError("unknown output activation '" + s + "'");
}

/// Per-layer parameter gradients produced by Mlp::backward.
struct MlpGrads {
    std::vector<Tensor> weights;
    std::vector<Tensor> biases;
};

/// Activations recorded during a forward pass, needed for backprop.
/// layer_outputs[0] is the input batch; layer_outputs[i] the output of layer i-1.
struct MlpCache {
    std::vector<Tensor> layer_outputs;
    const Tensor& output() const { return layer_outputs.back(); }
};

/// Plain fully connected network. weights[i] has shape
/// [layer_sizes[i], layer_sizes[i+1]]; inputs and outputs are [batch, dim].
class Mlp {
public:
    std::vector<std::size_t> layer_sizes;
    std::vector<Tensor> weights;
    std::vector<Tensor> biases;
    Activation hidden_activation = Activation::tanh;
    OutputActivation output_activation = OutputActivation::identity;

    Mlp() = default;

    /// Glorot-uniform weights in +-sqrt(6/(fan_in+fan_out)), zero biases.
    static Mlp create(std::vector<std::size_t> sizes, Activation hidden,
                      OutputActivation output, Rng& rng) {
        if (sizes.size() < 2) {
            throw DimensionError("mlp: need at least an input and an output size");
        }
        Mlp net;
        net.layer_sizes = std::move(sizes);
        net.hidden_activation = hidden;
        net.output_activation = output;
        for (std::size_t i = 0; i + 1 < net.layer_sizes.size(); ++i) {
            const std::size_t fan_in = net.layer_sizes[i];
            const std::size_t fan_out = net.layer_sizes[i + 1];
            const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
            Tensor w({fan_in, fan_out});
            for (double& v : w.data) v = rng.uniform(-limit, limit);
            net.weights.push_back(std::move(w));
            net.biases.push_back(Tensor({fan_out}));
        }
        return net;
    }

    std::size_t input_dim() const { return layer_sizes.front(); }
    std::size_t output_dim() const { return layer_sizes.back(); }
    std::size_t layer_count() const { return weights.size(); }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (std::size_t i = 0; i < weights.size(); ++i) n += weights[i].numel() + biases[i].numel();
        return n;
    }

    Tensor forward(const Tensor& x) const {
        MlpCache cache = forward_cached(x);
        return std::move(cache.layer_outputs.back());
    }

    MlpCache forward_cached(const Tensor& x) const {
        require_matrix(x, "mlp input");
        if (x.shape[1] != input_dim()) {
            throw DimensionError("mlp layer 0: input width " + std::to_string(x.shape[1]) +
                                 " != expected " + std::to_string(input_dim()));
        }
        MlpCache cache;
        cache.layer_outputs.reserve(layer_count() + 1);
        cache.layer_outputs.push_back(x);
        for (std::size_t i = 0; i < layer_count(); ++i) {
            Tensor z = matmul(cache.layer_outputs.back(), weights[i]);
            add_row_vector(z, biases[i]);
            const bool last = (i + 1 == layer_count());
            if (last) {
                if (output_activation == OutputActivation::tanh) {
                    for (double& v : z.data) v = std::tanh(v);
                }
            } else if (hidden_activation == Activation::tanh) {
                for (double& v : z.data) v = std::tanh(v);
            } else {
                for (double& v : z.data) v = v > 0.0 ? v : 0.0;
            }
            cache.layer_outputs.push_back(std::move(z));
        }
        return cache;
    }

    /// Backpropagates `upstream` (dL/doutput, shaped like the forward output)
    /// through the cached pass. Returns parameter gradients; if `input_grad`
    /// is non-null it receives dL/dinput.
    MlpGrads backward(const MlpCache& cache, const Tensor& upstream,
                      Tensor* input_grad = nullptr) const {
        if (cache.layer_outputs.size() != layer_count() + 1) {
            throw DimensionError("mlp backward: cache does not match network depth");
        }
        if (!upstream.same_shape(cache.layer_outputs.back())) {
            throw DimensionError("mlp backward: upstream gradient shape mismatch at layer " +
                                 std::to_string(layer_count() - 1));
        }
        MlpGrads grads;
        grads.weights.resize(layer_count());
        grads.biases.resize(layer_count());

        Tensor delta = upstream;
        for (std::size_t li = layer_count(); li-- > 0;) {
            const Tensor& out = cache.layer_outputs[li + 1];
            const bool last = (li + 1 == layer_count());
            // Multiply by the activation derivative, expressed via the output.
            if (last) {
                if (output_activation == OutputActivation::tanh) {
                    for (std::size_t n = 0; n < delta.numel(); ++n) {
                        delta.data[n] *= 1.0 - out.data[n] * out.data[n];
                    }
                }
            } else if (hidden_activation == Activation::tanh) {
                for (std::size_t n = 0; n < delta.numel(); ++n) {
                    delta.data[n] *= 1.0 - out.data[n] * out.data[n];
                }
            } else {
                for (std::size_t n = 0; n < delta.numel(); ++n) {
                    if (out.data[n] <= 0.0) delta.data[n] = 0.0;
                }
            }
            grads.weights[li] = matmul_tn(cache.layer_outputs[li], delta);
            grads.biases[li] = column_sums(delta);
            if (li > 0 || input_grad != nullptr) {
                Tensor prev = matmul_nt(delta, weights[li]);
                if (li == 0) {
                    *input_grad = std::move(prev);
                } else {
                    delta = std::move(prev);
                }
            }
        }
        return grads;
    }
};

}  // namespace bdgx
