#pragma once

#include <string>

#include "bdgx/container.hpp"
#include "bdgx/dataset.hpp"
#include "bdgx/mlp.hpp"

namespace bdgx {

/// Writes an Mlp into a container under a name prefix, recording the
/// architecture in the container meta so load can rebuild it.
inline void put_mlp(Container& c, const std::string& prefix, const Mlp& net) {
    nlohmann::json arch;
    arch["layer_sizes"] = net.layer_sizes;
    arch["hidden_activation"] = to_string(net.hidden_activation);
    arch["output_activation"] = to_string(net.output_activation);
    c.meta["nets"][prefix] = arch;
    for (std::size_t i = 0; i < net.layer_count(); ++i) {
        c.add(prefix + "/w" + std::to_string(i), net.weights[i]);
        c.add(prefix + "/b" + std::to_string(i), net.biases[i]);
    }
}

inline Mlp get_mlp(const Container& c, const std::string& prefix) {
    if (!c.meta.contains("nets") || !c.meta["nets"].contains(prefix)) {
        throw FormatError("checkpoint: missing network '" + prefix + "'");
    }
    const auto& arch = c.meta["nets"][prefix];
    Mlp net;
    net.layer_sizes = arch.at("layer_sizes").get<std::vector<std::size_t>>();
    net.hidden_activation = activation_from_string(arch.at("hidden_activation").get<std::string>());
    net.output_activation =
        output_activation_from_string(arch.at("output_activation").get<std::string>());
    for (std::size_t i = 0; i + 1 < net.layer_sizes.size(); ++i) {
        Tensor w = c.get(prefix + "/w" + std::to_string(i));
        Tensor b = c.get(prefix + "/b" + std::to_string(i));
        if (w.shape != std::vector<std::size_t>{net.layer_sizes[i], net.layer_sizes[i + 1]}) {
            throw FormatError("checkpoint: weight shape mismatch in '" + prefix + "' layer " +
                              std::to_string(i));
        }
        net.weights.push_back(std::move(w));
        net.biases.push_back(std::move(b));
    }
    return net;
}

/// Normalizer statistics travel inside checkpoints in f64 JSON (not the f32
/// blob section) so the round trip is exact and mismatch checks are strict.
inline void put_normalizer(Container& c, const std::string& key, const Normalizer& norm) {
    c.meta[key] = {{"mean", norm.means()}, {"std", norm.stds()}};
}

inline Normalizer get_normalizer(const Container& c, const std::string& key) {
    if (!c.meta.contains(key)) throw FormatError("checkpoint: missing normalizer '" + key + "'");
    const auto mean = c.meta[key].at("mean").get<std::vector<double>>();
    const auto std = c.meta[key].at("std").get<std::vector<double>>();
    if (mean.size() != std.size()) throw FormatError("checkpoint: normalizer length mismatch");
    return Normalizer::from_stats(mean, std);
}

}  // namespace bdgx
