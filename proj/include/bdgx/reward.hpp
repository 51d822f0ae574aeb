#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "bdgx/container.hpp"
#include "bdgx/dataset.hpp"
#include "bdgx/mlp.hpp"
#include "bdgx/optim.hpp"
#include "bdgx/rng.hpp"
#include "bdgx/serialize.hpp"

namespace bdgx {

struct RewardConfig {
    std::vector<std::size_t> hidden = {128, 128};
    double lr = 1e-3;
    std::size_t batch = 256;
    std::size_t steps = 5000;
    double holdout_fraction = 0.1;
    // Training aborts if holdout RMSE exceeds this fraction of the reward range.
    double rmse_gate = 0.05;

    void validate() const {
        if (steps < 1 || batch < 1) throw ConfigError("reward: steps and batch must be >= 1");
        if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0)) {
            throw ConfigError("reward: holdout_fraction must be in (0,1)");
        }
    }
};

/// Transition-aware reward model R(s, s'): a scalar-output net over the
/// concatenated state pair, never over actions, with its own input z-scoring.
/// Targets are trained in z-scored units; modulate undoes the scaling.
struct RewardModel {
    std::size_t state_dim = 0;
    Mlp net;
    Normalizer input_norm;
    double reward_mean = 0.0;
    double reward_std = 1.0;

    Tensor assemble_input(const Tensor& states, const Tensor& next_states) const {
        if (states.rows() != next_states.rows() || states.cols() != state_dim ||
            next_states.cols() != state_dim) {
            throw DimensionError("reward model: state pair shape mismatch");
        }
        Tensor x({states.rows(), 2 * state_dim});
        for (std::size_t i = 0; i < states.rows(); ++i) {
            double* r = x.row(i);
            std::copy_n(states.row(i), state_dim, r);
            std::copy_n(next_states.row(i), state_dim, r + state_dim);
            input_norm.normalize_in_place({r, 2 * state_dim});
        }
        return x;
    }
};

/// r~ = R(s, s~'): evaluates the reward model on one state pair.
inline double modulate(const RewardModel& model, std::span<const double> s,
                       std::span<const double> s_next) {
    if (s.size() != model.state_dim || s_next.size() != model.state_dim) {
        throw DimensionError("modulate: state dim " + std::to_string(s.size()) + "/" +
                             std::to_string(s_next.size()) + " != " +
                             std::to_string(model.state_dim));
    }
    Tensor x({1, 2 * model.state_dim});
    std::copy(s.begin(), s.end(), x.data.begin());
    std::copy(s_next.begin(), s_next.end(), x.data.begin() + model.state_dim);
    model.input_norm.normalize_in_place(x.data);
    return model.net.forward(x).data[0] * model.reward_std + model.reward_mean;
}

struct RewardTrainResult {
    RewardModel model;
    std::vector<double> loss_trace;
    double train_mse = 0.0;
    double holdout_mse = 0.0;
    double reward_range = 0.0;
};

/// Fits R(s, s') to the logged source rewards by minibatch Adam on the MSE,
/// with a 90/10 train/holdout split and a fit-quality gate on holdout RMSE.
inline RewardTrainResult train_reward(const TransitionDataset& data, const RewardConfig& cfg,
                                      Rng& rng) {
    cfg.validate();
    if (!data.has_rewards()) {
        throw PrerequisiteError("train_reward: dataset carries no rewards");
    }
    if (data.size() < 10) throw PrerequisiteError("train_reward: dataset too small");
    const std::size_t n = data.size();
    const std::size_t sd = data.state_dim();

    // Shuffled split.
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    for (std::size_t i = n; i > 1; --i) {
        std::swap(order[i - 1], order[rng.uniform_index(i)]);
    }
    const std::size_t n_holdout =
        std::max<std::size_t>(1, static_cast<std::size_t>(cfg.holdout_fraction * n));
    const std::size_t n_train = n - n_holdout;

    Tensor pairs({n, 2 * sd});
    std::vector<double> targets(n);
    double r_min = data.reward(0), r_max = data.reward(0);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t idx = order[i];
        double* row = pairs.row(i);
        const auto s = data.state(idx);
        const auto sn = data.next_state(idx);
        std::copy(s.begin(), s.end(), row);
        std::copy(sn.begin(), sn.end(), row + sd);
        targets[i] = data.reward(idx);
        r_min = std::min(r_min, targets[i]);
        r_max = std::max(r_max, targets[i]);
    }

    RewardTrainResult result;
    result.reward_range = r_max - r_min;
    RewardModel& model = result.model;
    model.state_dim = sd;
    {
        Tensor train_rows({n_train, 2 * sd});
        std::copy_n(pairs.data.begin(), n_train * 2 * sd, train_rows.data.begin());
        model.input_norm = Normalizer::fit(train_rows);
    }
    {
        double mu = 0.0;
        for (std::size_t i = 0; i < n_train; ++i) mu += targets[i];
        mu /= static_cast<double>(n_train);
        double var = 0.0;
        for (std::size_t i = 0; i < n_train; ++i) var += (targets[i] - mu) * (targets[i] - mu);
        model.reward_mean = mu;
        model.reward_std = std::max(std::sqrt(var / static_cast<double>(n_train)), 1e-6);
    }
    std::vector<std::size_t> sizes;
    sizes.push_back(2 * sd);
    for (std::size_t h : cfg.hidden) sizes.push_back(h);
    sizes.push_back(1);
    model.net = Mlp::create(sizes, Activation::relu, OutputActivation::identity, rng);
    AdamState adam = AdamState::create(mlp_params_const(model.net), cfg.lr);

    Tensor x({cfg.batch, 2 * sd});
    Tensor y({cfg.batch, std::size_t(1)});
    for (std::size_t step = 0; step < cfg.steps; ++step) {
        for (std::size_t i = 0; i < cfg.batch; ++i) {
            const std::size_t idx = rng.uniform_index(n_train);
            const double* src = pairs.row(idx);
            double* dst = x.row(i);
            std::copy_n(src, 2 * sd, dst);
            model.input_norm.normalize_in_place({dst, 2 * sd});
            y.data[i] = (targets[idx] - model.reward_mean) / model.reward_std;
        }
        MlpCache cache = model.net.forward_cached(x);
        const Tensor& pred = cache.output();
        double loss = 0.0;
        Tensor upstream({cfg.batch, std::size_t(1)});
        for (std::size_t i = 0; i < cfg.batch; ++i) {
            const double diff = pred.data[i] - y.data[i];
            loss += diff * diff;
            upstream.data[i] = 2.0 * diff / static_cast<double>(cfg.batch);
        }
        loss /= static_cast<double>(cfg.batch);
        if (!std::isfinite(loss)) {
            throw NumericalError("train_reward: non-finite loss at step " + std::to_string(step));
        }
        result.loss_trace.push_back(loss);
        MlpGrads grads = model.net.backward(cache, upstream);
        adam_step(adam, mlp_params(model.net), grad_views(grads));
    }

    // Train/holdout MSE reported in raw reward units.
    auto mse_on = [&](std::size_t begin, std::size_t end) {
        double mse = 0.0;
        Tensor xe({std::size_t(1), 2 * sd});
        for (std::size_t i = begin; i < end; ++i) {
            std::copy_n(pairs.row(i), 2 * sd, xe.data.begin());
            model.input_norm.normalize_in_place(xe.data);
            const double pred =
                model.net.forward(xe).data[0] * model.reward_std + model.reward_mean;
            const double diff = pred - targets[i];
            mse += diff * diff;
        }
        return mse / static_cast<double>(end - begin);
    };
    result.train_mse = mse_on(0, n_train);
    result.holdout_mse = mse_on(n_train, n);

    const double rmse = std::sqrt(result.holdout_mse);
    if (result.reward_range > 0.0 && rmse > cfg.rmse_gate * result.reward_range) {
        throw NumericalError("train_reward: holdout RMSE " + std::to_string(rmse) +
                             " exceeds " + std::to_string(cfg.rmse_gate * 100.0) +
                             "% of reward range " + std::to_string(result.reward_range));
    }
    return result;
}

inline void save_reward_model(const RewardModel& model, const std::string& path) {
    Container c;
    c.kind = "reward";
    c.meta["state_dim"] = model.state_dim;
    c.meta["reward_mean"] = model.reward_mean;
    c.meta["reward_std"] = model.reward_std;
    put_normalizer(c, "input_norm", model.input_norm);
    put_mlp(c, "net", model.net);
    c.save(path);
}

inline RewardModel load_reward_model(const std::string& path) {
    Container c = Container::load(path);
    if (c.kind != "reward") {
        throw FormatError("reward: '" + path + "' is a '" + c.kind + "' artifact");
    }
    RewardModel m;
    m.state_dim = c.meta.at("state_dim").get<std::size_t>();
    m.reward_mean = c.meta.value("reward_mean", 0.0);
    m.reward_std = c.meta.value("reward_std", 1.0);
    m.input_norm = get_normalizer(c, "input_norm");
    m.net = get_mlp(c, "net");
    if (m.net.input_dim() != 2 * m.state_dim || m.net.output_dim() != 1) {
        throw FormatError("reward: checkpoint net dims inconsistent with state_dim");
    }
    return m;
}

}  // namespace bdgx
