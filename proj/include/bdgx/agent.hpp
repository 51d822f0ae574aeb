#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bdgx/bridge.hpp"
#include "bdgx/dataset.hpp"
#include "bdgx/env.hpp"
#include "bdgx/mlp.hpp"
#include "bdgx/optim.hpp"
#include "bdgx/reward.hpp"
#include "bdgx/rng.hpp"

namespace bdgx {

enum class StateContinuation { translated, source_true };

inline const char* to_string(StateContinuation c) {
    return c == StateContinuation::translated ? "translated" : "source_true";
}
inline StateContinuation state_continuation_from_string(const std::string& s) {
    if (s == "translated") return StateContinuation::translated;
    if (s == "source_true") return StateContinuation::source_true;
    throw ConfigError("unknown state continuation mode '" + s + "'");
}

struct AgentConfig {
    double gamma = 0.99;
    double tau = 0.005;
    double lr = 3e-4;
    // Multiplies rewards inside the critic target only; a burn-in aid for
    // large-magnitude returns. Evaluation and logging see raw returns.
    double reward_scale = 1.0;
    std::size_t batch = 256;
    std::vector<std::size_t> hidden = {64, 64};
    double il_weight = 0.1;  // alpha in L_total = L_RL + alpha * L_IL
    bool auto_temperature = true;
    double fixed_temperature = 0.2;
    double init_temperature = 0.2;
    std::size_t bc_pretrain_steps = 10000;
    std::size_t bc_batch = 256;
    double bc_lr = 1e-3;
    StateContinuation state_continuation = StateContinuation::translated;
    std::size_t refresh_period = 10000;
    std::size_t replay_capacity = 100000;
    std::size_t start_steps = 1000;
    std::size_t eval_interval = 5000;
    std::size_t eval_episodes = 10;
    std::size_t total_steps = 100000;
    std::size_t refresh_reward_steps = 1000;

    void validate() const {
        if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigError("agent: gamma must be in [0,1)");
        if (il_weight < 0.0) throw ConfigError("agent: il_weight must be >= 0");
        if (!(tau > 0.0 && tau <= 1.0)) throw ConfigError("agent: tau must be in (0,1]");
        if (batch < 1 || total_steps < 1) {
            throw ConfigError("agent: batch and total_steps must be >= 1");
        }
        if (eval_interval < 1 || eval_episodes < 1) {
            throw ConfigError("agent: eval interval/episodes must be >= 1");
        }
    }
};

inline constexpr double kLogStdMin = -5.0;
inline constexpr double kLogStdMax = 2.0;
inline constexpr double kActionShrink = 1.0 - 1e-6;

namespace policy_detail {

inline double softplus(double x) {
    if (x > 30.0) return x;
    if (x < -30.0) return std::exp(x);
    return std::log1p(std::exp(x));
}

/// log(1 - tanh(u)^2), computed without forming tanh(u) to avoid
/// cancellation for large |u|.
inline double log_one_minus_tanh_sq(double u) {
    return 2.0 * (std::log(2.0) - u - softplus(-2.0 * u));
}

inline double atanh_clamped(double a) {
    const double x = a * kActionShrink;
    return 0.5 * std::log((1.0 + x) / (1.0 - x));
}

}  // namespace policy_detail

/// tanh-squashed Gaussian policy. The net maps a state to per-dimension
/// (mean, log-std); log-std is clamped to [-5, 2] and actions are squashed
/// into (-1, 1) by tanh with the change-of-variables correction in log pi.
struct GaussianPolicy {
    std::size_t obs_dim = 0;
    std::size_t action_dim = 0;
    Mlp net;  // outputs [mu_0..mu_{A-1}, log_std_0..log_std_{A-1}]

    static GaussianPolicy create(std::size_t obs_dim, std::size_t action_dim,
                                 const std::vector<std::size_t>& hidden, Rng& rng) {
        GaussianPolicy p;
        p.obs_dim = obs_dim;
        p.action_dim = action_dim;
        std::vector<std::size_t> sizes;
        sizes.push_back(obs_dim);
        for (std::size_t h : hidden) sizes.push_back(h);
        sizes.push_back(2 * action_dim);
        p.net = Mlp::create(sizes, Activation::relu, OutputActivation::identity, rng);
        return p;
    }

    /// Deterministic action tanh(mu(s)), used for evaluation.
    std::vector<double> mean_action(std::span<const double> obs) const {
        Tensor x({1, obs_dim});
        std::copy(obs.begin(), obs.end(), x.data.begin());
        Tensor out = net.forward(x);
        std::vector<double> a(action_dim);
        for (std::size_t d = 0; d < action_dim; ++d) a[d] = std::tanh(out.data[d]);
        return a;
    }
};

/// One evaluated policy head: raw net cache plus clamped (mu, log_std) views.
struct PolicyHead {
    MlpCache cache;
    Tensor mu;        // [B, A]
    Tensor log_std;   // [B, A], clamped
    Tensor in_range;  // [B, A], 1 if the raw log-std was strictly inside the clamp
};

inline PolicyHead policy_forward(const GaussianPolicy& policy, const Tensor& states) {
    PolicyHead h;
    h.cache = policy.net.forward_cached(states);
    const Tensor& raw = h.cache.output();
    const std::size_t b = raw.rows();
    const std::size_t a = policy.action_dim;
    h.mu = Tensor({b, a});
    h.log_std = Tensor({b, a});
    h.in_range = Tensor({b, a});
    for (std::size_t i = 0; i < b; ++i) {
        for (std::size_t d = 0; d < a; ++d) {
            h.mu(i, d) = raw(i, d);
            const double ls = raw(i, a + d);
            h.log_std(i, d) = std::clamp(ls, kLogStdMin, kLogStdMax);
            h.in_range(i, d) = (ls > kLogStdMin && ls < kLogStdMax) ? 1.0 : 0.0;
        }
    }
    return h;
}

struct PolicySample {
    Tensor actions;   // [B, A] = tanh(u)
    Tensor pre_tanh;  // [B, A] = mu + std * zeta
    Tensor zeta;      // [B, A]
    std::vector<double> log_prob;  // [B]
};

inline PolicySample policy_sample(const PolicyHead& head, Rng& rng) {
    const std::size_t b = head.mu.rows();
    const std::size_t a = head.mu.cols();
    PolicySample s{Tensor({b, a}), Tensor({b, a}), Tensor({b, a}), std::vector<double>(b, 0.0)};
    constexpr double kHalfLog2Pi = 0.9189385332046727;  // 0.5 * ln(2 pi)
    for (std::size_t i = 0; i < b; ++i) {
        double lp = 0.0;
        for (std::size_t d = 0; d < a; ++d) {
            const double z = rng.normal();
            const double ls = head.log_std(i, d);
            const double u = head.mu(i, d) + std::exp(ls) * z;
            s.zeta(i, d) = z;
            s.pre_tanh(i, d) = u;
            s.actions(i, d) = std::tanh(u);
            lp += -ls - kHalfLog2Pi - 0.5 * z * z - policy_detail::log_one_minus_tanh_sq(u);
        }
        s.log_prob[i] = lp;
    }
    return s;
}

/// log pi(a|s) for given demonstration actions (shrunk before atanh so the
/// inverse squash is well-defined on the closed interval).
inline std::vector<double> policy_log_prob(const GaussianPolicy& policy, const Tensor& states,
                                           const Tensor& actions) {
    if (states.rows() != actions.rows() || actions.cols() != policy.action_dim) {
        throw DimensionError("policy_log_prob: batch shape mismatch");
    }
    PolicyHead head = policy_forward(policy, states);
    std::vector<double> out(states.rows(), 0.0);
    constexpr double kHalfLog2Pi = 0.9189385332046727;
    for (std::size_t i = 0; i < states.rows(); ++i) {
        double lp = 0.0;
        for (std::size_t d = 0; d < policy.action_dim; ++d) {
            const double ad = actions(i, d);
            if (ad < -1.0 || ad > 1.0) {
                throw ConfigError("policy_log_prob: action outside [-1,1]");
            }
            const double u = policy_detail::atanh_clamped(ad);
            const double ls = head.log_std(i, d);
            const double sd = std::exp(ls);
            const double z = (u - head.mu(i, d)) / sd;
            lp += -ls - kHalfLog2Pi - 0.5 * z * z -
                  policy_detail::log_one_minus_tanh_sq(u);
        }
        out[i] = lp;
    }
    return out;
}

/// Twin critics with slow target copies.
struct Critic {
    Mlp q1, q2, q1_target, q2_target;

    static Critic create(std::size_t obs_dim, std::size_t action_dim,
                         const std::vector<std::size_t>& hidden, Rng& rng) {
        Critic c;
        std::vector<std::size_t> sizes;
        sizes.push_back(obs_dim + action_dim);
        for (std::size_t h : hidden) sizes.push_back(h);
        sizes.push_back(1);
        c.q1 = Mlp::create(sizes, Activation::relu, OutputActivation::identity, rng);
        c.q2 = Mlp::create(sizes, Activation::relu, OutputActivation::identity, rng);
        c.q1_target = c.q1;
        c.q2_target = c.q2;
        return c;
    }
};

inline Tensor concat_columns(const Tensor& a, const Tensor& b) {
    if (a.rows() != b.rows()) throw DimensionError("concat_columns: row mismatch");
    Tensor out({a.rows(), a.cols() + b.cols()});
    for (std::size_t i = 0; i < a.rows(); ++i) {
        std::copy_n(a.row(i), a.cols(), out.row(i));
        std::copy_n(b.row(i), b.cols(), out.row(i) + a.cols());
    }
    return out;
}

inline void polyak_update(Mlp& target, const Mlp& online, double tau) {
    for (std::size_t l = 0; l < target.weights.size(); ++l) {
        for (std::size_t n = 0; n < target.weights[l].numel(); ++n) {
            target.weights[l].data[n] =
                (1.0 - tau) * target.weights[l].data[n] + tau * online.weights[l].data[n];
        }
        for (std::size_t n = 0; n < target.biases[l].numel(); ++n) {
            target.biases[l].data[n] =
                (1.0 - tau) * target.biases[l].data[n] + tau * online.biases[l].data[n];
        }
    }
}

/// Policy, twin critics, optimizers and entropy temperature.
struct SacAgent {
    GaussianPolicy policy;
    Critic critic;
    AdamState policy_adam, q1_adam, q2_adam;
    Tensor log_temp;  // single scalar, optimized when auto_temperature
    AdamState temp_adam;
    double target_entropy = 0.0;

    static SacAgent create(std::size_t obs_dim, std::size_t action_dim, const AgentConfig& cfg,
                           Rng& rng) {
        SacAgent a;
        a.policy = GaussianPolicy::create(obs_dim, action_dim, cfg.hidden, rng);
        a.critic = Critic::create(obs_dim, action_dim, cfg.hidden, rng);
        a.policy_adam = AdamState::create(mlp_params_const(a.policy.net), cfg.lr);
        a.q1_adam = AdamState::create(mlp_params_const(a.critic.q1), cfg.lr);
        a.q2_adam = AdamState::create(mlp_params_const(a.critic.q2), cfg.lr);
        a.log_temp = Tensor({1});
        a.log_temp.data[0] = std::log(std::max(cfg.init_temperature, 1e-8));
        a.temp_adam = AdamState::create({&a.log_temp}, cfg.lr);
        a.target_entropy = -static_cast<double>(action_dim);
        return a;
    }

    double temperature(const AgentConfig& cfg) const {
        return cfg.auto_temperature ? std::exp(log_temp.data[0]) : cfg.fixed_temperature;
    }
};

/// Soft Bellman target y = r + gamma (1-done) (min_i Q_i'(s', a') - T log pi(a'|s')).
inline Tensor critic_target(const SacAgent& agent, const AgentConfig& cfg,
                            const ReplayBatch& batch, Rng& rng) {
    const std::size_t b = batch.states.rows();
    PolicyHead head = policy_forward(agent.policy, batch.next_states);
    PolicySample next = policy_sample(head, rng);
    Tensor next_in = concat_columns(batch.next_states, next.actions);
    Tensor q1 = agent.critic.q1_target.forward(next_in);
    Tensor q2 = agent.critic.q2_target.forward(next_in);
    const double temp = agent.temperature(cfg);
    Tensor y({b});
    for (std::size_t i = 0; i < b; ++i) {
        const double soft_v = std::min(q1.data[i], q2.data[i]) - temp * next.log_prob[i];
        y.data[i] = cfg.reward_scale * batch.rewards.data[i] +
                    cfg.gamma * (1.0 - batch.dones.data[i]) * soft_v;
    }
    return y;
}

struct SacScalars {
    double critic_loss = 0.0;
    double actor_loss = 0.0;
    double entropy = 0.0;
    double il_term = 0.0;  // alpha * L_IL as it entered the objective
    double temperature = 0.0;
};

namespace agent_detail {

/// Negative-log-likelihood gradient of the squashed Gaussian wrt the policy
/// head outputs, accumulated into `upstream` with the given weight. Returns
/// the mean NLL over the batch.
inline double accumulate_nll_gradient(const GaussianPolicy& policy, const PolicyHead& head,
                                      const Tensor& demo_actions, double weight,
                                      Tensor& upstream) {
    const std::size_t b = head.mu.rows();
    const std::size_t a = policy.action_dim;
    constexpr double kHalfLog2Pi = 0.9189385332046727;
    double nll_sum = 0.0;
    const double scale = weight / static_cast<double>(b);
    for (std::size_t i = 0; i < b; ++i) {
        for (std::size_t d = 0; d < a; ++d) {
            const double u = policy_detail::atanh_clamped(demo_actions(i, d));
            const double ls = head.log_std(i, d);
            const double sd = std::exp(ls);
            const double z = (u - head.mu(i, d)) / sd;
            nll_sum += ls + kHalfLog2Pi + 0.5 * z * z +
                       policy_detail::log_one_minus_tanh_sq(u);
            // dNLL/dmu = -z/sd ; dNLL/dlog_std = 1 - z^2 (zero outside clamp).
            upstream(i, d) += scale * (-z / sd);
            upstream(i, a + d) += scale * (1.0 - z * z) * head.in_range(i, d);
        }
    }
    return nll_sum / static_cast<double>(b);
}

}  // namespace agent_detail

/// One behavior-cloning step batch loss; used by bc_pretrain and the IL term.
struct BcResult {
    std::vector<double> loss_trace;
};

/// Pretrains the policy by maximum likelihood on demonstration (s, a) pairs.
inline BcResult bc_pretrain(GaussianPolicy& policy, const TransitionDataset& demos,
                            const AgentConfig& cfg, Rng& rng) {
    if (demos.empty()) throw PrerequisiteError("bc_pretrain: empty demonstration dataset");
    if (demos.state_dim() != policy.obs_dim || demos.action_dim() != policy.action_dim) {
        throw DimensionError("bc_pretrain: demo dims do not match the policy");
    }
    AdamState adam = AdamState::create(mlp_params_const(policy.net), cfg.bc_lr);
    BcResult result;
    result.loss_trace.reserve(cfg.bc_pretrain_steps);
    const std::size_t b = std::min(cfg.bc_batch, demos.size());
    Tensor states({b, policy.obs_dim});
    Tensor actions({b, policy.action_dim});
    for (std::size_t step = 0; step < cfg.bc_pretrain_steps; ++step) {
        for (std::size_t i = 0; i < b; ++i) {
            const std::size_t idx = rng.uniform_index(demos.size());
            const auto s = demos.state(idx);
            const auto a = demos.action(idx);
            std::copy(s.begin(), s.end(), states.row(i));
            std::copy(a.begin(), a.end(), actions.row(i));
        }
        PolicyHead head = policy_forward(policy, states);
        Tensor upstream({b, 2 * policy.action_dim});
        const double nll =
            agent_detail::accumulate_nll_gradient(policy, head, actions, 1.0, upstream);
        if (!std::isfinite(nll)) {
            throw NumericalError("bc_pretrain: non-finite loss at step " + std::to_string(step));
        }
        result.loss_trace.push_back(nll);
        MlpGrads grads = policy.net.backward(head.cache, upstream);
        adam_step(adam, mlp_params(policy.net), grad_views(grads));
    }
    return result;
}

/// One SAC gradient step on a replay batch, with the imitation term evaluated
/// on a fresh demonstration minibatch when il_weight > 0.
inline SacScalars sac_update(SacAgent& agent, const AgentConfig& cfg, const ReplayBatch& batch,
                             const TransitionDataset* demos, double il_weight, Rng& rng) {
    const std::size_t b = batch.states.rows();
    const std::size_t a = agent.policy.action_dim;
    SacScalars scalars;
    const double temp = agent.temperature(cfg);
    scalars.temperature = temp;

    // --- Critic step ---
    Tensor y = critic_target(agent, cfg, batch, rng);
    Tensor critic_in = concat_columns(batch.states, batch.actions);
    for (Mlp* q : {&agent.critic.q1, &agent.critic.q2}) {
        MlpCache cache = q->forward_cached(critic_in);
        const Tensor& pred = cache.output();
        Tensor upstream({b, std::size_t(1)});
        double loss = 0.0;
        for (std::size_t i = 0; i < b; ++i) {
            const double diff = pred.data[i] - y.data[i];
            loss += diff * diff;
            upstream.data[i] = 2.0 * diff / static_cast<double>(b);
        }
        loss /= static_cast<double>(b);
        scalars.critic_loss += loss;
        MlpGrads grads = q->backward(cache, upstream);
        adam_step(q == &agent.critic.q1 ? agent.q1_adam : agent.q2_adam, mlp_params(*q),
                  grad_views(grads));
    }

    // --- Actor step ---
    PolicyHead head = policy_forward(agent.policy, batch.states);
    PolicySample sample = policy_sample(head, rng);
    Tensor actor_in = concat_columns(batch.states, sample.actions);
    MlpCache q1c = agent.critic.q1.forward_cached(actor_in);
    MlpCache q2c = agent.critic.q2.forward_cached(actor_in);
    const Tensor& q1v = q1c.output();
    const Tensor& q2v = q2c.output();

    // Per-row input gradient of min(Q1, Q2) wrt the action columns.
    Tensor mask1({b, std::size_t(1)}), mask2({b, std::size_t(1)});
    for (std::size_t i = 0; i < b; ++i) {
        if (q1v.data[i] <= q2v.data[i]) {
            mask1.data[i] = 1.0;
        } else {
            mask2.data[i] = 1.0;
        }
    }
    Tensor qin_grad1, qin_grad2;
    agent.critic.q1.backward(q1c, mask1, &qin_grad1);
    agent.critic.q2.backward(q2c, mask2, &qin_grad2);

    Tensor upstream({b, 2 * a});
    double actor_loss = 0.0;
    double entropy_sum = 0.0;
    const double inv_b = 1.0 / static_cast<double>(b);
    for (std::size_t i = 0; i < b; ++i) {
        const double qmin = std::min(q1v.data[i], q2v.data[i]);
        actor_loss += temp * sample.log_prob[i] - qmin;
        entropy_sum += -sample.log_prob[i];
        for (std::size_t d = 0; d < a; ++d) {
            const double t = sample.actions(i, d);
            const double dq_da = qin_grad1(i, agent.policy.obs_dim + d) +
                                 qin_grad2(i, agent.policy.obs_dim + d);
            const double sd = std::exp(head.log_std(i, d));
            const double du_dls = sd * sample.zeta(i, d);
            const double dlogp_du = 2.0 * t;
            const double dobj_du = temp * dlogp_du - dq_da * (1.0 - t * t);
            upstream(i, d) += inv_b * dobj_du;
            upstream(i, a + d) +=
                inv_b * (temp * (-1.0) + dobj_du * du_dls) * head.in_range(i, d);
        }
    }
    actor_loss *= inv_b;
    scalars.entropy = entropy_sum * inv_b;

    // --- Imitation term on a fresh demo minibatch ---
    if (il_weight > 0.0 && demos != nullptr && !demos->empty()) {
        const std::size_t db = std::min(cfg.batch, demos->size());
        Tensor demo_states({db, agent.policy.obs_dim});
        Tensor demo_actions({db, a});
        for (std::size_t i = 0; i < db; ++i) {
            const std::size_t idx = rng.uniform_index(demos->size());
            const auto s = demos->state(idx);
            const auto da = demos->action(idx);
            std::copy(s.begin(), s.end(), demo_states.row(i));
            std::copy(da.begin(), da.end(), demo_actions.row(i));
        }
        PolicyHead demo_head = policy_forward(agent.policy, demo_states);
        Tensor demo_upstream({db, 2 * a});
        const double nll = agent_detail::accumulate_nll_gradient(
            agent.policy, demo_head, demo_actions, il_weight, demo_upstream);
        scalars.il_term = il_weight * nll;
        MlpGrads demo_grads = agent.policy.net.backward(demo_head.cache, demo_upstream);
        MlpGrads actor_grads = agent.policy.net.backward(head.cache, upstream);
        for (std::size_t l = 0; l < actor_grads.weights.size(); ++l) {
            for (std::size_t n = 0; n < actor_grads.weights[l].numel(); ++n) {
                actor_grads.weights[l].data[n] += demo_grads.weights[l].data[n];
            }
            for (std::size_t n = 0; n < actor_grads.biases[l].numel(); ++n) {
                actor_grads.biases[l].data[n] += demo_grads.biases[l].data[n];
            }
        }
        adam_step(agent.policy_adam, mlp_params(agent.policy.net), grad_views(actor_grads));
    } else {
        scalars.il_term = 0.0;
        MlpGrads actor_grads = agent.policy.net.backward(head.cache, upstream);
        adam_step(agent.policy_adam, mlp_params(agent.policy.net), grad_views(actor_grads));
    }
    scalars.actor_loss = actor_loss + scalars.il_term;

    // --- Temperature ---
    if (cfg.auto_temperature) {
        double g = 0.0;
        for (std::size_t i = 0; i < b; ++i) {
            g += sample.log_prob[i] + agent.target_entropy;
        }
        g = -g * inv_b;
        Tensor grad({1});
        grad.data[0] = g;
        adam_step(agent.temp_adam, {&agent.log_temp}, {&grad});
    }

    // --- Polyak target update ---
    polyak_update(agent.critic.q1_target, agent.critic.q1, cfg.tau);
    polyak_update(agent.critic.q2_target, agent.critic.q2, cfg.tau);

    if (!std::isfinite(scalars.critic_loss) || !std::isfinite(actor_loss)) {
        throw NumericalError("sac_update: non-finite loss");
    }
    return scalars;
}

/// Random-policy and expert reference returns used for normalized scores.
struct RefReturns {
    double random_return = 0.0;
    double expert_return = 0.0;

    double normalized(double ret) const {
        if (expert_return == random_return) {
            throw PrerequisiteError("normalized score: degenerate reference returns");
        }
        return 100.0 * (ret - random_return) / (expert_return - random_return);
    }
};

struct EvalResult {
    double mean_return = 0.0;
    double std_return = 0.0;
    std::size_t steps_consumed = 0;
    std::vector<double> returns;
};

namespace agent_detail {

template <typename ActionFn>
EvalResult rollout_episodes(const EnvSpec& spec, std::size_t n_episodes, Rng& rng,
                            ActionFn&& act) {
    if (n_episodes < 1) throw ConfigError("evaluate_policy: n_episodes must be >= 1");
    EvalResult result;
    result.returns.reserve(n_episodes);
    for (std::size_t e = 0; e < n_episodes; ++e) {
        EnvState state = env_reset(spec, rng);
        double ret = 0.0;
        bool done = false;
        while (!done) {
            const std::vector<double> a = act(state, rng);
            StepResult step = env_step(spec, state, a);
            ret += step.reward;
            done = step.done;
            state = std::move(step.next);
            ++result.steps_consumed;
        }
        result.returns.push_back(ret);
    }
    result.mean_return = mean(result.returns);
    result.std_return = stddev(result.returns);
    return result;
}

}  // namespace agent_detail

/// Deterministic-mean-action evaluation over n_episodes full episodes.
inline EvalResult evaluate_policy(const GaussianPolicy& policy, const EnvSpec& spec,
                                  std::size_t n_episodes, Rng& rng) {
    return agent_detail::rollout_episodes(
        spec, n_episodes, rng,
        [&policy](const EnvState& s, Rng&) { return policy.mean_action(s.obs); });
}

/// Mean return of a uniform-random policy, for the score anchor.
inline EvalResult evaluate_random_policy(const EnvSpec& spec, std::size_t n_episodes, Rng& rng) {
    return agent_detail::rollout_episodes(
        spec, n_episodes, rng,
        [&spec](const EnvState&, Rng& r) { return random_action(spec, r); });
}

struct AblationFlags {
    bool no_il = false;
    bool no_rm = false;
    bool no_alignment = false;
};

/// One logged row of the online loop, emitted every eval_interval steps.
struct MetricsRow {
    std::size_t step = 0;
    double source_return = 0.0;     // raw source return of the last finished episode
    double modulated_return = 0.0;  // buffer-reward return of the last finished episode
    double eval_return_target = 0.0;
    std::optional<double> normalized_score;
    double critic_loss = 0.0;
    double actor_loss = 0.0;
    double il_loss = 0.0;
    std::size_t refresh_count = 0;
};

struct RunResult {
    SacAgent agent;
    std::vector<MetricsRow> metrics;
    std::size_t refresh_count = 0;
    TransitionDataset augmented_source;  // D_S grown by the online loop
    std::size_t action_clip_warnings = 0;
    std::vector<GaussianPolicy> snapshots;  // policies at requested steps, in order
    ReplayBuffer buffer{1, 1, 1};           // final buffer, tags included
};

/// Continues training the reward net on (augmented) source data without
/// refitting its input statistics.
inline void reward_refresh(RewardModel& model, const TransitionDataset& data, std::size_t steps,
                           std::size_t batch, double lr, Rng& rng) {
    if (!data.has_rewards() || data.empty()) return;
    AdamState adam = AdamState::create(mlp_params_const(model.net), lr);
    const std::size_t sd = model.state_dim;
    Tensor x({batch, 2 * sd});
    for (std::size_t step = 0; step < steps; ++step) {
        std::vector<double> targets(batch);
        for (std::size_t i = 0; i < batch; ++i) {
            const std::size_t idx = rng.uniform_index(data.size());
            double* r = x.row(i);
            const auto s = data.state(idx);
            const auto sn = data.next_state(idx);
            std::copy(s.begin(), s.end(), r);
            std::copy(sn.begin(), sn.end(), r + sd);
            model.input_norm.normalize_in_place({r, 2 * sd});
            targets[i] = data.reward(idx);
        }
        MlpCache cache = model.net.forward_cached(x);
        Tensor upstream({batch, std::size_t(1)});
        for (std::size_t i = 0; i < batch; ++i) {
            const double y = (targets[i] - model.reward_mean) / model.reward_std;
            upstream.data[i] =
                2.0 * (cache.output().data[i] - y) / static_cast<double>(batch);
        }
        MlpGrads grads = model.net.backward(cache, upstream);
        adam_step(adam, mlp_params(model.net), grad_views(grads));
    }
}

/// The online phase: act in the source environment, translate each next
/// state through DSB_{S->T}, modulate the reward, store the translated tuple
/// in the replay buffer, append the true tuple to D_S, continue the episode
/// from the translated state (default) or the true one, update SAC every
/// step, and periodically refresh the bridge/reward models on the augmented
/// D_S. Ablation flags bypass exactly their documented pathway.
inline RunResult run_bdgxrl(const EnvSpec& source_spec, const EnvSpec& target_spec,
                            const TransitionDataset& target_demos, BridgeModel* bridge,
                            RewardModel* reward_model, const TransitionDataset& offline_source,
                            const AgentConfig& cfg, const AblationFlags& flags,
                            const std::optional<RefReturns>& refs, SacAgent agent, Rng& rng,
                            const std::vector<std::size_t>& snapshot_steps = {}) {
    cfg.validate();
    if (!flags.no_alignment && bridge == nullptr) {
        throw PrerequisiteError("run_bdgxrl: bridge model required unless no_alignment is set");
    }
    if (!flags.no_rm && reward_model == nullptr) {
        throw PrerequisiteError("run_bdgxrl: reward model required unless no_rm is set");
    }
    const double il_weight = flags.no_il ? 0.0 : cfg.il_weight;

    RunResult result;
    result.augmented_source = offline_source;
    if (result.augmented_source.size() == 0 && !offline_source.has_rewards()) {
        result.augmented_source =
            TransitionDataset(source_spec.obs_dim(), source_spec.action_dim(), true);
    }

    ReplayBuffer buffer(cfg.replay_capacity, source_spec.obs_dim(), source_spec.action_dim());
    Rng eval_rng = rng.child(0xE7A1);

    EnvState state = env_reset(source_spec, rng);
    double episode_source_return = 0.0;
    double episode_modulated_return = 0.0;
    double last_source_return = 0.0;
    double last_modulated_return = 0.0;
    SacScalars last_scalars;

    for (std::size_t t = 1; t <= cfg.total_steps; ++t) {
        std::vector<double> action;
        if (t <= cfg.start_steps) {
            action = random_action(source_spec, rng);
        } else {
            PolicyHead head = policy_forward(
                agent.policy, Tensor({1, source_spec.obs_dim()},
                                     std::vector<double>(state.obs.begin(), state.obs.end())));
            PolicySample s = policy_sample(head, rng);
            action.assign(s.actions.data.begin(), s.actions.data.end());
        }

        StepResult step = env_step(source_spec, state, action);
        result.action_clip_warnings += step.clipped_action_components;

        std::vector<double> next_for_buffer;
        if (flags.no_alignment) {
            next_for_buffer = step.next.obs;
        } else {
            next_for_buffer = translate_s_to_t(*bridge, state.obs, action, step.next.obs, rng);
        }
        const double reward_for_buffer =
            flags.no_rm ? step.reward : modulate(*reward_model, state.obs, next_for_buffer);

        buffer.push(state.obs, action, reward_for_buffer, next_for_buffer, step.done,
                    ReplayTags{!flags.no_rm, !flags.no_alignment});
        result.augmented_source.append(state.obs, action, step.next.obs, step.reward, step.done);

        episode_source_return += step.reward;
        episode_modulated_return += reward_for_buffer;

        if (step.done) {
            last_source_return = episode_source_return;
            last_modulated_return = episode_modulated_return;
            episode_source_return = 0.0;
            episode_modulated_return = 0.0;
            state = env_reset(source_spec, rng);
        } else if (!flags.no_alignment &&
                   cfg.state_continuation == StateContinuation::translated) {
            EnvState forced;
            forced.obs = next_for_buffer;
            forced.step_index = step.next.step_index;
            state = env_set_state(source_spec, forced);
        } else {
            state = std::move(step.next);
        }

        if (t > cfg.start_steps && buffer.size() >= cfg.batch) {
            ReplayBatch batch = buffer.sample(cfg.batch, rng);
            last_scalars = sac_update(agent, cfg, batch,
                                      target_demos.empty() ? nullptr : &target_demos,
                                      il_weight, rng);
        }

        if (cfg.refresh_period > 0 && t % cfg.refresh_period == 0 && t < cfg.total_steps &&
            (!flags.no_alignment || !flags.no_rm)) {
            if (!flags.no_alignment) {
                BridgeConfig refresh_cfg = bridge->config;
                refresh_cfg.outer_iters = 1;
                Tensor source_rows =
                    bridge->normalizer.normalize_rows(result.augmented_source.packed_matrix());
                Tensor target_rows =
                    bridge->normalizer.normalize_rows(target_demos.packed_matrix());
                ImfResult warm{bridge->forward, bridge->backward, {}};
                ImfResult refit =
                    imf_fit(source_rows, target_rows, refresh_cfg, rng, std::move(warm));
                bridge->forward = std::move(refit.forward);
                bridge->backward = std::move(refit.backward);
            }
            if (!flags.no_rm) {
                reward_refresh(*reward_model, result.augmented_source, cfg.refresh_reward_steps,
                               cfg.batch, cfg.lr, rng);
            }
            ++result.refresh_count;
        }

        for (std::size_t snap : snapshot_steps) {
            if (snap == t) result.snapshots.push_back(agent.policy);
        }

        if (t % cfg.eval_interval == 0) {
            EvalResult eval = evaluate_policy(agent.policy, target_spec, cfg.eval_episodes,
                                              eval_rng);
            MetricsRow row;
            row.step = t;
            row.source_return = last_source_return;
            row.modulated_return = last_modulated_return;
            row.eval_return_target = eval.mean_return;
            if (refs) row.normalized_score = refs->normalized(eval.mean_return);
            row.critic_loss = last_scalars.critic_loss;
            row.actor_loss = last_scalars.actor_loss;
            row.il_loss = last_scalars.il_term;
            row.refresh_count = result.refresh_count;
            result.metrics.push_back(row);
        }
    }

    result.agent = std::move(agent);
    result.buffer = std::move(buffer);
    return result;
}

/// Plain SAC in a single environment: the online loop with translation,
/// modulation and imitation all disabled.
inline RunResult train_sac(const EnvSpec& spec, const AgentConfig& cfg,
                           const std::optional<RefReturns>& refs, Rng& rng,
                           const std::vector<std::size_t>& snapshot_steps = {}) {
    AgentConfig plain = cfg;
    plain.state_continuation = StateContinuation::source_true;
    plain.refresh_period = 0;
    AblationFlags flags{true, true, true};
    TransitionDataset no_demos(spec.obs_dim(), spec.action_dim(), false);
    TransitionDataset empty_source(spec.obs_dim(), spec.action_dim(), true);
    SacAgent agent = SacAgent::create(spec.obs_dim(), spec.action_dim(), plain, rng);
    return run_bdgxrl(spec, spec, no_demos, nullptr, nullptr, empty_source, plain, flags,
                      refs, std::move(agent), rng, snapshot_steps);
}

/// Policy checkpointing in the shared container format.
inline void save_policy(const GaussianPolicy& policy, const std::string& path) {
    Container c;
    c.kind = "policy";
    c.meta["obs_dim"] = policy.obs_dim;
    c.meta["action_dim"] = policy.action_dim;
    put_mlp(c, "net", policy.net);
    c.save(path);
}

inline GaussianPolicy load_policy(const std::string& path) {
    Container c = Container::load(path);
    if (c.kind != "policy") {
        throw FormatError("policy: '" + path + "' is a '" + c.kind + "' artifact");
    }
    GaussianPolicy p;
    p.obs_dim = c.meta.at("obs_dim").get<std::size_t>();
    p.action_dim = c.meta.at("action_dim").get<std::size_t>();
    p.net = get_mlp(c, "net");
    if (p.net.input_dim() != p.obs_dim || p.net.output_dim() != 2 * p.action_dim) {
        throw FormatError("policy: checkpoint net dims inconsistent");
    }
    return p;
}

}  // namespace bdgx
