#pragma once

#include <cstdint>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "bdgx/container.hpp"
#include "bdgx/env.hpp"
#include "bdgx/errors.hpp"
#include "bdgx/rng.hpp"
#include "bdgx/tensor.hpp"

namespace bdgx {

/// Segment offsets of the concatenated transition vector [s; a; s'].
struct SegmentLayout {
    std::size_t state_dim = 0;
    std::size_t action_dim = 0;

    std::size_t s_offset() const { return 0; }
    std::size_t a_offset() const { return state_dim; }
    std::size_t s_next_offset() const { return state_dim + action_dim; }
    std::size_t total_dim() const { return 2 * state_dim + action_dim; }

    bool operator==(const SegmentLayout&) const = default;
};

inline std::vector<double> pack(const SegmentLayout& layout, std::span<const double> s,
                                std::span<const double> a, std::span<const double> s_next) {
    if (s.size() != layout.state_dim || a.size() != layout.action_dim ||
        s_next.size() != layout.state_dim) {
        throw DimensionError("pack: segment sizes (" + std::to_string(s.size()) + "," +
                             std::to_string(a.size()) + "," + std::to_string(s_next.size()) +
                             ") do not match layout (" + std::to_string(layout.state_dim) + "," +
                             std::to_string(layout.action_dim) + ")");
    }
    std::vector<double> p;
    p.reserve(layout.total_dim());
    p.insert(p.end(), s.begin(), s.end());
    p.insert(p.end(), a.begin(), a.end());
    p.insert(p.end(), s_next.begin(), s_next.end());
    return p;
}

struct UnpackedTransition {
    std::vector<double> s;
    std::vector<double> a;
    std::vector<double> s_next;
};

inline UnpackedTransition unpack(const SegmentLayout& layout, std::span<const double> p) {
    if (p.size() != layout.total_dim()) {
        throw DimensionError("unpack: vector length " + std::to_string(p.size()) +
                             " != layout total " + std::to_string(layout.total_dim()));
    }
    UnpackedTransition t;
    t.s.assign(p.begin(), p.begin() + layout.state_dim);
    t.a.assign(p.begin() + layout.a_offset(), p.begin() + layout.s_next_offset());
    t.s_next.assign(p.begin() + layout.s_next_offset(), p.end());
    return t;
}

/// Column-oriented transition storage. Target-domain datasets are reward-free.
class TransitionDataset {
public:
    TransitionDataset() = default;
    TransitionDataset(std::size_t state_dim, std::size_t action_dim, bool has_rewards)
        : state_dim_(state_dim), action_dim_(action_dim), has_rewards_(has_rewards) {}

    std::size_t state_dim() const { return state_dim_; }
    std::size_t action_dim() const { return action_dim_; }
    bool has_rewards() const { return has_rewards_; }
    std::size_t size() const { return dones_.size(); }
    bool empty() const { return dones_.empty(); }
    SegmentLayout layout() const { return {state_dim_, action_dim_}; }

    void append(std::span<const double> s, std::span<const double> a,
                std::span<const double> s_next, double reward, bool done) {
        if (s.size() != state_dim_ || s_next.size() != state_dim_ || a.size() != action_dim_) {
            throw DimensionError("dataset append: segment size mismatch");
        }
        states_.insert(states_.end(), s.begin(), s.end());
        actions_.insert(actions_.end(), a.begin(), a.end());
        next_states_.insert(next_states_.end(), s_next.begin(), s_next.end());
        if (has_rewards_) rewards_.push_back(reward);
        dones_.push_back(done ? 1 : 0);
    }

    std::span<const double> state(std::size_t i) const {
        return {states_.data() + i * state_dim_, state_dim_};
    }
    std::span<const double> action(std::size_t i) const {
        return {actions_.data() + i * action_dim_, action_dim_};
    }
    std::span<const double> next_state(std::size_t i) const {
        return {next_states_.data() + i * state_dim_, state_dim_};
    }
    double reward(std::size_t i) const {
        if (!has_rewards_) throw PrerequisiteError("dataset: reward requested from reward-free data");
        return rewards_[i];
    }
    bool done(std::size_t i) const { return dones_[i] != 0; }

    /// All transitions as packed rows [N, 2*state_dim + action_dim].
    Tensor packed_matrix() const {
        const SegmentLayout lay = layout();
        Tensor m({size(), lay.total_dim()});
        for (std::size_t i = 0; i < size(); ++i) {
            double* r = m.row(i);
            const auto s = state(i);
            const auto a = action(i);
            const auto sn = next_state(i);
            std::copy(s.begin(), s.end(), r);
            std::copy(a.begin(), a.end(), r + lay.a_offset());
            std::copy(sn.begin(), sn.end(), r + lay.s_next_offset());
        }
        return m;
    }

    /// Drops rewards, producing a demonstration-style dataset.
    TransitionDataset without_rewards() const {
        TransitionDataset out(state_dim_, action_dim_, false);
        out.states_ = states_;
        out.actions_ = actions_;
        out.next_states_ = next_states_;
        out.dones_ = dones_;
        return out;
    }

    void save(const std::string& path) const {
        Container c;
        c.kind = "dataset";
        c.meta["state_dim"] = state_dim_;
        c.meta["action_dim"] = action_dim_;
        c.meta["count"] = size();
        c.meta["has_rewards"] = has_rewards_;
        c.add("s", Tensor({size(), state_dim_}, states_));
        c.add("a", Tensor({size(), action_dim_}, actions_));
        c.add("s_next", Tensor({size(), state_dim_}, next_states_));
        if (has_rewards_) c.add("r", Tensor({size()}, rewards_));
        Tensor d({size()});
        for (std::size_t i = 0; i < size(); ++i) d.data[i] = dones_[i];
        c.add("done", d);
        c.save(path);
    }

    static TransitionDataset load(const std::string& path) {
        Container c = Container::load(path);
        if (c.kind != "dataset") {
            throw FormatError("dataset: '" + path + "' is a '" + c.kind + "' artifact");
        }
        TransitionDataset ds(c.meta.at("state_dim").get<std::size_t>(),
                             c.meta.at("action_dim").get<std::size_t>(),
                             c.meta.at("has_rewards").get<bool>());
        const std::size_t n = c.meta.at("count").get<std::size_t>();
        const Tensor& s = c.get("s");
        const Tensor& a = c.get("a");
        const Tensor& sn = c.get("s_next");
        const Tensor& d = c.get("done");
        if (s.rows() != n || a.rows() != n || sn.rows() != n || d.numel() != n ||
            s.cols() != ds.state_dim_ || sn.cols() != ds.state_dim_ ||
            a.cols() != ds.action_dim_) {
            throw FormatError("dataset: '" + path + "' manifest is inconsistent");
        }
        ds.states_ = s.data;
        ds.actions_ = a.data;
        ds.next_states_ = sn.data;
        if (ds.has_rewards_) {
            const Tensor& r = c.get("r");
            if (r.numel() != n) throw FormatError("dataset: reward column length mismatch");
            ds.rewards_ = r.data;
        }
        ds.dones_.resize(n);
        for (std::size_t i = 0; i < n; ++i) ds.dones_[i] = d.data[i] != 0.0 ? 1 : 0;
        return ds;
    }

    /// Human-inspectable export: one header row, then one row per transition.
    void export_csv(const std::string& path) const {
        std::ofstream out(path, std::ios::trunc);
        if (!out) throw FormatError("dataset: cannot open '" + path + "' for csv export");
        for (std::size_t j = 0; j < state_dim_; ++j) out << "s_" << j << ",";
        for (std::size_t j = 0; j < action_dim_; ++j) out << "a_" << j << ",";
        for (std::size_t j = 0; j < state_dim_; ++j) out << "sn_" << j << ",";
        out << "r,done\n";
        out.precision(17);
        for (std::size_t i = 0; i < size(); ++i) {
            for (double v : state(i)) out << v << ",";
            for (double v : action(i)) out << v << ",";
            for (double v : next_state(i)) out << v << ",";
            if (has_rewards_) {
                out << rewards_[i];
            }
            out << "," << int(dones_[i]) << "\n";
        }
    }

private:
    std::size_t state_dim_ = 0;
    std::size_t action_dim_ = 0;
    bool has_rewards_ = true;
    std::vector<double> states_;
    std::vector<double> actions_;
    std::vector<double> next_states_;
    std::vector<double> rewards_;
    std::vector<std::uint8_t> dones_;
};

/// Per-dimension z-score statistics with a floored standard deviation.
class Normalizer {
public:
    static constexpr double kStdFloor = 1e-6;

    Normalizer() = default;

    static Normalizer fit(const Tensor& rows) {
        require_matrix(rows, "normalizer fit");
        if (rows.shape[0] == 0) throw DimensionError("normalizer: cannot fit on empty data");
        Normalizer n;
        const std::size_t d = rows.shape[1];
        n.mean_.assign(d, 0.0);
        n.std_.assign(d, 0.0);
        for (std::size_t i = 0; i < rows.shape[0]; ++i) {
            const double* r = rows.row(i);
            for (std::size_t j = 0; j < d; ++j) n.mean_[j] += r[j];
        }
        for (double& v : n.mean_) v /= static_cast<double>(rows.shape[0]);
        for (std::size_t i = 0; i < rows.shape[0]; ++i) {
            const double* r = rows.row(i);
            for (std::size_t j = 0; j < d; ++j) {
                const double dv = r[j] - n.mean_[j];
                n.std_[j] += dv * dv;
            }
        }
        for (double& v : n.std_) {
            v = std::sqrt(v / static_cast<double>(rows.shape[0]));
            if (v < kStdFloor) v = kStdFloor;
        }
        n.fitted_ = true;
        return n;
    }

    static Normalizer from_stats(std::vector<double> mean, std::vector<double> std) {
        if (mean.size() != std.size()) {
            throw DimensionError("normalizer: mean/std length mismatch");
        }
        Normalizer n;
        n.mean_ = std::move(mean);
        n.std_ = std::move(std);
        for (double& v : n.std_) {
            if (v < kStdFloor) v = kStdFloor;
        }
        n.fitted_ = true;
        return n;
    }

    bool fitted() const { return fitted_; }
    std::size_t dim() const { return mean_.size(); }
    const std::vector<double>& means() const { return mean_; }
    const std::vector<double>& stds() const { return std_; }

    void normalize_in_place(std::span<double> x) const {
        check(x.size());
        for (std::size_t j = 0; j < x.size(); ++j) x[j] = (x[j] - mean_[j]) / std_[j];
    }
    void denormalize_in_place(std::span<double> x) const {
        check(x.size());
        for (std::size_t j = 0; j < x.size(); ++j) x[j] = x[j] * std_[j] + mean_[j];
    }

    std::vector<double> normalize(std::span<const double> x) const {
        std::vector<double> out(x.begin(), x.end());
        normalize_in_place(out);
        return out;
    }
    std::vector<double> denormalize(std::span<const double> x) const {
        std::vector<double> out(x.begin(), x.end());
        denormalize_in_place(out);
        return out;
    }

    Tensor normalize_rows(const Tensor& rows) const {
        require_matrix(rows, "normalizer");
        check(rows.shape[1]);
        Tensor out = rows;
        for (std::size_t i = 0; i < out.shape[0]; ++i) {
            normalize_in_place({out.row(i), out.shape[1]});
        }
        return out;
    }
    Tensor denormalize_rows(const Tensor& rows) const {
        require_matrix(rows, "normalizer");
        check(rows.shape[1]);
        Tensor out = rows;
        for (std::size_t i = 0; i < out.shape[0]; ++i) {
            denormalize_in_place({out.row(i), out.shape[1]});
        }
        return out;
    }

    bool operator==(const Normalizer&) const = default;

private:
    bool fitted_ = false;
    std::vector<double> mean_;
    std::vector<double> std_;

    void check(std::size_t n) const {
        if (!fitted_) throw PrerequisiteError("normalizer: used before fit");
        if (n != mean_.size()) {
            throw DimensionError("normalizer: dimension " + std::to_string(n) + " != fitted " +
                                 std::to_string(mean_.size()));
        }
    }
};

/// Provenance of a stored replay record, for auditing the online loop.
struct ReplayTags {
    bool reward_modulated = false;
    bool next_state_translated = false;
};

struct ReplayBatch {
    Tensor states;       // [B, S]
    Tensor actions;      // [B, A]
    Tensor rewards;      // [B]
    Tensor next_states;  // [B, S]
    Tensor dones;        // [B], 0/1
};

/// Fixed-capacity FIFO ring with uniform sampling.
class ReplayBuffer {
public:
    ReplayBuffer(std::size_t capacity, std::size_t state_dim, std::size_t action_dim)
        : capacity_(capacity), state_dim_(state_dim), action_dim_(action_dim) {
        if (capacity == 0) throw ConfigError("replay buffer: capacity must be >= 1");
        states_.resize(capacity * state_dim);
        actions_.resize(capacity * action_dim);
        next_states_.resize(capacity * state_dim);
        rewards_.resize(capacity);
        dones_.resize(capacity);
        tags_.resize(capacity);
    }

    std::size_t size() const { return size_; }
    std::size_t capacity() const { return capacity_; }

    void push(std::span<const double> s, std::span<const double> a, double reward,
              std::span<const double> s_next, bool done, ReplayTags tags = {}) {
        if (s.size() != state_dim_ || s_next.size() != state_dim_ || a.size() != action_dim_) {
            throw DimensionError("replay push: segment size mismatch");
        }
        std::copy(s.begin(), s.end(), states_.begin() + cursor_ * state_dim_);
        std::copy(a.begin(), a.end(), actions_.begin() + cursor_ * action_dim_);
        std::copy(s_next.begin(), s_next.end(), next_states_.begin() + cursor_ * state_dim_);
        rewards_[cursor_] = reward;
        dones_[cursor_] = done ? 1 : 0;
        tags_[cursor_] = tags;
        cursor_ = (cursor_ + 1) % capacity_;
        if (size_ < capacity_) ++size_;
    }

    ReplayBatch sample(std::size_t batch, Rng& rng) const {
        if (size_ == 0) throw PrerequisiteError("replay sample: buffer is empty");
        ReplayBatch b{Tensor({batch, state_dim_}), Tensor({batch, action_dim_}),
                      Tensor({batch}), Tensor({batch, state_dim_}), Tensor({batch})};
        for (std::size_t i = 0; i < batch; ++i) {
            const std::size_t idx = rng.uniform_index(size_);
            std::copy_n(states_.begin() + idx * state_dim_, state_dim_, b.states.row(i));
            std::copy_n(actions_.begin() + idx * action_dim_, action_dim_, b.actions.row(i));
            std::copy_n(next_states_.begin() + idx * state_dim_, state_dim_,
                        b.next_states.row(i));
            b.rewards.data[i] = rewards_[idx];
            b.dones.data[i] = dones_[idx];
        }
        return b;
    }

    const ReplayTags& tags(std::size_t i) const { return tags_[i]; }

private:
    std::size_t capacity_;
    std::size_t state_dim_;
    std::size_t action_dim_;
    std::size_t cursor_ = 0;
    std::size_t size_ = 0;
    std::vector<double> states_;
    std::vector<double> actions_;
    std::vector<double> next_states_;
    std::vector<double> rewards_;
    std::vector<std::uint8_t> dones_;
    std::vector<ReplayTags> tags_;
};

/// Rolls a policy in the environment for exactly n_steps transitions,
/// resetting whenever an episode finishes. The policy is any callable
/// (const EnvState&, Rng&) -> std::vector<double>.
template <typename Policy>
TransitionDataset collect_rollouts(const EnvSpec& spec, Policy&& policy, std::size_t n_steps,
                                   Rng& rng) {
    if (n_steps < 1) throw ConfigError("collect_rollouts: n_steps must be >= 1");
    TransitionDataset ds(spec.obs_dim(), spec.action_dim(), /*has_rewards=*/true);
    EnvState state = env_reset(spec, rng);
    for (std::size_t t = 0; t < n_steps; ++t) {
        const std::vector<double> a = policy(state, rng);
        StepResult step = env_step(spec, state, a);
        ds.append(state.obs, a, step.next.obs, step.reward, step.done);
        if (step.done) {
            state = env_reset(spec, rng);
        } else {
            state = std::move(step.next);
        }
    }
    return ds;
}

inline std::vector<double> random_action(const EnvSpec& spec, Rng& rng) {
    std::vector<double> a(spec.action_dim());
    for (double& v : a) v = rng.uniform(-1.0, 1.0);
    return a;
}

}  // namespace bdgx
