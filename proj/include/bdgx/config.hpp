#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "bdgx/agent.hpp"
#include "bdgx/bridge.hpp"
#include "bdgx/env.hpp"
#include "bdgx/errors.hpp"
#include "bdgx/reward.hpp"

namespace bdgx {

/// Expertise tier of generated target demonstrations, selected by which
/// checkpoint of the target-trained reference agent produces them.
enum class DemoTier { early, medium, final };

inline const char* to_string(DemoTier t) {
    switch (t) {
        case DemoTier::early: return "early";
        case DemoTier::medium: return "medium";
        default: return "final";
    }
}
inline DemoTier demo_tier_from_string(const std::string& s) {
    if (s == "early") return DemoTier::early;
    if (s == "medium") return DemoTier::medium;
    if (s == "final") return DemoTier::final;
    throw ConfigError("unknown demo tier '" + s + "'");
}

struct DataConfig {
    std::size_t source_steps = 10000;   // offline D_S, uniform-random policy
    std::size_t target_demos = 20000;   // D_T size
    DemoTier demo_tier = DemoTier::medium;
    std::size_t expert_train_steps = 100000;  // budget for the reference agent
};

struct ExperimentConfig {
    std::uint64_t seed = 1;
    std::string out_dir = "runs/default";
    EnvId env = EnvId::pointmass;
    double env_dt = 0.05;
    int env_horizon = 200;
    std::array<double, 2> goal = {0.0, 0.0};
    PhysicsKnobs source_knobs{2.0, 1.0, 1.0};
    PhysicsKnobs target_knobs{1.0, 1.0, 1.0};
    DataConfig data;
    BridgeConfig bridge;
    RewardConfig reward;
    AgentConfig agent;
    AblationFlags ablation;
    std::size_t ablation_seeds = 3;
    std::size_t ref_episodes = 50;  // episodes for the score anchors

    EnvSpec source_spec() const {
        EnvSpec s = env == EnvId::pointmass ? make_pointmass_spec(source_knobs)
                                            : make_pendulum_spec(source_knobs);
        s.dt = env_dt;
        s.horizon = env_horizon;
        s.goal = goal;
        return s;
    }
    EnvSpec target_spec() const {
        EnvSpec s = env == EnvId::pointmass ? make_pointmass_spec(target_knobs)
                                            : make_pendulum_spec(target_knobs);
        s.dt = env_dt;
        s.horizon = env_horizon;
        s.goal = goal;
        return s;
    }

    void validate() const {
        source_spec().validate();
        target_spec().validate();
        bridge.validate();
        reward.validate();
        agent.validate();
        if (data.source_steps < 1) throw ConfigError("data.source_steps must be >= 1");
        if (data.target_demos < 1) throw ConfigError("data.target_demos must be >= 1");
        if (ablation_seeds < 1) throw ConfigError("ablation_seeds must be >= 1");
    }
};

inline nlohmann::json knobs_to_json(const PhysicsKnobs& k) {
    return {{"gravity_scale", k.gravity_scale},
            {"friction_scale", k.friction_scale},
            {"mass_scale", k.mass_scale}};
}
inline PhysicsKnobs knobs_from_json(const nlohmann::json& j) {
    PhysicsKnobs k;
    k.gravity_scale = j.value("gravity_scale", 1.0);
    k.friction_scale = j.value("friction_scale", 1.0);
    k.mass_scale = j.value("mass_scale", 1.0);
    return k;
}

inline nlohmann::json agent_config_to_json(const AgentConfig& a) {
    return {{"gamma", a.gamma},
            {"tau", a.tau},
            {"lr", a.lr},
            {"reward_scale", a.reward_scale},
            {"batch", a.batch},
            {"hidden", a.hidden},
            {"il_weight", a.il_weight},
            {"auto_temperature", a.auto_temperature},
            {"fixed_temperature", a.fixed_temperature},
            {"init_temperature", a.init_temperature},
            {"bc_pretrain_steps", a.bc_pretrain_steps},
            {"bc_batch", a.bc_batch},
            {"bc_lr", a.bc_lr},
            {"state_continuation", to_string(a.state_continuation)},
            {"refresh_period", a.refresh_period},
            {"replay_capacity", a.replay_capacity},
            {"start_steps", a.start_steps},
            {"eval_interval", a.eval_interval},
            {"eval_episodes", a.eval_episodes},
            {"total_steps", a.total_steps},
            {"refresh_reward_steps", a.refresh_reward_steps}};
}
inline AgentConfig agent_config_from_json(const nlohmann::json& j) {
    AgentConfig a;
    a.gamma = j.value("gamma", a.gamma);
    a.tau = j.value("tau", a.tau);
    a.lr = j.value("lr", a.lr);
    a.reward_scale = j.value("reward_scale", a.reward_scale);
    a.batch = j.value("batch", a.batch);
    a.hidden = j.value("hidden", a.hidden);
    a.il_weight = j.value("il_weight", a.il_weight);
    a.auto_temperature = j.value("auto_temperature", a.auto_temperature);
    a.fixed_temperature = j.value("fixed_temperature", a.fixed_temperature);
    a.init_temperature = j.value("init_temperature", a.init_temperature);
    a.bc_pretrain_steps = j.value("bc_pretrain_steps", a.bc_pretrain_steps);
    a.bc_batch = j.value("bc_batch", a.bc_batch);
    a.bc_lr = j.value("bc_lr", a.bc_lr);
    a.state_continuation =
        state_continuation_from_string(j.value("state_continuation", std::string("translated")));
    a.refresh_period = j.value("refresh_period", a.refresh_period);
    a.replay_capacity = j.value("replay_capacity", a.replay_capacity);
    a.start_steps = j.value("start_steps", a.start_steps);
    a.eval_interval = j.value("eval_interval", a.eval_interval);
    a.eval_episodes = j.value("eval_episodes", a.eval_episodes);
    a.total_steps = j.value("total_steps", a.total_steps);
    a.refresh_reward_steps = j.value("refresh_reward_steps", a.refresh_reward_steps);
    return a;
}

inline nlohmann::json reward_config_to_json(const RewardConfig& r) {
    return {{"hidden", r.hidden},
            {"lr", r.lr},
            {"batch", r.batch},
            {"steps", r.steps},
            {"holdout_fraction", r.holdout_fraction},
            {"rmse_gate", r.rmse_gate}};
}
inline RewardConfig reward_config_from_json(const nlohmann::json& j) {
    RewardConfig r;
    r.hidden = j.value("hidden", r.hidden);
    r.lr = j.value("lr", r.lr);
    r.batch = j.value("batch", r.batch);
    r.steps = j.value("steps", r.steps);
    r.holdout_fraction = j.value("holdout_fraction", r.holdout_fraction);
    r.rmse_gate = j.value("rmse_gate", r.rmse_gate);
    return r;
}

inline nlohmann::json experiment_config_to_json(const ExperimentConfig& c) {
    nlohmann::json j;
    j["seed"] = c.seed;
    j["out_dir"] = c.out_dir;
    j["env"] = {{"id", to_string(c.env)},
                {"dt", c.env_dt},
                {"horizon", c.env_horizon},
                {"goal", c.goal},
                {"source_knobs", knobs_to_json(c.source_knobs)},
                {"target_knobs", knobs_to_json(c.target_knobs)}};
    j["data"] = {{"source_steps", c.data.source_steps},
                 {"target_demos", c.data.target_demos},
                 {"demo_tier", to_string(c.data.demo_tier)},
                 {"expert_train_steps", c.data.expert_train_steps}};
    j["bridge"] = bridge_config_to_json(c.bridge);
    j["reward"] = reward_config_to_json(c.reward);
    j["agent"] = agent_config_to_json(c.agent);
    j["ablation"] = {{"no_il", c.ablation.no_il},
                     {"no_rm", c.ablation.no_rm},
                     {"no_alignment", c.ablation.no_alignment}};
    j["ablation_seeds"] = c.ablation_seeds;
    j["ref_episodes"] = c.ref_episodes;
    return j;
}

inline ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
    ExperimentConfig c;
    try {
        c.seed = j.value("seed", c.seed);
        c.out_dir = j.value("out_dir", c.out_dir);
        if (j.contains("env")) {
            const auto& e = j["env"];
            c.env = env_id_from_string(e.value("id", std::string("pointmass")));
            c.env_dt = e.value("dt", c.env_dt);
            c.env_horizon = e.value("horizon", c.env_horizon);
            if (e.contains("goal")) c.goal = e["goal"].get<std::array<double, 2>>();
            if (e.contains("source_knobs")) c.source_knobs = knobs_from_json(e["source_knobs"]);
            if (e.contains("target_knobs")) c.target_knobs = knobs_from_json(e["target_knobs"]);
        }
        if (j.contains("data")) {
            const auto& d = j["data"];
            c.data.source_steps = d.value("source_steps", c.data.source_steps);
            c.data.target_demos = d.value("target_demos", c.data.target_demos);
            c.data.demo_tier = demo_tier_from_string(d.value("demo_tier", std::string("medium")));
            c.data.expert_train_steps = d.value("expert_train_steps", c.data.expert_train_steps);
        }
        if (j.contains("bridge")) c.bridge = bridge_config_from_json(j["bridge"]);
        if (j.contains("reward")) c.reward = reward_config_from_json(j["reward"]);
        if (j.contains("agent")) c.agent = agent_config_from_json(j["agent"]);
        if (j.contains("ablation")) {
            c.ablation.no_il = j["ablation"].value("no_il", false);
            c.ablation.no_rm = j["ablation"].value("no_rm", false);
            c.ablation.no_alignment = j["ablation"].value("no_alignment", false);
        }
        c.ablation_seeds = j.value("ablation_seeds", c.ablation_seeds);
        c.ref_episodes = j.value("ref_episodes", c.ref_episodes);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config parse: ") + e.what());
    }
    return c;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
    }
    ExperimentConfig c = experiment_config_from_json(j);
    c.validate();
    return c;
}

inline void save_config(const ExperimentConfig& c, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw ConfigError("cannot write config file '" + path + "'");
    out << experiment_config_to_json(c).dump(2) << "\n";
}

/// FNV-1a over the canonical (sorted-key) JSON dump; stable across runs.
inline std::string config_hash(const ExperimentConfig& c) {
    const std::string dump = experiment_config_to_json(c).dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : dump) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

/// Records which phases completed, which artifacts they produced and how
/// long they took; lets any subcommand resume without recomputing.
class RunManifest {
public:
    std::string config_hash;
    std::uint64_t seed = 0;
    int version = 1;

    static std::string path_in(const std::string& out_dir) {
        return (std::filesystem::path(out_dir) / "manifest.json").string();
    }

    static RunManifest load_or_create(const std::string& out_dir, const std::string& hash,
                                      std::uint64_t seed) {
        RunManifest m;
        m.config_hash = hash;
        m.seed = seed;
        const std::string p = path_in(out_dir);
        if (std::filesystem::exists(p)) {
            std::ifstream in(p);
            nlohmann::json j;
            try {
                in >> j;
                // A manifest from a different config or seed is stale; start over.
                if (j.value("config_hash", "") == hash &&
                    j.value("seed", std::uint64_t(0)) == seed) {
                    m.phases_ = j.value("phases", nlohmann::json::object());
                }
            } catch (const nlohmann::json::exception&) {
                // unreadable manifest: treat as absent
            }
        }
        return m;
    }

    bool phase_complete(const std::string& phase) const {
        return phases_.contains(phase) && phases_[phase].value("complete", false);
    }

    /// Artifacts recorded for a phase must still exist for it to count.
    bool phase_reusable(const std::string& phase) const {
        if (!phase_complete(phase)) return false;
        for (const auto& a : phases_[phase].value("artifacts", nlohmann::json::array())) {
            if (!std::filesystem::exists(a.get<std::string>())) return false;
        }
        return true;
    }

    void record_phase(const std::string& phase, const std::vector<std::string>& artifacts,
                      double wall_seconds) {
        phases_[phase] = {{"complete", true},
                          {"artifacts", artifacts},
                          {"wall_seconds", wall_seconds}};
    }

    std::vector<std::string> phase_artifacts(const std::string& phase) const {
        std::vector<std::string> out;
        if (!phases_.contains(phase)) return out;
        for (const auto& a : phases_[phase].value("artifacts", nlohmann::json::array())) {
            out.push_back(a.get<std::string>());
        }
        return out;
    }

    void save(const std::string& out_dir) const {
        nlohmann::json j;
        j["version"] = version;
        j["config_hash"] = config_hash;
        j["seed"] = seed;
        j["phases"] = phases_;
        std::ofstream out(path_in(out_dir), std::ios::trunc);
        if (!out) throw ConfigError("cannot write manifest in '" + out_dir + "'");
        out << j.dump(2) << "\n";
    }

private:
    nlohmann::json phases_ = nlohmann::json::object();
};

}  // namespace bdgx
