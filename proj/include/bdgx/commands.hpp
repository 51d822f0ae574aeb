#pragma once

#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <thread>
#include <vector>

#include "bdgx/agent.hpp"
#include "bdgx/bridge.hpp"
#include "bdgx/config.hpp"
#include "bdgx/dataset.hpp"
#include "bdgx/reward.hpp"
#include "bdgx/stats.hpp"

namespace bdgx {

/// Artifact locations inside one run directory.
struct RunPaths {
    std::filesystem::path root;

    explicit RunPaths(const std::string& out_dir) : root(out_dir) {}

    std::string config() const { return (root / "config.json").string(); }
    std::string source_data() const { return (root / "data" / "source.bgd").string(); }
    std::string target_data() const { return (root / "data" / "target.bgd").string(); }
    std::string expert(DemoTier tier) const {
        return (root / "data" / (std::string("expert_") + to_string(tier) + ".ckpt")).string();
    }
    std::string refs() const { return (root / "data" / "refs.json").string(); }
    std::string bridge() const { return (root / "models" / "bridge.ckpt").string(); }
    std::string reward() const { return (root / "models" / "reward.ckpt").string(); }
    std::string bc_policy() const { return (root / "models" / "bc_policy.ckpt").string(); }
    std::string policy() const { return (root / "models" / "policy.ckpt").string(); }
    std::string dsb_metrics() const { return (root / "metrics" / "dsb_train.csv").string(); }
    std::string reward_metrics() const { return (root / "metrics" / "reward_train.csv").string(); }
    std::string policy_metrics() const { return (root / "metrics" / "policy_train.csv").string(); }
    std::string eval_json() const { return (root / "metrics" / "eval_report.json").string(); }
    std::string eval_csv() const { return (root / "metrics" / "eval_report.csv").string(); }
    std::string ablation_csv() const { return (root / "metrics" / "ablation.csv").string(); }
    std::string ablation_curves_csv() const {
        return (root / "metrics" / "ablation_curves.csv").string();
    }

    void ensure_dirs() const {
        std::filesystem::create_directories(root / "data");
        std::filesystem::create_directories(root / "models");
        std::filesystem::create_directories(root / "metrics");
    }
};

namespace cmd_detail {

inline std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

class PhaseTimer {
public:
    PhaseTimer() : start_(std::chrono::steady_clock::now()) {}
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

inline std::size_t worker_limit() {
    if (const char* env = std::getenv("BDGXRL_THREADS")) {
        const long n = std::strtol(env, nullptr, 10);
        if (n >= 1) return static_cast<std::size_t>(n);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

/// Runs the given closures on at most worker_limit() threads. Each closure
/// must be independent and own its RNG.
inline void run_parallel(std::vector<std::function<void()>> jobs) {
    const std::size_t workers = std::min(worker_limit(), jobs.size());
    if (workers <= 1) {
        for (auto& j : jobs) j();
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(jobs.size());
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&]() {
            while (true) {
                const std::size_t i = next.fetch_add(1);
                if (i >= jobs.size()) return;
                try {
                    jobs[i]();
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

inline void require_artifact(const std::string& path, const std::string& what) {
    if (!std::filesystem::exists(path)) {
        throw PrerequisiteError("missing " + what + ": '" + path +
                                "' (run the producing subcommand first)");
    }
}

inline void write_metrics_csv(const std::string& path, const std::vector<MetricsRow>& rows) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw ConfigError("cannot write metrics to '" + path + "'");
    out << "step,source_return,modulated_return,eval_return_target,normalized_score,"
           "critic_loss,actor_loss,il_loss,refresh_count\n";
    for (const MetricsRow& r : rows) {
        out << r.step << "," << fmt(r.source_return) << "," << fmt(r.modulated_return) << ","
            << fmt(r.eval_return_target) << ","
            << (r.normalized_score ? fmt(*r.normalized_score) : std::string()) << ","
            << fmt(r.critic_loss) << "," << fmt(r.actor_loss) << "," << fmt(r.il_loss) << ","
            << r.refresh_count << "\n";
    }
}

inline RefReturns load_refs(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw PrerequisiteError("missing reference returns '" + path + "'");
    nlohmann::json j;
    in >> j;
    RefReturns refs;
    refs.random_return = j.at("random_return").get<double>();
    refs.expert_return = j.at("expert_return").get<double>();
    return refs;
}

inline Tensor next_state_matrix(const TransitionDataset& ds) {
    Tensor m({ds.size(), ds.state_dim()});
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const auto sn = ds.next_state(i);
        std::copy(sn.begin(), sn.end(), m.row(i));
    }
    return m;
}

}  // namespace cmd_detail

/// `init`: writes a fully defaulted config file.
inline int cmd_init(const std::string& config_path) {
    ExperimentConfig cfg;
    save_config(cfg, config_path);
    std::cout << "wrote default config to " << config_path << "\n";
    return 0;
}

/// `collect`: trains (or reuses) the target-env reference agent, rolls the
/// reward-free demonstration dataset D_T at the configured tier, collects the
/// random-policy source dataset D_S, and caches the score anchors.
inline int cmd_collect(const ExperimentConfig& cfg) {
    cfg.validate();
    RunPaths paths(cfg.out_dir);
    paths.ensure_dirs();
    save_config(cfg, paths.config());
    const std::string hash = config_hash(cfg);
    RunManifest manifest = RunManifest::load_or_create(cfg.out_dir, hash, cfg.seed);

    const EnvSpec source = cfg.source_spec();
    const EnvSpec target = cfg.target_spec();

    // Reference agent in the target env; tier checkpoints at 30% / 60% / 100%.
    if (!manifest.phase_reusable("expert")) {
        cmd_detail::PhaseTimer timer;
        Rng rng(cfg.seed ^ 0xE8BE57ULL);
        AgentConfig expert_cfg = cfg.agent;
        expert_cfg.total_steps = cfg.data.expert_train_steps;
        const std::vector<std::size_t> snaps = {
            std::max<std::size_t>(1, (expert_cfg.total_steps * 3) / 10),
            std::max<std::size_t>(1, (expert_cfg.total_steps * 6) / 10)};
        RunResult run = train_sac(target, expert_cfg, std::nullopt, rng, snaps);
        save_policy(run.snapshots.at(0), paths.expert(DemoTier::early));
        save_policy(run.snapshots.at(1), paths.expert(DemoTier::medium));
        save_policy(run.agent.policy, paths.expert(DemoTier::final));

        Rng ref_rng(cfg.seed ^ 0x5C05EULL);
        EvalResult expert_eval =
            evaluate_policy(run.agent.policy, target, cfg.ref_episodes, ref_rng);
        EvalResult random_eval = evaluate_random_policy(target, cfg.ref_episodes, ref_rng);
        nlohmann::json refs = {{"random_return", random_eval.mean_return},
                               {"random_std", random_eval.std_return},
                               {"expert_return", expert_eval.mean_return},
                               {"expert_std", expert_eval.std_return},
                               {"episodes", cfg.ref_episodes}};
        std::ofstream out(paths.refs(), std::ios::trunc);
        out << refs.dump(2) << "\n";
        manifest.record_phase("expert",
                              {paths.expert(DemoTier::early), paths.expert(DemoTier::medium),
                               paths.expert(DemoTier::final), paths.refs()},
                              timer.seconds());
        manifest.save(cfg.out_dir);
    }

    // D_T: rolled by the tier policy (stochastic actions), rewards stripped.
    if (!manifest.phase_reusable("target_data")) {
        cmd_detail::PhaseTimer timer;
        Rng rng(cfg.seed ^ 0xD7DA7AULL);
        GaussianPolicy demo_policy = load_policy(paths.expert(cfg.data.demo_tier));
        auto act = [&demo_policy](const EnvState& s, Rng& r) {
            PolicyHead head = policy_forward(
                demo_policy, Tensor({1, demo_policy.obs_dim},
                                    std::vector<double>(s.obs.begin(), s.obs.end())));
            PolicySample sample = policy_sample(head, r);
            return std::vector<double>(sample.actions.data.begin(), sample.actions.data.end());
        };
        TransitionDataset demos = collect_rollouts(target, act, cfg.data.target_demos, rng);
        demos.without_rewards().save(paths.target_data());
        manifest.record_phase("target_data", {paths.target_data()}, timer.seconds());
        manifest.save(cfg.out_dir);
    }

    // D_S: uniform-random policy in the source env, with true rewards.
    if (!manifest.phase_reusable("source_data")) {
        cmd_detail::PhaseTimer timer;
        Rng rng(cfg.seed ^ 0x50CE5ULL);
        auto act = [&source](const EnvState&, Rng& r) { return random_action(source, r); };
        TransitionDataset ds = collect_rollouts(source, act, cfg.data.source_steps, rng);
        ds.save(paths.source_data());
        manifest.record_phase("source_data", {paths.source_data()}, timer.seconds());
        manifest.save(cfg.out_dir);
    }

    std::cout << "collect: artifacts ready under " << cfg.out_dir << "\n";
    return 0;
}

/// `train-dsb`: fits the bridge between normalized source/target transition
/// vectors and checkpoints both drift nets with the normalizer.
inline int cmd_train_dsb(const ExperimentConfig& cfg) {
    cfg.validate();
    RunPaths paths(cfg.out_dir);
    paths.ensure_dirs();
    const std::string hash = config_hash(cfg);
    RunManifest manifest = RunManifest::load_or_create(cfg.out_dir, hash, cfg.seed);
    if (manifest.phase_reusable("bridge")) {
        std::cout << "train-dsb: reusing " << paths.bridge() << "\n";
        return 0;
    }
    cmd_detail::require_artifact(paths.source_data(), "source dataset");
    cmd_detail::require_artifact(paths.target_data(), "target dataset");

    cmd_detail::PhaseTimer timer;
    TransitionDataset source = TransitionDataset::load(paths.source_data());
    TransitionDataset target = TransitionDataset::load(paths.target_data());
    if (source.state_dim() != target.state_dim() ||
        source.action_dim() != target.action_dim()) {
        throw PrerequisiteError("train-dsb: source/target datasets have different dims");
    }

    // Normalizer fitted on the union of both domains' packed vectors.
    Tensor source_rows = source.packed_matrix();
    Tensor target_rows = target.packed_matrix();
    Tensor all({source_rows.rows() + target_rows.rows(), source_rows.cols()});
    std::copy(source_rows.data.begin(), source_rows.data.end(), all.data.begin());
    std::copy(target_rows.data.begin(), target_rows.data.end(),
              all.data.begin() + source_rows.numel());
    Normalizer norm = Normalizer::fit(all);

    Rng rng(cfg.seed ^ 0xD5BULL);
    ImfResult fit = imf_fit(norm.normalize_rows(source_rows), norm.normalize_rows(target_rows),
                            cfg.bridge, rng);

    BridgeModel bridge{std::move(fit.forward), std::move(fit.backward), cfg.bridge, norm,
                       source.layout()};
    save_bridge(bridge, paths.bridge());

    std::ofstream csv(paths.dsb_metrics(), std::ios::trunc);
    csv << "round,backward_final_loss,forward_final_loss,forward_mean_distance,"
           "forward_cov_distance,backward_mean_distance,backward_cov_distance\n";
    for (const auto& r : fit.rounds) {
        csv << r.round << "," << cmd_detail::fmt(r.backward_final_loss) << ","
            << cmd_detail::fmt(r.forward_final_loss) << ","
            << cmd_detail::fmt(r.forward_mean_distance) << ","
            << cmd_detail::fmt(r.forward_cov_distance) << ","
            << cmd_detail::fmt(r.backward_mean_distance) << ","
            << cmd_detail::fmt(r.backward_cov_distance) << "\n";
    }
    csv.close();
    manifest.record_phase("bridge", {paths.bridge(), paths.dsb_metrics()}, timer.seconds());
    manifest.save(cfg.out_dir);
    std::cout << "train-dsb: wrote " << paths.bridge() << "\n";
    return 0;
}

/// `train-reward`: fits R(s, s') on the source dataset.
inline int cmd_train_reward(const ExperimentConfig& cfg) {
    cfg.validate();
    RunPaths paths(cfg.out_dir);
    paths.ensure_dirs();
    const std::string hash = config_hash(cfg);
    RunManifest manifest = RunManifest::load_or_create(cfg.out_dir, hash, cfg.seed);
    if (manifest.phase_reusable("reward")) {
        std::cout << "train-reward: reusing " << paths.reward() << "\n";
        return 0;
    }
    cmd_detail::require_artifact(paths.source_data(), "source dataset");

    cmd_detail::PhaseTimer timer;
    TransitionDataset source = TransitionDataset::load(paths.source_data());
    Rng rng(cfg.seed ^ 0x4E4A4DULL);
    RewardTrainResult result = train_reward(source, cfg.reward, rng);
    save_reward_model(result.model, paths.reward());

    std::ofstream csv(paths.reward_metrics(), std::ios::trunc);
    csv << "step,loss\n";
    for (std::size_t i = 0; i < result.loss_trace.size(); i += 50) {
        csv << i << "," << cmd_detail::fmt(result.loss_trace[i]) << "\n";
    }
    csv << "final_train_mse," << cmd_detail::fmt(result.train_mse) << "\n";
    csv << "final_holdout_mse," << cmd_detail::fmt(result.holdout_mse) << "\n";
    csv.close();
    manifest.record_phase("reward", {paths.reward(), paths.reward_metrics()}, timer.seconds());
    manifest.save(cfg.out_dir);
    std::cout << "train-reward: holdout MSE " << result.holdout_mse << "\n";
    return 0;
}

/// `train-policy`: behavior-cloning pretraining followed by the online
/// target-oriented loop, honoring the ablation flags.
inline int cmd_train_policy(const ExperimentConfig& cfg) {
    cfg.validate();
    RunPaths paths(cfg.out_dir);
    paths.ensure_dirs();
    const std::string hash = config_hash(cfg);
    RunManifest manifest = RunManifest::load_or_create(cfg.out_dir, hash, cfg.seed);
    if (manifest.phase_reusable("policy")) {
        std::cout << "train-policy: reusing " << paths.policy() << "\n";
        return 0;
    }
    const AblationFlags& flags = cfg.ablation;
    cmd_detail::require_artifact(paths.target_data(), "target demonstration dataset");
    cmd_detail::require_artifact(paths.source_data(), "source dataset");
    if (!flags.no_alignment) cmd_detail::require_artifact(paths.bridge(), "bridge checkpoint");
    if (!flags.no_rm) cmd_detail::require_artifact(paths.reward(), "reward checkpoint");

    cmd_detail::PhaseTimer timer;
    const EnvSpec source = cfg.source_spec();
    const EnvSpec target = cfg.target_spec();
    TransitionDataset demos = TransitionDataset::load(paths.target_data());
    TransitionDataset offline_source = TransitionDataset::load(paths.source_data());

    std::optional<RefReturns> refs;
    if (std::filesystem::exists(paths.refs())) refs = cmd_detail::load_refs(paths.refs());

    BridgeModel bridge;
    RewardModel reward_model;
    if (!flags.no_alignment) {
        bridge = load_bridge(paths.bridge());
        bridge.check_layout(demos.layout());
    }
    if (!flags.no_rm) reward_model = load_reward_model(paths.reward());

    Rng rng(cfg.seed ^ 0x70C1CFULL);
    SacAgent agent = SacAgent::create(source.obs_dim(), source.action_dim(), cfg.agent, rng);
    if (!flags.no_il) {
        bc_pretrain(agent.policy, demos, cfg.agent, rng);
        save_policy(agent.policy, paths.bc_policy());
    }

    RunResult run = run_bdgxrl(source, target, demos, flags.no_alignment ? nullptr : &bridge,
                               flags.no_rm ? nullptr : &reward_model, offline_source, cfg.agent,
                               flags, refs, std::move(agent), rng);

    save_policy(run.agent.policy, paths.policy());
    cmd_detail::write_metrics_csv(paths.policy_metrics(), run.metrics);
    manifest.record_phase("policy", {paths.policy(), paths.policy_metrics()}, timer.seconds());
    manifest.save(cfg.out_dir);
    if (!run.metrics.empty()) {
        std::cout << "train-policy: final target eval return "
                  << run.metrics.back().eval_return_target << "\n";
    }
    return 0;
}

/// `eval`: evaluates a policy checkpoint in both source and target envs and
/// writes JSON + per-episode CSV reports.
inline int cmd_eval(const ExperimentConfig& cfg, const std::string& checkpoint,
                    std::size_t n_episodes) {
    cfg.validate();
    RunPaths paths(cfg.out_dir);
    paths.ensure_dirs();
    const std::string ckpt = checkpoint.empty() ? paths.policy() : checkpoint;
    cmd_detail::require_artifact(ckpt, "policy checkpoint");

    GaussianPolicy policy = load_policy(ckpt);
    const EnvSpec source = cfg.source_spec();
    const EnvSpec target = cfg.target_spec();
    if (policy.obs_dim != target.obs_dim() || policy.action_dim != target.action_dim()) {
        throw DimensionError("eval: checkpoint dims do not match the configured env");
    }

    Rng rng(cfg.seed ^ 0xE7A1ULL);
    EvalResult in_target = evaluate_policy(policy, target, n_episodes, rng);
    EvalResult in_source = evaluate_policy(policy, source, n_episodes, rng);

    nlohmann::json report = {
        {"checkpoint", ckpt},
        {"episodes", n_episodes},
        {"target", {{"mean_return", in_target.mean_return}, {"std_return", in_target.std_return}}},
        {"source", {{"mean_return", in_source.mean_return}, {"std_return", in_source.std_return}}}};
    if (std::filesystem::exists(paths.refs())) {
        const RefReturns refs = cmd_detail::load_refs(paths.refs());
        report["target"]["normalized_score"] = refs.normalized(in_target.mean_return);
    }
    std::ofstream out(paths.eval_json(), std::ios::trunc);
    out << report.dump(2) << "\n";

    std::ofstream csv(paths.eval_csv(), std::ios::trunc);
    csv << "episode,target_return,source_return\n";
    for (std::size_t e = 0; e < n_episodes; ++e) {
        csv << e << "," << cmd_detail::fmt(in_target.returns[e]) << ","
            << cmd_detail::fmt(in_source.returns[e]) << "\n";
    }
    std::cout << "eval: target mean return " << in_target.mean_return << "\n";
    return 0;
}

/// `translate`: pushes a dataset through the fitted bridge and reports how
/// the translated next-state marginal compares with the target data.
inline int cmd_translate(const ExperimentConfig& cfg, const std::string& bridge_path,
                         const std::string& dataset_path, const std::string& output_path,
                         bool reverse) {
    cfg.validate();
    RunPaths paths(cfg.out_dir);
    paths.ensure_dirs();
    const std::string bpath = bridge_path.empty() ? paths.bridge() : bridge_path;
    const std::string dpath = dataset_path.empty() ? paths.source_data() : dataset_path;
    cmd_detail::require_artifact(bpath, "bridge checkpoint");
    cmd_detail::require_artifact(dpath, "dataset");

    BridgeModel bridge = load_bridge(bpath);
    TransitionDataset data = TransitionDataset::load(dpath);
    bridge.check_layout(data.layout());

    Rng rng(cfg.seed ^ 0x7A45ULL);
    TransitionDataset translated = translate_dataset(
        bridge, data, reverse ? Direction::backward : Direction::forward, rng);
    const std::string out_path =
        output_path.empty() ? (paths.root / "data" / "translated.bgd").string() : output_path;
    translated.save(out_path);
    if (translated.empty()) {
        std::cerr << "translate: warning: input dataset is empty; wrote an empty output\n";
    }

    nlohmann::json report;
    report["input"] = dpath;
    report["output"] = out_path;
    report["direction"] = reverse ? "t_to_s" : "s_to_t";
    report["count"] = translated.size();
    if (!translated.empty() && std::filesystem::exists(paths.target_data())) {
        TransitionDataset reference = TransitionDataset::load(paths.target_data());
        Tensor got = cmd_detail::next_state_matrix(translated);
        Tensor ref = cmd_detail::next_state_matrix(reference);
        nlohmann::json dims = nlohmann::json::array();
        for (std::size_t jdim = 0; jdim < got.cols(); ++jdim) {
            std::vector<double> gcol(got.rows()), rcol(ref.rows());
            for (std::size_t i = 0; i < got.rows(); ++i) gcol[i] = got(i, jdim);
            for (std::size_t i = 0; i < ref.rows(); ++i) rcol[i] = ref(i, jdim);
            dims.push_back({{"dim", jdim},
                            {"translated_mean", mean(gcol)},
                            {"translated_std", stddev(gcol)},
                            {"reference_mean", mean(rcol)},
                            {"reference_std", stddev(rcol)},
                            {"ks_statistic", ks_statistic(gcol, rcol)}});
        }
        report["next_state_marginals"] = dims;
    }
    const std::string report_path = (paths.root / "metrics" / "translate_report.json").string();
    std::ofstream out(report_path, std::ios::trunc);
    out << report.dump(2) << "\n";
    std::cout << "translate: wrote " << out_path << " and " << report_path << "\n";
    return 0;
}

struct AblationRow {
    std::string variant;
    std::uint64_t seed = 0;
    double eval_return_target = 0.0;
    std::optional<double> normalized_score;
    std::vector<MetricsRow> curve;
};

/// `ablate`: the four-variant comparison {full, no_il, no_rm, no_alignment}
/// over ablation_seeds seeds. Offline artifacts are shared per seed; the
/// online runs are independent and may execute in parallel.
inline int cmd_ablate(const ExperimentConfig& cfg) {
    cfg.validate();
    RunPaths paths(cfg.out_dir);
    paths.ensure_dirs();

    struct Variant {
        const char* name;
        AblationFlags flags;
    };
    const std::vector<Variant> variants = {{"full", {false, false, false}},
                                           {"no_il", {true, false, false}},
                                           {"no_rm", {false, true, false}},
                                           {"no_alignment", {false, false, true}}};

    // Shared offline artifacts per seed.
    std::vector<ExperimentConfig> seed_cfgs;
    for (std::size_t s = 0; s < cfg.ablation_seeds; ++s) {
        ExperimentConfig sc = cfg;
        sc.seed = cfg.seed + s;
        sc.ablation = {};
        sc.out_dir = (paths.root / ("seed" + std::to_string(sc.seed))).string();
        cmd_collect(sc);
        cmd_train_dsb(sc);
        cmd_train_reward(sc);
        seed_cfgs.push_back(std::move(sc));
    }

    std::vector<AblationRow> rows(variants.size() * seed_cfgs.size());
    std::vector<std::function<void()>> jobs;
    for (std::size_t v = 0; v < variants.size(); ++v) {
        for (std::size_t s = 0; s < seed_cfgs.size(); ++s) {
            jobs.push_back([&, v, s]() {
                ExperimentConfig rc = seed_cfgs[s];
                rc.ablation = variants[v].flags;
                rc.out_dir = (std::filesystem::path(seed_cfgs[s].out_dir) /
                              variants[v].name).string();
                RunPaths seed_paths(seed_cfgs[s].out_dir);
                RunPaths run_paths(rc.out_dir);
                run_paths.ensure_dirs();
                // The offline artifacts live in the seed directory.
                for (const auto& [from, to] :
                     std::initializer_list<std::pair<std::string, std::string>>{
                         {seed_paths.source_data(), run_paths.source_data()},
                         {seed_paths.target_data(), run_paths.target_data()},
                         {seed_paths.refs(), run_paths.refs()},
                         {seed_paths.bridge(), run_paths.bridge()},
                         {seed_paths.reward(), run_paths.reward()}}) {
                    if (std::filesystem::exists(from)) {
                        std::filesystem::copy_file(
                            from, to, std::filesystem::copy_options::overwrite_existing);
                    }
                }
                cmd_train_policy(rc);

                GaussianPolicy policy = load_policy(run_paths.policy());
                Rng eval_rng(rc.seed ^ 0xAB1A7EULL);
                EvalResult eval = evaluate_policy(policy, rc.target_spec(),
                                                  rc.agent.eval_episodes * 2, eval_rng);
                AblationRow row;
                row.variant = variants[v].name;
                row.seed = rc.seed;
                row.eval_return_target = eval.mean_return;
                if (std::filesystem::exists(run_paths.refs())) {
                    row.normalized_score =
                        cmd_detail::load_refs(run_paths.refs()).normalized(eval.mean_return);
                }
                // Curve from the training metrics.
                std::ifstream mcsv(run_paths.policy_metrics());
                std::string line;
                std::getline(mcsv, line);  // header
                while (std::getline(mcsv, line)) {
                    MetricsRow mr;
                    std::sscanf(line.c_str(), "%zu,%lf,%lf,%lf", &mr.step, &mr.source_return,
                                &mr.modulated_return, &mr.eval_return_target);
                    row.curve.push_back(mr);
                }
                rows[v * seed_cfgs.size() + s] = std::move(row);
            });
        }
    }
    cmd_detail::run_parallel(std::move(jobs));

    std::ofstream table(paths.ablation_csv(), std::ios::trunc);
    table << "variant,seed,eval_return_target,normalized_score\n";
    for (const AblationRow& r : rows) {
        table << r.variant << "," << r.seed << "," << cmd_detail::fmt(r.eval_return_target)
              << "," << (r.normalized_score ? cmd_detail::fmt(*r.normalized_score) : std::string())
              << "\n";
    }
    std::ofstream curves(paths.ablation_curves_csv(), std::ios::trunc);
    curves << "variant,seed,step,eval_return_target\n";
    for (const AblationRow& r : rows) {
        for (const MetricsRow& m : r.curve) {
            curves << r.variant << "," << r.seed << "," << m.step << ","
                   << cmd_detail::fmt(m.eval_return_target) << "\n";
        }
    }

    // Mean normalized score per variant, for the console ranking.
    std::cout << "ablation results (mean over " << cfg.ablation_seeds << " seeds):\n";
    for (const auto& v : variants) {
        double sum = 0.0;
        std::size_t n = 0;
        for (const AblationRow& r : rows) {
            if (r.variant == v.name) {
                sum += r.eval_return_target;
                ++n;
            }
        }
        std::cout << "  " << v.name << ": mean target return " << (sum / double(n)) << "\n";
    }
    return 0;
}

}  // namespace bdgx
