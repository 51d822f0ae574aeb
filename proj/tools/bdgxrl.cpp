// bdgxrl: dynamics-gap bridging for cross-domain RL.
//
// Subcommands: init, collect, train-dsb, train-reward, train-policy, eval,
// translate, ablate. Exit codes: 0 success, 2 config error, 3 missing
// prerequisite, 4 numerical failure.

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "bdgx/commands.hpp"
#include "bdgx/config.hpp"

namespace {

struct CommonArgs {
    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    bool seed_set = false;
    bool no_il = false;
    bool no_rm = false;
    bool no_alignment = false;
    std::uint64_t budget_steps = 0;
};

void add_common(CLI::App* sub, CommonArgs& args) {
    sub->add_option("--config", args.config_path, "Experiment config JSON")->required();
    sub->add_option("--seed", args.seed, "Override the config seed")
        ->each([&args](const std::string&) { args.seed_set = true; });
    sub->add_option("--out", args.out_dir, "Override the output directory");
    sub->add_flag("--no-il", args.no_il, "Disable imitation (BC skipped, alpha = 0)");
    sub->add_flag("--no-rm", args.no_rm, "Disable reward modulation (raw source rewards)");
    sub->add_flag("--no-alignment", args.no_alignment, "Disable DSB translation");
    sub->add_option("--budget-steps", args.budget_steps, "Override agent.total_steps");
}

bdgx::ExperimentConfig resolve(const CommonArgs& args) {
    bdgx::ExperimentConfig cfg = bdgx::load_config(args.config_path);
    if (args.seed_set) cfg.seed = args.seed;
    if (!args.out_dir.empty()) cfg.out_dir = args.out_dir;
    if (args.no_il) cfg.ablation.no_il = true;
    if (args.no_rm) cfg.ablation.no_rm = true;
    if (args.no_alignment) cfg.ablation.no_alignment = true;
    if (args.budget_steps > 0) cfg.agent.total_steps = args.budget_steps;
    cfg.validate();
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"BDGxRL: Schrodinger-bridge dynamics alignment, reward modulation and "
                 "target-oriented policy learning"};
    app.require_subcommand(1);

    std::string init_path = "config.json";
    CLI::App* init = app.add_subcommand("init", "Write a default config file");
    init->add_option("path", init_path, "Where to write the config");

    CommonArgs collect_args, dsb_args, reward_args, policy_args, eval_args, translate_args,
        ablate_args;
    CLI::App* collect = app.add_subcommand("collect", "Collect D_S, D_T and score anchors");
    add_common(collect, collect_args);
    CLI::App* dsb = app.add_subcommand("train-dsb", "Fit the transition bridge");
    add_common(dsb, dsb_args);
    CLI::App* reward = app.add_subcommand("train-reward", "Fit the transition-aware reward");
    add_common(reward, reward_args);
    CLI::App* policy = app.add_subcommand("train-policy", "BC pretraining + online loop");
    add_common(policy, policy_args);

    std::string eval_checkpoint;
    std::size_t eval_episodes = 20;
    CLI::App* eval = app.add_subcommand("eval", "Evaluate a policy checkpoint");
    add_common(eval, eval_args);
    eval->add_option("--checkpoint", eval_checkpoint, "Policy checkpoint (default: run policy)");
    eval->add_option("--episodes", eval_episodes, "Evaluation episodes");

    std::string tr_bridge, tr_dataset, tr_output;
    bool tr_reverse = false;
    CLI::App* translate = app.add_subcommand("translate", "Translate a dataset through the bridge");
    add_common(translate, translate_args);
    translate->add_option("--bridge", tr_bridge, "Bridge checkpoint (default: run bridge)");
    translate->add_option("--dataset", tr_dataset, "Input dataset (default: run source data)");
    translate->add_option("--output", tr_output, "Output dataset path");
    translate->add_flag("--reverse", tr_reverse, "Translate target-to-source instead");

    CLI::App* ablate = app.add_subcommand("ablate", "Run {full, no_il, no_rm, no_alignment}");
    add_common(ablate, ablate_args);

    CLI11_PARSE(app, argc, argv);

    try {
        if (init->parsed()) return bdgx::cmd_init(init_path);
        if (collect->parsed()) return bdgx::cmd_collect(resolve(collect_args));
        if (dsb->parsed()) return bdgx::cmd_train_dsb(resolve(dsb_args));
        if (reward->parsed()) return bdgx::cmd_train_reward(resolve(reward_args));
        if (policy->parsed()) return bdgx::cmd_train_policy(resolve(policy_args));
        if (eval->parsed()) {
            return bdgx::cmd_eval(resolve(eval_args), eval_checkpoint, eval_episodes);
        }
        if (translate->parsed()) {
            return bdgx::cmd_translate(resolve(translate_args), tr_bridge, tr_dataset, tr_output,
                                       tr_reverse);
        }
        if (ablate->parsed()) return bdgx::cmd_ablate(resolve(ablate_args));
    } catch (const bdgx::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const bdgx::PrerequisiteError& e) {
        std::cerr << "missing prerequisite: " << e.what() << "\n";
        return 3;
    } catch (const bdgx::FormatError& e) {
        std::cerr << "artifact error: " << e.what() << "\n";
        return 3;
    } catch (const bdgx::NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 4;
    } catch (const bdgx::DimensionError& e) {
        std::cerr << "dimension error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
