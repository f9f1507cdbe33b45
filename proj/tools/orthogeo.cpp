// Command-line front end: train, eval, gradcheck, spectrum, ablate.
//
// Exit codes: 0 success, 1 check failure, 2 input error, 3 runtime abort.

#include <cstdint>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "orthogeo/cli.hpp"
#include "orthogeo/config.hpp"
#include "orthogeo/errors.hpp"

namespace {

// Config resolution order: file, then --set pairs, then dedicated flags, so
// the most specific source wins.
struct ConfigArgs {
    std::string config_path;
    std::vector<std::string> overrides;

    std::string method;
    long long rank = -1;
    long long seed = -1;
    long long max_steps = -1;
    long long batch_size = -1;
    double lr = -1.0;
    double alpha = -1.0;
    double tau = -1.0;
    std::string sigma_mode;

    void attach(CLI::App* cmd, bool with_model_flags) {
        cmd->add_option("--config", config_path, "Config file: key=value lines or JSON (a manifest works)");
        cmd->add_option("--set", overrides, "Config override key=value (repeatable)");
        if (!with_model_flags) return;
        cmd->add_option("--method", method, "orthogeo | lora | none");
        cmd->add_option("--rank", rank, "Adapter rank r");
        cmd->add_option("--seed", seed, "Run seed");
        cmd->add_option("--max-steps", max_steps, "Optimization step budget");
        cmd->add_option("--batch-size", batch_size, "Examples per step");
        cmd->add_option("--lr", lr, "AdamW learning rate");
        cmd->add_option("--alpha", alpha, "Update scale numerator (effective scale alpha/r)");
        cmd->add_option("--tau", tau, "Contrastive temperature");
        cmd->add_option("--sigma-mode", sigma_mode, "softplus | direct");
    }

    orthogeo::RunConfig resolve() const {
        orthogeo::RunConfig cfg;
        if (!config_path.empty()) cfg = orthogeo::config_io::load_config(config_path);
        for (const std::string& pair : overrides) orthogeo::cli::apply_override(cfg, pair);
        if (!method.empty()) cfg.method = method;
        if (rank >= 0) cfg.rank = static_cast<std::size_t>(rank);
        if (seed >= 0) cfg.seed = static_cast<std::uint64_t>(seed);
        if (max_steps >= 0) cfg.max_steps = static_cast<std::size_t>(max_steps);
        if (batch_size >= 0) cfg.batch_size = static_cast<std::size_t>(batch_size);
        if (lr >= 0.0) cfg.lr = lr;
        if (alpha >= 0.0) cfg.alpha = alpha;
        if (tau >= 0.0) cfg.tau = tau;
        if (!sigma_mode.empty()) cfg.sigma_mode = sigma_mode;
        return cfg;
    }
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Low-rank adapter benchmark: geometry-constrained updates vs the plain baseline"};
    app.require_subcommand(1);

    ConfigArgs train_args;
    std::string train_out = "run_out";
    bool train_quiet = false;
    CLI::App* cmd_train = app.add_subcommand("train", "Train one run and write its artifacts");
    train_args.attach(cmd_train, true);
    cmd_train->add_option("--out", train_out, "Output directory")->capture_default_str();
    cmd_train->add_flag("--quiet", train_quiet, "Suppress per-eval progress lines");

    std::string eval_ckpt, eval_split = "test", eval_ks = "1,3", eval_out;
    CLI::App* cmd_eval = app.add_subcommand("eval", "Score a checkpoint on a dataset split");
    cmd_eval->add_option("--checkpoint", eval_ckpt, "Checkpoint JSON file")->required();
    cmd_eval->add_option("--split", eval_split, "train | val | test")->capture_default_str();
    cmd_eval->add_option("--ks", eval_ks, "Comma-separated cutoffs")->capture_default_str();
    cmd_eval->add_option("--out", eval_out, "Also write the CSV here");

    long long grad_seed = 7;
    CLI::App* cmd_grad = app.add_subcommand("gradcheck", "Finite-difference oracle over every backward pass");
    cmd_grad->add_option("--seed", grad_seed, "Probe seed")->capture_default_str();

    std::vector<std::string> spec_ckpts;
    std::string spec_out;
    CLI::App* cmd_spec = app.add_subcommand("spectrum", "Singular spectrum of trained updates");
    cmd_spec->add_option("checkpoints", spec_ckpts, "Checkpoint JSON files")->required();
    cmd_spec->add_option("--out", spec_out, "Write CSV here instead of stdout");

    ConfigArgs ablate_args;
    std::string ablate_ranks = "2,4,8,16", ablate_seeds = "1,2,3", ablate_out = "ablation.csv";
    long long ablate_jobs = 1;
    CLI::App* cmd_ablate = app.add_subcommand("ablate", "Rank sweep over both methods");
    ablate_args.attach(cmd_ablate, true);
    cmd_ablate->add_option("--ranks", ablate_ranks, "Comma-separated ranks")->capture_default_str();
    cmd_ablate->add_option("--seeds", ablate_seeds, "Comma-separated seeds")->capture_default_str();
    cmd_ablate->add_option("--jobs", ablate_jobs, "Parallel workers (0 = hardware)")->capture_default_str();
    cmd_ablate->add_option("--out", ablate_out, "Per-cell CSV path")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? orthogeo::cli::kExitOk : orthogeo::cli::kExitBadInput;
    }

    try {
        if (cmd_train->parsed()) {
            return orthogeo::cli::run_train(train_args.resolve(), train_out, train_quiet, std::cout,
                                            std::cerr);
        }
        if (cmd_eval->parsed()) {
            return orthogeo::cli::run_eval(eval_ckpt, eval_split,
                                           orthogeo::cli::parse_size_list(eval_ks, "ks"), eval_out,
                                           std::cout);
        }
        if (cmd_grad->parsed()) {
            return orthogeo::cli::run_gradcheck(static_cast<std::uint64_t>(grad_seed), std::cout);
        }
        if (cmd_spec->parsed()) {
            return orthogeo::cli::run_spectrum(spec_ckpts, spec_out, std::cout, std::cerr);
        }
        if (cmd_ablate->parsed()) {
            return orthogeo::cli::run_ablate(ablate_args.resolve(),
                                             orthogeo::cli::parse_size_list(ablate_ranks, "ranks"),
                                             orthogeo::cli::parse_seed_list(ablate_seeds),
                                             static_cast<std::size_t>(ablate_jobs), ablate_out,
                                             std::cout, std::cerr);
        }
    } catch (const orthogeo::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return orthogeo::cli::kExitBadInput;
    } catch (const orthogeo::IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return orthogeo::cli::kExitBadInput;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return orthogeo::cli::kExitAborted;
    }
    return orthogeo::cli::kExitOk;
}
