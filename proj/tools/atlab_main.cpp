#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "atlab/checkpoint.hpp"
#include "atlab/config.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;

int cmd_train(const std::string& config_path, const std::string& out_override,
              std::int64_t seed_override) {
    atlab::RunConfig cfg = atlab::load_run_config(config_path);
    if (!out_override.empty()) cfg.out_dir = out_override;
    if (seed_override >= 0) {
        cfg.seed = static_cast<std::uint64_t>(seed_override);
        cfg.train.seed = cfg.seed;
    }
    const atlab::TrainArtifacts art = atlab::run_training(cfg, &std::cout);
    std::cout << "final checkpoint: " << art.checkpoint_path.string() << "\n"
              << "metrics: " << art.metrics_path.string() << "\n";
    return kExitOk;
}

int cmd_eval(const std::string& ckpt_path, const std::string& config_path,
             const std::string& out_override, std::int64_t seed_override) {
    atlab::RunConfig cfg = atlab::load_run_config(config_path);
    if (seed_override >= 0) cfg.seed = static_cast<std::uint64_t>(seed_override);
    const atlab::Mlp model = atlab::load_checkpoint(ckpt_path);
    const atlab::EvalResult r = atlab::run_evaluation(model, cfg);

    std::printf("%-12s %10s\n", "attack", "accuracy");
    std::printf("%-12s %10.4f\n", "clean", r.clean_acc);
    for (const auto& [name, acc] : r.robust) std::printf("%-12s %10.4f\n", name.c_str(), acc);
    std::printf("clean loss: %.6f\n", r.clean_loss);

    std::filesystem::path out = out_override.empty()
                                    ? std::filesystem::path(ckpt_path).parent_path()
                                    : std::filesystem::path(out_override);
    if (out.empty()) out = ".";
    std::filesystem::create_directories(out);
    atlab::write_eval_json(r, (out / "eval_results.json").string());
    atlab::write_eval_csv(r, (out / "eval_results.csv").string());
    std::cout << "wrote " << (out / "eval_results.json").string() << " and .csv\n";
    return kExitOk;
}

int cmd_landscape(const std::string& ckpt_path, const std::string& config_path, int grid_n,
                  std::int64_t seed, const std::string& mode, const std::string& out_override) {
    atlab::RunConfig cfg = atlab::load_run_config(config_path);
    atlab::Mlp model = atlab::load_checkpoint(ckpt_path);
    const std::uint64_t dir_seed = seed >= 0 ? static_cast<std::uint64_t>(seed) : cfg.seed;
    const atlab::LandscapeGrid grid = atlab::run_landscape(model, cfg, grid_n, dir_seed, mode);

    std::filesystem::path out = out_override.empty()
                                    ? std::filesystem::path(ckpt_path).parent_path()
                                    : std::filesystem::path(out_override);
    if (out.empty()) out = ".";
    std::filesystem::create_directories(out);
    atlab::write_landscape_csv(grid, (out / "landscape.csv").string());
    atlab::write_landscape_meta(grid, (out / "landscape_meta.json").string());
    std::cout << "wrote " << (out / "landscape.csv").string() << " and landscape_meta.json\n";
    return kExitOk;
}

int cmd_compare(const std::vector<std::string>& metrics_files, int window,
                const std::string& attack) {
    std::printf("%-40s %-8s %8s %8s %6s %12s\n", "run", "attack", "final", "best", "epoch",
                "oscillation");
    std::vector<atlab::RunSummary> summaries;
    for (const std::string& f : metrics_files) {
        const atlab::RunSummary s = atlab::summarize_metrics(f, window, attack);
        std::printf("%-40s %-8s %8.4f %8.4f %6d %12.6f\n", s.file.c_str(), s.attack.c_str(),
                    s.final_robust, s.best_robust, s.best_epoch, s.oscillation);
        summaries.push_back(s);
    }
    if (summaries.size() == 2) {
        std::printf("oscillation delta (run1 - run2): %+.6f\n",
                    summaries[0].oscillation - summaries[1].oscillation);
        std::printf("final robust delta (run1 - run2): %+.4f\n",
                    summaries[0].final_robust - summaries[1].final_robust);
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"adversarial training lab: interpolated training, attacks, landscape probes"};
    app.require_subcommand(1);

    std::string config_path, ckpt_path, out_dir, mode = "clean", attack;
    std::int64_t seed = -1;
    int grid_n = 25, window = 10;
    std::vector<std::string> metrics_files;

    CLI::App* train = app.add_subcommand("train", "train a model from a run config");
    train->add_option("config", config_path, "run config JSON")->required();
    train->add_option("--out", out_dir, "output directory (overrides config)");
    train->add_option("--seed", seed, "master seed (overrides config)");

    CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint under the configured attacks");
    eval->add_option("checkpoint", ckpt_path, "model checkpoint")->required();
    eval->add_option("config", config_path, "run config JSON")->required();
    eval->add_option("--out", out_dir, "directory for eval_results.{json,csv}");
    eval->add_option("--seed", seed, "master seed (overrides config)");

    CLI::App* landscape = app.add_subcommand("landscape", "loss surface over a random 2-D slice");
    landscape->add_option("checkpoint", ckpt_path, "model checkpoint")->required();
    landscape->add_option("config", config_path, "run config JSON")->required();
    landscape->add_option("--grid", grid_n, "lattice points per axis (default 25)");
    landscape->add_option("--seed", seed, "direction seed (defaults to config seed)");
    landscape->add_option("--mode", mode, "clean | adversarial (default clean)");
    landscape->add_option("--out", out_dir, "directory for landscape.csv and metadata");

    CLI::App* compare = app.add_subcommand("compare", "summarize metrics files: stability and best epochs");
    compare->add_option("metrics", metrics_files, "metrics JSON-lines files")->required();
    compare->add_option("--window", window, "early-epoch window for the oscillation score (default 10)");
    compare->add_option("--attack", attack, "robust-accuracy key (default: first in records)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*train) return cmd_train(config_path, out_dir, seed);
        if (*eval) return cmd_eval(ckpt_path, config_path, out_dir, seed);
        if (*landscape) return cmd_landscape(ckpt_path, config_path, grid_n, seed, mode, out_dir);
        if (*compare) return cmd_compare(metrics_files, window, attack);
    } catch (const atlab::NumericError& e) {
        std::cerr << "numeric abort: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const atlab::ConfigError& e) {
        std::cerr << e.what() << "\n";
        return kExitConfig;
    } catch (const atlab::FormatError& e) {
        std::cerr << e.what() << "\n";
        return kExitConfig;
    } catch (const atlab::LayoutError& e) {
        std::cerr << e.what() << "\n";
        return kExitConfig;
    } catch (const atlab::IoError& e) {
        std::cerr << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return kExitOk;
}
