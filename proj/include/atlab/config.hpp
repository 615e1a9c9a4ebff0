#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "atlab/landscape.hpp"
#include "atlab/piat.hpp"
#include "atlab/trainer.hpp"

namespace atlab {

struct DatasetConfig {
    std::string kind = "two_moons";  // two_moons | blobs | idx
    // two_moons / blobs
    std::size_t train_n = 512;
    std::size_t test_n = 512;
    double noise_sd = 0.12;   // two_moons
    double spread_sd = 0.05;  // blobs
    std::vector<std::vector<double>> centers;
    // idx
    std::string train_images, train_labels, test_images, test_labels;
    std::size_t limit = 60000;
    std::size_t test_limit = 10000;
    int classes = 10;  // idx only; synthetic kinds derive their own
};

// Declarative run description. Validates fully before any computation;
// unknown fields are rejected, every invalid field is reported with its path.
struct RunConfig {
    int schema_version = 1;
    std::uint64_t seed = 1;
    std::string out_dir;
    DatasetConfig dataset;
    std::vector<std::size_t> hidden = {32, 32};
    TrainPlan train;
    std::vector<AttackSpec> eval_attacks;
    // Names from eval_attacks evaluated at every epoch end; empty -> all.
    std::vector<std::string> epoch_eval_attacks;
    bool snapshots = false;
};

RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::string& path);

// Every default materialized; reparses to the identical config.
nlohmann::json to_json(const RunConfig& cfg);

std::pair<Dataset, Dataset> build_datasets(const RunConfig& cfg);
MlpSpec derive_model_spec(const RunConfig& cfg);

struct TrainArtifacts {
    std::filesystem::path out_dir;
    std::filesystem::path metrics_path;
    std::filesystem::path checkpoint_path;
    std::filesystem::path resolved_config_path;
    PiatResult result;
};

// The full train command: dataset build, PIAT-wrapped training, metrics
// JSON-lines, final checkpoint, resolved-config copy. Refuses a non-empty
// output directory. `progress` (optional) receives one line per epoch.
TrainArtifacts run_training(const RunConfig& cfg, std::ostream* progress);

// Clean + robust accuracy of `model` on the config's test split under
// cfg.eval_attacks.
EvalResult run_evaluation(const Mlp& model, const RunConfig& cfg);

void write_eval_json(const EvalResult& r, const std::string& path);
void write_eval_csv(const EvalResult& r, const std::string& path);

LandscapeGrid run_landscape(Mlp& model, const RunConfig& cfg, int grid_n, std::uint64_t seed,
                            const std::string& mode);

struct RunSummary {
    std::string file;
    std::string attack;
    std::size_t adv_epochs = 0;
    double final_robust = 0.0;
    double best_robust = 0.0;
    int best_epoch = 0;        // adversarial epoch index of the best
    double oscillation = 0.0;  // population SD over the early window
};

// Population standard deviation of `values`; 0 for a single value.
double population_sd(const std::vector<double>& values);

// Reads a metrics JSON-lines file. `attack_name` empty -> first robust key.
// Malformed records raise FormatError naming the line number.
RunSummary summarize_metrics(const std::string& path, int window, const std::string& attack_name);

}  // namespace atlab
