#ifndef SEMSEL_EXPERIMENT_HPP
#define SEMSEL_EXPERIMENT_HPP

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "semsel/ga.hpp"
#include "semsel/rankers.hpp"

namespace semsel {

// One experiment = one bundle, one method, one output directory. Every field
// has a resolved default, and the manifest written next to the results is
// itself a loadable config, so any run can be repeated from its manifest.
struct ExperimentConfig {
    std::string bundle_path;
    std::string method = "baseline";  // baseline | rfs | ga | ga_nocv | oracle
    int k_folds = 5;
    double lambda = 500000.0;
    std::string accuracy_mode = "per_instance";  // or per_class
    std::uint64_t master_seed = 0;
    std::string output_dir;
    int threads = 0;  // 0 = SEMSEL_THREADS env or hardware default
    bool shuffle_classes = false;
    int runs = 20;   // GA searches per experiment
    int stride = 1;  // RFS wrapper walk stride
    int oracle_max_n = 16;
    RankerSpec ranker;  // seed ignored; always derived from master_seed
    GaConfig ga;        // seed/use_cv ignored; derived from master_seed/method

    void validate() const;
    bool per_class() const { return accuracy_mode == "per_class"; }
};

ExperimentConfig experiment_config_from_json(const std::string& text);

// Row of the method comparison. sae_trainings counts solver calls spent
// finding the row's mask (for baseline, the single model fit). Fractional
// attribute counts appear only on multi-run GA mean rows.
struct ReportRow {
    std::string method;
    double attribute_count = 0.0;
    double unseen_accuracy = 0.0;
    std::uint64_t sae_trainings = 0;
};

struct ExperimentResult {
    std::vector<ReportRow> rows;
    std::string bundle_hash;
    double wall_time_seconds = 0.0;
};

// Runs the configured method and writes manifest.json, report.csv,
// report.json, timing.json and per-method artifacts into output_dir.
// Selection sees only seen-class data; the test set is read for the final
// scores alone. timing.json is the one output that varies between runs.
ExperimentResult run_experiment(const ExperimentConfig& config);

// Merges report.json files from the same bundle into one CSV with the best
// accuracy flagged. Returns the CSV text.
std::string compare(const std::vector<std::filesystem::path>& report_paths,
                    const std::filesystem::path& out_path);

}  // namespace semsel

#endif
