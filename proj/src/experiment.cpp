#include "semsel/experiment.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>

#include "semsel/errors.hpp"
#include "semsel/io.hpp"
#include "semsel/parallel.hpp"
#include "semsel/rfs.hpp"
#include "semsel/rng.hpp"
#include "semsel/sae.hpp"
#include "semsel/synthgen.hpp"

namespace semsel {

namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("MissingFile", "cannot open " + path.string());
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void parse_ranker(const nlohmann::json& doc, RankerSpec& spec) {
    if (doc.contains("kind")) spec.kind = ranker_kind_from_string(doc.at("kind").get<std::string>());
    spec.loss = doc.value("loss", spec.loss);
    spec.c = doc.value("c", spec.c);
    spec.iterations = doc.value("iterations", spec.iterations);
    spec.trees = doc.value("trees", spec.trees);
    spec.max_depth = doc.value("max_depth", spec.max_depth);
}

void parse_ga(const nlohmann::json& doc, GaConfig& ga) {
    ga.pop_size = doc.value("pop_size", ga.pop_size);
    ga.generations = doc.value("generations", ga.generations);
    ga.tournament_size = doc.value("tournament_size", ga.tournament_size);
    ga.crossover_probability = doc.value("crossover_probability", ga.crossover_probability);
    ga.mutation_probability = doc.value("mutation_probability", ga.mutation_probability);
    ga.per_gene_mutation_rate = doc.value("per_gene_mutation_rate", ga.per_gene_mutation_rate);
    ga.init_density = doc.value("init_density", ga.init_density);
    ga.crossover = doc.value("crossover", ga.crossover);
}

ordered_json config_to_json(const ExperimentConfig& config) {
    ordered_json doc;
    doc["bundle"] = config.bundle_path;
    doc["method"] = config.method;
    doc["k_folds"] = config.k_folds;
    doc["lambda"] = config.lambda;
    doc["accuracy_mode"] = config.accuracy_mode;
    doc["master_seed"] = config.master_seed;
    doc["output_dir"] = config.output_dir;
    doc["threads"] = config.threads;
    doc["shuffle_classes"] = config.shuffle_classes;
    doc["runs"] = config.runs;
    doc["stride"] = config.stride;
    doc["oracle_max_n"] = config.oracle_max_n;
    doc["ranker"] = {{"kind", to_string(config.ranker.kind)},
                     {"loss", config.ranker.loss},
                     {"c", config.ranker.c},
                     {"iterations", config.ranker.iterations},
                     {"trees", config.ranker.trees},
                     {"max_depth", config.ranker.max_depth}};
    doc["ga"] = {{"pop_size", config.ga.pop_size},
                 {"generations", config.ga.generations},
                 {"tournament_size", config.ga.tournament_size},
                 {"crossover_probability", config.ga.crossover_probability},
                 {"mutation_probability", config.ga.mutation_probability},
                 {"per_gene_mutation_rate", config.ga.per_gene_mutation_rate},
                 {"init_density", config.ga.init_density},
                 {"crossover", config.ga.crossover}};
    return doc;
}

std::vector<std::string> report_header() {
    return {"method", "attribute_count", "unseen_accuracy", "sae_trainings"};
}

std::vector<std::string> row_to_strings(const ReportRow& row) {
    return {row.method, format_double(row.attribute_count), format_double(row.unseen_accuracy),
            std::to_string(row.sae_trainings)};
}

ordered_json rows_to_json(const std::vector<ReportRow>& rows) {
    ordered_json arr = ordered_json::array();
    for (const auto& row : rows) {
        arr.push_back({{"method", row.method},
                       {"attribute_count", row.attribute_count},
                       {"unseen_accuracy", row.unseen_accuracy},
                       {"sae_trainings", row.sae_trainings}});
    }
    return arr;
}

// Threshold index used for the headline consensus row.
int headline_threshold(int k) { return std::min(3, k); }

struct MethodOutput {
    std::vector<ReportRow> rows;
    std::vector<std::pair<fs::path, std::string>> files;  // relative path, content
};

MethodOutput run_baseline(const ExperimentConfig& config, const ZslBundle& bundle) {
    const auto n = static_cast<std::size_t>(bundle.semantics.num_attributes());
    const std::uint64_t before = sae_training_count();
    const double acc = evaluate_mask_on_unseen(bundle, AttributeMask::ones(n), config.lambda,
                                               config.per_class());
    MethodOutput out;
    out.rows.push_back(
        {"baseline", static_cast<double>(n), acc, sae_training_count() - before});
    return out;
}

MethodOutput run_rfs_method(const ExperimentConfig& config, const ZslBundle& bundle,
                            const FoldPlan& plan, int threads) {
    RankerSpec ranker = config.ranker;
    ranker.seed = derive_seed(config.master_seed, "ranker");

    const std::uint64_t before = sae_training_count();
    const RfsResult result =
        run_rfs(bundle, plan, ranker, config.lambda, config.stride, threads);
    const std::uint64_t search = sae_training_count() - before;
    const std::vector<ThresholdRow> thresholds =
        evaluate_thresholds(bundle, result.consensus, config.lambda, config.per_class());

    MethodOutput out;
    for (const auto& row : thresholds) {
        if (row.skipped) continue;
        out.rows.push_back({"rfs_T" + std::to_string(row.threshold),
                            static_cast<double>(row.attribute_count), row.unseen_accuracy,
                            search});
    }
    const int headline = headline_threshold(plan.k);
    const auto& head = thresholds[static_cast<std::size_t>(headline - 1)];
    if (head.skipped) {
        warn("headline threshold T" + std::to_string(headline) +
             " has no attributes; no rfs headline row");
    } else {
        out.rows.push_back({"rfs", static_cast<double>(head.attribute_count),
                            head.unseen_accuracy, search});
    }

    out.files.emplace_back(
        "rfs_report.json",
        rfs_result_to_json(result, thresholds, bundle.semantics.attribute_names));
    for (int t = 1; t <= plan.k; ++t) {
        out.files.emplace_back(
            "rfs_masks_T" + std::to_string(t) + ".csv",
            mask_to_csv(result.consensus.masks_by_threshold[static_cast<std::size_t>(t - 1)],
                        bundle.semantics.attribute_names));
    }
    return out;
}

MethodOutput run_ga_method(const ExperimentConfig& config, const ZslBundle& bundle,
                           const FoldPlan& plan, int threads) {
    GaConfig ga = config.ga;
    ga.seed = derive_seed(config.master_seed, "ga");
    ga.use_cv = config.method != "ga_nocv";

    const MultiRunResult multi =
        multi_run(bundle, plan, ga, config.lambda, config.runs, threads, config.per_class());

    double mean_count = 0.0;
    std::uint64_t total_search = 0;
    int successes = 0;
    for (const auto& run : multi.runs) {
        if (run.failed) continue;
        mean_count += run.attribute_count;
        total_search += run.result.sae_trainings;
        ++successes;
    }
    mean_count /= successes;
    const auto& best = multi.runs[static_cast<std::size_t>(multi.best_run)];

    MethodOutput out;
    out.rows.push_back({config.method, mean_count, multi.mean_accuracy, total_search});
    out.rows.push_back({config.method + "_best", static_cast<double>(best.attribute_count),
                        best.unseen_accuracy, best.result.sae_trainings});

    out.files.emplace_back("ga_trace.csv", ga_trace_to_csv(best.result));
    out.files.emplace_back("ga_best_mask.csv",
                           mask_to_csv(best.result.best_mask, bundle.semantics.attribute_names));
    {
        std::string csv = "attribute_index,name,frequency\n";
        for (std::size_t j = 0; j < multi.frequency.size(); ++j)
            csv += std::to_string(j) + "," + bundle.semantics.attribute_names[j] + "," +
                   std::to_string(multi.frequency[j]) + "\n";
        out.files.emplace_back("ga_frequency.csv", std::move(csv));
    }
    {
        std::string csv =
            "run,seed,failed,best_fitness,attribute_count,unseen_accuracy,cache_hits,"
            "cache_misses,sae_trainings\n";
        for (const auto& run : multi.runs) {
            csv += std::to_string(run.run_index) + "," + std::to_string(run.seed) + "," +
                   (run.failed ? "1" : "0") + "," + format_double(run.result.best_fitness) + "," +
                   std::to_string(run.attribute_count) + "," +
                   format_double(run.unseen_accuracy) + "," +
                   std::to_string(run.result.cache_hits) + "," +
                   std::to_string(run.result.cache_misses) + "," +
                   std::to_string(run.result.sae_trainings) + "\n";
        }
        out.files.emplace_back("ga_runs.csv", std::move(csv));
    }
    {
        ordered_json summary;
        summary["runs"] = config.runs;
        summary["failed_runs"] = config.runs - successes;
        summary["best_run"] = multi.best_run;
        summary["best_fitness"] = best.result.best_fitness;
        summary["mean_unseen_accuracy"] = multi.mean_accuracy;
        summary["std_unseen_accuracy"] = multi.std_accuracy;
        summary["ci95"] = {multi.ci95_low, multi.ci95_high};
        out.files.emplace_back("ga_summary.json", summary.dump(2) + "\n");
    }
    return out;
}

MethodOutput run_oracle_method(const ExperimentConfig& config, const ZslBundle& bundle,
                               const FoldPlan& plan, int threads) {
    const std::uint64_t before = sae_training_count();
    const OracleResult oracle =
        exhaustive_best_mask(bundle, plan, config.lambda, config.oracle_max_n, threads);
    const std::uint64_t search = sae_training_count() - before;
    const double acc =
        evaluate_mask_on_unseen(bundle, oracle.mask, config.lambda, config.per_class());

    MethodOutput out;
    out.rows.push_back(
        {"oracle", static_cast<double>(oracle.mask.popcount()), acc, search});
    out.files.emplace_back("oracle_mask.csv",
                           mask_to_csv(oracle.mask, bundle.semantics.attribute_names));
    ordered_json doc;
    doc["attributes"] = oracle.mask.indices();
    doc["fitness"] = oracle.fitness;
    doc["unseen_accuracy"] = acc;
    out.files.emplace_back("oracle.json", doc.dump(2) + "\n");
    return out;
}

}  // namespace

void ExperimentConfig::validate() const {
    if (bundle_path.empty()) throw ConfigError("MissingBundle", "bundle path is required");
    if (output_dir.empty()) throw ConfigError("MissingOutputDir", "output directory is required");
    if (method != "baseline" && method != "rfs" && method != "ga" && method != "ga_nocv" &&
        method != "oracle")
        throw ConfigError("UnknownMethod",
                          "method must be baseline, rfs, ga, ga_nocv or oracle, got '" + method + "'");
    if (accuracy_mode != "per_instance" && accuracy_mode != "per_class")
        throw ConfigError("UnknownAccuracyMode",
                          "accuracy_mode must be per_instance or per_class, got '" + accuracy_mode + "'");
    if (k_folds < 2)
        throw ConfigError("DegenerateK", "k_folds must be >= 2, got " + std::to_string(k_folds));
    if (lambda <= 0.0)
        throw ConfigError("InvalidLambda", "lambda must be positive, got " + std::to_string(lambda));
    if (runs < 1) throw ConfigError("InvalidRuns", "runs must be >= 1, got " + std::to_string(runs));
    if (stride < 1)
        throw ConfigError("InvalidStride", "stride must be >= 1, got " + std::to_string(stride));
    if (threads < 0)
        throw ConfigError("InvalidThreads", "threads must be >= 0, got " + std::to_string(threads));
    ga.validate();
}

ExperimentConfig experiment_config_from_json(const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("InvalidConfig", std::string("config is not valid JSON: ") + e.what());
    }
    ExperimentConfig config;
    try {
        config.bundle_path = doc.value("bundle", config.bundle_path);
        config.method = doc.value("method", config.method);
        config.k_folds = doc.value("k_folds", config.k_folds);
        config.lambda = doc.value("lambda", config.lambda);
        config.accuracy_mode = doc.value("accuracy_mode", config.accuracy_mode);
        config.master_seed = doc.value("master_seed", config.master_seed);
        config.output_dir = doc.value("output_dir", config.output_dir);
        config.threads = doc.value("threads", config.threads);
        config.shuffle_classes = doc.value("shuffle_classes", config.shuffle_classes);
        config.runs = doc.value("runs", config.runs);
        config.stride = doc.value("stride", config.stride);
        config.oracle_max_n = doc.value("oracle_max_n", config.oracle_max_n);
        if (doc.contains("ranker")) parse_ranker(doc.at("ranker"), config.ranker);
        if (doc.contains("ga")) parse_ga(doc.at("ga"), config.ga);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("InvalidConfig", std::string("bad config field: ") + e.what());
    }
    return config;
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
    config.validate();
    const auto t0 = std::chrono::steady_clock::now();

    const ZslBundle bundle = load_bundle(config.bundle_path);
    const int threads = config.threads > 0 ? config.threads : default_threads();

    FoldPlan plan;
    const bool needs_folds = config.method != "baseline";
    if (needs_folds) {
        std::optional<std::uint64_t> shuffle;
        if (config.shuffle_classes) shuffle = derive_seed(config.master_seed, "class-shuffle");
        plan = build_fold_plan(bundle.seen_in_file_order(), config.k_folds, shuffle);
        const auto violations = verify_fold_plan(plan);
        if (!violations.empty())
            throw DataError("InvalidFoldPlan", violations.front());
    }

    MethodOutput output;
    if (config.method == "baseline") {
        output = run_baseline(config, bundle);
    } else if (config.method == "rfs") {
        output = run_rfs_method(config, bundle, plan, threads);
    } else if (config.method == "ga" || config.method == "ga_nocv") {
        output = run_ga_method(config, bundle, plan, threads);
    } else {
        output = run_oracle_method(config, bundle, plan, threads);
    }

    ExperimentResult result;
    result.rows = output.rows;
    result.bundle_hash = bundle_hash(bundle);
    result.wall_time_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    const fs::path dir(config.output_dir);
    fs::create_directories(dir);

    ordered_json manifest = config_to_json(config);
    manifest["resolved_seeds"] = {
        {"ranker", derive_seed(config.master_seed, "ranker")},
        {"ga", derive_seed(config.master_seed, "ga")},
        {"class_shuffle", derive_seed(config.master_seed, "class-shuffle")}};
    manifest["bundle_hash"] = result.bundle_hash;
    atomic_write(dir / "manifest.json", manifest.dump(2) + "\n");

    std::vector<std::vector<std::string>> csv_rows;
    for (const auto& row : result.rows) csv_rows.push_back(row_to_strings(row));
    write_csv(dir / "report.csv", report_header(), csv_rows);

    ordered_json report;
    report["bundle_hash"] = result.bundle_hash;
    report["method"] = config.method;
    report["rows"] = rows_to_json(result.rows);
    atomic_write(dir / "report.json", report.dump(2) + "\n");

    if (needs_folds) atomic_write(dir / "folds.json", fold_plan_to_json(plan));
    for (const auto& [rel, content] : output.files) atomic_write(dir / rel, content);

    ordered_json timing;
    timing["method"] = config.method;
    timing["wall_time_seconds"] = result.wall_time_seconds;
    atomic_write(dir / "timing.json", timing.dump(2) + "\n");
    return result;
}

std::string compare(const std::vector<std::filesystem::path>& report_paths,
                    const std::filesystem::path& out_path) {
    if (report_paths.empty())
        throw ConfigError("EmptyInput", "compare needs at least one report.json");

    std::string hash;
    std::vector<ReportRow> rows;
    for (const auto& path : report_paths) {
        nlohmann::json doc;
        try {
            doc = nlohmann::json::parse(read_file(path));
            const std::string h = doc.at("bundle_hash").get<std::string>();
            if (hash.empty())
                hash = h;
            else if (h != hash)
                throw DataError("BundleMismatch", path.string() + " is from bundle " + h +
                                                      ", expected " + hash);
            for (const auto& r : doc.at("rows")) {
                rows.push_back({r.at("method").get<std::string>(),
                                r.at("attribute_count").get<double>(),
                                r.at("unseen_accuracy").get<double>(),
                                r.at("sae_trainings").get<std::uint64_t>()});
            }
        } catch (const nlohmann::json::exception& e) {
            throw DataError("InvalidReport",
                            path.string() + " is not a report.json: " + e.what());
        }
    }
    if (rows.empty()) throw DataError("InvalidReport", "no rows in any input report");

    double best = rows.front().unseen_accuracy;
    for (const auto& row : rows) best = std::max(best, row.unseen_accuracy);

    std::string csv = "method,attribute_count,unseen_accuracy,sae_trainings,best\n";
    for (const auto& row : rows) {
        const auto cells = row_to_strings(row);
        csv += cells[0] + "," + cells[1] + "," + cells[2] + "," + cells[3] + "," +
               (row.unseen_accuracy == best ? "1" : "0") + "\n";
    }
    atomic_write(out_path, csv);
    return csv;
}

}  // namespace semsel
