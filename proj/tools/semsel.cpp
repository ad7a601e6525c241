#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "semsel/errors.hpp"
#include "semsel/experiment.hpp"
#include "semsel/io.hpp"
#include "semsel/partition.hpp"
#include "semsel/rfs.hpp"
#include "semsel/synthgen.hpp"

namespace fs = std::filesystem;
using namespace semsel;

namespace {

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("MissingFile", "cannot open " + path.string());
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

// Options shared by the experiment-shaped subcommands. Values bind to this
// struct; build() starts from --config (when given) and lets every flag the
// user actually typed override its JSON counterpart.
struct ExperimentCli {
    std::string config_path, bundle, out, accuracy_mode, ranker, loss, crossover;
    int k_folds = 0, threads = 0, runs = 0, stride = 0, iterations = 0, trees = 0, max_depth = 0;
    int pop_size = 0, generations = 0, tournament_size = 0, oracle_max_n = 0;
    double lambda = 0.0, c = 0.0, cxpb = 0.0, mutpb = 0.0, per_gene = 0.0, init_density = 0.0;
    std::uint64_t seed = 0;
    bool shuffle = false, no_cv = false;

    CLI::Option *o_bundle{}, *o_out{}, *o_k{}, *o_lambda{}, *o_mode{}, *o_seed{}, *o_threads{},
        *o_shuffle{}, *o_runs{}, *o_stride{}, *o_ranker{}, *o_loss{}, *o_c{}, *o_iterations{},
        *o_trees{}, *o_max_depth{}, *o_pop{}, *o_gens{}, *o_tourn{}, *o_cxpb{}, *o_mutpb{},
        *o_per_gene{}, *o_init{}, *o_crossover{}, *o_max_n{};

    void add_common(CLI::App* cmd) {
        cmd->add_option("--config", config_path, "JSON config or manifest; typed flags override");
        o_bundle = cmd->add_option("--bundle", bundle, "bundle directory");
        o_out = cmd->add_option("--out", out, "output directory");
        o_k = cmd->add_option("--k", k_folds, "pseudo split fold count");
        o_lambda = cmd->add_option("--lambda", lambda, "SAE reconstruction/fit trade-off");
        o_mode = cmd->add_option("--accuracy-mode", accuracy_mode, "per_instance or per_class");
        o_seed = cmd->add_option("--seed", seed, "master seed");
        o_threads = cmd->add_option("--threads", threads, "worker threads (0 = auto)");
        o_shuffle = cmd->add_flag("--shuffle-classes", shuffle, "shuffle class order before folding");
    }

    void add_ranker(CLI::App* cmd) {
        o_ranker = cmd->add_option("--ranker", ranker, "linear_coef, tree_impurity or random");
        o_loss = cmd->add_option("--loss", loss, "linear_coef loss: hinge or logistic");
        o_c = cmd->add_option("--c", c, "inverse L2 strength for linear models");
        o_iterations = cmd->add_option("--iterations", iterations, "linear fit iterations");
        o_trees = cmd->add_option("--trees", trees, "forest size for tree_impurity");
        o_max_depth = cmd->add_option("--max-depth", max_depth, "tree depth cap (0 = none)");
        o_stride = cmd->add_option("--stride", stride, "wrapper walk stride (coarse probe step)");
    }

    void add_ga(CLI::App* cmd) {
        o_runs = cmd->add_option("--runs", runs, "independent GA searches");
        o_pop = cmd->add_option("--pop-size", pop_size, "population size");
        o_gens = cmd->add_option("--generations", generations, "generation count");
        o_tourn = cmd->add_option("--tournament-size", tournament_size, "tournament size");
        o_cxpb = cmd->add_option("--cxpb", cxpb, "per-pair crossover probability");
        o_mutpb = cmd->add_option("--mutpb", mutpb, "per-individual mutation probability");
        o_per_gene = cmd->add_option("--per-gene-rate", per_gene, "per-gene flip rate (0 = 1/N)");
        o_init = cmd->add_option("--init-density", init_density, "initial bit density");
        o_crossover = cmd->add_option("--crossover", crossover, "uniform or two_point");
        cmd->add_flag("--no-cv", no_cv, "score fitness on a single fixed pseudo split");
    }

    ExperimentConfig build(const std::string& method) const {
        ExperimentConfig cfg;
        if (!config_path.empty()) cfg = experiment_config_from_json(slurp(config_path));
        // The subcommand picks the method family; within `ga`, a config's
        // ga_nocv survives reloading so a manifest re-runs as written, and
        // --no-cv requests the variant explicitly.
        if (method == "ga")
            cfg.method = no_cv || cfg.method == "ga_nocv" ? "ga_nocv" : "ga";
        else
            cfg.method = method;
        auto set = [](CLI::Option* opt, auto& dst, const auto& src) {
            if (opt && opt->count() > 0) dst = src;
        };
        set(o_bundle, cfg.bundle_path, bundle);
        set(o_out, cfg.output_dir, out);
        set(o_k, cfg.k_folds, k_folds);
        set(o_lambda, cfg.lambda, lambda);
        set(o_mode, cfg.accuracy_mode, accuracy_mode);
        set(o_seed, cfg.master_seed, seed);
        set(o_threads, cfg.threads, threads);
        if (o_shuffle && o_shuffle->count() > 0) cfg.shuffle_classes = shuffle;
        set(o_runs, cfg.runs, runs);
        set(o_stride, cfg.stride, stride);
        set(o_max_n, cfg.oracle_max_n, oracle_max_n);
        if (o_ranker && o_ranker->count() > 0) cfg.ranker.kind = ranker_kind_from_string(ranker);
        set(o_loss, cfg.ranker.loss, loss);
        set(o_c, cfg.ranker.c, c);
        set(o_iterations, cfg.ranker.iterations, iterations);
        set(o_trees, cfg.ranker.trees, trees);
        set(o_max_depth, cfg.ranker.max_depth, max_depth);
        set(o_pop, cfg.ga.pop_size, pop_size);
        set(o_gens, cfg.ga.generations, generations);
        set(o_tourn, cfg.ga.tournament_size, tournament_size);
        set(o_cxpb, cfg.ga.crossover_probability, cxpb);
        set(o_mutpb, cfg.ga.mutation_probability, mutpb);
        set(o_per_gene, cfg.ga.per_gene_mutation_rate, per_gene);
        set(o_init, cfg.ga.init_density, init_density);
        set(o_crossover, cfg.ga.crossover, crossover);
        return cfg;
    }
};

void print_report(const ExperimentResult& result) {
    std::cout << "method,attribute_count,unseen_accuracy,sae_trainings\n";
    for (const auto& row : result.rows)
        std::cout << row.method << "," << format_double(row.attribute_count) << ","
                  << format_double(row.unseen_accuracy) << "," << row.sae_trainings << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"semsel: semantic attribute selection for inductive zero-shot learning"};
    app.require_subcommand(1);

    // synth
    auto* synth = app.add_subcommand("synth", "generate a synthetic bundle with planted relevance");
    std::string synth_spec_path, synth_out;
    SynthSpec synth_defaults;
    int s_seen = synth_defaults.n_seen, s_unseen = synth_defaults.n_unseen,
        s_rel = synth_defaults.n_relevant, s_noise = synth_defaults.n_noise,
        s_dim = synth_defaults.visual_dim, s_inst = synth_defaults.instances_per_class;
    double s_scale = synth_defaults.noise_scale;
    std::uint64_t s_seed = synth_defaults.seed;
    bool s_csv = false;
    synth->add_option("--spec", synth_spec_path, "SynthSpec JSON; typed flags override");
    synth->add_option("--out", synth_out, "bundle output directory")->required();
    auto* so_seen = synth->add_option("--n-seen", s_seen, "seen class count");
    auto* so_unseen = synth->add_option("--n-unseen", s_unseen, "unseen class count");
    auto* so_rel = synth->add_option("--n-relevant", s_rel, "planted relevant attributes");
    auto* so_noise = synth->add_option("--n-noise", s_noise, "class-independent attributes");
    auto* so_dim = synth->add_option("--visual-dim", s_dim, "visual feature dimension");
    auto* so_inst = synth->add_option("--instances-per-class", s_inst, "instances per class");
    auto* so_scale = synth->add_option("--noise-scale", s_scale, "visual noise scale");
    auto* so_seed = synth->add_option("--seed", s_seed, "generator seed");
    synth->add_flag("--csv-features", s_csv, "write train/test as CSV instead of binary");
    synth->callback([&] {
        SynthSpec spec;
        if (!synth_spec_path.empty()) spec = synth_spec_from_json(slurp(synth_spec_path));
        if (so_seen->count()) spec.n_seen = s_seen;
        if (so_unseen->count()) spec.n_unseen = s_unseen;
        if (so_rel->count()) spec.n_relevant = s_rel;
        if (so_noise->count()) spec.n_noise = s_noise;
        if (so_dim->count()) spec.visual_dim = s_dim;
        if (so_inst->count()) spec.instances_per_class = s_inst;
        if (so_scale->count()) spec.noise_scale = s_scale;
        if (so_seed->count()) spec.seed = s_seed;
        spec.validate();

        const SynthResult result = generate(spec);
        const fs::path dir(synth_out);
        save_bundle(result.bundle, dir, !s_csv);
        atomic_write(dir / "ground_truth.csv",
                     mask_to_csv(result.ground_truth, result.bundle.semantics.attribute_names));
        auto manifest = nlohmann::ordered_json::parse(synth_spec_to_json(spec));
        manifest["seed_used"] = result.seed_used;
        atomic_write(dir / "synth_manifest.json", manifest.dump(2) + "\n");
        std::cout << "bundle written to " << dir.string() << " ("
                  << result.bundle.semantics.num_classes() << " classes, "
                  << result.bundle.semantics.num_attributes() << " attributes)\n";
    });

    // partition
    auto* partition = app.add_subcommand("partition", "build and verify a pseudo split fold plan");
    std::string part_bundle, part_out;
    int part_k = 5;
    std::uint64_t part_shuffle_seed = 0;
    partition->add_option("--bundle", part_bundle, "bundle directory")->required();
    partition->add_option("--out", part_out, "fold plan JSON path")->required();
    partition->add_option("--k", part_k, "fold count");
    auto* po_shuffle =
        partition->add_option("--shuffle-seed", part_shuffle_seed, "shuffle classes with this seed");
    partition->callback([&] {
        const ZslBundle bundle = load_bundle(part_bundle);
        std::optional<std::uint64_t> shuffle;
        if (po_shuffle->count()) shuffle = part_shuffle_seed;
        const FoldPlan plan = build_fold_plan(bundle.seen_in_file_order(), part_k, shuffle);
        const auto violations = verify_fold_plan(plan);
        for (const auto& v : violations) std::cerr << "semsel: violation: " << v << "\n";
        if (!violations.empty()) throw DataError("InvalidFoldPlan", violations.front());
        atomic_write(part_out, fold_plan_to_json(plan));
        std::cout << "fold plan valid: k=" << plan.k << ", n=" << plan.n << ", written to "
                  << part_out << "\n";
    });

    // experiment subcommands
    ExperimentCli baseline_cli, rfs_cli, ga_cli, oracle_cli;
    auto* baseline = app.add_subcommand("baseline", "plain SAE on the full attribute space");
    baseline_cli.add_common(baseline);

    auto* rfs_cmd =
        app.add_subcommand("rfs", "per-fold ranking + wrapper walk + consensus thresholds");
    rfs_cli.add_common(rfs_cmd);
    rfs_cli.add_ranker(rfs_cmd);

    auto* ga_cmd = app.add_subcommand("ga", "genetic search over attribute masks");
    ga_cli.add_common(ga_cmd);
    ga_cli.add_ga(ga_cmd);

    auto* oracle_cmd = app.add_subcommand("oracle", "exhaustive best mask (small N only)");
    oracle_cli.add_common(oracle_cmd);
    oracle_cli.o_max_n = oracle_cmd->add_option("--max-n", oracle_cli.oracle_max_n,
                                                "refuse bundles with more attributes than this");

    auto run_and_print = [&](const ExperimentCli& cli, const std::string& method) {
        const ExperimentConfig cfg = cli.build(method);
        print_report(run_experiment(cfg));
    };
    baseline->callback([&] { run_and_print(baseline_cli, "baseline"); });
    rfs_cmd->callback([&] { run_and_print(rfs_cli, "rfs"); });
    ga_cmd->callback([&] { run_and_print(ga_cli, "ga"); });
    oracle_cmd->callback([&] { run_and_print(oracle_cli, "oracle"); });

    // compare
    auto* compare_cmd = app.add_subcommand("compare", "merge report.json files from one bundle");
    std::vector<std::string> compare_inputs;
    std::string compare_out;
    compare_cmd->add_option("reports", compare_inputs, "report.json paths")->required();
    compare_cmd->add_option("--out", compare_out, "merged CSV path")->required();
    compare_cmd->callback([&] {
        std::vector<fs::path> paths(compare_inputs.begin(), compare_inputs.end());
        std::cout << compare(paths, compare_out);
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    } catch (const Error& e) {
        std::cerr << "semsel: error: " << e.what() << "\n";
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "semsel: error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
