#ifndef SEMSEL_GA_HPP
#define SEMSEL_GA_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "semsel/partition.hpp"
#include "semsel/sae.hpp"
#include "semsel/types.hpp"

namespace semsel {

struct GaConfig {
    int pop_size = 50;
    int generations = 150;
    int tournament_size = 3;
    double crossover_probability = 0.2;
    double mutation_probability = 0.8;
    double per_gene_mutation_rate = 0.0;  // <= 0 resolves to 1/N at run time
    double init_density = 0.5;
    std::uint64_t seed = 0;
    bool use_cv = true;                 // false: fitness from fold 0 only
    std::string crossover = "uniform";  // or "two_point"

    void validate() const;
};

struct Individual {
    AttributeMask mask;
    std::optional<double> fitness;
};

// Memo of mask -> fitness. hits + misses equals the number of evaluations
// requested; empty-mask penalties bypass the cache entirely, which is what
// keeps SAE trainings = folds x misses an exact identity.
class FitnessCache {
public:
    // Counts a hit when found, a miss when not.
    std::optional<double> fetch(const std::string& key);
    // A batch duplicate of a mask already scheduled for evaluation.
    void count_hit() { ++hits_; }
    void store(const std::string& key, double value) { map_[key] = value; }

    std::uint64_t hits() const { return hits_; }
    std::uint64_t misses() const { return misses_; }
    std::size_t size() const { return map_.size(); }

private:
    std::unordered_map<std::string, double> map_;
    std::uint64_t hits_ = 0;
    std::uint64_t misses_ = 0;
};

// Per-fold evaluators built once, then shared by every mask scoring in a
// search. Also the oracle's fitness function, so GA and oracle are
// comparable by construction.
class FitnessContext {
public:
    FitnessContext(const ZslBundle& bundle, const FoldPlan& plan, double lambda,
                   bool use_cv = true);

    int num_attributes() const;
    int folds() const { return static_cast<int>(evaluators_.size()); }

    // Mean pseudo-unseen accuracy across folds. Empty masks score 0 with no
    // training; a mask that fails to train scores 0 with a diagnostic.
    double raw_fitness(const AttributeMask& mask) const;
    double fitness(const AttributeMask& mask, FitnessCache& cache) const;
    // Two-phase batch: classify against the cache, then evaluate the unique
    // new masks (in parallel), then fill every individual.
    void evaluate(const std::vector<Individual*>& batch, FitnessCache& cache, int threads) const;

private:
    std::vector<MaskEvaluator> evaluators_;
};

double hamming_distance(const AttributeMask& u, const AttributeMask& v);
double population_diversity(const std::vector<Individual>& pop);

struct GaTraceRow {
    int generation = 0;
    double best = 0.0;  // best-ever, hence monotone non-decreasing
    double mean = 0.0;
    double diversity = 0.0;
    std::uint64_t cache_hits = 0;
    std::uint64_t cache_misses = 0;
};

struct GaResult {
    AttributeMask best_mask;
    double best_fitness = 0.0;
    std::vector<GaTraceRow> trace;
    std::uint64_t cache_hits = 0;
    std::uint64_t cache_misses = 0;
    std::uint64_t sae_trainings = 0;  // measured at the solver boundary
};

// Generational loop: size-3 tournaments with replacement, adjacent-pair
// crossover, per-individual bit-flip mutation, wholesale replacement,
// best-ever tracked outside the population.
GaResult run_ga(const ZslBundle& bundle, const FoldPlan& plan, const GaConfig& config,
                double lambda, int threads = 1);

struct GaRunOutcome {
    int run_index = 0;
    std::uint64_t seed = 0;
    GaResult result;
    int attribute_count = 0;
    double unseen_accuracy = 0.0;
    bool failed = false;
    std::string error;
};

struct MultiRunResult {
    std::vector<GaRunOutcome> runs;
    std::vector<int> frequency;  // per attribute, over successful best masks
    int best_run = 0;            // highest fitness, earlier run on ties
    double mean_accuracy = 0.0;
    double std_accuracy = 0.0;
    double ci95_low = 0.0;
    double ci95_high = 0.0;
};

// Independent searches with per-run derived seeds and per-run caches; each
// run's best mask is scored once on the true unseen test set.
MultiRunResult multi_run(const ZslBundle& bundle, const FoldPlan& plan, const GaConfig& config,
                         double lambda, int runs, int threads = 1, bool per_class = false);

// generation,best,mean,diversity,cache_hits,cache_misses
std::string ga_trace_to_csv(const GaResult& result);

}  // namespace semsel

#endif
