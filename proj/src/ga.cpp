#include "semsel/ga.hpp"

#include <algorithm>
#include <cmath>

#include "semsel/errors.hpp"
#include "semsel/io.hpp"
#include "semsel/parallel.hpp"
#include "semsel/rng.hpp"

namespace semsel {

namespace {

void require_probability(double p, const char* name) {
    if (!(p >= 0.0 && p <= 1.0))
        throw ConfigError("InvalidProbability",
                          std::string(name) + " must be in [0,1], got " + std::to_string(p));
}

std::size_t tournament_winner(const std::vector<Individual>& pop, int size, Rng& rng) {
    std::size_t best = rng.uniform_index(pop.size());
    for (int i = 1; i < size; ++i) {
        const std::size_t contender = rng.uniform_index(pop.size());
        if (*pop[contender].fitness > *pop[best].fitness) best = contender;
    }
    return best;
}

void mate_uniform(Individual& a, Individual& b, Rng& rng) {
    for (std::size_t j = 0; j < a.mask.size(); ++j)
        if (rng.uniform() < 0.5) std::swap(a.mask.bits[j], b.mask.bits[j]);
}

void mate_two_point(Individual& a, Individual& b, Rng& rng) {
    const std::size_t n = a.mask.size();
    std::size_t p1 = 1 + rng.uniform_index(n);
    std::size_t p2 = 1 + rng.uniform_index(n - 1);
    if (p2 >= p1)
        ++p2;
    else
        std::swap(p1, p2);
    for (std::size_t j = p1; j < p2; ++j) std::swap(a.mask.bits[j], b.mask.bits[j]);
}

}  // namespace

void GaConfig::validate() const {
    if (pop_size < 2)
        throw ConfigError("InvalidPopulation", "pop_size must be >= 2, got " + std::to_string(pop_size));
    if (generations < 0)
        throw ConfigError("InvalidGenerations", "generations must be >= 0, got " + std::to_string(generations));
    if (tournament_size < 1)
        throw ConfigError("InvalidTournament", "tournament_size must be >= 1, got " + std::to_string(tournament_size));
    require_probability(crossover_probability, "crossover_probability");
    require_probability(mutation_probability, "mutation_probability");
    if (per_gene_mutation_rate > 1.0)
        throw ConfigError("InvalidProbability", "per_gene_mutation_rate must be <= 1, got " +
                                                    std::to_string(per_gene_mutation_rate));
    if (!(init_density > 0.0 && init_density < 1.0))
        throw ConfigError("InvalidDensity", "init_density must be in (0,1), got " + std::to_string(init_density));
    if (crossover != "uniform" && crossover != "two_point")
        throw ConfigError("UnknownCrossover", "crossover must be uniform or two_point, got '" + crossover + "'");
}

std::optional<double> FitnessCache::fetch(const std::string& key) {
    auto it = map_.find(key);
    if (it == map_.end()) {
        ++misses_;
        return std::nullopt;
    }
    ++hits_;
    return it->second;
}

FitnessContext::FitnessContext(const ZslBundle& bundle, const FoldPlan& plan, double lambda,
                               bool use_cv) {
    const int k = use_cv ? plan.k : 1;
    evaluators_.reserve(static_cast<std::size_t>(k));
    for (int fold = 0; fold < k; ++fold) {
        auto [train_view, val_view] = fold_views(bundle, plan, fold);
        evaluators_.emplace_back(train_view, val_view, lambda);
    }
}

int FitnessContext::num_attributes() const { return evaluators_.front().num_attributes(); }

double FitnessContext::raw_fitness(const AttributeMask& mask) const {
    if (mask.popcount() == 0) return 0.0;
    double sum = 0.0;
    for (const auto& evaluator : evaluators_) {
        try {
            sum += evaluator.evaluate(mask);
        } catch (const Error& e) {
            warn(std::string("mask scored 0, training failed: ") + e.what());
            return 0.0;
        }
    }
    return sum / static_cast<double>(evaluators_.size());
}

double FitnessContext::fitness(const AttributeMask& mask, FitnessCache& cache) const {
    if (mask.popcount() == 0) return 0.0;  // penalty, never cached or counted
    const std::string key = mask.key();
    if (auto hit = cache.fetch(key)) return *hit;
    const double value = raw_fitness(mask);
    cache.store(key, value);
    return value;
}

void FitnessContext::evaluate(const std::vector<Individual*>& batch, FitnessCache& cache,
                              int threads) const {
    std::vector<std::pair<std::string, const AttributeMask*>> to_run;
    std::unordered_map<std::string, std::vector<Individual*>> waiting;
    for (Individual* ind : batch) {
        if (ind->fitness) continue;
        if (ind->mask.popcount() == 0) {
            ind->fitness = 0.0;
            continue;
        }
        std::string key = ind->mask.key();
        auto pending = waiting.find(key);
        if (pending != waiting.end()) {
            cache.count_hit();
            pending->second.push_back(ind);
            continue;
        }
        if (auto hit = cache.fetch(key)) {
            ind->fitness = *hit;
            continue;
        }
        waiting.emplace(key, std::vector<Individual*>{ind});
        to_run.emplace_back(std::move(key), &ind->mask);
    }

    std::vector<double> values(to_run.size());
    parallel_for(to_run.size(), threads,
                 [&](std::size_t i) { values[i] = raw_fitness(*to_run[i].second); });
    for (std::size_t i = 0; i < to_run.size(); ++i) {
        cache.store(to_run[i].first, values[i]);
        for (Individual* ind : waiting.at(to_run[i].first)) ind->fitness = values[i];
    }
}

double hamming_distance(const AttributeMask& u, const AttributeMask& v) {
    if (u.size() != v.size())
        throw DataError("LengthMismatch", "mask lengths " + std::to_string(u.size()) + " and " +
                                              std::to_string(v.size()) + " differ");
    if (u.size() == 0) throw DataError("EmptyMask", "hamming distance of zero-length masks");
    int diff = 0;
    for (std::size_t j = 0; j < u.size(); ++j)
        if (u.bits[j] != v.bits[j]) ++diff;
    return static_cast<double>(diff) / static_cast<double>(u.size());
}

double population_diversity(const std::vector<Individual>& pop) {
    if (pop.size() < 2)
        throw DataError("TooFewIndividuals", "diversity needs >= 2 individuals, got " +
                                                 std::to_string(pop.size()));
    double sum = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < pop.size(); ++i) {
        for (std::size_t j = i + 1; j < pop.size(); ++j) {
            sum += hamming_distance(pop[i].mask, pop[j].mask);
            ++pairs;
        }
    }
    return sum / static_cast<double>(pairs);
}

GaResult run_ga(const ZslBundle& bundle, const FoldPlan& plan, const GaConfig& config,
                double lambda, int threads) {
    config.validate();
    const FitnessContext context(bundle, plan, lambda, config.use_cv);
    const std::size_t n = static_cast<std::size_t>(context.num_attributes());
    const double per_gene = config.per_gene_mutation_rate > 0.0
                                ? config.per_gene_mutation_rate
                                : 1.0 / static_cast<double>(n);

    const std::uint64_t solves_before = sae_training_count();
    FitnessCache cache;
    Rng rng(derive_seed(config.seed, "ga-loop"));

    std::vector<Individual> pop(static_cast<std::size_t>(config.pop_size));
    for (auto& ind : pop) {
        ind.mask = AttributeMask::zeros(n);
        for (auto& bit : ind.mask.bits) bit = rng.bernoulli(config.init_density) ? 1 : 0;
    }

    GaResult result;
    result.best_fitness = -1.0;
    auto evaluate_all = [&](std::vector<Individual>& group) {
        std::vector<Individual*> batch;
        batch.reserve(group.size());
        for (auto& ind : group)
            if (!ind.fitness) batch.push_back(&ind);
        context.evaluate(batch, cache, threads);
    };
    auto record = [&](int generation) {
        for (const auto& ind : pop) {
            if (*ind.fitness > result.best_fitness) {
                result.best_fitness = *ind.fitness;
                result.best_mask = ind.mask;
            }
        }
        double mean = 0.0;
        for (const auto& ind : pop) mean += *ind.fitness;
        mean /= static_cast<double>(pop.size());
        result.trace.push_back(GaTraceRow{generation, result.best_fitness, mean,
                                          population_diversity(pop), cache.hits(),
                                          cache.misses()});
    };

    evaluate_all(pop);
    record(0);

    for (int gen = 1; gen <= config.generations; ++gen) {
        std::vector<Individual> offspring;
        offspring.reserve(pop.size());
        for (std::size_t i = 0; i < pop.size(); ++i)
            offspring.push_back(pop[tournament_winner(pop, config.tournament_size, rng)]);

        for (std::size_t i = 1; i < offspring.size(); i += 2) {
            if (rng.uniform() < config.crossover_probability) {
                if (config.crossover == "uniform")
                    mate_uniform(offspring[i - 1], offspring[i], rng);
                else
                    mate_two_point(offspring[i - 1], offspring[i], rng);
                offspring[i - 1].fitness.reset();
                offspring[i].fitness.reset();
            }
        }
        for (auto& ind : offspring) {
            if (rng.uniform() < config.mutation_probability) {
                for (auto& bit : ind.mask.bits)
                    if (rng.uniform() < per_gene) bit ^= 1;
                ind.fitness.reset();
            }
        }

        evaluate_all(offspring);
        pop = std::move(offspring);
        record(gen);
    }

    result.cache_hits = cache.hits();
    result.cache_misses = cache.misses();
    result.sae_trainings = sae_training_count() - solves_before;
    return result;
}

MultiRunResult multi_run(const ZslBundle& bundle, const FoldPlan& plan, const GaConfig& config,
                         double lambda, int runs, int threads, bool per_class) {
    if (runs < 1)
        throw ConfigError("InvalidRuns", "runs must be >= 1, got " + std::to_string(runs));
    config.validate();

    MultiRunResult out;
    out.runs.reserve(static_cast<std::size_t>(runs));
    for (int r = 0; r < runs; ++r) {
        GaRunOutcome outcome;
        outcome.run_index = r;
        outcome.seed = derive_seed(config.seed, "ga-run", static_cast<std::uint64_t>(r));
        GaConfig run_config = config;
        run_config.seed = outcome.seed;
        try {
            outcome.result = run_ga(bundle, plan, run_config, lambda, threads);
            outcome.attribute_count = static_cast<int>(outcome.result.best_mask.popcount());
            outcome.unseen_accuracy =
                evaluate_mask_on_unseen(bundle, outcome.result.best_mask, lambda, per_class);
        } catch (const Error& e) {
            outcome.failed = true;
            outcome.error = e.what();
            warn("GA run " + std::to_string(r) + " failed: " + e.what());
        }
        out.runs.push_back(std::move(outcome));
    }

    int successes = 0;
    out.best_run = -1;
    double sum = 0.0;
    for (const auto& run : out.runs) {
        if (run.failed) continue;
        ++successes;
        sum += run.unseen_accuracy;
        if (out.best_run < 0 ||
            run.result.best_fitness > out.runs[static_cast<std::size_t>(out.best_run)].result.best_fitness)
            out.best_run = run.run_index;
        if (out.frequency.empty()) out.frequency.assign(run.result.best_mask.size(), 0);
        for (std::size_t j = 0; j < run.result.best_mask.size(); ++j)
            if (run.result.best_mask.bits[j]) ++out.frequency[j];
    }
    if (successes == 0) throw NumericError("AllRunsFailed", "every GA run failed");

    out.mean_accuracy = sum / successes;
    double ss = 0.0;
    for (const auto& run : out.runs)
        if (!run.failed) ss += (run.unseen_accuracy - out.mean_accuracy) *
                               (run.unseen_accuracy - out.mean_accuracy);
    out.std_accuracy = successes > 1 ? std::sqrt(ss / (successes - 1)) : 0.0;
    const double half = 1.96 * out.std_accuracy / std::sqrt(static_cast<double>(successes));
    out.ci95_low = out.mean_accuracy - half;
    out.ci95_high = out.mean_accuracy + half;
    return out;
}

std::string ga_trace_to_csv(const GaResult& result) {
    std::string out = "generation,best,mean,diversity,cache_hits,cache_misses\n";
    for (const auto& row : result.trace) {
        out += std::to_string(row.generation) + "," + format_double(row.best) + "," +
               format_double(row.mean) + "," + format_double(row.diversity) + "," +
               std::to_string(row.cache_hits) + "," + std::to_string(row.cache_misses) + "\n";
    }
    return out;
}

}  // namespace semsel
