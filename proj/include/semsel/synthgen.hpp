#ifndef SEMSEL_SYNTHGEN_HPP
#define SEMSEL_SYNTHGEN_HPP

#include <cstdint>
#include <string>
#include <utility>

#include "semsel/partition.hpp"
#include "semsel/types.hpp"

namespace semsel {

// Desk-scale bundle recipe. Relevant attribute columns carry class structure
// that both margin- and split-based rankers can read; noise columns are
// class-independent and, because visual features are built from the relevant
// coordinates only, actively mislead the trained projection.
struct SynthSpec {
    int n_seen = 8;
    int n_unseen = 4;
    int n_relevant = 4;
    int n_noise = 12;
    int visual_dim = 32;
    int instances_per_class = 20;
    double noise_scale = 1.0;
    std::uint64_t seed = 0;

    void validate() const;
};

SynthSpec synth_spec_from_json(const std::string& text);
std::string synth_spec_to_json(const SynthSpec& spec);

struct SynthResult {
    ZslBundle bundle;
    AttributeMask ground_truth;  // the planted relevant columns
    std::uint64_t seed_used = 0;  // differs from spec.seed only after regeneration
};

// Builds the bundle, then verifies the planted guarantee: the ground-truth
// mask must score strictly higher cross-validated fitness than the all-ones
// mask (skipped when there is nothing to prune or too few classes to fold).
// On violation the seed is advanced deterministically and the bundle rebuilt;
// seed_used records the draw that satisfied the check.
SynthResult generate(const SynthSpec& spec);

struct OracleResult {
    AttributeMask mask;
    double fitness = 0.0;
};

// Scores every non-empty mask with the GA's fitness function and returns the
// maximum; ties prefer fewer attributes, then the lexicographically smaller
// index list. Guarded by max_n because the sweep is 2^N - 1 evaluations.
OracleResult exhaustive_best_mask(const ZslBundle& bundle, const FoldPlan& plan, double lambda,
                                  int max_n = 16, int threads = 1);

// True iff `candidate` beats `incumbent` under the oracle tie order:
// higher fitness, then fewer attributes, then smaller index list.
bool oracle_improves(const AttributeMask& incumbent, double incumbent_fitness,
                     const AttributeMask& candidate, double candidate_fitness);

}  // namespace semsel

#endif
