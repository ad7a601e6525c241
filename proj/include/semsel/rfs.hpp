#ifndef SEMSEL_RFS_HPP
#define SEMSEL_RFS_HPP

#include <string>
#include <vector>

#include "semsel/partition.hpp"
#include "semsel/rankers.hpp"
#include "semsel/types.hpp"

namespace semsel {

// Output of one fold's ranking + incremental wrapper walk. prefix_accuracies
// has one slot per prefix size 1..N; entries the walk skipped (stride > 1)
// are NaN and never win the argmax.
struct FoldSelection {
    int fold_index = 0;
    Ranking ranking;
    std::vector<double> prefix_accuracies;
    int chosen_size = 0;
    AttributeMask chosen_mask;
};

// frequency[j] counts the folds whose chosen mask kept attribute j; the mask
// for threshold T_i keeps j iff frequency[j] >= i, so masks nest downward.
struct ConsensusResult {
    std::vector<int> frequency;
    std::vector<AttributeMask> masks_by_threshold;  // index i-1 holds T_i

    int k() const { return static_cast<int>(masks_by_threshold.size()); }
};

struct RfsResult {
    std::vector<FoldSelection> folds;
    ConsensusResult consensus;
};

// Table-5-shaped evaluation row for one threshold. Empty masks are skipped,
// not evaluated ("no solution").
struct ThresholdRow {
    int threshold = 0;
    int attribute_count = 0;
    double unseen_accuracy = 0.0;
    bool skipped = false;
};

// Smallest prefix length (1-based) attaining the maximal accuracy; NaN
// entries are treated as never-best.
int choose_prefix(const std::vector<double>& accuracies);

// Walks prefixes of the ranking, training on fold_train and scoring on
// fold_val. stride > 1 probes every stride-th prefix first, then fills in
// the neighbourhood of the coarse best before choosing.
FoldSelection wrapper_walk(const Ranking& ranking, const FoldView& fold_train,
                           const FoldView& fold_val, double lambda, int stride = 1);

ConsensusResult consensus(const std::vector<AttributeMask>& chosen_masks, int k);

// Full per-fold pipeline: rank on pseudo-seen prototypes (fold-derived
// seeds), wrapper-walk, then aggregate. Folds run in parallel.
RfsResult run_rfs(const ZslBundle& bundle, const FoldPlan& plan, const RankerSpec& ranker,
                  double lambda, int stride = 1, int threads = 1);

// Retrains on all seen classes per threshold mask and scores the true unseen
// test set. The final, test-touching step.
std::vector<ThresholdRow> evaluate_thresholds(const ZslBundle& bundle,
                                              const ConsensusResult& result, double lambda,
                                              bool per_class = false);

std::string rfs_result_to_json(const RfsResult& result,
                               const std::vector<ThresholdRow>& rows,
                               const std::vector<std::string>& attribute_names);

// attribute_index,name,selected
std::string mask_to_csv(const AttributeMask& mask, const std::vector<std::string>& names);

}  // namespace semsel

#endif
