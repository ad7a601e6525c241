#ifndef SEMSEL_PARTITION_HPP
#define SEMSEL_PARTITION_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "semsel/types.hpp"

namespace semsel {

// One pseudo-seen / pseudo-unseen split of the seen classes.
struct Fold {
    std::vector<std::string> pseudo_seen;
    std::vector<std::string> pseudo_unseen;
};

// K class-stratified folds: pseudo-unseen sets are balanced (sizes l or l+1),
// pairwise disjoint, and jointly cover the seen classes.
struct FoldPlan {
    int k = 0;
    int n = 0;  // seen-class count
    int l = 0;  // floor(n / k)
    int r = 0;  // n mod k
    std::vector<Fold> folds;
};

// Indexed construction over the (optionally seed-shuffled) class ordering:
// fold k <= r takes classes [(k-1)(l+1), k(l+1)), later folds take runs of l.
FoldPlan build_fold_plan(const std::vector<std::string>& seen_classes, int k,
                         std::optional<std::uint64_t> shuffle_seed = std::nullopt);

// One entry per violated constraint; empty means the plan is valid.
std::vector<std::string> verify_fold_plan(const FoldPlan& plan);

// Training/validation material for one fold: instances plus the matching
// semantic rows, both limited to that side's classes.
struct FoldView {
    SemanticSpace semantics;
    VisualSet visuals;
};

std::pair<FoldView, FoldView> fold_views(const ZslBundle& bundle, const FoldPlan& plan,
                                         int fold_index);

std::string fold_plan_to_json(const FoldPlan& plan);
FoldPlan fold_plan_from_json(const std::string& text);

}  // namespace semsel

#endif
