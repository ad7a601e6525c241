#ifndef SEMSEL_RANKERS_HPP
#define SEMSEL_RANKERS_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "semsel/types.hpp"

namespace semsel {

// Attribute importance ordering, most important first. order is always a
// permutation of 0..N-1; ties in score resolve to the lower attribute index.
struct Ranking {
    std::vector<int> order;
    std::vector<double> scores;  // indexed by attribute, not by rank

    int size() const { return static_cast<int>(order.size()); }
};

enum class RankerKind { LinearCoef, TreeImpurity, Random };

RankerKind ranker_kind_from_string(const std::string& s);
std::string to_string(RankerKind kind);

// linear_coef covers both margin losses: "hinge" (squared hinge) and
// "logistic". tree_impurity grows a small forest on the class prototypes.
struct RankerSpec {
    RankerKind kind = RankerKind::LinearCoef;
    std::uint64_t seed = 0;
    std::string loss = "hinge";
    double c = 1.0;         // inverse L2 strength for linear models
    int iterations = 1000;  // fixed gradient-descent step count
    int trees = 200;
    int max_depth = 0;  // 0 = grow until pure
};

// Ranks attributes by their power to discriminate the given classes, using
// one prototype per class as the training set. Deterministic given
// (spec, semantics). Zero-variance columns score 0 and rank last for the
// data-driven rankers; the random ranker never looks at the data.
Ranking rank_attributes(const RankerSpec& spec, const SemanticSpace& semantics);

// rank,attribute_index,attribute_name,score
std::string ranking_to_csv(const Ranking& ranking, const std::vector<std::string>& names);

}  // namespace semsel

#endif
