#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <json.hpp>

#include <cmath>
#include <limits>
#include <vector>

#include "semsel/errors.hpp"
#include "semsel/partition.hpp"
#include "semsel/rfs.hpp"
#include "semsel/rng.hpp"
#include "semsel/sae.hpp"
#include "semsel/synthgen.hpp"
#include "semsel/types.hpp"

using namespace semsel;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

AttributeMask mask_of(std::size_t n, std::initializer_list<std::size_t> indices) {
    AttributeMask m = AttributeMask::zeros(n);
    for (const std::size_t j : indices) m.bits[j] = 1;
    return m;
}

// Small bundle with Gaussian semantics and features: every margin is generic,
// so cross-path comparisons cannot hinge on ties.
ZslBundle random_bundle(int n_seen, int n_unseen, int n_attr, int dim, int per_class,
                        std::uint64_t seed) {
    Rng rng(seed);
    ZslBundle bundle;
    SemanticSpace& sem = bundle.semantics;
    const int n_classes = n_seen + n_unseen;
    for (int c = 0; c < n_classes; ++c) {
        const std::string name = (c < n_seen ? "seen_" : "unseen_") + std::to_string(c);
        sem.class_ids.push_back(name);
        (c < n_seen ? bundle.split.seen : bundle.split.unseen).push_back(name);
    }
    for (int j = 0; j < n_attr; ++j) sem.attribute_names.push_back("a" + std::to_string(j));
    sem.matrix.resize(n_classes, n_attr);
    for (int c = 0; c < n_classes; ++c)
        for (int j = 0; j < n_attr; ++j) sem.matrix(c, j) = rng.normal();

    auto fill = [&](VisualSet& set, int first, int count) {
        set.features.resize(count * per_class, dim);
        for (int c = first; c < first + count; ++c)
            for (int i = 0; i < per_class; ++i) {
                const int row = (c - first) * per_class + i;
                for (int d = 0; d < dim; ++d) set.features(row, d) = rng.normal();
                set.labels.push_back(sem.class_ids[static_cast<std::size_t>(c)]);
            }
    };
    fill(bundle.train, 0, n_seen);
    fill(bundle.test, n_seen, n_unseen);
    bundle.validate();
    return bundle;
}

AttributeMask top_prefix(const Ranking& ranking, int size) {
    AttributeMask m = AttributeMask::zeros(static_cast<std::size_t>(ranking.size()));
    for (int i = 0; i < size; ++i)
        m.bits[static_cast<std::size_t>(ranking.order[static_cast<std::size_t>(i)])] = 1;
    return m;
}

bool subset_of(const AttributeMask& inner, const AttributeMask& outer) {
    for (std::size_t j = 0; j < inner.size(); ++j)
        if (inner.bits[j] && !outer.bits[j]) return false;
    return true;
}

}  // namespace

TEST_CASE("choose_prefix takes the smallest argmax and skips unset slots") {
    CHECK(choose_prefix({0.4, 0.7, 0.6}) == 2);
    CHECK(choose_prefix({0.5, 0.5, 0.5}) == 1);  // tie -> fewest attributes
    CHECK(choose_prefix({0.9}) == 1);
    CHECK(choose_prefix({kNaN, 0.3, kNaN, 0.3}) == 2);  // NaN never wins
    CHECK(choose_prefix({kNaN, kNaN, 0.1}) == 3);
    CHECK_THROWS_AS(choose_prefix({}), DataError);
    CHECK_THROWS_AS(choose_prefix({kNaN, kNaN}), DataError);
}

TEST_CASE("wrapper walk reproduces an independent prefix sweep") {
    const ZslBundle bundle = random_bundle(6, 2, 7, 5, 4, 401);
    const FoldPlan plan = build_fold_plan(bundle.seen_in_file_order(), 3);
    const auto [fold_train, fold_val] = fold_views(bundle, plan, 0);

    RankerSpec rspec;
    rspec.kind = RankerKind::LinearCoef;
    const Ranking ranking = rank_attributes(rspec, fold_train.semantics);
    const FoldSelection sel = wrapper_walk(ranking, fold_train, fold_val, 500000.0);

    // Reference: score every prefix with a freshly constructed evaluator.
    const MaskEvaluator evaluator(fold_train, fold_val, 500000.0);
    REQUIRE(sel.prefix_accuracies.size() == 7);
    int best = 0;
    for (int size = 1; size <= 7; ++size) {
        const double acc = evaluator.evaluate(top_prefix(ranking, size));
        CHECK(sel.prefix_accuracies[static_cast<std::size_t>(size - 1)] == acc);
        if (acc > sel.prefix_accuracies[static_cast<std::size_t>(best)]) best = size - 1;
    }
    CHECK(sel.chosen_size == best + 1);
    CHECK(sel.chosen_mask.bits == top_prefix(ranking, sel.chosen_size).bits);
    // Argmax property: the chosen prefix is at least as good as the full one.
    CHECK(sel.prefix_accuracies[static_cast<std::size_t>(sel.chosen_size - 1)] >=
          sel.prefix_accuracies.back());
}

TEST_CASE("strided walk probes coarsely, refines locally, and keeps the endpoint") {
    const ZslBundle bundle = random_bundle(6, 2, 9, 5, 4, 402);
    const FoldPlan plan = build_fold_plan(bundle.seen_in_file_order(), 3);
    const auto [fold_train, fold_val] = fold_views(bundle, plan, 1);

    RankerSpec rspec;
    rspec.kind = RankerKind::LinearCoef;
    const Ranking ranking = rank_attributes(rspec, fold_train.semantics);
    const FoldSelection dense = wrapper_walk(ranking, fold_train, fold_val, 500000.0, 1);
    const FoldSelection coarse = wrapper_walk(ranking, fold_train, fold_val, 500000.0, 3);

    // Probed slots match the dense sweep exactly; unprobed slots stay NaN.
    int probed = 0;
    for (std::size_t i = 0; i < 9; ++i) {
        if (std::isnan(coarse.prefix_accuracies[i])) continue;
        ++probed;
        CHECK(coarse.prefix_accuracies[i] == dense.prefix_accuracies[i]);
    }
    CHECK(probed < 9);          // stride really skipped something
    CHECK(!std::isnan(coarse.prefix_accuracies.back()));  // endpoint always probed
    CHECK(!std::isnan(coarse.prefix_accuracies.front()));
    // The refinement window around the coarse winner is filled in.
    for (int size = std::max(1, coarse.chosen_size - 2);
         size <= std::min(9, coarse.chosen_size + 2); ++size)
        CHECK(!std::isnan(coarse.prefix_accuracies[static_cast<std::size_t>(size - 1)]));
    CHECK(coarse.chosen_mask.bits == top_prefix(ranking, coarse.chosen_size).bits);

    CHECK_THROWS_WITH_AS(wrapper_walk(ranking, fold_train, fold_val, 500000.0, 0),
                         doctest::Contains("InvalidStride"), ConfigError);
}

TEST_CASE("wrapper walk rejects a ranking that does not match the space") {
    const ZslBundle bundle = random_bundle(4, 2, 5, 4, 3, 403);
    const FoldPlan plan = build_fold_plan(bundle.seen_in_file_order(), 2);
    const auto [fold_train, fold_val] = fold_views(bundle, plan, 0);
    Ranking short_ranking;
    short_ranking.order = {0, 1, 2};
    short_ranking.scores = {3.0, 2.0, 1.0};
    CHECK_THROWS_WITH_AS(wrapper_walk(short_ranking, fold_train, fold_val, 500000.0),
                         doctest::Contains("LengthMismatch"), DataError);
}

TEST_CASE("consensus counts fold votes and nests thresholds") {
    // Folds chose {a,b},{a,c},{a,b},{a},{b} over attributes a=0,b=1,c=2.
    const std::vector<AttributeMask> chosen = {
        mask_of(3, {0, 1}), mask_of(3, {0, 2}), mask_of(3, {0, 1}),
        mask_of(3, {0}),    mask_of(3, {1}),
    };
    const ConsensusResult result = consensus(chosen, 5);

    CHECK(result.frequency == std::vector<int>{4, 3, 1});
    REQUIRE(result.k() == 5);
    CHECK(result.masks_by_threshold[0].bits == mask_of(3, {0, 1, 2}).bits);  // T1
    CHECK(result.masks_by_threshold[1].bits == mask_of(3, {0, 1}).bits);     // T2
    CHECK(result.masks_by_threshold[2].bits == mask_of(3, {0, 1}).bits);     // T3
    CHECK(result.masks_by_threshold[3].bits == mask_of(3, {0}).bits);        // T4
    CHECK(result.masks_by_threshold[4].popcount() == 0);                     // T5 empty

    // Nesting and the double-counting identity.
    for (int i = 0; i + 1 < result.k(); ++i)
        CHECK(subset_of(result.masks_by_threshold[static_cast<std::size_t>(i + 1)],
                        result.masks_by_threshold[static_cast<std::size_t>(i)]));
    int freq_sum = 0;
    for (const int f : result.frequency) freq_sum += f;
    int size_sum = 0;
    for (const auto& m : chosen) size_sum += static_cast<int>(m.popcount());
    CHECK(freq_sum == size_sum);

    CHECK_THROWS_WITH_AS(consensus(chosen, 4), doctest::Contains("LengthMismatch"), DataError);
    std::vector<AttributeMask> ragged = chosen;
    ragged[2] = mask_of(4, {0});
    CHECK_THROWS_WITH_AS(consensus(ragged, 5), doctest::Contains("LengthMismatch"), DataError);
}

TEST_CASE("threshold evaluation: identity mask equals baseline, empty mask is skipped") {
    const ZslBundle bundle = random_bundle(5, 3, 6, 5, 4, 404);

    ConsensusResult fabricated;
    fabricated.frequency = {2, 2, 2, 2, 2, 2};
    fabricated.masks_by_threshold = {AttributeMask::ones(6), AttributeMask::zeros(6)};
    const std::vector<ThresholdRow> rows = evaluate_thresholds(bundle, fabricated, 500000.0);

    REQUIRE(rows.size() == 2);
    CHECK(rows[0].threshold == 1);
    CHECK(rows[0].attribute_count == 6);
    CHECK(!rows[0].skipped);

    // Baseline: train on all seen instances, score the unseen test set.
    const SaeModel model = train_sae(bundle.semantics, bundle.train, 500000.0);
    SemanticSpace unseen_protos;
    unseen_protos.attribute_names = bundle.semantics.attribute_names;
    unseen_protos.class_ids = bundle.split.unseen;
    unseen_protos.matrix = bundle.semantics.matrix.bottomRows(3);
    const double baseline =
        accuracy(SaePredictor{model, std::move(unseen_protos)}, bundle.test, false);
    CHECK(rows[0].unseen_accuracy == baseline);

    CHECK(rows[1].skipped);
    CHECK(rows[1].attribute_count == 0);
    CHECK(rows[1].unseen_accuracy == 0.0);
}

TEST_CASE("full pipeline is deterministic and satisfies the consensus contracts") {
    SynthSpec spec;
    spec.seed = 18;
    const SynthResult r = generate(spec);
    const FoldPlan plan = build_fold_plan(r.bundle.seen_in_file_order(), 5);

    RankerSpec rspec;
    rspec.kind = RankerKind::LinearCoef;
    rspec.seed = 7;
    const RfsResult first = run_rfs(r.bundle, plan, rspec, 500000.0);
    const RfsResult second = run_rfs(r.bundle, plan, rspec, 500000.0);

    REQUIRE(first.folds.size() == 5);
    for (std::size_t f = 0; f < 5; ++f) {
        CHECK(first.folds[f].fold_index == static_cast<int>(f));
        CHECK(first.folds[f].ranking.order == second.folds[f].ranking.order);
        CHECK(first.folds[f].prefix_accuracies == second.folds[f].prefix_accuracies);
        CHECK(first.folds[f].chosen_mask.bits == second.folds[f].chosen_mask.bits);
        // Argmax beats (or ties) the full-space prefix on every fold.
        CHECK(first.folds[f].prefix_accuracies[static_cast<std::size_t>(
                  first.folds[f].chosen_size - 1)] >= first.folds[f].prefix_accuracies.back());
    }
    CHECK(first.consensus.frequency == second.consensus.frequency);

    int freq_sum = 0;
    for (const int f : first.consensus.frequency) freq_sum += f;
    int size_sum = 0;
    for (const auto& sel : first.folds) size_sum += sel.chosen_size;
    CHECK(freq_sum == size_sum);
    for (int i = 0; i + 1 < first.consensus.k(); ++i)
        CHECK(subset_of(first.consensus.masks_by_threshold[static_cast<std::size_t>(i + 1)],
                        first.consensus.masks_by_threshold[static_cast<std::size_t>(i)]));

    // Folds computed in parallel merge to the same result by fold index.
    const RfsResult parallel = run_rfs(r.bundle, plan, rspec, 500000.0, 1, 4);
    for (std::size_t f = 0; f < 5; ++f)
        CHECK(parallel.folds[f].chosen_mask.bits == first.folds[f].chosen_mask.bits);
    CHECK(parallel.consensus.frequency == first.consensus.frequency);
}

TEST_CASE("random-ranking ablation completes with valid nested masks") {
    SynthSpec spec;
    spec.seed = 4;
    const SynthResult r = generate(spec);
    const FoldPlan plan = build_fold_plan(r.bundle.seen_in_file_order(), 5);

    RankerSpec rspec;
    rspec.kind = RankerKind::Random;
    rspec.seed = 99;
    const RfsResult result = run_rfs(r.bundle, plan, rspec, 500000.0);
    REQUIRE(result.consensus.k() == 5);
    CHECK(result.consensus.masks_by_threshold[0].popcount() >= 1);
    for (int i = 0; i + 1 < result.consensus.k(); ++i)
        CHECK(subset_of(result.consensus.masks_by_threshold[static_cast<std::size_t>(i + 1)],
                        result.consensus.masks_by_threshold[static_cast<std::size_t>(i)]));
}

TEST_CASE("on a planted bundle the best threshold beats the unpruned baseline") {
    SynthSpec spec;  // default: 4 relevant + 12 noise attributes
    spec.seed = 18;
    const SynthResult r = generate(spec);
    const FoldPlan plan = build_fold_plan(r.bundle.seen_in_file_order(), 5);

    RankerSpec rspec;
    rspec.kind = RankerKind::LinearCoef;
    const RfsResult result = run_rfs(r.bundle, plan, rspec, 500000.0);
    const std::vector<ThresholdRow> rows = evaluate_thresholds(r.bundle, result.consensus, 500000.0);

    const double baseline =
        evaluate_mask_on_unseen(r.bundle, AttributeMask::ones(16), 500000.0, false);
    double best = 0.0;
    int prev_count = 17;
    for (const auto& row : rows) {
        if (!row.skipped) best = std::max(best, row.unseen_accuracy);
        CHECK(row.attribute_count <= prev_count);  // weakly decreasing with T
        prev_count = row.attribute_count;
    }
    CHECK(best >= baseline);
}

TEST_CASE("rfs report serialises to the documented JSON shape") {
    const ZslBundle bundle = random_bundle(4, 2, 5, 4, 3, 405);
    const FoldPlan plan = build_fold_plan(bundle.seen_in_file_order(), 2);
    RankerSpec rspec;
    rspec.kind = RankerKind::LinearCoef;
    const RfsResult result = run_rfs(bundle, plan, rspec, 500000.0);
    std::vector<ThresholdRow> rows = evaluate_thresholds(bundle, result.consensus, 500000.0);
    rows[1].skipped = true;  // force a "no solution" row to cover the null shape

    const std::string text =
        rfs_result_to_json(result, rows, bundle.semantics.attribute_names);
    const nlohmann::json doc = nlohmann::json::parse(text);

    CHECK(doc.at("attribute_names").size() == 5);
    REQUIRE(doc.at("folds").size() == 2);
    const auto& fold = doc.at("folds").at(0);
    CHECK(fold.at("fold_index") == 0);
    CHECK(fold.at("ranking_order").size() == 5);
    CHECK(fold.at("ranking_scores").size() == 5);
    CHECK(fold.at("prefix_accuracies").size() == 5);
    CHECK(fold.at("chosen_size").get<int>() ==
          static_cast<int>(fold.at("chosen_attributes").size()));
    CHECK(doc.at("frequency").size() == 5);
    REQUIRE(doc.at("thresholds").size() == 2);
    CHECK(doc.at("thresholds").at(0).at("threshold") == "T1");
    CHECK(doc.at("thresholds").at(0).at("unseen_accuracy").is_number());
    CHECK(doc.at("thresholds").at(1).at("unseen_accuracy").is_null());
    CHECK(doc.at("thresholds").at(1).at("note") == "no solution");
}

TEST_CASE("mask serialises to the documented CSV shape") {
    const AttributeMask mask = mask_of(3, {0, 2});
    const std::string csv = mask_to_csv(mask, {"alpha", "beta", "gamma"});
    CHECK(csv ==
          "attribute_index,name,selected\n"
          "0,alpha,1\n"
          "1,beta,0\n"
          "2,gamma,1\n");
    CHECK_THROWS_WITH_AS(mask_to_csv(mask, {"only-two", "names"}),
                         doctest::Contains("LengthMismatch"), DataError);
}
