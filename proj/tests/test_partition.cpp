#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <set>
#include <string>
#include <vector>

#include "semsel/errors.hpp"
#include "semsel/partition.hpp"
#include "semsel/rng.hpp"
#include "semsel/types.hpp"

using namespace semsel;

namespace {

std::vector<std::string> classes(int n) {
    std::vector<std::string> ids;
    for (int i = 0; i < n; ++i) ids.push_back("y" + std::to_string(i + 1));
    return ids;
}

// 3 seen classes, 2 instances each, plus one unseen class for bundle validity.
ZslBundle three_class_bundle() {
    ZslBundle b;
    b.semantics.class_ids = {"a", "b", "c", "zz"};
    b.semantics.attribute_names = {"p", "q"};
    b.semantics.matrix.resize(4, 2);
    b.semantics.matrix << 1, 0, 0, 1, 1, 1, -1, -1;
    b.split.seen = {"a", "b", "c"};
    b.split.unseen = {"zz"};
    b.train.features.resize(6, 2);
    b.train.features << 1, 0, 1, 1, 0, 1, 0, 2, 1, 2, 2, 1;
    b.train.labels = {"a", "a", "b", "b", "c", "c"};
    b.test.features.resize(1, 2);
    b.test.features << -1, -1;
    b.test.labels = {"zz"};
    b.validate();
    return b;
}

}  // namespace

TEST_CASE("seven classes in three folds split 3/2/2 in order") {
    const FoldPlan plan = build_fold_plan(classes(7), 3);
    CHECK(plan.k == 3);
    CHECK(plan.n == 7);
    CHECK(plan.l == 2);
    CHECK(plan.r == 1);
    CHECK(plan.folds[0].pseudo_unseen == std::vector<std::string>{"y1", "y2", "y3"});
    CHECK(plan.folds[1].pseudo_unseen == std::vector<std::string>{"y4", "y5"});
    CHECK(plan.folds[2].pseudo_unseen == std::vector<std::string>{"y6", "y7"});
    for (const Fold& fold : plan.folds) {
        CHECK(fold.pseudo_seen.size() + fold.pseudo_unseen.size() == 7);
        for (const auto& id : fold.pseudo_unseen)
            CHECK(std::find(fold.pseudo_seen.begin(), fold.pseudo_seen.end(), id) ==
                  fold.pseudo_seen.end());
    }
    CHECK(verify_fold_plan(plan).empty());
}

TEST_CASE("fifty classes in five folds gives ten pseudo-unseen each") {
    const FoldPlan plan = build_fold_plan(classes(50), 5);
    for (const Fold& fold : plan.folds) CHECK(fold.pseudo_unseen.size() == 10);
    CHECK(verify_fold_plan(plan).empty());
}

TEST_CASE("construction rejects bad arguments") {
    CHECK_THROWS_WITH_AS(build_fold_plan(classes(5), 1), doctest::Contains("DegenerateK"),
                         ConfigError);
    CHECK_THROWS_WITH_AS(build_fold_plan(classes(3), 4), doctest::Contains("TooFewClasses"),
                         ConfigError);
    auto dup = classes(4);
    dup[2] = "y1";
    CHECK_THROWS_WITH_AS(build_fold_plan(dup, 2), doctest::Contains("DuplicateClassId"),
                         DataError);
}

TEST_CASE("verifier reports planted defects by equation") {
    FoldPlan plan = build_fold_plan(classes(6), 3);

    SUBCASE("same class pseudo-unseen twice breaks disjointness") {
        plan.folds[1].pseudo_unseen[0] = "y1";
        const auto violations = verify_fold_plan(plan);
        REQUIRE(!violations.empty());
        bool cited = false;
        for (const auto& v : violations) cited = cited || v.find("Eq. 6") != std::string::npos;
        CHECK(cited);
    }
    SUBCASE("class missing from every pseudo-unseen set breaks coverage") {
        // y3 never validates; fold 1 keeps it pseudo-seen instead.
        plan.folds[1].pseudo_unseen = {"y1", "y4"};
        plan.folds[0].pseudo_unseen = {"y2", "y5"};
        plan.folds[2].pseudo_unseen = {"y6", "y6"};
        bool coverage = false;
        for (const auto& v : verify_fold_plan(plan))
            coverage = coverage || (v.find("Eq. 5") != std::string::npos &&
                                    v.find("y3") != std::string::npos);
        CHECK(coverage);
    }
}

TEST_CASE("shuffle seed permutes deterministically") {
    const auto ids = classes(9);
    const FoldPlan a = build_fold_plan(ids, 3, 42);
    const FoldPlan b = build_fold_plan(ids, 3, 42);
    const FoldPlan c = build_fold_plan(ids, 3, 43);
    for (int f = 0; f < 3; ++f) CHECK(a.folds[f].pseudo_unseen == b.folds[f].pseudo_unseen);
    bool differs = false;
    for (int f = 0; f < 3; ++f)
        differs = differs || a.folds[f].pseudo_unseen != c.folds[f].pseudo_unseen;
    CHECK(differs);
    CHECK(verify_fold_plan(a).empty());
    CHECK(verify_fold_plan(c).empty());
}

TEST_CASE("random plans satisfy balance, coverage, and disjointness") {
    Rng rng(7);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = 2 + static_cast<int>(rng.uniform_index(199));
        const int k = 2 + static_cast<int>(rng.uniform_index(static_cast<std::size_t>(n - 1)));
        const FoldPlan plan = build_fold_plan(classes(n), k);
        CHECK(verify_fold_plan(plan).empty());

        std::multiset<std::string> all;
        const std::size_t l = static_cast<std::size_t>(n / k);
        const int r = n % k;
        for (int f = 0; f < k; ++f) {
            const auto& pu = plan.folds[static_cast<std::size_t>(f)].pseudo_unseen;
            CHECK(pu.size() == (f < r ? l + 1 : l));
            all.insert(pu.begin(), pu.end());
        }
        CHECK(all.size() == static_cast<std::size_t>(n));  // coverage + disjointness
        CHECK(std::set<std::string>(all.begin(), all.end()).size() ==
              static_cast<std::size_t>(n));
    }
}

TEST_CASE("fold views split instances exactly and cover the train set once") {
    const ZslBundle b = three_class_bundle();
    const FoldPlan plan = build_fold_plan(b.seen_in_file_order(), 3);

    int val_total = 0;
    for (int f = 0; f < plan.k; ++f) {
        const auto [train_view, val_view] = fold_views(b, plan, f);
        val_total += val_view.visuals.num_instances();
        // No label crosses sides.
        for (const auto& label : train_view.visuals.labels)
            CHECK(std::find(val_view.visuals.labels.begin(), val_view.visuals.labels.end(),
                            label) == val_view.visuals.labels.end());
        // Semantics rows match each side's classes.
        CHECK(train_view.semantics.num_classes() ==
              static_cast<int>(plan.folds[static_cast<std::size_t>(f)].pseudo_seen.size()));
        CHECK(val_view.semantics.num_classes() ==
              static_cast<int>(plan.folds[static_cast<std::size_t>(f)].pseudo_unseen.size()));
    }
    CHECK(val_total == b.train.num_instances());

    CHECK_THROWS_WITH_AS(fold_views(b, plan, plan.k), doctest::Contains("IndexOutOfRange"),
                         DataError);
}

TEST_CASE("single fold view isolates the pseudo-unseen class") {
    ZslBundle b = three_class_bundle();
    const FoldPlan plan = build_fold_plan(b.seen_in_file_order(), 3);
    // Fold 1's pseudo-unseen is {b}; its training view must hold only a and c.
    const auto [train_view, val_view] = fold_views(b, plan, 1);
    CHECK(val_view.visuals.labels == std::vector<std::string>{"b", "b"});
    for (const auto& label : train_view.visuals.labels) CHECK(label != "b");
}

TEST_CASE("fold views reject classes without training instances") {
    ZslBundle b = three_class_bundle();
    b.train.features.conservativeResize(4, 2);
    b.train.labels = {"a", "a", "b", "b"};  // c has no instances
    const FoldPlan plan = build_fold_plan({"a", "b", "c"}, 3);
    CHECK_THROWS_AS(fold_views(b, plan, 0), DataError);
}

TEST_CASE("plan JSON round-trip preserves every fold") {
    const FoldPlan plan = build_fold_plan(classes(11), 4, 99);
    const FoldPlan back = fold_plan_from_json(fold_plan_to_json(plan));
    CHECK(back.k == plan.k);
    CHECK(back.n == plan.n);
    CHECK(back.l == plan.l);
    CHECK(back.r == plan.r);
    for (int f = 0; f < plan.k; ++f) {
        CHECK(back.folds[static_cast<std::size_t>(f)].pseudo_seen ==
              plan.folds[static_cast<std::size_t>(f)].pseudo_seen);
        CHECK(back.folds[static_cast<std::size_t>(f)].pseudo_unseen ==
              plan.folds[static_cast<std::size_t>(f)].pseudo_unseen);
    }
}
