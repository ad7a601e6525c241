#include "semsel/partition.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "semsel/errors.hpp"
#include "semsel/rng.hpp"

using json = nlohmann::json;

namespace semsel {

FoldPlan build_fold_plan(const std::vector<std::string>& seen_classes, int k,
                         std::optional<std::uint64_t> shuffle_seed) {
    const int n = static_cast<int>(seen_classes.size());
    if (k < 2) throw ConfigError("DegenerateK", "fold count " + std::to_string(k) + " < 2");
    if (k > n)
        throw ConfigError("TooFewClasses", "fold count " + std::to_string(k) + " > " +
                                               std::to_string(n) + " seen classes");
    {
        std::unordered_set<std::string> uniq;
        for (const auto& id : seen_classes)
            if (!uniq.insert(id).second)
                throw DataError("DuplicateClassId", "class id '" + id + "' appears twice");
    }

    std::vector<std::string> order = seen_classes;
    if (shuffle_seed) {
        Rng rng(derive_seed(*shuffle_seed, "class-shuffle"));
        rng.shuffle(order);
    }

    FoldPlan plan;
    plan.k = k;
    plan.n = n;
    plan.l = n / k;
    plan.r = n % k;
    plan.folds.resize(static_cast<std::size_t>(k));

    for (int fold = 1; fold <= k; ++fold) {
        const bool extra = fold <= plan.r;
        const int size = extra ? plan.l + 1 : plan.l;
        const int start = extra ? (fold - 1) * (plan.l + 1)
                                : plan.r * (plan.l + 1) + (fold - 1 - plan.r) * plan.l;
        Fold& f = plan.folds[static_cast<std::size_t>(fold - 1)];
        f.pseudo_unseen.assign(order.begin() + start, order.begin() + start + size);
        f.pseudo_seen.reserve(static_cast<std::size_t>(n - size));
        for (int i = 0; i < n; ++i)
            if (i < start || i >= start + size) f.pseudo_seen.push_back(order[static_cast<std::size_t>(i)]);
    }
    return plan;
}

std::vector<std::string> verify_fold_plan(const FoldPlan& plan) {
    std::vector<std::string> violations;
    auto add = [&](const std::string& msg) { violations.push_back(msg); };

    if (plan.k != static_cast<int>(plan.folds.size())) {
        add("plan lists k=" + std::to_string(plan.k) + " but has " +
            std::to_string(plan.folds.size()) + " folds");
        return violations;
    }
    if (plan.k < 1 || plan.n < 1) {
        add("plan has k=" + std::to_string(plan.k) + ", n=" + std::to_string(plan.n));
        return violations;
    }
    if (plan.l != plan.n / plan.k || plan.r != plan.n % plan.k)
        add("bookkeeping mismatch: l,r=(" + std::to_string(plan.l) + "," + std::to_string(plan.r) +
            ") but n/k gives (" + std::to_string(plan.n / plan.k) + "," +
            std::to_string(plan.n % plan.k) + ")");

    // Universe = every class named anywhere in the plan.
    std::set<std::string> universe;
    for (const auto& f : plan.folds) {
        universe.insert(f.pseudo_seen.begin(), f.pseudo_seen.end());
        universe.insert(f.pseudo_unseen.begin(), f.pseudo_unseen.end());
    }
    if (static_cast<int>(universe.size()) != plan.n)
        add("plan names " + std::to_string(universe.size()) + " distinct classes but n=" +
            std::to_string(plan.n));

    for (std::size_t i = 0; i < plan.folds.size(); ++i) {
        const Fold& f = plan.folds[i];
        const std::set<std::string> ps(f.pseudo_seen.begin(), f.pseudo_seen.end());
        const std::set<std::string> pu(f.pseudo_unseen.begin(), f.pseudo_unseen.end());
        if (ps.size() != f.pseudo_seen.size() || pu.size() != f.pseudo_unseen.size())
            add("fold " + std::to_string(i) + ": duplicated class id inside a side (Eq. 3)");
        std::vector<std::string> overlap;
        std::set_intersection(ps.begin(), ps.end(), pu.begin(), pu.end(),
                              std::back_inserter(overlap));
        for (const auto& id : overlap)
            add("fold " + std::to_string(i) + ": class '" + id +
                "' is both pseudo-seen and pseudo-unseen (Eq. 3 disjointness)");
        std::set<std::string> both;
        both.insert(ps.begin(), ps.end());
        both.insert(pu.begin(), pu.end());
        if (both != universe)
            add("fold " + std::to_string(i) +
                ": pseudo-seen and pseudo-unseen do not partition the seen classes (Eq. 3 union)");
        const int expected = (static_cast<int>(i) + 1 <= plan.r) ? plan.l + 1 : plan.l;
        if (static_cast<int>(pu.size()) != expected)
            add("fold " + std::to_string(i) + ": pseudo-unseen size " +
                std::to_string(pu.size()) + " != " + std::to_string(expected) +
                " (Eq. 4 balance)");
    }

    // Eq. 5 coverage and Eq. 6 pairwise disjointness over pseudo-unseen sets.
    std::map<std::string, std::vector<std::size_t>> appearances;
    for (std::size_t i = 0; i < plan.folds.size(); ++i)
        for (const auto& id : plan.folds[i].pseudo_unseen) appearances[id].push_back(i);
    for (const auto& id : universe)
        if (!appearances.count(id))
            add("class '" + id + "' never appears pseudo-unseen (Eq. 5 coverage)");
    for (const auto& [id, where] : appearances)
        if (where.size() > 1) {
            std::string folds;
            for (auto w : where) folds += (folds.empty() ? "" : ",") + std::to_string(w);
            add("class '" + id + "' pseudo-unseen in folds {" + folds +
                "} (Eq. 6 pairwise disjointness)");
        }
    return violations;
}

std::pair<FoldView, FoldView> fold_views(const ZslBundle& bundle, const FoldPlan& plan,
                                         int fold_index) {
    if (fold_index < 0 || fold_index >= plan.k)
        throw DataError("IndexOutOfRange", "fold index " + std::to_string(fold_index) +
                                               " not in [0," + std::to_string(plan.k) + ")");
    const Fold& fold = plan.folds[static_cast<std::size_t>(fold_index)];

    std::unordered_map<std::string, int> counts;
    for (const auto& l : bundle.train.labels) ++counts[l];
    for (const auto& id : fold.pseudo_seen)
        if (!counts.count(id))
            throw DataError("UnknownLabel",
                            "pseudo-seen class '" + id + "' has no training instances");
    for (const auto& id : fold.pseudo_unseen)
        if (!counts.count(id))
            throw DataError("UnknownLabel",
                            "pseudo-unseen class '" + id + "' has no training instances");

    const auto rows = bundle.semantics.row_index();
    auto make_view = [&](const std::vector<std::string>& classes) {
        FoldView view;
        view.semantics.attribute_names = bundle.semantics.attribute_names;
        view.semantics.class_ids = classes;
        view.semantics.matrix.resize(static_cast<Eigen::Index>(classes.size()),
                                     bundle.semantics.matrix.cols());
        std::unordered_set<std::string> members;
        for (std::size_t i = 0; i < classes.size(); ++i) {
            view.semantics.matrix.row(static_cast<Eigen::Index>(i)) =
                bundle.semantics.matrix.row(rows.at(classes[i]));
            members.insert(classes[i]);
        }
        std::vector<int> keep;
        for (int i = 0; i < bundle.train.num_instances(); ++i)
            if (members.count(bundle.train.labels[static_cast<std::size_t>(i)])) keep.push_back(i);
        view.visuals.features.resize(static_cast<Eigen::Index>(keep.size()),
                                     bundle.train.features.cols());
        view.visuals.labels.reserve(keep.size());
        for (std::size_t i = 0; i < keep.size(); ++i) {
            view.visuals.features.row(static_cast<Eigen::Index>(i)) =
                bundle.train.features.row(keep[i]);
            view.visuals.labels.push_back(bundle.train.labels[static_cast<std::size_t>(keep[i])]);
        }
        return view;
    };

    return {make_view(fold.pseudo_seen), make_view(fold.pseudo_unseen)};
}

std::string fold_plan_to_json(const FoldPlan& plan) {
    json folds = json::array();
    for (const auto& f : plan.folds)
        folds.push_back({{"pseudo_seen", f.pseudo_seen}, {"pseudo_unseen", f.pseudo_unseen}});
    json j = {{"k", plan.k}, {"folds", folds}};
    return j.dump(2) + "\n";
}

FoldPlan fold_plan_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw DataError("DimensionMismatch", std::string("fold plan JSON: ") + e.what());
    }
    FoldPlan plan;
    plan.k = j.at("k").get<int>();
    std::set<std::string> universe;
    for (const auto& jf : j.at("folds")) {
        Fold f;
        f.pseudo_seen = jf.at("pseudo_seen").get<std::vector<std::string>>();
        f.pseudo_unseen = jf.at("pseudo_unseen").get<std::vector<std::string>>();
        universe.insert(f.pseudo_seen.begin(), f.pseudo_seen.end());
        universe.insert(f.pseudo_unseen.begin(), f.pseudo_unseen.end());
        plan.folds.push_back(std::move(f));
    }
    plan.n = static_cast<int>(universe.size());
    if (plan.k > 0) {
        plan.l = plan.n / plan.k;
        plan.r = plan.n % plan.k;
    }
    return plan;
}

}  // namespace semsel
