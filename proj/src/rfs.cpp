#include "semsel/rfs.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

#include "semsel/errors.hpp"
#include "semsel/io.hpp"
#include "semsel/parallel.hpp"
#include "semsel/rng.hpp"
#include "semsel/sae.hpp"

namespace semsel {

namespace {

AttributeMask prefix_mask(const Ranking& ranking, int size) {
    AttributeMask m = AttributeMask::zeros(static_cast<std::size_t>(ranking.size()));
    for (int i = 0; i < size; ++i)
        m.bits[static_cast<std::size_t>(ranking.order[static_cast<std::size_t>(i)])] = 1;
    return m;
}

}  // namespace

int choose_prefix(const std::vector<double>& accuracies) {
    if (accuracies.empty()) throw DataError("EmptyEvalSet", "no prefix accuracies to choose from");
    int best = -1;
    for (std::size_t i = 0; i < accuracies.size(); ++i) {
        if (std::isnan(accuracies[i])) continue;
        if (best < 0 || accuracies[i] > accuracies[static_cast<std::size_t>(best)])
            best = static_cast<int>(i);
    }
    if (best < 0) throw DataError("EmptyEvalSet", "all prefix accuracies are unset");
    return best + 1;
}

FoldSelection wrapper_walk(const Ranking& ranking, const FoldView& fold_train,
                           const FoldView& fold_val, double lambda, int stride) {
    if (stride < 1)
        throw ConfigError("InvalidStride", "stride must be >= 1, got " + std::to_string(stride));
    const int n = ranking.size();
    MaskEvaluator evaluator(fold_train, fold_val, lambda);
    if (evaluator.num_attributes() != n)
        throw DataError("LengthMismatch", "ranking size " + std::to_string(n) +
                                              " != attribute count " +
                                              std::to_string(evaluator.num_attributes()));

    FoldSelection sel;
    sel.ranking = ranking;
    sel.prefix_accuracies.assign(static_cast<std::size_t>(n),
                                 std::numeric_limits<double>::quiet_NaN());
    auto probe = [&](int size) {
        auto& slot = sel.prefix_accuracies[static_cast<std::size_t>(size - 1)];
        if (std::isnan(slot)) slot = evaluator.evaluate(prefix_mask(ranking, size));
    };

    for (int size = 1; size <= n; size += stride) probe(size);
    probe(n);
    if (stride > 1) {
        // Refine around the coarse winner so a sharp peak between probes is
        // not missed by more than the local fill-in.
        const int coarse = choose_prefix(sel.prefix_accuracies);
        for (int size = std::max(1, coarse - stride + 1);
             size <= std::min(n, coarse + stride - 1); ++size)
            probe(size);
    }

    sel.chosen_size = choose_prefix(sel.prefix_accuracies);
    sel.chosen_mask = prefix_mask(ranking, sel.chosen_size);
    return sel;
}

ConsensusResult consensus(const std::vector<AttributeMask>& chosen_masks, int k) {
    if (chosen_masks.empty() || static_cast<int>(chosen_masks.size()) != k)
        throw DataError("LengthMismatch", "expected " + std::to_string(k) + " fold masks, got " +
                                              std::to_string(chosen_masks.size()));
    const std::size_t n = chosen_masks[0].size();
    for (const auto& m : chosen_masks)
        if (m.size() != n)
            throw DataError("LengthMismatch", "fold masks disagree on attribute count");

    ConsensusResult result;
    result.frequency.assign(n, 0);
    for (const auto& m : chosen_masks)
        for (std::size_t j = 0; j < n; ++j)
            if (m.bits[j]) ++result.frequency[j];

    result.masks_by_threshold.reserve(static_cast<std::size_t>(k));
    for (int t = 1; t <= k; ++t) {
        AttributeMask mask = AttributeMask::zeros(n);
        for (std::size_t j = 0; j < n; ++j)
            if (result.frequency[j] >= t) mask.bits[j] = 1;
        result.masks_by_threshold.push_back(std::move(mask));
    }
    return result;
}

RfsResult run_rfs(const ZslBundle& bundle, const FoldPlan& plan, const RankerSpec& ranker,
                  double lambda, int stride, int threads) {
    const int k = plan.k;
    RfsResult result;
    result.folds.resize(static_cast<std::size_t>(k));

    parallel_for(static_cast<std::size_t>(k), threads, [&](std::size_t fold) {
        auto [train_view, val_view] = fold_views(bundle, plan, static_cast<int>(fold));
        RankerSpec fold_spec = ranker;
        fold_spec.seed = derive_seed(ranker.seed, "rfs-fold", fold);
        const Ranking ranking = rank_attributes(fold_spec, train_view.semantics);
        FoldSelection sel = wrapper_walk(ranking, train_view, val_view, lambda, stride);
        sel.fold_index = static_cast<int>(fold);
        result.folds[fold] = std::move(sel);
    });

    std::vector<AttributeMask> chosen;
    chosen.reserve(static_cast<std::size_t>(k));
    for (const auto& sel : result.folds) chosen.push_back(sel.chosen_mask);
    result.consensus = consensus(chosen, k);
    return result;
}

std::vector<ThresholdRow> evaluate_thresholds(const ZslBundle& bundle,
                                              const ConsensusResult& result, double lambda,
                                              bool per_class) {
    std::vector<ThresholdRow> rows;
    rows.reserve(result.masks_by_threshold.size());
    for (int t = 1; t <= result.k(); ++t) {
        const AttributeMask& mask = result.masks_by_threshold[static_cast<std::size_t>(t - 1)];
        ThresholdRow row;
        row.threshold = t;
        row.attribute_count = static_cast<int>(mask.popcount());
        if (row.attribute_count == 0) {
            row.skipped = true;
            warn("threshold T" + std::to_string(t) + " selected no attributes; no solution");
        } else {
            row.unseen_accuracy = evaluate_mask_on_unseen(bundle, mask, lambda, per_class);
        }
        rows.push_back(row);
    }
    return rows;
}

std::string rfs_result_to_json(const RfsResult& result,
                               const std::vector<ThresholdRow>& rows,
                               const std::vector<std::string>& attribute_names) {
    nlohmann::ordered_json doc;
    doc["attribute_names"] = attribute_names;
    doc["folds"] = nlohmann::ordered_json::array();
    for (const auto& sel : result.folds) {
        nlohmann::ordered_json f;
        f["fold_index"] = sel.fold_index;
        f["ranking_order"] = sel.ranking.order;
        f["ranking_scores"] = sel.ranking.scores;
        f["prefix_accuracies"] = sel.prefix_accuracies;
        f["chosen_size"] = sel.chosen_size;
        f["chosen_attributes"] = sel.chosen_mask.indices();
        doc["folds"].push_back(std::move(f));
    }
    doc["frequency"] = result.consensus.frequency;
    doc["thresholds"] = nlohmann::ordered_json::array();
    for (const auto& row : rows) {
        nlohmann::ordered_json r;
        r["threshold"] = "T" + std::to_string(row.threshold);
        r["attributes"] =
            result.consensus.masks_by_threshold[static_cast<std::size_t>(row.threshold - 1)]
                .indices();
        r["attribute_count"] = row.attribute_count;
        if (row.skipped) {
            r["unseen_accuracy"] = nullptr;
            r["note"] = "no solution";
        } else {
            r["unseen_accuracy"] = row.unseen_accuracy;
        }
        doc["thresholds"].push_back(std::move(r));
    }
    return doc.dump(2) + "\n";
}

std::string mask_to_csv(const AttributeMask& mask, const std::vector<std::string>& names) {
    if (names.size() != mask.size())
        throw DataError("LengthMismatch", "name count " + std::to_string(names.size()) +
                                              " != mask length " + std::to_string(mask.size()));
    std::string out = "attribute_index,name,selected\n";
    for (std::size_t j = 0; j < mask.size(); ++j)
        out += std::to_string(j) + "," + names[j] + "," + (mask.bits[j] ? "1" : "0") + "\n";
    return out;
}

}  // namespace semsel
