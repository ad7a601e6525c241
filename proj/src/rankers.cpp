#include "semsel/rankers.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "semsel/errors.hpp"
#include "semsel/io.hpp"
#include "semsel/rng.hpp"

namespace semsel {

namespace {

// Descending score, ascending index on ties.
std::vector<int> order_by_score(const std::vector<double>& scores) {
    std::vector<int> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        if (scores[static_cast<std::size_t>(a)] != scores[static_cast<std::size_t>(b)])
            return scores[static_cast<std::size_t>(a)] > scores[static_cast<std::size_t>(b)];
        return a < b;
    });
    return order;
}

// Columns rescaled to mean 0, variance 1; zero-variance columns are flagged
// and left as all-zero so they cannot earn coefficient mass.
Matrix standardize_columns(const Matrix& m, std::vector<bool>& constant) {
    const auto rows = m.rows();
    Matrix out(m.rows(), m.cols());
    constant.assign(static_cast<std::size_t>(m.cols()), false);
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
        const double mean = m.col(j).mean();
        const double var = (m.col(j).array() - mean).square().sum() / static_cast<double>(rows);
        if (var <= 0.0) {
            constant[static_cast<std::size_t>(j)] = true;
            out.col(j).setZero();
        } else {
            out.col(j) = (m.col(j).array() - mean) / std::sqrt(var);
        }
    }
    return out;
}

// One-vs-rest L2-regularised linear fit by Nesterov-accelerated full-batch
// descent with a curvature-bounded step. Fixed iteration count, no line
// search, so the result is bit-reproducible.
Vector fit_linear_ovr(const Matrix& x, const std::vector<double>& y, const std::string& loss,
                      double c, int iterations) {
    const auto n = x.rows();
    const auto d = x.cols();
    Vector w = Vector::Zero(d);
    double b = 0.0;
    Vector look_w = w;
    double look_b = b;

    const double curvature = (loss == "logistic") ? 0.25 : 2.0;
    const double lipschitz = 1.0 + c * curvature * (x.squaredNorm() + static_cast<double>(n));
    const double step = 1.0 / lipschitz;
    // mu = 1 from the ridge term; the intercept rides along.
    const double momentum = (std::sqrt(lipschitz) - 1.0) / (std::sqrt(lipschitz) + 1.0);

    Vector margins(n);
    Vector slope(n);
    for (int it = 0; it < iterations; ++it) {
        margins = x * look_w;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double m = y[static_cast<std::size_t>(i)] * (margins(i) + look_b);
            if (loss == "logistic") {
                slope(i) = -y[static_cast<std::size_t>(i)] / (1.0 + std::exp(m));
            } else {
                slope(i) = m < 1.0 ? -2.0 * (1.0 - m) * y[static_cast<std::size_t>(i)] : 0.0;
            }
        }
        const Vector next_w = look_w - step * (look_w + c * (x.transpose() * slope));
        const double next_b = look_b - step * (c * slope.sum());  // intercept unpenalised
        look_w = next_w + momentum * (next_w - w);
        look_b = next_b + momentum * (next_b - b);
        w = next_w;
        b = next_b;
    }
    return w;
}

std::vector<double> linear_coef_scores(const SemanticSpace& semantics, const RankerSpec& spec,
                                       const std::vector<bool>& constant, const Matrix& x) {
    if (spec.loss != "hinge" && spec.loss != "logistic")
        throw ConfigError("UnknownLoss", "linear_coef loss must be hinge or logistic, got '" +
                                             spec.loss + "'");
    if (spec.c <= 0.0)
        throw ConfigError("InvalidRegularization", "c must be positive, got " + std::to_string(spec.c));

    const auto n = static_cast<std::size_t>(semantics.num_classes());
    std::vector<double> scores(static_cast<std::size_t>(semantics.num_attributes()), 0.0);
    for (std::size_t cls = 0; cls < n; ++cls) {
        std::vector<double> y(n, -1.0);
        y[cls] = 1.0;
        const Vector w = fit_linear_ovr(x, y, spec.loss, spec.c, spec.iterations);
        for (std::size_t j = 0; j < scores.size(); ++j)
            if (!constant[j]) scores[j] += std::abs(w(static_cast<Eigen::Index>(j)));
    }
    return scores;
}

// Minimal CART forest over the prototypes. Node sample ids are class rows
// (bootstrapped), labels are the rows themselves, so a node is pure iff all
// its ids coincide.
struct TreeContext {
    const Matrix& x;
    const std::vector<bool>& constant;
    int max_depth;
    int mtry;
    Rng rng;
    std::vector<double> importance;  // impurity decrease, this tree only
};

double gini(const std::vector<int>& ids) {
    std::unordered_map<int, int> counts;
    for (int id : ids) ++counts[id];
    const double n = static_cast<double>(ids.size());
    double sum_sq = 0.0;
    for (const auto& [id, c] : counts) sum_sq += static_cast<double>(c) * c;
    return 1.0 - sum_sq / (n * n);
}

bool is_pure(const std::vector<int>& ids) {
    for (std::size_t i = 1; i < ids.size(); ++i)
        if (ids[i] != ids[0]) return false;
    return true;
}

struct SplitChoice {
    int feature = -1;
    double threshold = 0.0;
    double weighted_impurity = 0.0;
};

// Best (feature, midpoint threshold) over an mtry-sized feature draw;
// ties go to the lower feature index, then the lower threshold.
bool find_split(TreeContext& ctx, const std::vector<int>& ids, SplitChoice& out) {
    const auto n_features = static_cast<std::size_t>(ctx.x.cols());
    std::vector<int> features(n_features);
    std::iota(features.begin(), features.end(), 0);
    for (int i = 0; i < ctx.mtry && static_cast<std::size_t>(i) < n_features; ++i) {
        const std::size_t j = i + ctx.rng.uniform_index(n_features - static_cast<std::size_t>(i));
        std::swap(features[static_cast<std::size_t>(i)], features[j]);
    }
    features.resize(std::min<std::size_t>(static_cast<std::size_t>(ctx.mtry), n_features));
    std::sort(features.begin(), features.end());

    bool found = false;
    out = SplitChoice{};
    for (int f : features) {
        if (ctx.constant[static_cast<std::size_t>(f)]) continue;
        std::vector<double> values;
        values.reserve(ids.size());
        for (int id : ids) values.push_back(ctx.x(id, f));
        std::sort(values.begin(), values.end());
        for (std::size_t v = 1; v < values.size(); ++v) {
            if (values[v] == values[v - 1]) continue;
            const double thr = 0.5 * (values[v] + values[v - 1]);
            std::vector<int> left, right;
            for (int id : ids) (ctx.x(id, f) <= thr ? left : right).push_back(id);
            if (left.empty() || right.empty()) continue;
            const double w = (static_cast<double>(left.size()) * gini(left) +
                              static_cast<double>(right.size()) * gini(right)) /
                             static_cast<double>(ids.size());
            const bool better =
                !found || w < out.weighted_impurity ||
                (w == out.weighted_impurity &&
                 (f < out.feature || (f == out.feature && thr < out.threshold)));
            if (better) {
                out = SplitChoice{f, thr, w};
                found = true;
            }
        }
    }
    return found;
}

void grow_tree(TreeContext& ctx, const std::vector<int>& ids, int depth, double total) {
    if (ids.size() < 2 || is_pure(ids)) return;
    if (ctx.max_depth > 0 && depth >= ctx.max_depth) return;
    SplitChoice split;
    if (!find_split(ctx, ids, split)) return;

    std::vector<int> left, right;
    for (int id : ids) (ctx.x(id, split.feature) <= split.threshold ? left : right).push_back(id);
    const double node_impurity = gini(ids);
    const double child_impurity = split.weighted_impurity;
    ctx.importance[static_cast<std::size_t>(split.feature)] +=
        (static_cast<double>(ids.size()) / total) * (node_impurity - child_impurity);
    grow_tree(ctx, left, depth + 1, total);
    grow_tree(ctx, right, depth + 1, total);
}

std::vector<double> tree_impurity_scores(const SemanticSpace& semantics, const RankerSpec& spec,
                                         const std::vector<bool>& constant) {
    if (spec.trees < 1)
        throw ConfigError("InvalidTreeCount", "trees must be >= 1, got " + std::to_string(spec.trees));
    const auto n = static_cast<std::size_t>(semantics.num_classes());
    const auto n_attr = static_cast<std::size_t>(semantics.num_attributes());
    const int mtry = std::max(1, static_cast<int>(std::sqrt(static_cast<double>(n_attr))));

    std::vector<double> scores(n_attr, 0.0);
    for (int t = 0; t < spec.trees; ++t) {
        TreeContext ctx{semantics.matrix, constant, spec.max_depth, mtry,
                        Rng(derive_seed(spec.seed, "tree", static_cast<std::uint64_t>(t))),
                        std::vector<double>(n_attr, 0.0)};
        std::vector<int> ids(n);
        for (auto& id : ids) id = static_cast<int>(ctx.rng.uniform_index(n));
        grow_tree(ctx, ids, 0, static_cast<double>(ids.size()));
        const double sum = std::accumulate(ctx.importance.begin(), ctx.importance.end(), 0.0);
        if (sum > 0.0)
            for (std::size_t j = 0; j < n_attr; ++j) scores[j] += ctx.importance[j] / sum;
    }
    const double total = std::accumulate(scores.begin(), scores.end(), 0.0);
    if (total > 0.0)
        for (auto& s : scores) s /= total;
    return scores;
}

}  // namespace

RankerKind ranker_kind_from_string(const std::string& s) {
    if (s == "linear_coef") return RankerKind::LinearCoef;
    if (s == "tree_impurity") return RankerKind::TreeImpurity;
    if (s == "random") return RankerKind::Random;
    throw ConfigError("UnknownRanker", "ranker kind must be linear_coef, tree_impurity or random, got '" + s + "'");
}

std::string to_string(RankerKind kind) {
    switch (kind) {
        case RankerKind::LinearCoef: return "linear_coef";
        case RankerKind::TreeImpurity: return "tree_impurity";
        case RankerKind::Random: return "random";
    }
    return "?";
}

Ranking rank_attributes(const RankerSpec& spec, const SemanticSpace& semantics) {
    if (semantics.num_classes() < 2)
        throw DataError("SingleClass", "ranking needs at least 2 classes, got " +
                                           std::to_string(semantics.num_classes()));
    if (semantics.num_attributes() < 1)
        throw DataError("DimensionMismatch", "ranking needs at least 1 attribute");
    const auto n_attr = static_cast<std::size_t>(semantics.num_attributes());

    Ranking r;
    if (spec.kind == RankerKind::Random) {
        // The null-model ablation: a pure permutation, blind to the data.
        std::vector<int> order(n_attr);
        std::iota(order.begin(), order.end(), 0);
        Rng rng(derive_seed(spec.seed, "random-ranking"));
        rng.shuffle(order);
        r.order = order;
        r.scores.assign(n_attr, 0.0);
        for (std::size_t pos = 0; pos < order.size(); ++pos)
            r.scores[static_cast<std::size_t>(order[pos])] = 1.0 / static_cast<double>(pos + 1);
        return r;
    }

    std::vector<bool> constant;
    const Matrix x = standardize_columns(semantics.matrix, constant);
    const auto n_constant = std::count(constant.begin(), constant.end(), true);
    if (n_constant > 0)
        warn(std::to_string(n_constant) + " constant attribute column(s) scored 0 and ranked last");

    r.scores = spec.kind == RankerKind::LinearCoef
                   ? linear_coef_scores(semantics, spec, constant, x)
                   : tree_impurity_scores(semantics, spec, constant);
    for (std::size_t j = 0; j < n_attr; ++j)
        if (constant[j]) r.scores[j] = 0.0;
    r.order = order_by_score(r.scores);
    return r;
}

std::string ranking_to_csv(const Ranking& ranking, const std::vector<std::string>& names) {
    if (names.size() != ranking.order.size())
        throw DataError("LengthMismatch", "name count " + std::to_string(names.size()) +
                                              " != ranking size " + std::to_string(ranking.order.size()));
    std::string out = "rank,attribute_index,attribute_name,score\n";
    for (std::size_t pos = 0; pos < ranking.order.size(); ++pos) {
        const int j = ranking.order[pos];
        out += std::to_string(pos + 1) + "," + std::to_string(j) + "," +
               names[static_cast<std::size_t>(j)] + "," +
               format_double(ranking.scores[static_cast<std::size_t>(j)]) + "\n";
    }
    return out;
}

}  // namespace semsel
