#include "semsel/sae.hpp"

#include <Eigen/Eigenvalues>
#include <atomic>
#include <cmath>
#include <unordered_map>
#include <unordered_set>

#include "semsel/errors.hpp"

namespace semsel {

namespace {

std::atomic<std::uint64_t> g_sae_trainings{0};

void check_symmetric(const Matrix& m, const char* name) {
    if (m.rows() != m.cols())
        throw DataError("DimensionMismatch",
                        std::string(name) + " is not square (" + std::to_string(m.rows()) + "x" +
                            std::to_string(m.cols()) + ")");
    const double scale = m.norm();
    const double asym = (m - m.transpose()).norm();
    if (asym > 1e-8 * std::max(scale, 1e-300))
        throw NumericError("NonSymmetricInput",
                           std::string(name) + " deviates from symmetry by " +
                               std::to_string(asym / std::max(scale, 1e-300)) + " relative");
}

// Core of the eigen-route solve: given A = U diag(eva) U^T, B = V diag(evb) V^T
// and G = U^T C V, returns Mtilde with W = U Mtilde V^T.
Matrix divided_gram_solve(const Vector& eva, const Vector& evb, const Matrix& g, double ridge,
                          double c_norm) {
    const double negligible = 1e-8 * std::max(c_norm, 1e-300);
    Matrix m(g.rows(), g.cols());
    for (Eigen::Index i = 0; i < g.rows(); ++i) {
        for (Eigen::Index j = 0; j < g.cols(); ++j) {
            const double denom = eva(i) + evb(j);
            if (denom <= ridge) {
                if (std::abs(g(i, j)) > negligible)
                    throw NumericError(
                        "SingularPencil",
                        "eigenvalue sum " + std::to_string(denom) + " below ridge " +
                            std::to_string(ridge) + " with non-negligible coupling " +
                            std::to_string(g(i, j)));
                m(i, j) = 0.0;
            } else {
                // Exact division above the ridge threshold: mixing the ridge into
                // healthy denominators would leak a |g|*ridge/denom term into the
                // residual, spoiling well-posed systems to buy nothing.
                m(i, j) = g(i, j) / denom;
            }
        }
    }
    return m;
}

double gram_ridge(double trace_a, Eigen::Index rows_a, double trace_b, Eigen::Index rows_b) {
    return 1e-10 * (trace_a / static_cast<double>(rows_a) +
                    trace_b / static_cast<double>(rows_b));
}

// Per-class aggregation of an instance set: prototype matrix rows aligned with
// counts and per-class feature sums. S S^T and S X^T only depend on these.
struct ClassAggregate {
    Matrix protos;      // n_used x N
    Vector counts;      // n_used
    Matrix class_sums;  // n_used x D
};

ClassAggregate aggregate_by_class(const SemanticSpace& semantics, const VisualSet& visual) {
    const auto rows = semantics.row_index();
    std::unordered_map<int, int> used;  // semantics row -> aggregate row
    std::vector<int> order;
    for (const auto& label : visual.labels) {
        auto it = rows.find(label);
        if (it == rows.end())
            throw DataError("UnknownLabel", "label '" + label + "' not in semantic space");
        if (used.emplace(it->second, static_cast<int>(order.size())).second)
            order.push_back(it->second);
    }
    ClassAggregate agg;
    const auto n_used = static_cast<Eigen::Index>(order.size());
    agg.protos.resize(n_used, semantics.matrix.cols());
    agg.counts = Vector::Zero(n_used);
    agg.class_sums = Matrix::Zero(n_used, visual.features.cols());
    for (Eigen::Index i = 0; i < n_used; ++i)
        agg.protos.row(i) = semantics.matrix.row(order[static_cast<std::size_t>(i)]);
    for (int i = 0; i < visual.num_instances(); ++i) {
        const int r = used.at(rows.at(visual.labels[static_cast<std::size_t>(i)]));
        agg.counts(r) += 1.0;
        agg.class_sums.row(r) += visual.features.row(i);
    }
    return agg;
}

struct CosineScorer {
    explicit CosineScorer(const Matrix& protos)
        : protos_(protos), norms_(protos.rows()) {
        for (Eigen::Index r = 0; r < protos.rows(); ++r) norms_(r) = protos.row(r).norm();
    }

    // Lowest-index argmin of d_cos; zero-norm vectors sit at distance 1.
    int nearest(const Vector& embedding, bool* zero_embedding) const {
        const double en = embedding.norm();
        if (en == 0.0) {
            if (zero_embedding) *zero_embedding = true;
            return 0;  // all distances are 1, lowest index wins
        }
        int best = 0;
        double best_d = 2.0;
        for (Eigen::Index r = 0; r < protos_.rows(); ++r) {
            const double pn = norms_(r);
            const double d =
                (pn == 0.0) ? 1.0 : 1.0 - protos_.row(r).dot(embedding) / (en * pn);
            if (d < best_d) {
                best_d = d;
                best = static_cast<int>(r);
            }
        }
        return best;
    }

    const Matrix& protos_;
    Vector norms_;
};

}  // namespace

Matrix solve_sylvester(const Matrix& a, const Matrix& b, const Matrix& c) {
    check_symmetric(a, "A");
    check_symmetric(b, "B");
    if (c.rows() != a.rows() || c.cols() != b.rows())
        throw DataError("DimensionMismatch",
                        "C is " + std::to_string(c.rows()) + "x" + std::to_string(c.cols()) +
                            " but A,B give " + std::to_string(a.rows()) + "x" +
                            std::to_string(b.rows()));

    const Matrix a_sym = 0.5 * (a + a.transpose());
    const Matrix b_sym = 0.5 * (b + b.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> ea(a_sym);
    Eigen::SelfAdjointEigenSolver<Matrix> eb(b_sym);
    if (ea.info() != Eigen::Success || eb.info() != Eigen::Success)
        throw NumericError("SingularPencil", "eigendecomposition failed to converge");

    const double ridge = gram_ridge(a_sym.trace(), a_sym.rows(), b_sym.trace(), b_sym.rows());
    const Matrix g = ea.eigenvectors().transpose() * c * eb.eigenvectors();
    const Matrix m = divided_gram_solve(ea.eigenvalues(), eb.eigenvalues(), g, ridge, c.norm());
    g_sae_trainings.fetch_add(1, std::memory_order_relaxed);
    return ea.eigenvectors() * m * eb.eigenvectors().transpose();
}

SaeModel train_sae(const SemanticSpace& semantics, const VisualSet& visual, double lambda) {
    if (lambda <= 0.0)
        throw ConfigError("InvalidLambda", "lambda must be positive, got " + std::to_string(lambda));
    if (visual.num_instances() < 1)
        throw DataError("DimensionMismatch", "cannot train on an empty visual set");

    const ClassAggregate agg = aggregate_by_class(semantics, visual);
    const Matrix a = agg.protos.transpose() * agg.counts.asDiagonal() * agg.protos;
    const Matrix b = lambda * (visual.features.transpose() * visual.features);
    const Matrix c = (1.0 + lambda) * (agg.protos.transpose() * agg.class_sums);
    return SaeModel{solve_sylvester(a, b, c), lambda};
}

std::string predict(const SaePredictor& predictor, const Vector& x) {
    if (predictor.prototypes.num_classes() < 1)
        throw DataError("EmptyEvalSet", "predictor has no candidate prototypes");
    if (predictor.prototypes.num_attributes() != predictor.model.w.rows())
        throw DataError("DimensionMismatch",
                        "prototype width " + std::to_string(predictor.prototypes.num_attributes()) +
                            " != W rows " + std::to_string(predictor.model.w.rows()));
    const Vector embedding = predictor.model.w * x;
    bool zero = false;
    const CosineScorer scorer(predictor.prototypes.matrix);
    const int row = scorer.nearest(embedding, &zero);
    if (zero)
        warn("zero embedding Wx; prediction falls back to lowest-index class '" +
             predictor.prototypes.class_ids[0] + "'");
    return predictor.prototypes.class_ids[static_cast<std::size_t>(row)];
}

double accuracy(const SaePredictor& predictor, const VisualSet& eval_set, bool per_class) {
    if (eval_set.num_instances() < 1)
        throw DataError("EmptyEvalSet", "accuracy needs at least one instance");
    if (predictor.prototypes.num_attributes() != predictor.model.w.rows())
        throw DataError("DimensionMismatch",
                        "prototype width " + std::to_string(predictor.prototypes.num_attributes()) +
                            " != W rows " + std::to_string(predictor.model.w.rows()));

    const auto rows = predictor.prototypes.row_index();
    const CosineScorer scorer(predictor.prototypes.matrix);
    const Matrix embeddings = predictor.model.w * eval_set.features.transpose();

    int zero_count = 0;
    std::unordered_map<int, std::pair<int, int>> per_class_tallies;  // row -> (correct, total)
    int correct = 0;
    for (int i = 0; i < eval_set.num_instances(); ++i) {
        auto it = rows.find(eval_set.labels[static_cast<std::size_t>(i)]);
        if (it == rows.end())
            throw DataError("UnknownLabel", "eval label '" +
                                                eval_set.labels[static_cast<std::size_t>(i)] +
                                                "' not among candidate prototypes");
        bool zero = false;
        const int pred = scorer.nearest(embeddings.col(i), &zero);
        if (zero) ++zero_count;
        const bool hit = pred == it->second;
        correct += hit ? 1 : 0;
        auto& tally = per_class_tallies[it->second];
        tally.first += hit ? 1 : 0;
        tally.second += 1;
    }
    if (zero_count > 0)
        warn(std::to_string(zero_count) + " zero embedding(s) during evaluation");

    if (!per_class) return static_cast<double>(correct) / eval_set.num_instances();
    double sum = 0.0;
    for (const auto& [row, tally] : per_class_tallies)
        sum += static_cast<double>(tally.first) / tally.second;
    return sum / static_cast<double>(per_class_tallies.size());
}

MaskEvaluator::MaskEvaluator(const FoldView& train, const FoldView& val, double lambda) {
    if (lambda <= 0.0)
        throw ConfigError("InvalidLambda", "lambda must be positive, got " + std::to_string(lambda));
    const ClassAggregate agg = aggregate_by_class(train.semantics, train.visuals);

    Matrix a = agg.protos.transpose() * agg.counts.asDiagonal() * agg.protos;
    a_full_ = 0.5 * (a + a.transpose());
    Matrix b = lambda * (train.visuals.features.transpose() * train.visuals.features);
    b = 0.5 * (b + b.transpose());
    trace_b_ = b.trace();
    dim_ = static_cast<int>(b.rows());

    Eigen::SelfAdjointEigenSolver<Matrix> eb(b);
    if (eb.info() != Eigen::Success)
        throw NumericError("SingularPencil", "visual Gram eigendecomposition failed");
    v_ = eb.eigenvectors();
    evb_ = eb.eigenvalues();

    const Matrix c_full = (1.0 + lambda) * (agg.protos.transpose() * agg.class_sums);
    cv_full_ = c_full * v_;
    vt_xval_ = (val.visuals.features * v_).transpose();

    val_protos_ = val.semantics.matrix;
    const auto rows = val.semantics.row_index();
    val_label_rows_.reserve(val.visuals.labels.size());
    for (const auto& label : val.visuals.labels) {
        auto it = rows.find(label);
        if (it == rows.end())
            throw DataError("UnknownLabel", "validation label '" + label + "' not in fold semantics");
        val_label_rows_.push_back(it->second);
    }
}

Matrix MaskEvaluator::restricted_mtilde(const AttributeMask& mask, Matrix& u_out) const {
    if (mask.size() != static_cast<std::size_t>(a_full_.rows()))
        throw DataError("LengthMismatch",
                        "mask length " + std::to_string(mask.size()) + " != attribute count " +
                            std::to_string(a_full_.rows()));
    const auto idx = mask.indices();
    if (idx.empty()) throw DataError("EmptyMask", "cannot train on zero attributes");

    const auto l = static_cast<Eigen::Index>(idx.size());
    Matrix a(l, l);
    Matrix g_rows(l, cv_full_.cols());
    for (Eigen::Index i = 0; i < l; ++i) {
        g_rows.row(i) = cv_full_.row(idx[static_cast<std::size_t>(i)]);
        for (Eigen::Index j = 0; j < l; ++j)
            a(i, j) = a_full_(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
    }

    Eigen::SelfAdjointEigenSolver<Matrix> ea(a);
    if (ea.info() != Eigen::Success)
        throw NumericError("SingularPencil", "semantic Gram eigendecomposition failed");
    const double ridge = gram_ridge(a.trace(), l, trace_b_, dim_);
    const Matrix g = ea.eigenvectors().transpose() * g_rows;
    const Matrix m = divided_gram_solve(ea.eigenvalues(), evb_, g, ridge, g_rows.norm());
    g_sae_trainings.fetch_add(1, std::memory_order_relaxed);
    u_out = ea.eigenvectors();
    return m;
}

double MaskEvaluator::evaluate(const AttributeMask& mask) const {
    Matrix u;
    const Matrix m = restricted_mtilde(mask, u);
    const Matrix embeddings = u * (m * vt_xval_);  // L x M_val

    const auto idx = mask.indices();
    Matrix protos(val_protos_.rows(), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t j = 0; j < idx.size(); ++j)
        protos.col(static_cast<Eigen::Index>(j)) = val_protos_.col(idx[j]);

    const CosineScorer scorer(protos);
    int correct = 0;
    for (std::size_t i = 0; i < val_label_rows_.size(); ++i) {
        const int pred = scorer.nearest(embeddings.col(static_cast<Eigen::Index>(i)), nullptr);
        correct += (pred == val_label_rows_[i]) ? 1 : 0;
    }
    if (val_label_rows_.empty())
        throw DataError("EmptyEvalSet", "fold has no validation instances");
    return static_cast<double>(correct) / static_cast<double>(val_label_rows_.size());
}

Matrix MaskEvaluator::solve_w(const AttributeMask& mask) const {
    Matrix u;
    const Matrix m = restricted_mtilde(mask, u);
    return u * m * v_.transpose();
}

double evaluate_mask_on_unseen(const ZslBundle& bundle, const AttributeMask& mask, double lambda,
                               bool per_class) {
    const SemanticSpace restricted = restrict_attributes(bundle.semantics, mask);
    const SaeModel model = train_sae(restricted, bundle.train, lambda);

    std::unordered_set<std::string> unseen(bundle.split.unseen.begin(), bundle.split.unseen.end());
    SemanticSpace protos;
    protos.attribute_names = restricted.attribute_names;
    std::vector<int> rows;
    for (int r = 0; r < restricted.num_classes(); ++r) {
        if (unseen.count(restricted.class_ids[static_cast<std::size_t>(r)])) {
            protos.class_ids.push_back(restricted.class_ids[static_cast<std::size_t>(r)]);
            rows.push_back(r);
        }
    }
    protos.matrix.resize(static_cast<Eigen::Index>(rows.size()), restricted.matrix.cols());
    for (std::size_t i = 0; i < rows.size(); ++i)
        protos.matrix.row(static_cast<Eigen::Index>(i)) = restricted.matrix.row(rows[i]);
    return accuracy(SaePredictor{model, std::move(protos)}, bundle.test, per_class);
}

std::uint64_t sae_training_count() { return g_sae_trainings.load(std::memory_order_relaxed); }

void reset_sae_training_count() { g_sae_trainings.store(0, std::memory_order_relaxed); }

}  // namespace semsel
