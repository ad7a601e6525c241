#ifndef SEMSEL_SAE_HPP
#define SEMSEL_SAE_HPP

#include <cstdint>
#include <string>

#include "semsel/partition.hpp"
#include "semsel/types.hpp"

namespace semsel {

// Tied-weight linear projection between visual features and attributes.
// W maps a D-vector of visual features to an L-vector of attribute scores.
struct SaeModel {
    Matrix w;       // L x D
    double lambda;  // reconstruction/fit trade-off used at training time
};

// Solves A W + W B = C for symmetric PSD A (LxL) and B (DxD) by joint
// eigendecomposition. A small ridge keeps rank-deficient Gram matrices
// solvable; genuinely inconsistent systems raise SingularPencil.
Matrix solve_sylvester(const Matrix& a, const Matrix& b, const Matrix& c);

// Trains on per-instance pairs (x_i, a_{y_i}): solves
//   S S^T W + lambda W X X^T = (1 + lambda) S X^T
// where column i of S is the prototype of instance i's class.
SaeModel train_sae(const SemanticSpace& semantics, const VisualSet& visual, double lambda);

struct SaePredictor {
    SaeModel model;
    SemanticSpace prototypes;  // candidate classes; width must equal W rows
};

// Cosine nearest prototype in attribute space. Ties and zero embeddings
// resolve to the lowest prototype row index.
std::string predict(const SaePredictor& predictor, const Vector& x);

// per_class=false: per-instance mean correctness. per_class=true: macro
// average of per-class accuracies.
double accuracy(const SaePredictor& predictor, const VisualSet& eval_set, bool per_class);

// Fold-local trainer/scorer for mask searches. The visual Gram eigenbasis is
// shared across masks (it does not depend on the attribute subset), so each
// mask costs one small restricted eigensolve instead of a full retrain.
class MaskEvaluator {
public:
    MaskEvaluator(const FoldView& train, const FoldView& val, double lambda);

    // Pseudo-unseen accuracy of the SAE trained on the masked semantics.
    double evaluate(const AttributeMask& mask) const;
    // The restricted-system solution W (popcount x D).
    Matrix solve_w(const AttributeMask& mask) const;

    int num_attributes() const { return static_cast<int>(a_full_.rows()); }

private:
    Matrix restricted_mtilde(const AttributeMask& mask, Matrix& u_out) const;

    Matrix a_full_;     // N x N semantic Gram, symmetrized
    Matrix cv_full_;    // N x D: (1+lambda) S X^T projected onto B's eigenbasis
    Matrix vt_xval_;    // D x M_val: validation features in B's eigenbasis
    Matrix v_;          // B eigenvectors
    Vector evb_;        // B eigenvalues
    Matrix val_protos_; // n_val x N
    std::vector<int> val_label_rows_;
    double trace_b_ = 0.0;
    int dim_ = 0;
};

// The final, test-touching step shared by every method: retrain on all seen
// training instances with the masked semantics and score the unseen test set
// against unseen prototypes only.
double evaluate_mask_on_unseen(const ZslBundle& bundle, const AttributeMask& mask, double lambda,
                               bool per_class = false);

// Sylvester solves performed so far (one per SAE training); the bookkeeping
// behind #SAE columns in reports.
std::uint64_t sae_training_count();
void reset_sae_training_count();

}  // namespace semsel

#endif
