#ifndef SEMSEL_TYPES_HPP
#define SEMSEL_TYPES_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace semsel {

// Disk storage is float32; all solver math runs in float64.
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Binary attribute subset; the unit of search for RFS consensus and GA
// individuals. Empty masks are representable but rejected by consumers.
struct AttributeMask {
    std::vector<std::uint8_t> bits;

    std::size_t size() const { return bits.size(); }
    std::size_t popcount() const;
    std::vector<int> indices() const;
    // Canonical '0'/'1' string, used as the fitness-cache key.
    std::string key() const;

    static AttributeMask ones(std::size_t n);
    static AttributeMask zeros(std::size_t n);
    static AttributeMask from_indices(std::size_t n, const std::vector<int>& idx);

    bool operator==(const AttributeMask&) const = default;
};

// Maps a mask over the restricted space selected by `outer` back to the full
// space: bit j of `inner` refers to the j-th selected column of `outer`.
AttributeMask expand_mask(const AttributeMask& outer, const AttributeMask& inner);

// Per-class prototype matrix (classes x attributes); row y is the prototype
// vector of class_ids[y].
struct SemanticSpace {
    std::vector<std::string> class_ids;
    std::vector<std::string> attribute_names;
    Matrix matrix;

    int num_classes() const { return static_cast<int>(class_ids.size()); }
    int num_attributes() const { return static_cast<int>(attribute_names.size()); }
    std::unordered_map<std::string, int> row_index() const;
    void validate() const;
};

// Instance feature matrix (rows) with one class label per row.
struct VisualSet {
    Matrix features;
    std::vector<std::string> labels;

    int num_instances() const { return static_cast<int>(labels.size()); }
    int dim() const { return static_cast<int>(features.cols()); }
    void validate() const;
};

struct ClassSplit {
    std::vector<std::string> seen;
    std::vector<std::string> unseen;
};

struct ZslBundle {
    SemanticSpace semantics;
    VisualSet train;
    VisualSet test;
    ClassSplit split;

    void validate() const;
    // Seen classes in semantics file order (the Eq.-(7) ordering).
    std::vector<std::string> seen_in_file_order() const;
};

// Keeps exactly the columns where mask is true, in original order.
SemanticSpace restrict_attributes(const SemanticSpace& s, const AttributeMask& mask);

// Rescales each nonzero row to unit Euclidean norm; zero rows pass through.
Matrix normalize_rows(const Matrix& m);

}  // namespace semsel

#endif
