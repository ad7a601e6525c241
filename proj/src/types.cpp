#include "semsel/types.hpp"

#include <set>
#include <unordered_set>

#include "semsel/errors.hpp"

namespace semsel {

std::size_t AttributeMask::popcount() const {
    std::size_t c = 0;
    for (auto b : bits) c += b ? 1 : 0;
    return c;
}

std::vector<int> AttributeMask::indices() const {
    std::vector<int> idx;
    idx.reserve(bits.size());
    for (std::size_t i = 0; i < bits.size(); ++i)
        if (bits[i]) idx.push_back(static_cast<int>(i));
    return idx;
}

std::string AttributeMask::key() const {
    std::string k(bits.size(), '0');
    for (std::size_t i = 0; i < bits.size(); ++i)
        if (bits[i]) k[i] = '1';
    return k;
}

AttributeMask AttributeMask::ones(std::size_t n) {
    return AttributeMask{std::vector<std::uint8_t>(n, 1)};
}

AttributeMask AttributeMask::zeros(std::size_t n) {
    return AttributeMask{std::vector<std::uint8_t>(n, 0)};
}

AttributeMask AttributeMask::from_indices(std::size_t n, const std::vector<int>& idx) {
    AttributeMask m = zeros(n);
    for (int i : idx) {
        if (i < 0 || static_cast<std::size_t>(i) >= n)
            throw DataError("IndexOutOfRange", "mask index " + std::to_string(i) +
                                                   " out of [0," + std::to_string(n) + ")");
        m.bits[static_cast<std::size_t>(i)] = 1;
    }
    return m;
}

AttributeMask expand_mask(const AttributeMask& outer, const AttributeMask& inner) {
    if (inner.size() != outer.popcount())
        throw DataError("LengthMismatch",
                        "inner mask length " + std::to_string(inner.size()) +
                            " != selected count " + std::to_string(outer.popcount()));
    AttributeMask out = AttributeMask::zeros(outer.size());
    std::size_t j = 0;
    for (std::size_t i = 0; i < outer.size(); ++i) {
        if (outer.bits[i]) {
            out.bits[i] = inner.bits[j];
            ++j;
        }
    }
    return out;
}

std::unordered_map<std::string, int> SemanticSpace::row_index() const {
    std::unordered_map<std::string, int> idx;
    idx.reserve(class_ids.size());
    for (std::size_t i = 0; i < class_ids.size(); ++i)
        idx.emplace(class_ids[i], static_cast<int>(i));
    return idx;
}

void SemanticSpace::validate() const {
    if (attribute_names.empty())
        throw DataError("DimensionMismatch", "semantic space has no attributes");
    if (static_cast<Eigen::Index>(class_ids.size()) != matrix.rows())
        throw DataError("DimensionMismatch",
                        "class id count " + std::to_string(class_ids.size()) +
                            " != prototype row count " + std::to_string(matrix.rows()));
    if (static_cast<Eigen::Index>(attribute_names.size()) != matrix.cols())
        throw DataError("DimensionMismatch",
                        "attribute name count " + std::to_string(attribute_names.size()) +
                            " != prototype column count " + std::to_string(matrix.cols()));
    std::unordered_set<std::string> seen;
    for (const auto& id : class_ids)
        if (!seen.insert(id).second)
            throw DataError("DuplicateClassId", "class id '" + id + "' appears twice");
    if (!matrix.allFinite())
        throw DataError("NonFiniteValue", "semantic prototype matrix has a non-finite entry");
    int zero_rows = 0;
    for (Eigen::Index r = 0; r < matrix.rows(); ++r)
        if (matrix.row(r).norm() == 0.0) ++zero_rows;
    if (zero_rows > 0)
        warn(std::to_string(zero_rows) +
             " all-zero prototype row(s); cosine distance to them is defined as 1");
}

void VisualSet::validate() const {
    if (features.rows() < 1 || features.cols() < 1)
        throw DataError("DimensionMismatch", "visual set must be at least 1x1");
    if (static_cast<Eigen::Index>(labels.size()) != features.rows())
        throw DataError("DimensionMismatch",
                        "label count " + std::to_string(labels.size()) +
                            " != feature row count " + std::to_string(features.rows()));
    if (!features.allFinite())
        throw DataError("NonFiniteValue", "visual feature matrix has a non-finite entry");
}

void ZslBundle::validate() const {
    semantics.validate();
    train.validate();
    test.validate();
    if (train.dim() != test.dim())
        throw DataError("DimensionMismatch",
                        "train feature dim " + std::to_string(train.dim()) +
                            " != test feature dim " + std::to_string(test.dim()));
    if (split.seen.empty() || split.unseen.empty())
        throw DataError("DimensionMismatch", "split must have non-empty seen and unseen sets");

    const auto rows = semantics.row_index();
    std::unordered_set<std::string> seen_set, unseen_set;
    for (const auto& id : split.seen) {
        if (!rows.count(id))
            throw DataError("UnknownLabel", "seen class '" + id + "' not in semantics");
        if (!seen_set.insert(id).second)
            throw DataError("DuplicateClassId", "seen class '" + id + "' appears twice");
    }
    for (const auto& id : split.unseen) {
        if (!rows.count(id))
            throw DataError("UnknownLabel", "unseen class '" + id + "' not in semantics");
        if (!unseen_set.insert(id).second)
            throw DataError("DuplicateClassId", "unseen class '" + id + "' appears twice");
        if (seen_set.count(id))
            throw DataError("DuplicateClassId",
                            "class '" + id + "' is both seen and unseen");
    }
    for (const auto& l : train.labels) {
        if (!rows.count(l))
            throw DataError("UnknownLabel", "train label '" + l + "' not in semantics");
        if (!seen_set.count(l))
            throw DataError("UnknownLabel", "train label '" + l + "' is not a seen class");
    }
    for (const auto& l : test.labels) {
        if (!rows.count(l))
            throw DataError("UnknownLabel", "test label '" + l + "' not in semantics");
        if (!unseen_set.count(l))
            throw DataError("UnknownLabel", "test label '" + l + "' is not an unseen class");
    }
}

std::vector<std::string> ZslBundle::seen_in_file_order() const {
    std::unordered_set<std::string> seen_set(split.seen.begin(), split.seen.end());
    std::vector<std::string> out;
    out.reserve(split.seen.size());
    for (const auto& id : semantics.class_ids)
        if (seen_set.count(id)) out.push_back(id);
    return out;
}

SemanticSpace restrict_attributes(const SemanticSpace& s, const AttributeMask& mask) {
    if (mask.size() != static_cast<std::size_t>(s.num_attributes()))
        throw DataError("LengthMismatch",
                        "mask length " + std::to_string(mask.size()) + " != attribute count " +
                            std::to_string(s.num_attributes()));
    const auto idx = mask.indices();
    if (idx.empty()) throw DataError("EmptyMask", "cannot restrict to zero attributes");

    SemanticSpace out;
    out.class_ids = s.class_ids;
    out.attribute_names.reserve(idx.size());
    out.matrix.resize(s.matrix.rows(), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t j = 0; j < idx.size(); ++j) {
        out.attribute_names.push_back(s.attribute_names[static_cast<std::size_t>(idx[j])]);
        out.matrix.col(static_cast<Eigen::Index>(j)) = s.matrix.col(idx[j]);
    }
    return out;
}

Matrix normalize_rows(const Matrix& m) {
    Matrix out = m;
    for (Eigen::Index r = 0; r < out.rows(); ++r) {
        const double n = out.row(r).norm();
        if (n > 0.0) out.row(r) /= n;
    }
    return out;
}

}  // namespace semsel
