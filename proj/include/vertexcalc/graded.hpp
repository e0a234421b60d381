#pragma once

#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "vertexcalc/sparse.hpp"

namespace vertexcalc {

/// Z+-graded space with named basis labels per degree. Flat indices enumerate
/// the basis degree by degree.
///
/// `complete` records whether the listed degrees are all there are (finite
/// holomorphic examples) or a truncation of an infinite graded space (free
/// boson at a weight cutoff). Downstream soundness tracking depends on it.
class GradedSpace {
  public:
    GradedSpace() = default;
    GradedSpace(std::string label, std::vector<std::vector<std::string>> basis_by_degree,
                bool complete);

    const std::string& label() const { return label_; }
    bool complete() const { return complete_; }
    int max_degree() const { return static_cast<int>(basis_.size()) - 1; }
    int dim() const { return static_cast<int>(degree_of_.size()); }
    int degree_of(int flat) const { return degree_of_.at(flat); }
    const std::string& name_of(int flat) const { return names_.at(flat); }
    const std::vector<std::vector<std::string>>& basis_by_degree() const { return basis_; }

    /// Flat index for a label; -1 when absent.
    int find(const std::string& name) const;
    int index_of(const std::string& name) const;  // throws Schema when absent

    /// Flat indices of all basis vectors in one degree (empty when out of range).
    std::vector<int> degree_indices(int degree) const;

    /// Degree of a homogeneous vector; -1 for the zero vector. Throws
    /// GradingMismatch when entries mix degrees.
    int homogeneous_degree(const SparseVector& v) const;

  private:
    std::string label_;
    std::vector<std::vector<std::string>> basis_;
    std::vector<int> degree_of_;
    std::vector<std::string> names_;
    std::unordered_map<std::string, int> index_;
    bool complete_ = true;
};

/// Degree-respecting linear map table: flat index -> image vector.
using LinearTable = std::map<int, SparseVector>;

/// Applies a linear table to a vector.
SparseVector apply_table(const LinearTable& t, const SparseVector& v);

}  // namespace vertexcalc
