#include "vertexcalc/graded.hpp"

#include "vertexcalc/errors.hpp"

namespace vertexcalc {

GradedSpace::GradedSpace(std::string label, std::vector<std::vector<std::string>> basis_by_degree,
                         bool complete)
    : label_(std::move(label)), basis_(std::move(basis_by_degree)), complete_(complete) {
    for (int d = 0; d < static_cast<int>(basis_.size()); ++d) {
        for (const auto& name : basis_[d]) {
            if (index_.count(name))
                fail(ErrCode::Schema, "duplicate basis label '" + name + "' in space " + label_);
            index_[name] = static_cast<int>(names_.size());
            names_.push_back(name);
            degree_of_.push_back(d);
        }
    }
}

int GradedSpace::find(const std::string& name) const {
    auto it = index_.find(name);
    return it == index_.end() ? -1 : it->second;
}

int GradedSpace::index_of(const std::string& name) const {
    int i = find(name);
    if (i < 0) fail(ErrCode::Schema, "unknown basis label '" + name + "' in space " + label_);
    return i;
}

std::vector<int> GradedSpace::degree_indices(int degree) const {
    std::vector<int> out;
    for (int i = 0; i < dim(); ++i)
        if (degree_of_[i] == degree) out.push_back(i);
    return out;
}

int GradedSpace::homogeneous_degree(const SparseVector& v) const {
    int deg = -1;
    for (const auto& [i, c] : v.entries()) {
        int d = degree_of(i);
        if (deg == -1) deg = d;
        else if (deg != d)
            fail(ErrCode::GradingMismatch,
                 "vector " + v.str() + " mixes degrees in space " + label_);
    }
    return deg;
}

SparseVector apply_table(const LinearTable& t, const SparseVector& v) {
    VecBuilder b;
    for (const auto& [i, c] : v.entries()) {
        auto it = t.find(i);
        if (it != t.end()) b.add(c, it->second);
    }
    return b.take();
}

}  // namespace vertexcalc
