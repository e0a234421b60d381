#include "vertexcalc/sparse.hpp"

#include <algorithm>
#include <map>
#include <sstream>

#include "vertexcalc/errors.hpp"

namespace vertexcalc {

SparseVector::SparseVector(std::vector<Entry> entries) : ent_(std::move(entries)) {
    std::sort(ent_.begin(), ent_.end(),
              [](const Entry& a, const Entry& b) { return a.first < b.first; });
    // merge duplicates, drop zeros
    std::vector<Entry> out;
    out.reserve(ent_.size());
    for (auto& e : ent_) {
        if (!out.empty() && out.back().first == e.first)
            out.back().second += e.second;
        else
            out.push_back(std::move(e));
        if (!out.empty() && out.back().second.is_zero()) out.pop_back();
    }
    ent_ = std::move(out);
}

Rat SparseVector::get(int col) const {
    auto it = std::lower_bound(ent_.begin(), ent_.end(), col,
                               [](const Entry& e, int c) { return e.first < c; });
    if (it != ent_.end() && it->first == col) return it->second;
    return Rat(0);
}

int SparseVector::leading_col() const { return ent_.empty() ? -1 : ent_.front().first; }

Rat SparseVector::leading_val() const { return ent_.empty() ? Rat(0) : ent_.front().second; }

void SparseVector::axpy(const Rat& c, const SparseVector& v) {
    if (c.is_zero() || v.ent_.empty()) return;
    std::vector<Entry> out;
    out.reserve(ent_.size() + v.ent_.size());
    auto a = ent_.begin();
    auto b = v.ent_.begin();
    while (a != ent_.end() || b != v.ent_.end()) {
        if (b == v.ent_.end() || (a != ent_.end() && a->first < b->first)) {
            out.push_back(*a++);
        } else if (a == ent_.end() || b->first < a->first) {
            Rat val = c * b->second;
            if (!val.is_zero()) out.emplace_back(b->first, std::move(val));
            ++b;
        } else {
            Rat val = a->second + c * b->second;
            if (!val.is_zero()) out.emplace_back(a->first, std::move(val));
            ++a;
            ++b;
        }
    }
    ent_ = std::move(out);
}

void SparseVector::scale(const Rat& c) {
    if (c.is_zero()) {
        ent_.clear();
        return;
    }
    for (auto& e : ent_) e.second *= c;
}

void SparseVector::negate() {
    for (auto& e : ent_) e.second = -e.second;
}

std::string SparseVector::str() const {
    std::ostringstream os;
    os << "{";
    bool first = true;
    for (const auto& [c, v] : ent_) {
        if (!first) os << ", ";
        os << c << ": " << v;
        first = false;
    }
    os << "}";
    return os.str();
}

void VecBuilder::add(int col, const Rat& c) {
    if (!c.is_zero()) raw_.emplace_back(col, c);
}

void VecBuilder::add(const Rat& c, const SparseVector& v) {
    if (c.is_zero()) return;
    for (const auto& [col, val] : v.entries()) raw_.emplace_back(col, c * val);
}

SparseVector VecBuilder::take() {
    SparseVector v(std::move(raw_));
    raw_.clear();
    return v;
}

SparseMatrix::SparseMatrix(int cols, std::vector<SparseVector> r) : ncols(cols), rows(std::move(r)) {
    for (const auto& row : rows)
        if (!row.is_zero() && row.entries().back().first >= ncols)
            fail(ErrCode::Internal, "sparse row exceeds ncols");
}

SparseMatrix SparseMatrix::identity(int n) {
    SparseMatrix m(n);
    for (int i = 0; i < n; ++i) m.append(SparseVector::unit(i));
    return m;
}

void SparseMatrix::append(SparseVector row) {
    if (!row.is_zero() && row.entries().back().first >= ncols)
        fail(ErrCode::Internal, "sparse row exceeds ncols");
    rows.push_back(std::move(row));
}

RrefResult rref(const SparseMatrix& m) {
    RrefResult res;
    res.reduced.ncols = m.ncols;
    // Reduced rows so far, kept sorted by pivot column. Incremental insertion
    // preserves the deterministic leftmost-column / smallest-row-index order.
    std::map<int, SparseVector> by_pivot;
    for (const auto& r : m.rows) {
        SparseVector v = r;
        for (const auto& [p, row] : by_pivot) {
            Rat c = v.get(p);
            if (!c.is_zero()) v.axpy(-c, row);
        }
        if (v.is_zero()) continue;
        v.scale(v.leading_val().inverse());
        int pivot = v.leading_col();
        // back-substitute into existing rows
        for (auto& [p, row] : by_pivot) {
            Rat c = row.get(pivot);
            if (!c.is_zero()) row.axpy(-c, v);
        }
        by_pivot.emplace(pivot, std::move(v));
    }
    for (auto& [p, row] : by_pivot) {
        res.pivots.push_back(p);
        res.reduced.append(std::move(row));
    }
    res.rank = static_cast<int>(res.pivots.size());
    return res;
}

SparseVector reduce_by(const RrefResult& r, SparseVector v, std::vector<Rat>* coeffs) {
    if (coeffs) coeffs->assign(r.pivots.size(), Rat(0));
    // rref rows have mutually exclusive pivot columns, so a single pass works.
    for (std::size_t i = 0; i < r.pivots.size(); ++i) {
        Rat c = v.get(r.pivots[i]);
        if (c.is_zero()) continue;
        v.axpy(-c, r.reduced.rows[i]);
        if (coeffs) (*coeffs)[i] = c;
    }
    return v;
}

std::optional<SparseVector> solve(const SparseMatrix& m, const SparseVector& rhs) {
    // Augmented elimination: append the rhs as column ncols.
    SparseMatrix aug(m.ncols + 1);
    for (int i = 0; i < m.nrows(); ++i) {
        SparseVector row = m.rows[i];
        VecBuilder b;
        b.add(Rat(1), row);
        b.add(m.ncols, rhs.get(i));
        aug.append(b.take());
    }
    RrefResult r = rref(aug);
    // Inconsistent iff some reduced row pivots on the augmented column.
    for (std::size_t i = 0; i < r.pivots.size(); ++i)
        if (r.pivots[i] == m.ncols) return std::nullopt;
    // Each reduced row reads x[pivot] + (free terms) = c with free vars 0.
    VecBuilder x;
    for (std::size_t i = 0; i < r.pivots.size(); ++i)
        x.add(r.pivots[i], r.reduced.rows[i].get(m.ncols));
    return x.take();
}

QuotientMap::QuotientMap(const SparseMatrix& span, const SparseMatrix& relations) {
    RrefResult span_r = rref(span);
    relations_ = rref(relations);
    for (const auto& row : relations_.reduced.rows) {
        if (!reduce_by(span_r, row).is_zero())
            fail(ErrCode::RelationNotInSpan, "relation row " + row.str() + " not in span");
    }
    // Complement basis: span basis reduced mod relations, re-echelonized.
    SparseMatrix comp(span.ncols);
    for (const auto& row : span_r.reduced.rows) comp.append(reduce_by(relations_, row));
    cosets_ = rref(comp);
    coset_cols_ = cosets_.pivots;
}

SparseVector QuotientMap::project(const SparseVector& v) const {
    SparseVector w = reduce_by(relations_, v);
    std::vector<Rat> coeffs;
    SparseVector rem = reduce_by(cosets_, std::move(w), &coeffs);
    if (!rem.is_zero())
        fail(ErrCode::VectorNotInSpan, "vector " + v.str() + " not in span");
    VecBuilder b;
    for (std::size_t i = 0; i < coeffs.size(); ++i) b.add(static_cast<int>(i), coeffs[i]);
    return b.take();
}

const SparseVector& QuotientMap::include(int i) const { return cosets_.reduced.rows.at(i); }

const char* err_code_name(ErrCode c) {
    switch (c) {
        case ErrCode::RelationNotInSpan: return "RelationNotInSpan";
        case ErrCode::VectorNotInSpan: return "VectorNotInSpan";
        case ErrCode::InsufficientWindow: return "InsufficientWindow";
        case ErrCode::IllDefinedProduct: return "IllDefinedProduct";
        case ErrCode::MixedWeight: return "MixedWeight";
        case ErrCode::WitnessCapExceeded: return "WitnessCapExceeded";
        case ErrCode::NonUniformWitness: return "NonUniformWitness";
        case ErrCode::ObstructionFound: return "ObstructionFound";
        case ErrCode::NotCommutative: return "NotCommutative";
        case ErrCode::NotAssociative: return "NotAssociative";
        case ErrCode::NotUnital: return "NotUnital";
        case ErrCode::NotDerivation: return "NotDerivation";
        case ErrCode::GradingMismatch: return "GradingMismatch";
        case ErrCode::UnsoundData: return "UnsoundData";
        case ErrCode::Schema: return "Schema";
        case ErrCode::Parse: return "Parse";
        case ErrCode::Internal: return "Internal";
    }
    return "Unknown";
}

}  // namespace vertexcalc
