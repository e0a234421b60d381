#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "vertexcalc/rational.hpp"

namespace vertexcalc {

/// Sparse vector over Q: entries sorted by strictly increasing column index,
/// no stored zeros.
class SparseVector {
  public:
    using Entry = std::pair<int, Rat>;

    SparseVector() = default;
    static SparseVector unit(int col) { return SparseVector({{col, Rat(1)}}); }
    explicit SparseVector(std::vector<Entry> entries);

    bool is_zero() const { return ent_.empty(); }
    std::size_t nnz() const { return ent_.size(); }
    const std::vector<Entry>& entries() const { return ent_; }

    Rat get(int col) const;
    int leading_col() const;  // -1 when zero
    Rat leading_val() const;

    /// Accumulates c * v (entrywise merge, zeros dropped).
    void axpy(const Rat& c, const SparseVector& v);
    void scale(const Rat& c);
    void negate();

    SparseVector& operator+=(const SparseVector& o) { axpy(Rat(1), o); return *this; }
    SparseVector& operator-=(const SparseVector& o) { axpy(Rat(-1), o); return *this; }
    friend SparseVector operator+(SparseVector a, const SparseVector& b) { return a += b; }
    friend SparseVector operator-(SparseVector a, const SparseVector& b) { return a -= b; }
    friend SparseVector operator*(const Rat& c, SparseVector v) { v.scale(c); return v; }

    friend bool operator==(const SparseVector& a, const SparseVector& b) {
        return a.ent_ == b.ent_;
    }

    /// Remaps column indices; f must be injective on the support.
    template <class F>
    SparseVector remapped(F&& f) const {
        std::vector<Entry> out;
        out.reserve(ent_.size());
        for (const auto& [c, v] : ent_) out.emplace_back(f(c), v);
        return SparseVector(std::move(out));
    }

    std::string str() const;

  private:
    std::vector<Entry> ent_;
};

/// A builder for accumulating into random columns before normalizing.
class VecBuilder {
  public:
    void add(int col, const Rat& c);
    void add(const Rat& c, const SparseVector& v);
    SparseVector take();

  private:
    std::vector<SparseVector::Entry> raw_;
};

/// Row-major sparse matrix; every column index < ncols.
struct SparseMatrix {
    int ncols = 0;
    std::vector<SparseVector> rows;

    SparseMatrix() = default;
    explicit SparseMatrix(int cols) : ncols(cols) {}
    SparseMatrix(int cols, std::vector<SparseVector> r);

    static SparseMatrix identity(int n);

    void append(SparseVector row);
    int nrows() const { return static_cast<int>(rows.size()); }
};

struct RrefResult {
    int rank = 0;
    SparseMatrix reduced;       // nonzero rows only, sorted by pivot column
    std::vector<int> pivots;    // pivot column per reduced row
};

/// Reduced row echelon form with deterministic pivoting: leftmost column
/// first, then smallest row index. Exact arithmetic throughout.
RrefResult rref(const SparseMatrix& m);

/// Reduces v against reduced rref rows. Returns the remainder; when coeffs is
/// non-null, records the coefficient taken from each row.
SparseVector reduce_by(const RrefResult& r, SparseVector v, std::vector<Rat>* coeffs = nullptr);

/// One exact solution of m x = rhs (free variables set to 0), or nullopt.
std::optional<SparseVector> solve(const SparseMatrix& m, const SparseVector& rhs);

/// Linear data for a quotient span/relations as used by every graded-quotient
/// construction: coset representatives and the exact projection map.
class QuotientMap {
  public:
    /// pre: every relation row lies in the row space of span (else
    /// ErrCode::RelationNotInSpan).
    QuotientMap(const SparseMatrix& span, const SparseMatrix& relations);

    int dim() const { return static_cast<int>(coset_cols_.size()); }
    const std::vector<int>& coset_columns() const { return coset_cols_; }

    /// Coordinates of [v] in the coset basis. pre: v in the span row space
    /// (else ErrCode::VectorNotInSpan).
    SparseVector project(const SparseVector& v) const;

    /// Ambient representative of the i-th coset basis vector.
    const SparseVector& include(int i) const;

    int relation_rank() const { return relations_.rank; }

  private:
    RrefResult relations_;       // rref of the relation space
    RrefResult cosets_;          // rref basis of a complement inside the span
    std::vector<int> coset_cols_;
};

}  // namespace vertexcalc
