#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "vertexcalc/graded.hpp"
#include "vertexcalc/rational.hpp"
#include "vertexcalc/sparse.hpp"

namespace vertexcalc {

// ---------------------------------------------------------------------------
// Variables and exponent windows

/// Interned formal variable. Distinct names are distinct variables.
class Var {
  public:
    Var() : id_(-1) {}  // invalid until assigned
    static Var intern(const std::string& name);
    const std::string& name() const;
    int id() const { return id_; }
    friend bool operator==(Var a, Var b) { return a.id_ == b.id_; }
    friend bool operator!=(Var a, Var b) { return a.id_ != b.id_; }
    friend bool operator<(Var a, Var b) { return a.id_ < b.id_; }

  private:
    explicit Var(int id) : id_(id) {}
    int id_;
};

/// Saturating bound used for support intervals; +-kInf stand for unbounded.
inline constexpr long kInf = 1L << 58;
long sat_add(long a, long b);

struct Interval {
    long lo = 0, hi = -1;  // empty when lo > hi
    bool empty() const { return lo > hi; }
    bool contains(long x) const { return lo <= x && x <= hi; }
    static Interval all() { return {-kInf, kInf}; }
    static Interval at(long x) { return {x, x}; }
    Interval intersect(const Interval& o) const { return {std::max(lo, o.lo), std::min(hi, o.hi)}; }
    Interval hull(const Interval& o) const {
        if (empty()) return o;
        if (o.empty()) return *this;
        return {std::min(lo, o.lo), std::max(hi, o.hi)};
    }
    Interval plus(const Interval& o) const { return {sat_add(lo, o.lo), sat_add(hi, o.hi)}; }
    friend bool operator==(const Interval&, const Interval&) = default;
};

/// Finite per-variable exponent box.
class ExpWindow {
  public:
    ExpWindow() = default;
    ExpWindow& set(Var v, long lo, long hi);
    ExpWindow& set(Var v, Interval iv);
    /// Symmetric box [-r, r] on each listed variable.
    static ExpWindow cube(std::initializer_list<Var> vars, long r);

    bool has(Var v) const;
    Interval get(Var v) const;  // throws when absent
    const std::vector<std::pair<Var, Interval>>& entries() const { return ent_; }
    std::string str() const;

  private:
    std::vector<std::pair<Var, Interval>> ent_;  // sorted by Var
};

// ---------------------------------------------------------------------------
// Coefficients and windows

/// Operator-valued coefficient: sparse columns source index -> image vector.
struct OpCoeff {
    std::map<int, SparseVector> cols;
    bool is_zero() const { return cols.empty(); }
    void normalize();
    friend bool operator==(const OpCoeff&, const OpCoeff&) = default;
};

using Coeff = std::variant<Rat, SparseVector, OpCoeff>;

bool coeff_is_zero(const Coeff& c);
void coeff_accumulate(Coeff& into, const Rat& scale, const Coeff& c);
std::string coeff_str(const Coeff& c);

/// What a coefficient space is: plain rationals, vectors of a graded space,
/// or linear maps between two graded spaces.
struct SpaceSig {
    enum class Kind { Scalar, Vec, Op };
    Kind kind = Kind::Scalar;
    const GradedSpace* src = nullptr;  // Op
    const GradedSpace* dst = nullptr;  // Vec, Op

    static SpaceSig scalar() { return {}; }
    static SpaceSig vec(const GradedSpace* s) { return {Kind::Vec, nullptr, s}; }
    static SpaceSig op(const GradedSpace* from, const GradedSpace* to) {
        return {Kind::Op, from, to};
    }
    friend bool operator==(const SpaceSig&, const SpaceSig&) = default;
    std::string str() const;
};

/// Status of coefficients beyond a window edge in one variable direction.
enum class Edge {
    Zero,     // known to vanish beyond the box
    Dense,    // well defined beyond the box, just not computed/stored
    Unsound,  // untracked: nothing is claimed beyond the box
};

/// Homogeneity bookkeeping. Every window produced from graded tables is
/// weight-homogeneous: the semantic weight of the coefficient at exponent
/// tuple t is offset + sum(t) (degree for vectors, degree shift for
/// operators, 0 for scalars). `zero` bounds the true weight support;
/// weights above `sound_hi` are untracked truncation territory.
struct WeightInfo {
    long offset = 0;
    Interval zero = Interval::all();
    long sound_hi = kInf;
    friend bool operator==(const WeightInfo&, const WeightInfo&) = default;
};

using Tuple = std::vector<long>;  // parallel to a window's variable list

/// Exact coefficients of a multivariate formal distribution on a finite
/// exponent box, with validity flags describing everything off the box.
///
/// Invariants: stored tuples lie inside the box; stored coefficients are
/// nonzero; when weight is present, stored tuples satisfy
/// offset + sum(t) <= sound_hi (unsound coefficients are never stored).
struct CoeffWindow {
    std::vector<Var> vars;  // sorted
    std::vector<Interval> box;
    std::vector<std::pair<Edge, Edge>> edges;  // (below, above) per var
    std::optional<WeightInfo> weight;
    SpaceSig sig;
    std::map<Tuple, Coeff> coeffs;

    int axis_of(Var v) const;  // -1 when absent
    bool in_box(const Tuple& t) const;
    long weight_of(const Tuple& t) const;  // offset + sum(t); requires weight
    bool sound_at(const Tuple& t) const;

    void add(const Tuple& t, const Rat& scale, const Coeff& c);
    const Coeff* get(const Tuple& t) const;  // nullptr when zero/absent
    bool all_zero() const { return coeffs.empty(); }

    void validate() const;  // checks the structural invariants
    std::string str() const;
};

// ---------------------------------------------------------------------------
// Expressions

/// A variable with a sign, and a signed one- or two-variable binomial
/// argument. Order matters for two variables: (u+v)^n expands in nonnegative
/// powers of the SECOND variable.
struct SignedVar {
    Var v;
    int sign = 1;  // +1 or -1
};

struct ExpArg {
    SignedVar first;
    std::optional<SignedVar> second;

    static ExpArg single(Var v, int sign = 1) { return {{v, sign}, std::nullopt}; }
    static ExpArg pair(Var a, int sa, Var b, int sb) {
        return {{a, sa}, SignedVar{b, sb}};
    }
    /// "u+v" order: expand in nonnegative powers of v.
    static ExpArg plus(Var a, Var b) { return pair(a, 1, b, 1); }
    /// "u-v" order: expand in nonnegative powers of v with alternating signs.
    static ExpArg minus(Var a, Var b) { return pair(a, 1, b, -1); }
    std::string str() const;
};

struct DistExpr;
using ExprPtr = std::shared_ptr<const DistExpr>;

/// Expression tree over coefficient windows. Immutable; share freely.
struct DistExpr {
    enum class Kind { Atom, Sum, Scale, Product, BinomPow, Delta, Residue, Derivative, Shift };

    Kind kind;
    CoeffWindow window;          // Atom
    std::vector<ExprPtr> kids;   // Sum: n, Scale/Residue/Derivative/Shift: 1, Product: 2
    Rat factor;                  // Scale
    ExpArg arg;                  // BinomPow / Delta / Shift target
    long power = 0;              // BinomPow
    Var var;                     // Delta second arg, Residue/Derivative var, Shift source

    DistExpr(Kind k, Var v) : kind(k), var(v) {}
    std::string str() const;
};

ExprPtr atom(CoeffWindow w);
ExprPtr sum(std::vector<ExprPtr> kids);
ExprPtr sum(ExprPtr a, ExprPtr b);
ExprPtr sub(ExprPtr a, ExprPtr b);
ExprPtr scale(Rat c, ExprPtr e);
ExprPtr prod(ExprPtr a, ExprPtr b);
ExprPtr binom_pow(ExpArg arg, long n);
ExprPtr delta(ExpArg arg, Var second);
ExprPtr residue(ExprPtr e, Var v);
ExprPtr deriv(ExprPtr e, Var v);
/// Substitutes src by the signed sum `target`, expanding negative powers in
/// nonnegative powers of target.second.
ExprPtr shift(ExprPtr e, Var src, ExpArg target);

// ---------------------------------------------------------------------------
// Evaluation

/// Exact generalized binomial coefficient binom(n, k) = n(n-1)...(n-k+1)/k!
/// for any integer n and k >= 0.
Rat binom_coeff(long n, long k);

/// Exact coefficients of `expr` on the requested box. The required input
/// widths are derived bottom-up from the support shapes of the subtrees;
/// ErrCode::InsufficientWindow signals an atom that cannot soundly supply a
/// needed region, ErrCode::IllDefinedProduct a convolution with infinitely
/// many contributing splittings.
CoeffWindow evaluate(const ExprPtr& expr, const ExpWindow& request);

/// Coefficients of (u+-v)^n (or a single signed variable power) on a window.
CoeffWindow binom_window(const ExpArg& arg, long n, const ExpWindow& request);

/// Coefficients of delta(arg, second) on a window.
CoeffWindow delta_window(const ExpArg& arg, Var second, const ExpWindow& request);

/// True support bounds of the expression in one variable (for sizing
/// requests). Bounds may be +-kInf.
Interval support_of(const ExprPtr& expr, Var v);

struct IdentityVerdict {
    bool equal = true;
    bool clipped = false;        // some requested tuples were excluded as unsound
    long compared = 0;           // number of jointly sound tuples compared
    std::optional<Tuple> mismatch;
    std::vector<Var> vars;       // variable order for the mismatch tuple
    std::string lhs_val, rhs_val;
    std::string str() const;
};

/// Coefficientwise comparison of two expressions on the jointly sound part
/// of the requested window.
IdentityVerdict check_identity(const ExprPtr& lhs, const ExprPtr& rhs, const ExpWindow& request);

/// Comparison of two evaluated windows (same contract as check_identity).
IdentityVerdict compare_windows(const CoeffWindow& l, const CoeffWindow& r,
                                const ExpWindow& request);

}  // namespace vertexcalc
