#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "vertexcalc/errors.hpp"
#include "vertexcalc/formal.hpp"

using namespace vertexcalc;

namespace {

const Var X = Var::intern("x");
const Var Y = Var::intern("y");
const Var Z = Var::intern("z");
const Var W = Var::intern("w");

// Scalar Laurent polynomial atom in one variable: list of (exponent, value).
ExprPtr poly_atom(Var v, std::initializer_list<std::pair<long, long>> terms) {
    CoeffWindow w;
    w.vars = {v};
    long lo = 0, hi = 0;
    bool first = true;
    for (auto [e, c] : terms) {
        lo = first ? e : std::min(lo, e);
        hi = first ? e : std::max(hi, e);
        first = false;
    }
    w.box = {Interval{lo, hi}};
    w.edges = {{Edge::Zero, Edge::Zero}};
    w.sig = SpaceSig::scalar();
    for (auto [e, c] : terms) w.add({e}, Rat(1), Rat(c));
    return atom(w);
}

Rat window_at(const CoeffWindow& w, const Tuple& t) {
    const Coeff* c = w.get(t);
    return c ? std::get<Rat>(*c) : Rat(0);
}

}  // namespace

TEST_CASE("generalized binomial coefficients") {
    CHECK(binom_coeff(3, 2) == Rat(3));
    CHECK(binom_coeff(-2, 3) == Rat(-4));  // (-2)(-3)(-4)/6
    for (long k = 0; k <= 8; ++k) {
        // product formula oracle for n = -1
        Rat prod(1);
        for (long i = 0; i < k; ++i) prod *= Rat(-1 - i);
        prod /= factorial(static_cast<unsigned>(k));
        CHECK(binom_coeff(-1, k) == prod);
        CHECK(binom_coeff(-1, k) == ((k % 2 == 0) ? Rat(1) : Rat(-1)));
    }
    CHECK(binom_coeff(4, 7) == Rat(0));
}

TEST_CASE("binom_window polynomial case (x+y)^2") {
    auto w = binom_window(ExpArg::plus(X, Y), 2, ExpWindow().set(X, -3, 3).set(Y, -3, 3));
    CHECK(window_at(w, {2, 0}) == Rat(1));
    CHECK(window_at(w, {1, 1}) == Rat(2));
    CHECK(window_at(w, {0, 2}) == Rat(1));
    CHECK(w.coeffs.size() == 3);
    // all four directions terminate for a polynomial
    for (auto [below, above] : w.edges) {
        CHECK(below == Edge::Zero);
        CHECK(above == Edge::Zero);
    }
}

TEST_CASE("binom_window (x-y)^{-1} has all coefficients 1") {
    auto w = binom_window(ExpArg::minus(X, Y), -1, ExpWindow().set(X, -6, 0).set(Y, 0, 5));
    for (long k = 0; k <= 5; ++k) CHECK(window_at(w, {-1 - k, k}) == Rat(1));
}

TEST_CASE("binom_window (z+w)^{-2} matches the product formula") {
    auto w = binom_window(ExpArg::plus(Z, W), -2, ExpWindow().set(Z, -8, 0).set(W, 0, 6));
    int az = w.axis_of(Z) >= 0 ? w.axis_of(Z) : 0;
    for (long k = 0; k <= 6; ++k) {
        Tuple t(2, 0);
        t[w.axis_of(Z)] = -2 - k;
        t[w.axis_of(W)] = k;
        CHECK(window_at(w, t) == binom_coeff(-2, k));
    }
    (void)az;
}

TEST_CASE("convention consistency: (u+v)^n equals the n-fold product of (u+v)^1") {
    ExpWindow req = ExpWindow().set(X, -1, 5).set(Y, -1, 5);
    for (long n = 1; n <= 4; ++n) {
        ExprPtr p = binom_pow(ExpArg::plus(X, Y), 1);
        for (long i = 1; i < n; ++i) p = prod(p, binom_pow(ExpArg::plus(X, Y), 1));
        auto v = check_identity(p, binom_pow(ExpArg::plus(X, Y), n), req);
        CHECK(v.equal);
    }
}

TEST_CASE("telescoping: (u+v)^n (u+v)^m = (u+v)^{n+m} when one exponent is nonnegative") {
    ExpWindow req = ExpWindow().set(X, -6, 2).set(Y, 0, 6);
    for (auto [n, m] : std::vector<std::pair<long, long>>{{-2, 3}, {-1, 1}, {2, 2}, {-3, 2}}) {
        auto lhs = prod(binom_pow(ExpArg::plus(X, Y), n), binom_pow(ExpArg::plus(X, Y), m));
        auto rhs = binom_pow(ExpArg::plus(X, Y), n + m);
        auto v = check_identity(lhs, rhs, req);
        INFO("n=", n, " m=", m, " -> ", v.str());
        CHECK(v.equal);
    }
}

TEST_CASE("delta window by definition") {
    auto w = delta_window(ExpArg::single(X), Y, ExpWindow().set(X, -2, 2).set(Y, -2, 2));
    // entries x^n y^{-n-1}
    for (long n = -2; n <= 1; ++n) {
        Tuple t(2, 0);
        t[w.axis_of(X)] = n;
        t[w.axis_of(Y)] = -n - 1;
        CHECK(window_at(w, t) == Rat(1));
    }
    CHECK(w.coeffs.size() == 4);
}

TEST_CASE("delta with composite argument: delta(x-y,z) coefficient of x^{1-k} y^k z^{-2}") {
    auto w = delta_window(ExpArg::minus(X, Y), Z,
                          ExpWindow().set(X, -3, 3).set(Y, 0, 3).set(Z, -2, -2));
    for (long k = 0; k <= 2; ++k) {
        Tuple t(3, 0);
        t[w.axis_of(X)] = 1 - k;
        t[w.axis_of(Y)] = k;
        t[w.axis_of(Z)] = -2;
        Rat expect = binom_coeff(1, k) * ((k % 2 == 0) ? Rat(1) : Rat(-1));
        CHECK(window_at(w, t) == expect);
    }
}

TEST_CASE("delta substitution: Res_x(delta(x,y) x^3) = y^3") {
    auto e = residue(prod(delta(ExpArg::single(X), Y), poly_atom(X, {{3, 1}})), X);
    auto w = evaluate(e, ExpWindow().set(Y, -5, 5));
    CHECK(window_at(w, {3}) == Rat(1));
    CHECK(w.coeffs.size() == 1);
}

TEST_CASE("delta substitution property for random Laurent polynomials") {
    std::mt19937 rng(2024);
    std::uniform_int_distribution<long> exp(-4, 4);
    std::uniform_int_distribution<long> val(-5, 5);
    for (int trial = 0; trial < 25; ++trial) {
        std::vector<std::pair<long, long>> terms;
        for (int i = 0; i < 4; ++i) terms.push_back({exp(rng), val(rng)});
        auto a_of_x = poly_atom(X, {terms[0], terms[1], terms[2], terms[3]});
        auto a_of_y = poly_atom(Y, {terms[0], terms[1], terms[2], terms[3]});
        auto lhs = residue(prod(delta(ExpArg::single(X), Y), a_of_x), X);
        auto v = check_identity(lhs, a_of_y, ExpWindow().set(Y, -6, 6));
        CHECK(v.equal);
    }
}

TEST_CASE("residue and derivative basics") {
    // residue(x^{-1}) = 1
    auto w = evaluate(residue(poly_atom(X, {{-1, 1}}), X), ExpWindow());
    CHECK(window_at(w, {}) == Rat(1));
    // deriv(x^n) = n x^{n-1}
    for (long n : {-3L, 0L, 2L, 5L}) {
        auto d = evaluate(deriv(poly_atom(X, {{n, 1}}), X), ExpWindow().set(X, -8, 8));
        if (n == 0) CHECK(d.coeffs.empty());
        else CHECK(window_at(d, {n - 1}) == Rat(n));
    }
}

TEST_CASE("Res_x of a derivative vanishes") {
    auto e = poly_atom(X, {{-3, 2}, {-1, 5}, {0, 1}, {4, -7}});
    auto w = evaluate(residue(deriv(e, X), X), ExpWindow());
    CHECK(w.coeffs.empty());
    // also through a product with a delta in another variable
    auto e2 = prod(delta(ExpArg::single(X), Y), poly_atom(X, {{2, 3}}));
    auto w2 = evaluate(residue(deriv(e2, X), X), ExpWindow().set(Y, -6, 6));
    CHECK(w2.coeffs.empty());
}

TEST_CASE("evaluate(Sum(A, -A)) is the zero window") {
    auto a = poly_atom(X, {{-2, 3}, {1, 4}});
    auto w = evaluate(sum(a, scale(Rat(-1), a)), ExpWindow().set(X, -4, 4));
    CHECK(w.coeffs.empty());
}

TEST_CASE("evaluate is linear in sum branches") {
    std::mt19937 rng(7);
    std::uniform_int_distribution<long> val(-5, 5);
    for (int trial = 0; trial < 20; ++trial) {
        auto a = poly_atom(X, {{val(rng), val(rng)}, {val(rng), val(rng)}});
        auto b = poly_atom(X, {{val(rng), val(rng)}, {val(rng), val(rng)}});
        Rat c(val(rng));
        ExpWindow req = ExpWindow().set(X, -6, 6);
        auto l = evaluate(scale(c, sum(a, b)), req);
        auto r = evaluate(sum(scale(c, a), scale(c, b)), req);
        CHECK(compare_windows(l, r, req).equal);
    }
}

TEST_CASE("delta(x,y) and delta(y,x) are different expansions") {
    auto v = check_identity(delta(ExpArg::single(X), Y), delta(ExpArg::single(Y), X),
                            ExpWindow().set(X, -2, 2).set(Y, -2, 2));
    CHECK_FALSE(v.equal);
}

TEST_CASE("substitution via shift: p(x) -> p(z+w)") {
    // x^{-1} -> (z+w)^{-1}
    auto e = shift(poly_atom(X, {{-1, 1}}), X, ExpArg::plus(Z, W));
    auto v = check_identity(e, binom_pow(ExpArg::plus(Z, W), -1),
                            ExpWindow().set(Z, -5, 0).set(W, 0, 4));
    CHECK(v.equal);
    // negation: p(x) -> p(-z), p = x^3 + x^{-2}
    auto n = shift(poly_atom(X, {{3, 1}, {-2, 1}}), X, ExpArg::single(Z, -1));
    auto wn = evaluate(n, ExpWindow().set(Z, -4, 4));
    CHECK(window_at(wn, {3}) == Rat(-1));
    CHECK(window_at(wn, {-2}) == Rat(1));
}

TEST_CASE("ill-defined products are rejected") {
    auto d1 = delta(ExpArg::single(X), Y);
    CHECK_THROWS_AS((void)evaluate(prod(d1, d1), ExpWindow().set(X, -2, 2).set(Y, -2, 2)),
                    VxError);
    // (x-y)^{-1} expanded two ways multiplied: infinitely many splittings in x
    auto a = binom_pow(ExpArg::minus(X, Y), -1);   // powers x^{-1-k} y^k
    auto b = binom_pow(ExpArg::pair(Y, -1, X, 1), -1);  // powers (-y+x)^{-1}: y^{-1-k} x^k
    CHECK_THROWS_AS((void)evaluate(prod(a, b), ExpWindow().set(X, -4, 4).set(Y, -4, 4)), VxError);
}

TEST_CASE("atom outside its validity region raises InsufficientWindow") {
    CoeffWindow w;
    w.vars = {X};
    w.box = {Interval{-2, 2}};
    w.edges = {{Edge::Unsound, Edge::Zero}};
    w.sig = SpaceSig::scalar();
    w.add({0}, Rat(1), Rat(1));
    auto e = atom(w);
    CHECK_NOTHROW((void)evaluate(e, ExpWindow().set(X, -2, 4)));
    CHECK_THROWS_AS((void)evaluate(e, ExpWindow().set(X, -3, 2)), VxError);
}

TEST_CASE("weight bookkeeping marks truncated coefficients unsound instead of wrong") {
    // A "vector over a truncated space" style scalar atom: weights above 2
    // untracked. The comparison must clip, not fail.
    CoeffWindow w;
    w.vars = {X};
    w.box = {Interval{-4, 4}};
    w.edges = {{Edge::Zero, Edge::Unsound}};
    w.sig = SpaceSig::scalar();
    w.weight = WeightInfo{0, Interval{-4, kInf}, 2};
    w.add({-1}, Rat(1), Rat(5));
    w.add({2}, Rat(1), Rat(7));
    auto e = atom(w);

    CoeffWindow full = w;
    full.weight = std::nullopt;
    full.edges = {{Edge::Zero, Edge::Zero}};
    full.add({4}, Rat(1), Rat(9));  // differs only above the sound bound
    auto v = compare_windows(evaluate(e, ExpWindow().set(X, -4, 4)),
                             evaluate(atom(full), ExpWindow().set(X, -4, 4)),
                             ExpWindow().set(X, -4, 4));
    CHECK(v.equal);
    CHECK(v.clipped);
}
