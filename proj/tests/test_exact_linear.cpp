#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <vector>

#include "vertexcalc/errors.hpp"
#include "vertexcalc/sparse.hpp"

using namespace vertexcalc;

namespace {

SparseVector vec(std::initializer_list<std::pair<int, long>> e) {
    std::vector<SparseVector::Entry> v;
    for (auto [c, x] : e) v.emplace_back(c, Rat(x));
    return SparseVector(std::move(v));
}

// Independent rank oracle: dense fraction-free (Bareiss) elimination over Z.
// Operates on integer matrices only; the implementation under test never
// shares this code path.
int bareiss_rank(std::vector<std::vector<long>> a) {
    int n = static_cast<int>(a.size());
    if (n == 0) return 0;
    int m = static_cast<int>(a[0].size());
    std::vector<std::vector<mpz_class>> z(n, std::vector<mpz_class>(m));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) z[i][j] = a[i][j];
    mpz_class prev = 1;
    int rank = 0, row = 0;
    for (int col = 0; col < m && row < n; ++col) {
        int piv = -1;
        for (int i = row; i < n; ++i)
            if (z[i][col] != 0) { piv = i; break; }
        if (piv < 0) continue;
        std::swap(z[row], z[piv]);
        for (int i = row + 1; i < n; ++i) {
            for (int j = col + 1; j < m; ++j)
                z[i][j] = (z[row][col] * z[i][j] - z[i][col] * z[row][j]) / prev;
            z[i][col] = 0;
        }
        prev = z[row][col];
        ++rank;
        ++row;
    }
    return rank;
}

}  // namespace

TEST_CASE("rational basics") {
    CHECK(Rat(2, 4) == Rat(1, 2));
    CHECK(Rat(-3, -6) == Rat(1, 2));
    CHECK((Rat(1, 3) + Rat(1, 6)) == Rat(1, 2));
    CHECK(Rat(1, 2).str() == "1/2");
    CHECK(Rat(-7).str() == "-7");
    CHECK(Rat::parse("-3/9") == Rat(-1, 3));
    CHECK(Rat::parse("5") == Rat(5));
    CHECK_THROWS(Rat::parse("1/0"));
    CHECK_THROWS(Rat::parse("x"));
    CHECK(Rat(3, 7).inverse() == Rat(7, 3));
    CHECK(factorial(5) == Rat(120));
}

TEST_CASE("rref identity") {
    auto r = rref(SparseMatrix::identity(3));
    CHECK(r.rank == 3);
    CHECK(r.pivots == std::vector<int>{0, 1, 2});
}

TEST_CASE("rref zero matrix") {
    SparseMatrix m(4);
    m.append({});
    m.append({});
    auto r = rref(m);
    CHECK(r.rank == 0);
    CHECK(r.pivots.empty());
}

TEST_CASE("rref dependent rows") {
    // [[1,2],[2,4]] -> rank 1, hand elimination
    SparseMatrix m(2);
    m.append(vec({{0, 1}, {1, 2}}));
    m.append(vec({{0, 2}, {1, 4}}));
    auto r = rref(m);
    CHECK(r.rank == 1);
    CHECK(r.reduced.rows[0] == vec({{0, 1}, {1, 2}}));
}

TEST_CASE("rref idempotent and rank matches Bareiss oracle on random matrices") {
    std::mt19937 rng(12345);
    std::uniform_int_distribution<int> dim(1, 8), val(-5, 5);
    for (int trial = 0; trial < 60; ++trial) {
        int n = dim(rng), m = dim(rng);
        std::vector<std::vector<long>> dense(n, std::vector<long>(m));
        SparseMatrix sp(m);
        for (int i = 0; i < n; ++i) {
            std::vector<SparseVector::Entry> row;
            for (int j = 0; j < m; ++j) {
                dense[i][j] = val(rng);
                if (dense[i][j] != 0) row.emplace_back(j, Rat(dense[i][j]));
            }
            sp.append(SparseVector(std::move(row)));
        }
        auto r = rref(sp);
        CHECK(r.rank == bareiss_rank(dense));
        auto r2 = rref(r.reduced);
        CHECK(r2.reduced.rows == r.reduced.rows);
    }
}

TEST_CASE("solve") {
    SUBCASE("identity") {
        auto x = solve(SparseMatrix::identity(2), SparseVector::unit(1));
        REQUIRE(x.has_value());
        CHECK(*x == SparseVector::unit(1));
    }
    SUBCASE("zero matrix, nonzero rhs") {
        SparseMatrix m(2);
        m.append({});
        m.append({});
        CHECK_FALSE(solve(m, SparseVector::unit(0)).has_value());
    }
    SUBCASE("diagonal") {
        SparseMatrix m(2);
        m.append(vec({{0, 2}}));
        m.append(vec({{1, 3}}));
        auto x = solve(m, vec({{0, 1}, {1, 1}}));
        REQUIRE(x.has_value());
        CHECK(x->get(0) == Rat(1, 2));
        CHECK(x->get(1) == Rat(1, 3));
    }
    SUBCASE("solution satisfies the system (random)") {
        std::mt19937 rng(99);
        std::uniform_int_distribution<int> dim(1, 6), val(-4, 4);
        for (int trial = 0; trial < 40; ++trial) {
            int n = dim(rng), m = dim(rng);
            SparseMatrix a(m);
            for (int i = 0; i < n; ++i) {
                std::vector<SparseVector::Entry> row;
                for (int j = 0; j < m; ++j) {
                    int v = val(rng);
                    if (v) row.emplace_back(j, Rat(v));
                }
                a.append(SparseVector(std::move(row)));
            }
            // build a consistent rhs from a random x
            VecBuilder xb;
            for (int j = 0; j < m; ++j) xb.add(j, Rat(val(rng)));
            SparseVector x0 = xb.take();
            VecBuilder rb;
            for (int i = 0; i < n; ++i) {
                Rat dot(0);
                for (const auto& [j, c] : a.rows[i].entries()) dot += c * x0.get(j);
                rb.add(i, dot);
            }
            SparseVector rhs = rb.take();
            auto x = solve(a, rhs);
            REQUIRE(x.has_value());
            for (int i = 0; i < n; ++i) {
                Rat dot(0);
                for (const auto& [j, c] : a.rows[i].entries()) dot += c * x->get(j);
                CHECK(dot == rhs.get(i));
            }
        }
    }
}

TEST_CASE("quotient: identity span mod e0+e1") {
    SparseMatrix span = SparseMatrix::identity(2);
    SparseMatrix rel(2);
    rel.append(vec({{0, 1}, {1, 1}}));
    QuotientMap q(span, rel);
    CHECK(q.dim() == 1);
    auto p0 = q.project(SparseVector::unit(0));
    auto p1 = q.project(SparseVector::unit(1));
    CHECK(p0 == (Rat(-1) * p1));
    CHECK_FALSE(p0.is_zero());
}

TEST_CASE("quotient: empty relations is a bijection") {
    SparseMatrix span(3);
    span.append(vec({{0, 1}, {2, 1}}));
    span.append(vec({{1, 1}}));
    QuotientMap q(span, SparseMatrix(3));
    CHECK(q.dim() == 2);
    for (int i = 0; i < q.dim(); ++i)
        CHECK(q.project(q.include(i)) == SparseVector::unit(i));
}

TEST_CASE("quotient: relations equal span gives zero quotient") {
    SparseMatrix span = SparseMatrix::identity(3);
    QuotientMap q(span, span);
    CHECK(q.dim() == 0);
    CHECK(q.project(vec({{0, 5}, {1, -2}, {2, 7}})).is_zero());
}

TEST_CASE("quotient: relation not in span rejected") {
    SparseMatrix span(2);
    span.append(vec({{0, 1}}));
    SparseMatrix rel(2);
    rel.append(vec({{1, 1}}));
    CHECK_THROWS_AS(QuotientMap(span, rel), VxError);
}

TEST_CASE("quotient: projection kills exactly the relation space") {
    std::mt19937 rng(7);
    std::uniform_int_distribution<int> val(-3, 3);
    SparseMatrix span = SparseMatrix::identity(5);
    SparseMatrix rel(5);
    rel.append(vec({{0, 1}, {3, -2}}));
    rel.append(vec({{1, 1}, {2, 1}, {4, 1}}));
    QuotientMap q(span, rel);
    CHECK(q.dim() == 3);
    for (int trial = 0; trial < 30; ++trial) {
        // random element of the relation space projects to zero
        Rat c1(val(rng)), c2(val(rng));
        SparseVector r = c1 * rel.rows[0] + c2 * rel.rows[1];
        CHECK(q.project(r).is_zero());
        // projection is linear
        SparseVector a = vec({{0, val(rng)}, {2, val(rng)}, {4, val(rng)}});
        SparseVector b = vec({{1, val(rng)}, {3, val(rng)}});
        CHECK(q.project(a + b) == q.project(a) + q.project(b));
    }
    // projection o inclusion = identity on coset representatives
    for (int i = 0; i < q.dim(); ++i)
        CHECK(q.project(q.include(i)) == SparseVector::unit(i));
}
