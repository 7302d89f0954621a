#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "lcl/core/matrix.hpp"
#include "lcl/core/rng.hpp"
#include "lcl/core/text.hpp"
#include "oracles/dense_oracles.hpp"

using namespace lcl;

namespace {

Matrix random_matrix(Rng& rng, std::size_t r, std::size_t c, double lo = -1.0, double hi = 1.0) {
    Matrix m(r, c);
    for (double& x : m.data) x = rng.uniform(lo, hi);
    return m;
}

Matrix random_symmetric(Rng& rng, std::size_t n) {
    Matrix m = random_matrix(rng, n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < i; ++j) m(j, i) = m(i, j);
    return m;
}

// Well-conditioned symmetric matrix with the given eigenvalue signs: Q D Q'
// built from a product of random Householder reflections.
Matrix symmetric_with_spectrum(Rng& rng, const Vector& eigs) {
    const std::size_t n = eigs.size();
    Matrix q = Matrix::identity(n);
    for (int rep = 0; rep < 2; ++rep) {
        Vector v = rng.normal_vec(n);
        const double nv = norm2(v);
        for (double& x : v) x /= nv;
        Matrix h = Matrix::identity(n);
        add_scaled_inplace(h, outer(v, v), -2.0);
        q = matmul(q, h);
    }
    return matmul(matmul(q, Matrix::diag(eigs)), transpose(q));
}

}  // namespace

TEST_CASE("kron identity and scalar cases") {
    const Matrix i2 = Matrix::identity(2);
    CHECK(kron(i2, i2) == Matrix::identity(4));

    Matrix c(1, 1);
    c(0, 0) = 3.0;
    Matrix b(2, 2);
    b.data = {1, 2, 3, 4};
    const Matrix k = kron(c, b);
    CHECK(k == scale(b, 3.0));
}

TEST_CASE("kron matches definitional double loop") {
    Matrix a(2, 2), b(2, 2);
    a.data = {1, 2, 3, 4};
    b.data = {0, 1, 1, 0};
    CHECK(kron(a, b) == oracle::kron_loop(a, b));

    Rng rng(7);
    for (int rep = 0; rep < 20; ++rep) {
        const Matrix x = random_matrix(rng, 1 + rng.uniform_index(4), 1 + rng.uniform_index(4));
        const Matrix y = random_matrix(rng, 1 + rng.uniform_index(4), 1 + rng.uniform_index(4));
        CHECK(max_abs_diff(kron(x, y), oracle::kron_loop(x, y)) == 0.0);
    }
}

TEST_CASE("kron mixed-product property") {
    Rng rng(11);
    for (int rep = 0; rep < 20; ++rep) {
        const Matrix a = random_matrix(rng, 3, 2), c = random_matrix(rng, 2, 3);
        const Matrix b = random_matrix(rng, 2, 4), d = random_matrix(rng, 4, 2);
        const Matrix lhs = matmul(kron(a, b), kron(c, d));
        const Matrix rhs = kron(matmul(a, c), matmul(b, d));
        CHECK(max_abs_diff(lhs, rhs) < 1e-10 * (1.0 + max_abs(rhs)));
    }
}

TEST_CASE("vec column-stacks and round-trips") {
    Matrix m(2, 2);
    m.data = {1, 2, 3, 4};
    CHECK(vec(m) == Vector{1, 3, 2, 4});
    CHECK(vec(Matrix(2, 2)) == Vector{0, 0, 0, 0});

    Rng rng(3);
    const Matrix r = random_matrix(rng, 3, 2);
    CHECK(unvec(vec(r), 3, 2) == r);
}

TEST_CASE("vec kron identity vec(HXS) = (S' kron H) vec(X)") {
    Rng rng(5);
    for (int rep = 0; rep < 20; ++rep) {
        const std::size_t d = 2 + rng.uniform_index(3), k = 2 + rng.uniform_index(3);
        const Matrix h = random_matrix(rng, d, d);
        const Matrix x = random_matrix(rng, d, k);
        const Matrix s = random_matrix(rng, k, k);
        const Vector lhs = vec(matmul(matmul(h, x), s));
        const Vector rhs = matvec(kron(transpose(s), h), vec(x));
        CHECK(max_abs_diff(lhs, rhs) < 1e-10 * (1.0 + norm2(lhs)));
    }
}

TEST_CASE("solve_symmetric trivial cases") {
    Matrix m(2, 2);
    m.data = {-1, 0, 0, -1};
    const Vector x = solve_symmetric(m, Vector{2, -4});
    CHECK(x[0] == doctest::Approx(-2.0).epsilon(1e-12));
    CHECK(x[1] == doctest::Approx(4.0).epsilon(1e-12));

    Matrix zero(1, 1);
    const Vector y = solve_symmetric(zero, Vector{3}, -1.0);
    CHECK(y[0] == doctest::Approx(-3.0).epsilon(1e-12));
}

TEST_CASE("solve_symmetric matches dense-inverse oracle on SPD") {
    Rng rng(13);
    for (int rep = 0; rep < 50; ++rep) {
        Vector eigs = rng.uniform_vec(5, 0.5, 4.0);
        const Matrix m = symmetric_with_spectrum(rng, eigs);
        const Vector v = rng.normal_vec(5);
        const Vector got = solve_symmetric(m, v);
        const Vector want = oracle::solve_by_inverse(m, v);
        CHECK(max_abs_diff(got, want) < 1e-8);
    }
}

TEST_CASE("solve_symmetric residual bound on 1000 random well-conditioned systems") {
    Rng rng(17);
    for (int rep = 0; rep < 1000; ++rep) {
        const std::size_t n = 2 + rng.uniform_index(7);
        Vector eigs(n);
        for (double& e : eigs) {
            e = rng.uniform(0.2, 5.0);
            if (rng.uniform() < 0.5) e = -e;  // indefinite systems exercise 2x2 pivots
        }
        const Matrix m = symmetric_with_spectrum(rng, eigs);
        const Vector v = rng.normal_vec(n);
        const Vector x = solve_symmetric(m, v);
        const Vector r = sub(v, matvec(m, x));
        CHECK(norm2(r) <= 1e-8 * (1.0 + norm2(v)));
    }
}

TEST_CASE("solve_symmetric raises SingularMatrix on tiny pivots") {
    Matrix m(2, 2);  // all zeros
    CHECK_THROWS_AS(solve_symmetric(m, Vector{1, 1}), SingularMatrix);

    Matrix rank1(2, 2);
    rank1.data = {1, 1, 1, 1};
    CHECK_THROWS_AS(solve_symmetric(rank1, Vector{1, 2}), SingularMatrix);
}

TEST_CASE("max_eigenvalue_sym spot values") {
    CHECK(max_eigenvalue_sym(Matrix::diag(Vector{-1, -3})) == doctest::Approx(-1.0).epsilon(1e-8));
    CHECK(max_eigenvalue_sym(Matrix::identity(3)) == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("max_eigenvalue_sym matches characteristic-polynomial oracle") {
    Rng rng(19);
    for (int rep = 0; rep < 25; ++rep) {
        const Matrix m = random_symmetric(rng, 4);
        const double got = max_eigenvalue_sym(m);
        const double want = oracle::max_eig_by_charpoly(m);
        CHECK(std::abs(got - want) <= 1e-6);
    }
}

TEST_CASE("rng determinism across instances") {
    Rng a(42), b(42);
    for (int i = 0; i < 10000; ++i) CHECK(a.next_u64() == b.next_u64());

    Rng c(42), d(43);
    bool differs = false;
    for (int i = 0; i < 16; ++i) differs |= (c.next_u64() != d.next_u64());
    CHECK(differs);
}

TEST_CASE("rng uniform_index is in range and covers support") {
    Rng rng(1);
    std::vector<int> counts(6, 0);
    for (int i = 0; i < 6000; ++i) {
        const std::size_t v = rng.uniform_index(6);
        REQUIRE(v < 6);
        ++counts[v];
    }
    for (int c : counts) CHECK(c > 700);
}

TEST_CASE("substream seeds differ by label and are stable") {
    const auto a = substream_seed(9, "env");
    const auto b = substream_seed(9, "init");
    CHECK(a != b);
    CHECK(a == substream_seed(9, "env"));
}

TEST_CASE("format_g17 round-trips doubles") {
    Rng rng(23);
    for (int i = 0; i < 1000; ++i) {
        const double x = rng.normal(0, 1e3);
        CHECK(std::stod(format_g17(x)) == x);
    }
    CHECK(format_g17(0.5640625) == "0.56406250000000002");
    CHECK(std::stod("0.56406250000000002") == 0.5640625);
}

TEST_CASE("sha1 known vectors") {
    CHECK(sha1_hex("abc") == "a9993e364706816aba3e25717850c26c9cd0d89d");
    CHECK(sha1_hex("") == "da39a3ee5e6b4b0d3255bfef95601890afd80709");
    // git hash-object of an empty file
    CHECK(git_blob_hash("") == "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
}
