#pragma once

// Independent reference implementations used to pin expected values. These
// deliberately use different algorithms from the library under test.

#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

#include "lcl/core/matrix.hpp"

namespace oracle {

// Kronecker product by the definitional double loop over scalar entries.
inline lcl::Matrix kron_loop(const lcl::Matrix& a, const lcl::Matrix& b) {
    lcl::Matrix out(a.rows * b.rows, a.cols * b.cols);
    for (std::size_t i = 0; i < out.rows; ++i)
        for (std::size_t j = 0; j < out.cols; ++j)
            out(i, j) = a(i / b.rows, j / b.cols) * b(i % b.rows, j % b.cols);
    return out;
}

// Dense inverse via Gauss-Jordan elimination with partial pivoting.
inline lcl::Matrix gauss_jordan_inverse(const lcl::Matrix& m) {
    const std::size_t n = m.rows;
    lcl::Matrix a = m;
    lcl::Matrix inv = lcl::Matrix::identity(n);
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t i = col + 1; i < n; ++i)
            if (std::abs(a(i, col)) > std::abs(a(piv, col))) piv = i;
        if (std::abs(a(piv, col)) < 1e-14) throw std::runtime_error("oracle: singular");
        for (std::size_t j = 0; j < n; ++j) {
            std::swap(a(col, j), a(piv, j));
            std::swap(inv(col, j), inv(piv, j));
        }
        const double d = a(col, col);
        for (std::size_t j = 0; j < n; ++j) {
            a(col, j) /= d;
            inv(col, j) /= d;
        }
        for (std::size_t i = 0; i < n; ++i) {
            if (i == col) continue;
            const double f = a(i, col);
            if (f == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) {
                a(i, j) -= f * a(col, j);
                inv(i, j) -= f * inv(col, j);
            }
        }
    }
    return inv;
}

inline lcl::Vector solve_by_inverse(const lcl::Matrix& m, const lcl::Vector& v) {
    return lcl::matvec(gauss_jordan_inverse(m), v);
}

// Characteristic polynomial coefficients via Faddeev-LeVerrier:
// p(x) = x^n + c[n-1] x^(n-1) + ... + c[0].
inline std::vector<double> charpoly(const lcl::Matrix& m) {
    const std::size_t n = m.rows;
    std::vector<double> c(n, 0.0);
    // Newton's identities over power sums of eigenvalues (traces of powers).
    std::vector<double> p(n + 1, 0.0);
    lcl::Matrix power = m;
    for (std::size_t k = 1; k <= n; ++k) {
        double tr = 0.0;
        for (std::size_t i = 0; i < n; ++i) tr += power(i, i);
        p[k] = tr;
        if (k < n) power = lcl::matmul(power, m);
    }
    std::vector<double> e(n + 1, 0.0);
    e[0] = 1.0;
    for (std::size_t k = 1; k <= n; ++k) {
        double acc = 0.0;
        for (std::size_t i = 1; i <= k; ++i)
            acc += ((i % 2 == 1) ? 1.0 : -1.0) * e[k - i] * p[i];
        e[k] = acc / static_cast<double>(k);
    }
    // p(x) = sum_{k=0..n} (-1)^k e_k x^(n-k); return the low-order n coeffs.
    for (std::size_t k = 1; k <= n; ++k)
        c[n - k] = ((k % 2 == 1) ? -1.0 : 1.0) * e[k];
    return c;
}

// Durand-Kerner simultaneous root iteration on the (monic) polynomial.
inline std::vector<std::complex<double>> poly_roots(const std::vector<double>& low_coeffs) {
    const std::size_t n = low_coeffs.size();
    auto eval = [&](std::complex<double> x) {
        std::complex<double> acc(1.0, 0.0);
        for (std::size_t k = 0; k < n; ++k) acc = acc * x + low_coeffs[n - 1 - k];
        return acc;
    };
    std::vector<std::complex<double>> r(n);
    const std::complex<double> seed(0.4, 0.9);
    std::complex<double> cur(1.0, 0.0);
    for (auto& root : r) {
        cur *= seed;
        root = cur;
    }
    for (int iter = 0; iter < 500; ++iter) {
        double moved = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            std::complex<double> denom(1.0, 0.0);
            for (std::size_t j = 0; j < n; ++j)
                if (j != i) denom *= r[i] - r[j];
            const std::complex<double> delta = eval(r[i]) / denom;
            r[i] -= delta;
            moved = std::max(moved, std::abs(delta));
        }
        if (moved < 1e-13) break;
    }
    return r;
}

inline double max_eig_by_charpoly(const lcl::Matrix& m) {
    const auto roots = poly_roots(charpoly(m));
    double best = -1e300;
    for (const auto& r : roots) best = std::max(best, r.real());
    return best;
}

}  // namespace oracle
