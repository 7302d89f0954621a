#pragma once

#include <cstddef>
#include <vector>

#include "lcl/core/errors.hpp"

namespace lcl {

using Vector = std::vector<double>;

// Dense row-major matrix. All numerics in the toolkit are 64-bit floats.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    std::size_t size() const { return data.size(); }

    static Matrix identity(std::size_t n);
    static Matrix diag(const Vector& d);
};

bool operator==(const Matrix& a, const Matrix& b);

// Elementwise and BLAS-like helpers.
Matrix transpose(const Matrix& m);
Matrix matmul(const Matrix& a, const Matrix& b);
Vector matvec(const Matrix& m, const Vector& v);
Vector matvec_t(const Matrix& m, const Vector& v);  // m' * v
Matrix outer(const Vector& a, const Vector& b);
Matrix add(const Matrix& a, const Matrix& b);
Matrix sub(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& m, double c);
void add_scaled_inplace(Matrix& a, const Matrix& b, double c);  // a += c * b

Vector add(const Vector& a, const Vector& b);
Vector sub(const Vector& a, const Vector& b);
Vector scale(const Vector& v, double c);
void add_scaled_inplace(Vector& a, const Vector& b, double c);
double dot(const Vector& a, const Vector& b);
double norm2(const Vector& v);           // Euclidean norm
double norm1(const Vector& v);
double frobenius_norm(const Matrix& m);
double inf_norm(const Matrix& m);        // max absolute row sum
double max_abs(const Matrix& m);
double max_abs_diff(const Matrix& a, const Matrix& b);
double max_abs_diff(const Vector& a, const Vector& b);
bool is_symmetric(const Matrix& m, double tol = 1e-9);
bool all_finite(const Matrix& m);
bool all_finite(const Vector& v);

// Kronecker product: block (i,j) of the result equals a(i,j) * b.
Matrix kron(const Matrix& a, const Matrix& b);

// Column-stacking vectorization, chosen so that vec(H*X*S) = (S' kron H) vec(X).
Vector vec(const Matrix& m);
Matrix unvec(const Vector& v, std::size_t rows, std::size_t cols);

// Solves (m + ridge*I) x = v via a Bunch-Kaufman pivoted LDL' factorization.
// Throws SingularMatrix when a pivot magnitude falls below 1e-12, and
// NonSymmetricH is not used here: callers must pass m symmetric within 1e-9.
Vector solve_symmetric(const Matrix& m, const Vector& v, double ridge = 0.0);

// Largest eigenvalue of a symmetric matrix via power iteration on m + shift*I,
// shift = inf_norm(m), tolerance 1e-8, at most 10,000 iterations.
double max_eigenvalue_sym(const Matrix& m);

}  // namespace lcl
