#include "lcl/core/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace lcl {

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix Matrix::diag(const Vector& d) {
    Matrix m(d.size(), d.size());
    for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
    return m;
}

bool operator==(const Matrix& a, const Matrix& b) {
    return a.rows == b.rows && a.cols == b.cols && a.data == b.data;
}

Matrix transpose(const Matrix& m) {
    Matrix t(m.cols, m.rows);
    for (std::size_t i = 0; i < m.rows; ++i)
        for (std::size_t j = 0; j < m.cols; ++j) t(j, i) = m(i, j);
    return t;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    Matrix c(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i) {
        const double* arow = &a.data[i * a.cols];
        double* crow = &c.data[i * b.cols];
        for (std::size_t k = 0; k < a.cols; ++k) {
            const double aik = arow[k];
            if (aik == 0.0) continue;
            const double* brow = &b.data[k * b.cols];
            for (std::size_t j = 0; j < b.cols; ++j) crow[j] += aik * brow[j];
        }
    }
    return c;
}

Vector matvec(const Matrix& m, const Vector& v) {
    Vector out(m.rows, 0.0);
    for (std::size_t i = 0; i < m.rows; ++i) {
        const double* row = &m.data[i * m.cols];
        double acc = 0.0;
        for (std::size_t j = 0; j < m.cols; ++j) acc += row[j] * v[j];
        out[i] = acc;
    }
    return out;
}

Vector matvec_t(const Matrix& m, const Vector& v) {
    Vector out(m.cols, 0.0);
    for (std::size_t i = 0; i < m.rows; ++i) {
        const double* row = &m.data[i * m.cols];
        const double vi = v[i];
        for (std::size_t j = 0; j < m.cols; ++j) out[j] += row[j] * vi;
    }
    return out;
}

Matrix outer(const Vector& a, const Vector& b) {
    Matrix m(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) m(i, j) = a[i] * b[j];
    return m;
}

Matrix add(const Matrix& a, const Matrix& b) {
    Matrix c = a;
    for (std::size_t i = 0; i < c.data.size(); ++i) c.data[i] += b.data[i];
    return c;
}

Matrix sub(const Matrix& a, const Matrix& b) {
    Matrix c = a;
    for (std::size_t i = 0; i < c.data.size(); ++i) c.data[i] -= b.data[i];
    return c;
}

Matrix scale(const Matrix& m, double c) {
    Matrix out = m;
    for (double& x : out.data) x *= c;
    return out;
}

void add_scaled_inplace(Matrix& a, const Matrix& b, double c) {
    for (std::size_t i = 0; i < a.data.size(); ++i) a.data[i] += c * b.data[i];
}

Vector add(const Vector& a, const Vector& b) {
    Vector c = a;
    for (std::size_t i = 0; i < c.size(); ++i) c[i] += b[i];
    return c;
}

Vector sub(const Vector& a, const Vector& b) {
    Vector c = a;
    for (std::size_t i = 0; i < c.size(); ++i) c[i] -= b[i];
    return c;
}

Vector scale(const Vector& v, double c) {
    Vector out = v;
    for (double& x : out) x *= c;
    return out;
}

void add_scaled_inplace(Vector& a, const Vector& b, double c) {
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += c * b[i];
}

double dot(const Vector& a, const Vector& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

double norm2(const Vector& v) { return std::sqrt(dot(v, v)); }

double norm1(const Vector& v) {
    double acc = 0.0;
    for (double x : v) acc += std::abs(x);
    return acc;
}

double frobenius_norm(const Matrix& m) {
    double acc = 0.0;
    for (double x : m.data) acc += x * x;
    return std::sqrt(acc);
}

double inf_norm(const Matrix& m) {
    double best = 0.0;
    for (std::size_t i = 0; i < m.rows; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < m.cols; ++j) acc += std::abs(m(i, j));
        best = std::max(best, acc);
    }
    return best;
}

double max_abs(const Matrix& m) {
    double best = 0.0;
    for (double x : m.data) best = std::max(best, std::abs(x));
    return best;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
    double best = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i)
        best = std::max(best, std::abs(a.data[i] - b.data[i]));
    return best;
}

double max_abs_diff(const Vector& a, const Vector& b) {
    double best = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) best = std::max(best, std::abs(a[i] - b[i]));
    return best;
}

bool is_symmetric(const Matrix& m, double tol) {
    if (m.rows != m.cols) return false;
    for (std::size_t i = 0; i < m.rows; ++i)
        for (std::size_t j = i + 1; j < m.cols; ++j)
            if (std::abs(m(i, j) - m(j, i)) > tol) return false;
    return true;
}

bool all_finite(const Matrix& m) {
    for (double x : m.data)
        if (!std::isfinite(x)) return false;
    return true;
}

bool all_finite(const Vector& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

Matrix kron(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows * b.rows, a.cols * b.cols);
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t j = 0; j < a.cols; ++j) {
            const double aij = a(i, j);
            if (aij == 0.0) continue;
            for (std::size_t p = 0; p < b.rows; ++p)
                for (std::size_t q = 0; q < b.cols; ++q)
                    out(i * b.rows + p, j * b.cols + q) = aij * b(p, q);
        }
    return out;
}

Vector vec(const Matrix& m) {
    Vector out(m.rows * m.cols);
    std::size_t idx = 0;
    for (std::size_t j = 0; j < m.cols; ++j)
        for (std::size_t i = 0; i < m.rows; ++i) out[idx++] = m(i, j);
    return out;
}

Matrix unvec(const Vector& v, std::size_t rows, std::size_t cols) {
    Matrix m(rows, cols);
    std::size_t idx = 0;
    for (std::size_t j = 0; j < cols; ++j)
        for (std::size_t i = 0; i < rows; ++i) m(i, j) = v[idx++];
    return m;
}

namespace {

constexpr double kPivotTol = 1e-12;

// Bunch-Kaufman LDL' factorization with symmetric partial pivoting. Each
// interchange swaps whole rows/columns of the working matrix (including the
// already-computed multiplier columns), so the result is a factorization
// P A P' = L D L' with one global permutation applied up front in the solve.
// blocks[k]: 1 = 1x1 pivot, 2 = first column of a 2x2 pivot, 0 = its second.
struct LdltFactor {
    Matrix w;
    std::vector<std::size_t> perm;
    std::vector<int> blocks;
};

void symmetric_swap(Matrix& w, std::size_t r1, std::size_t r2) {
    if (r1 == r2) return;
    const std::size_t n = w.rows;
    for (std::size_t j = 0; j < n; ++j) std::swap(w(r1, j), w(r2, j));
    for (std::size_t i = 0; i < n; ++i) std::swap(w(i, r1), w(i, r2));
}

LdltFactor ldlt_factor(const Matrix& m, double ridge) {
    const std::size_t n = m.rows;
    const double alpha = (1.0 + std::sqrt(17.0)) / 8.0;
    LdltFactor f{m, std::vector<std::size_t>(n), std::vector<int>(n, 1)};
    Matrix& w = f.w;
    for (std::size_t i = 0; i < n; ++i) f.perm[i] = i;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) w(i, j) = w(j, i) = 0.5 * (m(i, j) + m(j, i));
    for (std::size_t i = 0; i < n; ++i) w(i, i) += ridge;

    std::size_t k = 0;
    while (k < n) {
        const double absakk = std::abs(w(k, k));
        std::size_t imax = k;
        double colmax = 0.0;
        for (std::size_t i = k + 1; i < n; ++i)
            if (std::abs(w(i, k)) > colmax) {
                colmax = std::abs(w(i, k));
                imax = i;
            }
        if (std::max(absakk, colmax) < kPivotTol) throw SingularMatrix();

        std::size_t kstep = 1;
        std::size_t kp = k;
        if (absakk < alpha * colmax) {
            double rowmax = 0.0;
            for (std::size_t j = k; j < imax; ++j) rowmax = std::max(rowmax, std::abs(w(imax, j)));
            for (std::size_t i = imax + 1; i < n; ++i)
                rowmax = std::max(rowmax, std::abs(w(i, imax)));
            if (absakk >= alpha * colmax * (colmax / rowmax)) {
                kp = k;
            } else if (std::abs(w(imax, imax)) >= alpha * rowmax) {
                kp = imax;
            } else {
                kstep = 2;
                kp = imax;
            }
        }

        const std::size_t kk = k + kstep - 1;
        if (kp != kk) {
            symmetric_swap(w, kk, kp);
            std::swap(f.perm[kk], f.perm[kp]);
        }

        if (kstep == 1) {
            f.blocks[k] = 1;
            const double d = w(k, k);
            if (std::abs(d) < kPivotTol) throw SingularMatrix();
            for (std::size_t i = k + 1; i < n; ++i) {
                const double lik = w(i, k) / d;
                for (std::size_t j = k + 1; j <= i; ++j) {
                    w(i, j) -= lik * w(j, k);
                    if (i != j) w(j, i) = w(i, j);
                }
            }
            for (std::size_t i = k + 1; i < n; ++i) w(i, k) /= d;
            k += 1;
        } else {
            f.blocks[k] = 2;
            f.blocks[k + 1] = 0;
            const double a = w(k, k), c = w(k + 1, k), b = w(k + 1, k + 1);
            const double det = a * b - c * c;
            if (std::abs(det) < kPivotTol) throw SingularMatrix();
            std::vector<double> l1(n, 0.0), l2(n, 0.0);
            for (std::size_t i = k + 2; i < n; ++i) {
                l1[i] = (b * w(i, k) - c * w(i, k + 1)) / det;
                l2[i] = (a * w(i, k + 1) - c * w(i, k)) / det;
            }
            for (std::size_t i = k + 2; i < n; ++i)
                for (std::size_t j = k + 2; j <= i; ++j) {
                    w(i, j) -= l1[i] * w(j, k) + l2[i] * w(j, k + 1);
                    if (i != j) w(j, i) = w(i, j);
                }
            for (std::size_t i = k + 2; i < n; ++i) {
                w(i, k) = l1[i];
                w(i, k + 1) = l2[i];
            }
            k += 2;
        }
    }
    return f;
}

Vector ldlt_solve(const LdltFactor& f, const Vector& v) {
    const Matrix& w = f.w;
    const std::size_t n = w.rows;
    Vector z(n);
    for (std::size_t i = 0; i < n; ++i) z[i] = v[f.perm[i]];

    // Forward substitution with unit-lower L (identity on 2x2 blocks).
    for (std::size_t k = 0; k < n;) {
        if (f.blocks[k] == 1) {
            for (std::size_t i = k + 1; i < n; ++i) z[i] -= w(i, k) * z[k];
            k += 1;
        } else {
            for (std::size_t i = k + 2; i < n; ++i)
                z[i] -= w(i, k) * z[k] + w(i, k + 1) * z[k + 1];
            k += 2;
        }
    }
    // Block-diagonal solve.
    for (std::size_t k = 0; k < n;) {
        if (f.blocks[k] == 1) {
            z[k] /= w(k, k);
            k += 1;
        } else {
            const double a = w(k, k), c = w(k + 1, k), b = w(k + 1, k + 1);
            const double det = a * b - c * c;
            const double r0 = z[k], r1 = z[k + 1];
            z[k] = (b * r0 - c * r1) / det;
            z[k + 1] = (a * r1 - c * r0) / det;
            k += 2;
        }
    }
    // Backward substitution with L'.
    for (long kk = static_cast<long>(n) - 1; kk >= 0;) {
        const auto k = static_cast<std::size_t>(kk);
        if (f.blocks[k] == 1) {
            double acc = 0.0;
            for (std::size_t i = k + 1; i < n; ++i) acc += w(i, k) * z[i];
            z[k] -= acc;
            kk -= 1;
        } else {  // second column of the block at (k-1, k)
            double acc0 = 0.0, acc1 = 0.0;
            for (std::size_t i = k + 1; i < n; ++i) {
                acc0 += w(i, k - 1) * z[i];
                acc1 += w(i, k) * z[i];
            }
            z[k - 1] -= acc0;
            z[k] -= acc1;
            kk -= 2;
        }
    }

    Vector x(n);
    for (std::size_t i = 0; i < n; ++i) x[f.perm[i]] = z[i];
    return x;
}

}  // namespace

Vector solve_symmetric(const Matrix& m, const Vector& v, double ridge) {
    const LdltFactor f = ldlt_factor(m, ridge);
    Vector x = ldlt_solve(f, v);
    // One pass of iterative refinement keeps the residual within the
    // advertised 1e-8*(1+||v||) bound on ill-scaled inputs.
    Vector r = v;
    for (std::size_t i = 0; i < m.rows; ++i) {
        double acc = ridge * x[i];
        const double* row = &m.data[i * m.cols];
        for (std::size_t j = 0; j < m.cols; ++j) acc += row[j] * x[j];
        r[i] -= acc;
    }
    const Vector dx = ldlt_solve(f, r);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += dx[i];
    return x;
}

double max_eigenvalue_sym(const Matrix& m) {
    const std::size_t n = m.rows;
    const double shift = inf_norm(m);
    Matrix b = m;
    for (std::size_t i = 0; i < n; ++i) b(i, i) += shift;

    Vector v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = 1.0 + 0.25 * std::sin(static_cast<double>(i + 1));
    double nv = norm2(v);
    for (double& x : v) x /= nv;

    double prev = std::numeric_limits<double>::infinity();
    for (int iter = 0; iter < 10000; ++iter) {
        Vector w = matvec(b, v);
        const double nw = norm2(w);
        if (nw < 1e-300) return -shift;
        for (double& x : w) x /= nw;
        const double lam = dot(w, matvec(b, w));
        if (std::abs(lam - prev) <= 1e-8 * std::max(1.0, std::abs(lam))) return lam - shift;
        prev = lam;
        v = std::move(w);
    }
    throw NoConvergence();
}

}  // namespace lcl
