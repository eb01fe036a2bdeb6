/*
 * Copyright 2026 The RC-Flow Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "rcflow/core.hpp"

namespace rcflow
{

/// ||m - m^H||_F.
inline double hermitian_defect(const ComplexMatrix& m)
{
    double s = 0.0;
    for (std::size_t i = 0; i < m.rows(); ++i)
    {
        for (std::size_t j = 0; j < m.cols(); ++j)
        {
            s += std::norm(m(i, j) - std::conj(m(j, i)));
        }
    }
    return std::sqrt(s);
}

inline bool is_hermitian(const ComplexMatrix& m, double rel_tol = 1e-10)
{
    return m.is_square() && hermitian_defect(m) <= rel_tol * frobenius_norm(m);
}

struct HermitianEvd
{
    ComplexMatrix u;             // columns are eigenvectors
    std::vector<double> lambda;  // descending
};

/**
 * Eigendecomposition of a Hermitian matrix by cyclic complex Jacobi rotations.
 *
 * Each rotation zeroes one off-diagonal pair (p, q) with the unitary
 *   J = [[c, s e], [-s conj(e), c]],  e = a_pq / |a_pq|,
 * which reduces the 2x2 block to the real symmetric Jacobi case.
 */
inline HermitianEvd hermitian_evd(const ComplexMatrix& m)
{
    if (!m.is_square())
    {
        throw ContractError("hermitian_evd: matrix is not square");
    }
    const double scale = frobenius_norm(m);
    if (hermitian_defect(m) > 1e-10 * scale)
    {
        throw ContractError("hermitian_evd: matrix is not Hermitian");
    }
    const std::size_t n = m.rows();

    // Work on the exactly Hermitian part.
    ComplexMatrix a(n, n);
    for (std::size_t i = 0; i < n; ++i)
    {
        a(i, i) = m(i, i).real();
        for (std::size_t j = i + 1; j < n; ++j)
        {
            const cplx v = 0.5 * (m(i, j) + std::conj(m(j, i)));
            a(i, j) = v;
            a(j, i) = std::conj(v);
        }
    }
    ComplexMatrix v = ComplexMatrix::identity(n);

    auto off_norm = [&]() {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i)
        {
            for (std::size_t j = i + 1; j < n; ++j)
            {
                s += std::norm(a(i, j));
            }
        }
        return std::sqrt(2.0 * s);
    };

    constexpr int kMaxSweeps = 100;
    const double stop = 1e-15 * scale;
    for (int sweep = 0; sweep < kMaxSweeps && scale > 0.0; ++sweep)
    {
        if (off_norm() <= stop)
        {
            break;
        }
        for (std::size_t p = 0; p + 1 < n; ++p)
        {
            for (std::size_t q = p + 1; q < n; ++q)
            {
                const cplx g = a(p, q);
                const double r = std::abs(g);
                if (r <= 1e-300)
                {
                    continue;
                }
                const cplx e = g / r;
                const double app = a(p, p).real();
                const double aqq = a(q, q).real();
                const double tau = (aqq - app) / (2.0 * r);
                const double t = (tau >= 0.0 ? 1.0 : -1.0)
                                 / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = t * c;
                const cplx se = s * e;
                const cplx sec = s * std::conj(e);

                // A <- A J
                for (std::size_t k = 0; k < n; ++k)
                {
                    const cplx akp = a(k, p);
                    const cplx akq = a(k, q);
                    a(k, p) = akp * c - akq * sec;
                    a(k, q) = akp * se + akq * c;
                }
                // A <- J^H A
                for (std::size_t k = 0; k < n; ++k)
                {
                    const cplx apk = a(p, k);
                    const cplx aqk = a(q, k);
                    a(p, k) = c * apk - se * aqk;
                    a(q, k) = sec * apk + c * aqk;
                }
                a(p, q) = 0.0;
                a(q, p) = 0.0;
                a(p, p) = app - t * r;
                a(q, q) = aqq + t * r;
                // V <- V J
                for (std::size_t k = 0; k < n; ++k)
                {
                    const cplx vkp = v(k, p);
                    const cplx vkq = v(k, q);
                    v(k, p) = vkp * c - vkq * sec;
                    v(k, q) = vkp * se + vkq * c;
                }
            }
        }
    }
    if (off_norm() > 1e-12 * scale)
    {
        throw NumericError("hermitian_evd: Jacobi sweeps did not converge");
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
        return a(x, x).real() > a(y, y).real();
    });
    HermitianEvd out{ComplexMatrix(n, n), std::vector<double>(n)};
    for (std::size_t j = 0; j < n; ++j)
    {
        out.lambda[j] = a(order[j], order[j]).real();
        for (std::size_t k = 0; k < n; ++k)
        {
            out.u(k, j) = v(k, order[j]);
        }
    }
    return out;
}

/// U diag(d) U^H.
inline ComplexMatrix reassemble(const ComplexMatrix& u, std::span<const double> d)
{
    require(u.cols() == d.size(), "reassemble: eigenvalue count mismatch");
    ComplexMatrix ud = u;
    for (std::size_t i = 0; i < ud.rows(); ++i)
    {
        for (std::size_t j = 0; j < ud.cols(); ++j)
        {
            ud(i, j) *= d[j];
        }
    }
    return matmul(ud, adjoint(u));
}

/// Solves A X = B with partial-pivot LU. Throws NumericError when A is
/// numerically singular.
inline ComplexMatrix solve(ComplexMatrix a, ComplexMatrix b)
{
    require(a.is_square(), "solve: coefficient matrix is not square");
    if (a.rows() != b.rows())
    {
        throw DimensionError("solve: right-hand side has wrong row count");
    }
    const std::size_t n = a.rows();
    const double scale = frobenius_norm(a);
    for (std::size_t col = 0; col < n; ++col)
    {
        std::size_t piv = col;
        double best = std::abs(a(col, col));
        for (std::size_t r = col + 1; r < n; ++r)
        {
            if (std::abs(a(r, col)) > best)
            {
                best = std::abs(a(r, col));
                piv = r;
            }
        }
        if (best <= 1e-300 || best <= 1e-15 * scale)
        {
            throw NumericError("solve: matrix is singular to working precision");
        }
        if (piv != col)
        {
            for (std::size_t j = 0; j < n; ++j)
            {
                std::swap(a(col, j), a(piv, j));
            }
            for (std::size_t j = 0; j < b.cols(); ++j)
            {
                std::swap(b(col, j), b(piv, j));
            }
        }
        const cplx inv = 1.0 / a(col, col);
        for (std::size_t r = col + 1; r < n; ++r)
        {
            const cplx f = a(r, col) * inv;
            if (f == cplx{0.0, 0.0})
            {
                continue;
            }
            for (std::size_t j = col; j < n; ++j)
            {
                a(r, j) -= f * a(col, j);
            }
            for (std::size_t j = 0; j < b.cols(); ++j)
            {
                b(r, j) -= f * b(col, j);
            }
        }
    }
    for (std::size_t ri = n; ri-- > 0;)
    {
        for (std::size_t j = 0; j < b.cols(); ++j)
        {
            cplx s = b(ri, j);
            for (std::size_t k = ri + 1; k < n; ++k)
            {
                s -= a(ri, k) * b(k, j);
            }
            b(ri, j) = s / a(ri, ri);
        }
    }
    return b;
}

/// Solves X A = B, i.e. X = B A^{-1}.
inline ComplexMatrix solve_right(const ComplexMatrix& a, const ComplexMatrix& b)
{
    if (a.rows() != b.cols())
    {
        throw DimensionError("solve_right: dimension mismatch");
    }
    return adjoint(solve(adjoint(a), adjoint(b)));
}

/// Moore-Penrose pseudo-inverse of a Hermitian PSD matrix; eigenvalues at or
/// below rel_tol * lambda_max are treated as zero.
inline ComplexMatrix psd_pseudo_inverse(const ComplexMatrix& m, double rel_tol = 1e-12)
{
    const auto evd = hermitian_evd(m);
    const double top = evd.lambda.empty() ? 0.0 : std::abs(evd.lambda.front());
    std::vector<double> inv(evd.lambda.size(), 0.0);
    for (std::size_t i = 0; i < inv.size(); ++i)
    {
        if (evd.lambda[i] > rel_tol * top && evd.lambda[i] > 0.0)
        {
            inv[i] = 1.0 / evd.lambda[i];
        }
    }
    return reassemble(evd.u, inv);
}

/// Hermitian square root of a PSD matrix, clipping small negative
/// eigenvalues (>= -tol * lambda_max) to zero.
inline ComplexMatrix psd_sqrt(const ComplexMatrix& m, double tol = 1e-12)
{
    const auto evd = hermitian_evd(m);
    const double top = evd.lambda.empty() ? 0.0 : std::max(0.0, evd.lambda.front());
    std::vector<double> root(evd.lambda.size(), 0.0);
    for (std::size_t i = 0; i < root.size(); ++i)
    {
        const double l = evd.lambda[i];
        if (l < -tol * std::max(top, 1.0))
        {
            throw ContractError("psd_sqrt: matrix has a negative eigenvalue "
                                + std::to_string(l));
        }
        root[i] = l > 0.0 ? std::sqrt(l) : 0.0;
    }
    return reassemble(evd.u, root);
}

}  // namespace rcflow
