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

#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace rcflow
{

using cplx = std::complex<double>;

// Error hierarchy. Everything thrown by the library derives from Error.
class Error : public std::runtime_error
{
   public:
    using std::runtime_error::runtime_error;
};

// A documented precondition was violated by the caller.
class ContractError : public Error
{
   public:
    using Error::Error;
};

class DimensionError : public ContractError
{
   public:
    using ContractError::ContractError;
};

// Non-finite values or a singular system encountered during computation.
class NumericError : public Error
{
   public:
    using Error::Error;
};

// Malformed or truncated file contents.
class FormatError : public Error
{
   public:
    using Error::Error;
};

class IoError : public Error
{
   public:
    using Error::Error;
};

inline void require(bool cond, const std::string& what)
{
    if (!cond)
    {
        throw ContractError(what);
    }
}

/**
 * Dense complex matrix, row-major, double precision.
 *
 * std::complex<double> is guaranteed to be laid out as an interleaved
 * (re, im) pair, so data() can be handed to binary writers directly.
 */
class ComplexMatrix
{
   public:
    ComplexMatrix() = default;

    ComplexMatrix(std::size_t rows, std::size_t cols)
        : rows_(rows), cols_(cols), data_(rows * cols, cplx{0.0, 0.0})
    {
    }

    ComplexMatrix(std::size_t rows, std::size_t cols, std::vector<cplx> entries)
        : rows_(rows), cols_(cols), data_(std::move(entries))
    {
        if (data_.size() != rows_ * cols_)
        {
            throw DimensionError(
                "ComplexMatrix: entry count " + std::to_string(data_.size())
                + " does not match " + std::to_string(rows_) + "x"
                + std::to_string(cols_));
        }
        if (!all_finite())
        {
            throw NumericError("ComplexMatrix: non-finite entry on construction");
        }
    }

    static ComplexMatrix identity(std::size_t n)
    {
        ComplexMatrix m(n, n);
        for (std::size_t i = 0; i < n; ++i)
        {
            m(i, i) = 1.0;
        }
        return m;
    }

    static ComplexMatrix diagonal(std::span<const double> d)
    {
        ComplexMatrix m(d.size(), d.size());
        for (std::size_t i = 0; i < d.size(); ++i)
        {
            m(i, i) = d[i];
        }
        return m;
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }
    bool is_square() const noexcept { return rows_ == cols_; }

    cplx& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    const cplx& operator()(std::size_t r, std::size_t c) const
    {
        return data_[r * cols_ + c];
    }

    std::span<cplx> data() noexcept { return data_; }
    std::span<const cplx> data() const noexcept { return data_; }

    bool all_finite() const noexcept
    {
        for (const auto& z : data_)
        {
            if (!std::isfinite(z.real()) || !std::isfinite(z.imag()))
            {
                return false;
            }
        }
        return true;
    }

    bool same_shape(const ComplexMatrix& o) const noexcept
    {
        return rows_ == o.rows_ && cols_ == o.cols_;
    }

    ComplexMatrix& operator+=(const ComplexMatrix& o)
    {
        check_same_shape(o, "+=");
        for (std::size_t k = 0; k < data_.size(); ++k)
        {
            data_[k] += o.data_[k];
        }
        return *this;
    }

    ComplexMatrix& operator-=(const ComplexMatrix& o)
    {
        check_same_shape(o, "-=");
        for (std::size_t k = 0; k < data_.size(); ++k)
        {
            data_[k] -= o.data_[k];
        }
        return *this;
    }

    ComplexMatrix& operator*=(cplx s) noexcept
    {
        for (auto& z : data_)
        {
            z *= s;
        }
        return *this;
    }

    friend ComplexMatrix operator+(ComplexMatrix a, const ComplexMatrix& b)
    {
        a += b;
        return a;
    }
    friend ComplexMatrix operator-(ComplexMatrix a, const ComplexMatrix& b)
    {
        a -= b;
        return a;
    }
    friend ComplexMatrix operator*(cplx s, ComplexMatrix a)
    {
        a *= s;
        return a;
    }
    friend ComplexMatrix operator*(ComplexMatrix a, cplx s)
    {
        a *= s;
        return a;
    }

    bool operator==(const ComplexMatrix&) const = default;

   private:
    void check_same_shape(const ComplexMatrix& o, const char* op) const
    {
        if (!same_shape(o))
        {
            throw DimensionError(
                std::string("ComplexMatrix ") + op + ": shape mismatch "
                + std::to_string(rows_) + "x" + std::to_string(cols_) + " vs "
                + std::to_string(o.rows_) + "x" + std::to_string(o.cols_));
        }
    }

    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<cplx> data_;
};

using ChannelMatrix = ComplexMatrix;

inline ComplexMatrix matmul(const ComplexMatrix& a, const ComplexMatrix& b)
{
    if (a.cols() != b.rows())
    {
        throw DimensionError(
            "matmul: inner dimensions " + std::to_string(a.cols()) + " and "
            + std::to_string(b.rows()) + " differ");
    }
    ComplexMatrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
    {
        for (std::size_t k = 0; k < a.cols(); ++k)
        {
            const cplx aik = a(i, k);
            for (std::size_t j = 0; j < b.cols(); ++j)
            {
                c(i, j) += aik * b(k, j);
            }
        }
    }
    return c;
}

inline ComplexMatrix adjoint(const ComplexMatrix& a)
{
    ComplexMatrix t(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
    {
        for (std::size_t j = 0; j < a.cols(); ++j)
        {
            t(j, i) = std::conj(a(i, j));
        }
    }
    return t;
}

inline double frobenius_norm_sq(const ComplexMatrix& a) noexcept
{
    double s = 0.0;
    for (const auto& z : a.data())
    {
        s += std::norm(z);
    }
    return s;
}

inline double frobenius_norm(const ComplexMatrix& a) noexcept
{
    return std::sqrt(frobenius_norm_sq(a));
}

inline double frobenius_distance(const ComplexMatrix& a, const ComplexMatrix& b)
{
    return frobenius_norm(a - b);
}

inline cplx trace(const ComplexMatrix& a)
{
    require(a.is_square(), "trace: matrix is not square");
    cplx s{0.0, 0.0};
    for (std::size_t i = 0; i < a.rows(); ++i)
    {
        s += a(i, i);
    }
    return s;
}

// Row i of `a` as a 1 x cols matrix.
inline ComplexMatrix row_of(const ComplexMatrix& a, std::size_t i)
{
    ComplexMatrix r(1, a.cols());
    for (std::size_t j = 0; j < a.cols(); ++j)
    {
        r(0, j) = a(i, j);
    }
    return r;
}

/// Antenna and pilot counts of a MIMO link.
struct SystemDims
{
    std::size_t n_r = 0;
    std::size_t n_t = 0;
    std::size_t n_p = 0;

    void validate() const
    {
        if (n_r == 0 || n_t == 0 || n_p == 0)
        {
            throw ContractError(
                "SystemDims: n_r, n_t and n_p must all be positive (got "
                + std::to_string(n_r) + ", " + std::to_string(n_t) + ", "
                + std::to_string(n_p) + ")");
        }
    }

    /// Pilot density N_p / N_t.
    double alpha() const noexcept
    {
        return static_cast<double>(n_p) / static_cast<double>(n_t);
    }

    bool operator==(const SystemDims&) const = default;
};

}  // namespace rcflow
