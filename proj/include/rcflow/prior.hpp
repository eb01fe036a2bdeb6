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

// Velocity-field contract and the closed-form Gaussian-prior field.

#include <concepts>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "rcflow/core.hpp"
#include "rcflow/linalg.hpp"

namespace rcflow
{

/// Anything that maps (state, t) to a velocity of the same shape.
template <class F>
concept VelocityField = requires(const F& f, const ComplexMatrix& h, double t) {
    { f.eval(h, t) } -> std::same_as<ComplexMatrix>;
};

inline void check_time(double t, const char* who)
{
    if (!(t >= 0.0 && t <= 1.0))
    {
        throw ContractError(std::string(who) + ": t must lie in [0, 1], got "
                            + std::to_string(t));
    }
}

struct ZeroField
{
    ComplexMatrix eval(const ComplexMatrix& h, double t) const
    {
        check_time(t, "ZeroField");
        return ComplexMatrix(h.rows(), h.cols());
    }
};

/**
 * Exact marginal velocity E[H1 - H0 | H_t = h] for the straight path
 * H_t = (1-t) H0 + t H1 with H1 = H0 + N, N ~ CN(0, sigma_fm^2 I), and rows
 * of H0 i.i.d. CN(mean_row, row_cov). Per row:
 *
 *   v = t sigma_fm^2 (h - mean_row) (row_cov + t^2 sigma_fm^2 I)^{-1}
 *
 * so the implied denoiser h - t v is the Gaussian MMSE denoiser.
 */
class GaussianAnalyticField
{
   public:
    GaussianAnalyticField(ComplexMatrix row_cov, ComplexMatrix mean = {},
                          double sigma_fm = 1.0)
        : row_cov_(std::move(row_cov)), mean_(std::move(mean)), sigma_fm_(sigma_fm)
    {
        require(sigma_fm_ > 0.0, "GaussianAnalyticField: sigma_fm must be positive");
        auto evd = hermitian_evd(row_cov_);
        if (!evd.lambda.empty() && evd.lambda.back() < -1e-12)
        {
            throw ContractError("GaussianAnalyticField: row_cov is not PSD");
        }
        for (auto& l : evd.lambda)
        {
            l = std::max(l, 0.0);
        }
        u_ = std::move(evd.u);
        eig_ = std::move(evd.lambda);
    }

    static GaussianAnalyticField identity(std::size_t n_t, double sigma_fm = 1.0)
    {
        return GaussianAnalyticField(ComplexMatrix::identity(n_t), {}, sigma_fm);
    }

    ComplexMatrix eval(const ComplexMatrix& h, double t) const
    {
        check_time(t, "GaussianAnalyticField::eval");
        if (h.cols() != row_cov_.rows())
        {
            throw DimensionError("GaussianAnalyticField::eval: state has "
                                 + std::to_string(h.cols()) + " columns, prior expects "
                                 + std::to_string(row_cov_.rows()));
        }
        if (!mean_.empty() && !mean_.same_shape(h))
        {
            throw DimensionError("GaussianAnalyticField::eval: mean shape mismatch");
        }
        if (t == 0.0)
        {
            return ComplexMatrix(h.rows(), h.cols());
        }
        const double s2 = sigma_fm_ * sigma_fm_;
        const double noise = t * t * s2;
        std::vector<double> gain(eig_.size());
        for (std::size_t i = 0; i < gain.size(); ++i)
        {
            gain[i] = t * s2 / (eig_[i] + noise);
        }
        ComplexMatrix centred = mean_.empty() ? h : h - mean_;
        return matmul(centred, reassemble(u_, gain));
    }

    /// Largest eigenvalue of the denoiser Jacobian, max_i c_i / (c_i + t^2 sigma_fm^2).
    double denoiser_spectral_radius(double t) const
    {
        check_time(t, "GaussianAnalyticField::denoiser_spectral_radius");
        const double noise = t * t * sigma_fm_ * sigma_fm_;
        double best = 0.0;
        for (const double c : eig_)
        {
            best = std::max(best, (c + noise) > 0.0 ? c / (c + noise) : 1.0);
        }
        return best;
    }

    const ComplexMatrix& row_cov() const noexcept { return row_cov_; }
    const ComplexMatrix& mean() const noexcept { return mean_; }
    double sigma_fm() const noexcept { return sigma_fm_; }

   private:
    ComplexMatrix row_cov_;
    ComplexMatrix mean_;
    double sigma_fm_;
    ComplexMatrix u_;
    std::vector<double> eig_;
};

/// Type-erased field for callers that pick the prior at run time.
class AnyField
{
   public:
    template <VelocityField F>
    explicit AnyField(F field)
        : impl_(std::make_shared<const F>(std::move(field))),
          eval_([](const void* p, const ComplexMatrix& h, double t) {
              return static_cast<const F*>(p)->eval(h, t);
          })
    {
    }

    ComplexMatrix eval(const ComplexMatrix& h, double t) const
    {
        return eval_(impl_.get(), h, t);
    }

   private:
    std::shared_ptr<const void> impl_;
    ComplexMatrix (*eval_)(const void*, const ComplexMatrix&, double);
};

}  // namespace rcflow
