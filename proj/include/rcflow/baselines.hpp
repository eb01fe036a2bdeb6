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
#include <limits>

#include "rcflow/core.hpp"
#include "rcflow/linalg.hpp"
#include "rcflow/measurement.hpp"

namespace rcflow
{

/// F = (P^H R_H P + sigma^2 I)^{-1} P^H R_H, so that H_lmmse = Y F.
struct LmmseContext
{
    ComplexMatrix r_h;
    ComplexMatrix factor;
    double condition = 1.0;  // of the inner N_p x N_p matrix

    bool ill_conditioned() const noexcept { return condition > 1e12; }
};

inline LmmseContext make_lmmse_context(const PilotMatrix& pilots, double sigma_pilot,
                                       const ComplexMatrix& r_h)
{
    const auto& p = pilots.matrix();
    if (r_h.rows() != p.rows() || r_h.cols() != p.rows())
    {
        throw DimensionError("lmmse: R_H must be N_t x N_t");
    }
    if (!is_hermitian(r_h))
    {
        throw ContractError("lmmse: R_H is not Hermitian");
    }
    const auto ph = adjoint(p);
    const auto ph_r = matmul(ph, r_h);
    auto inner = matmul(ph_r, p);
    for (std::size_t i = 0; i < inner.rows(); ++i)
    {
        inner(i, i) += sigma_pilot * sigma_pilot;
    }
    LmmseContext ctx;
    ctx.r_h = r_h;
    const auto evd = hermitian_evd(inner);
    const double hi = evd.lambda.front();
    const double lo = evd.lambda.back();
    ctx.condition = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
    ctx.factor = solve(inner, ph_r);
    return ctx;
}

inline ChannelMatrix lmmse(const ComplexMatrix& y, const LmmseContext& ctx)
{
    if (y.cols() != ctx.factor.rows())
    {
        throw DimensionError("lmmse: Y pilot count differs from the context");
    }
    return matmul(y, ctx.factor);
}

inline ChannelMatrix lmmse(const Measurement& meas, const ComplexMatrix& r_h)
{
    return lmmse(meas.y, make_lmmse_context(meas.pilots, meas.sigma_pilot, r_h));
}

/// Minimum-norm minimizer of ||Y - HP||_F, H = Y (P^H P)^+ P^H.
inline ChannelMatrix least_squares(const Measurement& meas)
{
    const auto& p = meas.pilots.matrix();
    if (meas.y.cols() != p.cols())
    {
        throw DimensionError("least_squares: Y and P pilot counts differ");
    }
    const auto ph = adjoint(p);
    const auto pinv = matmul(psd_pseudo_inverse(matmul(ph, p)), ph);
    return matmul(meas.y, pinv);
}

}  // namespace rcflow
