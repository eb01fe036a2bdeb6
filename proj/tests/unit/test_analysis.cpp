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

#include <cmath>

#include "test_util.hpp"

namespace rcflow
{
namespace
{

using testing::random_matrix;

ProjectionContext context_with_eigs(std::vector<double> eigs)
{
    ProjectionContext ctx;
    ctx.lambda_eigs = std::move(eigs);
    return ctx;
}

TEST(RhoP, Examples)
{
    EXPECT_EQ(rho_p_analytic(context_with_eigs({0.0, 0.0}), 0.7), 1.0);
    EXPECT_DOUBLE_EQ(rho_p_analytic(context_with_eigs({4.0, 1.0}), 1.0), 0.5);
    EXPECT_THROW(rho_p_analytic(context_with_eigs({1.0}), 0.0), ContractError);
}

TEST(RhoP, MatchesPowerIterationOnTheLinearPart)
{
    Rng rng(1);
    for (int trial = 0; trial < 20; ++trial)
    {
        const SystemDims dims{testing::uniform_size(rng, 1, 4), testing::uniform_size(rng, 2, 16),
                              testing::uniform_size(rng, 1, 12)};
        const auto ctx = precompute_projection(testing::random_measurement(dims, 0.5 + rng.uniform(), rng));
        const double w = 0.05 + 0.95 * rng.uniform();
        const MatrixMap lin = [&](const ComplexMatrix& x) {
            return proximal_project(x, w, ctx) - proximal_project(ComplexMatrix(x.rows(), x.cols()), w, ctx);
        };
        const auto est = spectral_radius_fd(lin, ComplexMatrix(dims.n_r, dims.n_t), 1e-3, 2000, 1e-13, rng);
        const double expect = rho_p_analytic(ctx, w);
        ASSERT_NEAR(est.value, expect, 1e-6) << trial;
    }
}

TEST(RhoPProperty, InUnitIntervalAndStrictlyBelowOneWithPositiveSpectrum)
{
    Rng rng(2);
    for (int trial = 0; trial < 500; ++trial)
    {
        const double lmin = trial % 3 == 0 ? 0.0 : 10.0 * rng.uniform();
        const double w = 1.0 - rng.uniform();
        const double r = rho_p_analytic(context_with_eigs({lmin + 1.0, lmin}), w);
        ASSERT_GT(r, 0.0);
        ASSERT_LE(r, 1.0);
        if (lmin > 0.0)
        {
            ASSERT_LT(r, 1.0);
        }
    }
}

TEST(SpectralRadiusFd, ScalarMultiple)
{
    Rng rng(3);
    const MatrixMap op = [](const ComplexMatrix& x) { return x * 0.5; };
    const auto est = spectral_radius_fd(op, random_matrix(3, 3, rng), 1e-5, 300, 1e-12, rng);
    EXPECT_NEAR(est.value, 0.5, 1e-6);
    EXPECT_TRUE(est.converged);
}

TEST(SpectralRadiusFd, DiagonalMap)
{
    Rng rng(4);
    const double d[] = {1.0, 2.0, 3.0};
    const auto diag = ComplexMatrix::diagonal(d);
    const MatrixMap op = [&](const ComplexMatrix& x) { return matmul(diag, x); };
    const auto est = spectral_radius_fd(op, random_matrix(3, 1, rng), 1e-5, 300, 1e-12, rng);
    EXPECT_NEAR(est.value, 3.0, 1e-4);
}

TEST(SpectralRadiusFd, NonlinearMapUsesTheJacobian)
{
    Rng rng(5);
    // op(x) = x .* x elementwise on a real point: Jacobian diag(2 x)
    const ComplexMatrix point(1, 3, {1.0, -2.5, 0.5});
    const MatrixMap op = [](const ComplexMatrix& x) {
        ComplexMatrix y(x.rows(), x.cols());
        for (std::size_t k = 0; k < x.size(); ++k)
        {
            y.data()[k] = cplx{x.data()[k].real() * x.data()[k].real(), x.data()[k].imag()};
        }
        return y;
    };
    const auto est = spectral_radius_fd(op, point, 1e-5, 500, 1e-12, rng);
    EXPECT_NEAR(est.value, 5.0, 1e-4);
}

TEST(SpectralRadiusFd, NonFiniteOutputIsNumericError)
{
    Rng rng(6);
    const MatrixMap op = [](const ComplexMatrix& x) {
        auto y = x;
        y *= 1e308;
        y *= 1e308;
        return y;
    };
    EXPECT_THROW(spectral_radius_fd(op, ComplexMatrix(2, 2), 1e-5, 10, 1e-9, rng), NumericError);
    EXPECT_THROW(spectral_radius_fd(op, ComplexMatrix(2, 2), 0.0, 10, 1e-9, rng), ContractError);
}

TEST(SpectralRadiusFdProperty, KnownLinearMapsWithin200Iterations)
{
    Rng rng(7);
    for (int trial = 0; trial < 50; ++trial)
    {
        const std::size_t n = testing::uniform_size(rng, 2, 8);
        // Hermitian map with a separated top eigenvalue
        const auto q = hermitian_evd(testing::random_hermitian(n, rng)).u;
        std::vector<double> d(n);
        const double top = 0.1 + 2.0 * rng.uniform();
        d[0] = top;
        for (std::size_t k = 1; k < n; ++k)
        {
            d[k] = top * (0.6 * rng.uniform()) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
        }
        const auto a = reassemble(q, d);
        const MatrixMap op = [&](const ComplexMatrix& x) { return matmul(a, x); };
        const auto est = spectral_radius_fd(op, random_matrix(n, 2, rng), 1e-5, 200, 1e-14, rng);
        ASSERT_NEAR(est.value, top, 1e-3 * top) << trial;
        ASSERT_LE(est.iterations, 200u);
    }
}

TEST(SpectralReport, GaussianFieldMatchesClosedFormProduct)
{
    Rng rng(8);
    const SystemDims dims{4, 16, 10};
    const auto meas = testing::random_measurement(dims, snr_to_sigma(10.0, SnrConvention::PilotDomain, 16), rng);
    const auto ctx = precompute_projection(meas);
    SolverConfig c;
    c.n_outer = 2;
    c.n_inner = 15;
    const auto report = spectral_report(meas, GaussianAnalyticField::identity(16), c);
    ASSERT_EQ(report.steps.size(), 30u);
    for (const auto& s : report.steps)
    {
        const double closed = 1.0 / ((s.w * ctx.lambda_min() + 1.0) * (1.0 + s.t * s.t));
        EXPECT_LT(s.rho_t, 1.0);
        EXPECT_NEAR(s.rho_t, closed, 1e-3 * closed);
        EXPECT_NEAR(s.rho_d, 1.0 / (1.0 + s.t * s.t), 1e-6);
        EXPECT_DOUBLE_EQ(s.rho_p, rho_p_analytic(ctx, s.w));
        // commuting linear case: rho_T = rho_P rho_D
        EXPECT_LE(s.rho_t, s.rho_p * s.rho_d * (1.0 + 1e-9));
        EXPECT_NEAR(s.rho_t, s.rho_p * s.rho_d, 1e-3 * s.rho_t);
        EXPECT_GE(s.rho_d, 0.0);
    }
}

TEST(SpectralReport, RhoPIncreasesAlongTheInnerLoop)
{
    Rng rng(9);
    const auto meas = testing::random_measurement({2, 8, 8}, 0.5, rng);
    SolverConfig c;
    c.n_outer = 1;
    c.n_inner = 20;
    const auto report = spectral_report(meas, GaussianAnalyticField::identity(8), c);
    for (std::size_t k = 1; k < report.steps.size(); ++k)
    {
        EXPECT_GT(report.steps[k].rho_p, report.steps[k - 1].rho_p);
    }
}

TEST(SpectralReport, DenoiserRadiusApproachesOneAsTimeVanishes)
{
    Rng rng(10);
    const auto meas = testing::random_measurement({2, 8, 4}, 0.5, rng);
    SolverConfig c;
    c.n_outer = 1;
    c.n_inner = 200;
    c.lambda = 2.0;
    const auto report = spectral_report(meas, GaussianAnalyticField::identity(8), c);
    const auto& last = report.steps.back();
    EXPECT_LT(last.t, 1e-4);
    EXPECT_NEAR(last.rho_d, 1.0, 1e-6);
}

TEST(PartitionOfUnity, Examples)
{
    for (const double b : {0.5, 1.0, 2.0, 16.0})
    {
        EXPECT_EQ(partition_of_unity(1, b), 1.0);
    }
    EXPECT_NEAR(partition_of_unity(50, 2.0), 1.0, 1e-12);
    EXPECT_NEAR(partition_of_unity(50, 16.0), 1.0, 1e-12);
    EXPECT_THROW(partition_of_unity(0, 2.0), ContractError);
}

TEST(PartitionOfUnityProperty, FullGrid)
{
    for (std::size_t n = 1; n <= 200; ++n)
    {
        for (const double b : {0.5, 1.0, 2.0, 4.0, 8.0, 16.0})
        {
            ASSERT_NEAR(partition_of_unity(n, b), 1.0, 1e-12) << n << " " << b;
        }
    }
}

TEST(DynamicsSummary, Examples)
{
    const auto mono = dynamics_summary({-1.0, -2.0, -3.0, -4.0});
    EXPECT_EQ(mono.sweet_spot_index, 3u);
    const auto dip = dynamics_summary({-5.0, -8.0, -7.0, -6.0});
    EXPECT_EQ(dip.sweet_spot_index, 1u);
    EXPECT_EQ(dip.sweet_spot_nmse, -8.0);
    EXPECT_EQ(dip.plateau_nmse, -6.0);
    EXPECT_EQ(dynamics_summary({-3.0, -3.0, -3.0}).sweet_spot_index, 0u);
    EXPECT_THROW(dynamics_summary({}), ContractError);
}

TEST(DynamicsSummary, PlateauAveragesTheLastTenPercent)
{
    std::vector<double> v(20);
    for (std::size_t k = 0; k < 20; ++k)
    {
        v[k] = -static_cast<double>(k);
    }
    EXPECT_DOUBLE_EQ(dynamics_summary(v).plateau_nmse, -18.5);
}

TEST(DynamicsSummaryProperty, SweetSpotIsTheMinimum)
{
    Rng rng(11);
    for (int trial = 0; trial < 200; ++trial)
    {
        std::vector<double> v(testing::uniform_size(rng, 1, 40));
        for (auto& x : v)
        {
            x = std::round(-20.0 * rng.uniform());
        }
        const auto s = dynamics_summary(v);
        ASSERT_EQ(s.sweet_spot_nmse, *std::min_element(v.begin(), v.end()));
        for (std::size_t k = 0; k < s.sweet_spot_index; ++k)
        {
            ASSERT_GT(v[k], s.sweet_spot_nmse);
        }
    }
}

TEST(BoundedDenoiser, ZeroFieldGivesTheRadius)
{
    Rng rng(12);
    EXPECT_NEAR(bounded_denoiser_estimate(ZeroField{}, 2, 4, 3.0, 10, rng), 3.0, 1e-12);
}

TEST(BoundedDenoiser, GaussianFieldStaysInsideTheBall)
{
    Rng rng(13);
    const double b = bounded_denoiser_estimate(GaussianAnalyticField::identity(4), 2, 4, 3.0, 50, rng);
    EXPECT_LE(b, 3.0 + 1e-12);
    // t = 0 is on the grid, where D is the identity
    EXPECT_NEAR(b, 3.0, 1e-12);
}

TEST(BoundedDenoiser, RejectsEmptyProbeSet)
{
    Rng rng(14);
    EXPECT_THROW(bounded_denoiser_estimate(ZeroField{}, 2, 4, 1.0, 0, rng), ContractError);
    EXPECT_THROW(bounded_denoiser_estimate(ZeroField{}, 2, 4, 0.0, 5, rng), ContractError);
}

}  // namespace
}  // namespace rcflow
