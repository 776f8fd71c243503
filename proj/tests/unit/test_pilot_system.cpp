// SPDX-License-Identifier: Apache-2.0
//
// gmmfb - GMM-based limited feedback for FDD MIMO systems
// Copyright (C) 2026 The gmmfb Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#include <gtest/gtest.h>

#include "test_util.hpp"

// Covered tests:
// - Pilot matrix entries, column norms and orthogonality of the full set
// - Strided column rule
// - Observation operator identity A vec(H) = vec(H P)
// - Noise statistics and reproducibility of observations

using namespace gmmfb;

TEST(PilotSystem, ScalarPilot)
{
    const CMatrix p = build_pilot_matrix(1, 1, 1, 1.0);
    ASSERT_EQ(p.rows(), 1);
    EXPECT_NEAR(std::abs(p(0, 0) - Complex(1.0)), 0.0, 1e-15);
}

TEST(PilotSystem, FullSetIsOrthogonal)
{
    const CMatrix p = build_pilot_matrix(4, 2, 8, 1.0);
    EXPECT_LT((p.adjoint() * p - CMatrix::Identity(8, 8)).norm(), 1e-12);
    const CMatrix p3 = build_pilot_matrix(2, 2, 4, 3.0);
    EXPECT_LT((p3.adjoint() * p3 - 3.0 * CMatrix::Identity(4, 4)).norm(), 1e-12);
}

TEST(PilotSystem, StridedKroneckerColumns)
{
    // 2 x 2 URA: columns 0 and 2 of F_2 kron F_2, expanded by hand
    const double rho = 2.0;
    const CMatrix p = build_pilot_matrix(2, 2, 2, rho);
    const double s = std::sqrt(rho) / 2.0;
    CMatrix ref(4, 2);
    // F_2 = [1 1; 1 -1] / sqrt(2); column 0 = f0 kron f0, column 2 = f1 kron f0
    ref.col(0) << s, s, s, s;
    ref.col(1) << s, s, -s, -s;
    EXPECT_LT((p - ref).norm(), 1e-14);
    for (int i = 0; i < 2; ++i) EXPECT_NEAR(p.col(i).squaredNorm(), rho, 1e-12);
    EXPECT_EQ(pilot_columns(16, 8), (std::vector<int>{0, 2, 4, 6, 8, 10, 12, 14}));
    EXPECT_EQ(pilot_columns(16, 3), (std::vector<int>{0, 5, 10}));
}

TEST(PilotSystem, InvalidArguments)
{
    EXPECT_THROW(build_pilot_matrix(2, 2, 5, 1.0), ArgumentError);
    EXPECT_THROW(build_pilot_matrix(2, 2, 0, 1.0), ArgumentError);
    EXPECT_THROW(build_pilot_matrix(2, 2, 2, 0.0), ArgumentError);
}

TEST(PilotSystem, ObservationOperator)
{
    Rng rng(2);
    const CMatrix p = build_pilot_matrix(4, 4, 6, 1.0);
    const CMatrix a1 = build_observation_operator(p, 1);
    EXPECT_EQ(a1, CMatrix(p.transpose()));
    for (int t = 0; t < 10; ++t) {
        const CMatrix h = test::random_matrix(rng, 3, 16);
        const CMatrix a = build_observation_operator(p, 3);
        ASSERT_EQ(a.rows(), 18);
        ASSERT_EQ(a.cols(), 48);
        EXPECT_LT((a * vec(h) - vec(h * p)).norm(), 1e-10);
    }
    const CMatrix full = build_pilot_matrix(2, 2, 4, 1.0);
    const CMatrix af = build_observation_operator(full, 2);
    EXPECT_LT((af.adjoint() * af - CMatrix::Identity(8, 8)).norm(), 1e-12);
}

TEST(PilotSystem, NoiselessObservation)
{
    Rng rng(3);
    const auto obs = make_observation_model(4, 4, 2, 8, 1.0, 0.0);
    const CMatrix h = test::random_matrix(rng, 2, 16);
    EXPECT_EQ(observe(h, obs, rng), vec(h * obs.pilots));
}

TEST(PilotSystem, NoiseVariance)
{
    Rng rng(4);
    const double sigma2 = 0.3;
    const auto obs = make_observation_model(2, 2, 2, 2, 1.0, sigma2);
    const CMatrix h = CMatrix::Zero(2, 4);
    double acc = 0.0;
    const int draws = 100000;
    for (int i = 0; i < draws; ++i) acc += observe(h, obs, rng).squaredNorm();
    EXPECT_NEAR(acc / draws / 4.0, sigma2, 0.03 * sigma2);

    const CMatrix h2 = test::random_matrix(rng, 2, 4);
    double err = 0.0;
    for (int i = 0; i < 20000; ++i) err += (observe(h2, obs, rng) - obs.A() * vec(h2)).squaredNorm();
    EXPECT_NEAR(err / 20000, 4.0 * sigma2, 0.03 * 4.0 * sigma2);
}

TEST(PilotSystem, Reproducible)
{
    const auto obs = make_observation_model(2, 2, 2, 3, 1.0, 0.1);
    Rng a(9), b(9), c(10);
    const CMatrix h = CMatrix::Ones(2, 4);
    EXPECT_EQ(observe(h, obs, a), observe(h, obs, b));
    EXPECT_NE(observe(h, obs, a), observe(h, obs, c));
    EXPECT_THROW(observe(CMatrix::Ones(3, 4), obs, a), ArgumentError);
}
