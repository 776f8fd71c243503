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
// - Rate selection over covariance codebooks: dominance, K = 1, exhaustive oracle
// - Subspace rate metric: dominant subspace wins, rotation invariance
// - Responsibility selection from observations and from perfect CSI
// - Chordal selection: exact match, orthogonal complement, exhaustive oracle
// - Tie-breaking and argument checks

using namespace gmmfb;

namespace {

CMatrix random_semi_unitary(Rng& rng, int n, int r)
{
    Eigen::HouseholderQR<CMatrix> qr(test::random_matrix(rng, n, r));
    return CMatrix(qr.householderQ()).leftCols(r);
}

GmmModel separated_model(Rng& rng, std::size_t k, int nrx, int ntx)
{
    GmmModel m = test::random_full_model(rng, k, nrx, ntx);
    for (std::size_t i = 0; i < k; ++i) m.means[i] *= 20.0;
    return m;
}

}  // namespace

TEST(SelectRateCov, OptimumDominatesZeroEntries)
{
    Rng rng(1);
    const CMatrix h = test::random_matrix(rng, 2, 4);
    CovCodebook cb;
    cb.entries.assign(8, CMatrix::Zero(4, 4));
    cb.entries[5] = waterfilling_capacity(h, 2.0, 0.5).q;
    const auto idx = select_by_rate_cov(h, cb, 0.5);
    EXPECT_EQ(idx.index, 5u);
    EXPECT_EQ(idx.method, FeedbackMethod::RateCov);
}

TEST(SelectRateCov, SingleEntryAndTies)
{
    Rng rng(2);
    const CMatrix h = test::random_matrix(rng, 2, 3);
    CovCodebook one;
    one.entries = {test::random_covariance(rng, 3, 1.0)};
    EXPECT_EQ(select_by_rate_cov(h, one, 1.0).index, 0u);
    CovCodebook same;
    same.entries.assign(4, one.entries[0]);
    EXPECT_EQ(select_by_rate_cov(h, same, 1.0).index, 0u);
    EXPECT_THROW(select_by_rate_cov(test::random_matrix(rng, 2, 4), one, 1.0), ArgumentError);
    EXPECT_THROW(select_by_rate_cov(h, CovCodebook{}, 1.0), ArgumentError);
}

TEST(SelectRateCov, ExhaustiveOracle)
{
    Rng rng(3);
    for (int t = 0; t < 100; ++t) {
        CovCodebook cb;
        for (int k = 0; k < 4; ++k) cb.entries.push_back(test::random_covariance(rng, 4, 3.0, 1 + k % 3));
        const CMatrix h = test::random_matrix(rng, 2, 4);
        std::vector<double> rates;
        for (const auto& q : cb.entries) rates.push_back(test::ref_rate(h, q, 0.4));
        const auto idx = select_by_rate_cov(h, cb, 0.4);
        EXPECT_EQ(idx.index, argmax_first(rates));
        for (double r : rates) EXPECT_GE(rates[idx.index], r);
    }
}

TEST(SelectRateSubspace, DominantSubspaceWins)
{
    Rng rng(4);
    for (int t = 0; t < 50; ++t) {
        const CMatrix h = test::random_matrix(rng, 2, 6);
        DirCodebook cb;
        for (int k = 0; k < 16; ++k) cb.entries.push_back(random_semi_unitary(rng, 6, 2));
        cb.entries[static_cast<std::size_t>(t % 16)] = dominant_right_subspace(h, 2);
        std::vector<double> metric;
        for (const auto& w : cb.entries) {
            const CMatrix q = w * w.adjoint() * (3.0 / 2.0);
            metric.push_back(test::ref_rate(h, q, 0.5));
        }
        const auto idx = select_by_rate_subspace(h, cb, 3.0, 0.5);
        EXPECT_EQ(idx.index, static_cast<std::size_t>(t % 16));
        EXPECT_EQ(idx.index, argmax_first(metric));
        EXPECT_NEAR(subspace_metric(h, cb.entries[idx.index], 3.0, 0.5), metric[idx.index], 1e-10);
    }
}

TEST(SelectRateSubspace, RotationInvariantAndSingleEntry)
{
    Rng rng(5);
    const CMatrix h = test::random_matrix(rng, 2, 4);
    DirCodebook cb, rotated;
    for (int k = 0; k < 8; ++k) {
        cb.entries.push_back(random_semi_unitary(rng, 4, 2));
        rotated.entries.push_back(cb.entries.back() * random_semi_unitary(rng, 2, 2));
        EXPECT_NEAR(subspace_metric(h, cb.entries.back(), 1.0, 0.1), subspace_metric(h, rotated.entries.back(), 1.0, 0.1),
                    1e-12);
    }
    EXPECT_EQ(select_by_rate_subspace(h, cb, 1.0, 0.1).index, select_by_rate_subspace(h, rotated, 1.0, 0.1).index);
    DirCodebook one;
    one.entries = {cb.entries[3]};
    EXPECT_EQ(select_by_rate_subspace(h, one, 1.0, 0.1).index, 0u);
}

TEST(SelectResponsibility, ObservedMeansPickTheirComponent)
{
    Rng rng(6);
    const GmmModel m = separated_model(rng, 6, 2, 2);
    const CMatrix a = test::random_matrix(rng, 4, 4);
    const AdaptedGmm ad = adapt_to_observation(m, a, 1e-8);
    for (std::size_t k = 0; k < m.size(); ++k) {
        const auto idx = select_by_responsibility(ad, CVector(a * m.means[k]));
        EXPECT_EQ(idx.index, k);
        EXPECT_EQ(idx.method, FeedbackMethod::Responsibility);
    }
    EXPECT_THROW(select_by_responsibility(ad, CVector::Zero(3)), ArgumentError);
}

TEST(SelectResponsibility, SingleAndEqualComponents)
{
    Rng rng(7);
    GmmModel m = test::random_full_model(rng, 1, 2, 1);
    const CMatrix a = CMatrix::Identity(2, 2);
    EXPECT_EQ(select_by_responsibility(adapt_to_observation(m, a, 0.1), complex_normal_vector(rng, 2)).index, 0u);
    m.weights = {0.25, 0.25, 0.25, 0.25};
    m.means.assign(4, m.means[0]);
    m.covariances.assign(4, m.covariances[0]);
    const AdaptedGmm ad = adapt_to_observation(m, a, 0.1);
    for (int t = 0; t < 10; ++t) EXPECT_EQ(select_by_responsibility(ad, complex_normal_vector(rng, 2, 4.0)).index, 0u);
    EXPECT_EQ(select_by_responsibility_perfect(m, complex_normal_vector(rng, 2)).index, 0u);
}

TEST(SelectResponsibilityPerfect, MeansAndLogDomainConsistency)
{
    Rng rng(8);
    const GmmModel m = separated_model(rng, 5, 2, 3);
    const GmmDensity dens(m);
    for (std::size_t k = 0; k < m.size(); ++k) {
        const auto idx = select_by_responsibility_perfect(dens, m.means[k]);
        EXPECT_EQ(idx.index, k);
        EXPECT_EQ(idx.method, FeedbackMethod::ResponsibilityPerfect);
    }
    const GmmModel g = test::random_full_model(rng, 5, 2, 2, 0.5);
    for (int t = 0; t < 100; ++t) {
        const CVector h = complex_normal_vector(rng, 4);
        std::vector<double> lj;
        for (std::size_t k = 0; k < g.size(); ++k)
            lj.push_back(std::log(g.weights[k]) + test::ref_log_normal(h, g.means[k], g.covariances[k]));
        EXPECT_EQ(select_by_responsibility_perfect(g, h).index, argmax_first(lj));
        EXPECT_EQ(select_by_responsibility_perfect(g, h).index, argmax_first(responsibilities(g, h)));
    }
}

TEST(SelectResponsibilityPerfect, AgreesWithNoiselessObservations)
{
    Rng rng(9);
    const GmmModel m = test::random_kronecker_model(rng, 4, 2, 2, 3);
    const CMatrix a = test::random_matrix(rng, 6, 6) + 2.0 * CMatrix::Identity(6, 6);
    const AdaptedGmm ad = adapt_to_observation(m, a, 1e-10);
    const GmmDensity dens(m);
    int agree = 0;
    const int n = 1000;
    std::discrete_distribution<int> pick(m.weights.begin(), m.weights.end());
    for (int i = 0; i < n; ++i) {
        const CVector h = sample_component(m, static_cast<std::size_t>(pick(rng)), rng);
        agree += select_by_responsibility(ad, CVector(a * h)).index == select_by_responsibility_perfect(dens, h).index;
    }
    EXPECT_GE(agree, 990);
}

TEST(SelectChordal, ExactMatchAndComplement)
{
    Rng rng(10);
    const CMatrix full = random_semi_unitary(rng, 4, 4);
    const CMatrix v = full.leftCols(2);
    const CMatrix comp = full.rightCols(2);
    EXPECT_NEAR(chordal_distance_sq(v, comp), 2.0, 1e-12);
    EXPECT_NEAR(chordal_distance_sq(v, v), 0.0, 1e-12);
    DirCodebook cb;
    cb.entries = {comp, random_semi_unitary(rng, 4, 2), v, comp};
    const auto idx = select_by_chordal(v, cb);
    EXPECT_EQ(idx.index, 2u);
    EXPECT_EQ(idx.method, FeedbackMethod::Chordal);
    DirCodebook only_comp;
    only_comp.entries = {comp, v};
    EXPECT_EQ(select_by_chordal(v, only_comp).index, 1u);
}

TEST(SelectChordal, ExhaustiveOracleAndTies)
{
    Rng rng(11);
    for (int t = 0; t < 100; ++t) {
        const CMatrix v = random_semi_unitary(rng, 6, 2);
        DirCodebook cb;
        std::vector<double> neg;
        for (int k = 0; k < 8; ++k) {
            cb.entries.push_back(random_semi_unitary(rng, 6, 2));
            const CMatrix p = v.adjoint() * cb.entries.back() * cb.entries.back().adjoint() * v;
            neg.push_back(-(2.0 - p.trace().real()));
        }
        EXPECT_EQ(select_by_chordal(v, cb).index, argmax_first(neg));
    }
    const CMatrix v = random_semi_unitary(rng, 3, 1);
    DirCodebook twins;
    twins.entries = {random_semi_unitary(rng, 3, 1), v, v};
    EXPECT_EQ(select_by_chordal(v, twins).index, 1u);
    EXPECT_THROW(select_by_chordal(random_semi_unitary(rng, 4, 1), twins), ArgumentError);
}

TEST(DominantSubspace, RightSingularVectors)
{
    Rng rng(12);
    const CMatrix h = test::random_matrix(rng, 2, 5);
    const CMatrix v = dominant_right_subspace(h, 2);
    EXPECT_LT((v.adjoint() * v - CMatrix::Identity(2, 2)).norm(), 1e-12);
    // the rows of H lie in span(V)
    EXPECT_LT((h - h * v * v.adjoint()).norm(), 1e-12 * h.norm());
    const RVector lam = eig_descending(CMatrix(h.adjoint() * h)).values;
    EXPECT_NEAR((h * v.col(0)).squaredNorm(), lam[0], 1e-10 * lam[0]);
}
