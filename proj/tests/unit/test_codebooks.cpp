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
// - Spectral efficiency closed forms and determinant oracle
// - Projection onto the trace-capped PSD cone against a bisection oracle
// - PGA: water-filling optimum, scalar channels, warm start, monotone objective
// - Lau update: singleton, isotropic limit, full budget
// - Lloyd codebook: K = 1, orthogonal singletons, monotone stages, empty clusters
// - GMM codebook: K = 1, labeled partition, feasibility, data-free components
// - Component Gram matrix against Monte Carlo
// - Directional extraction and random Grassmann codebooks

using namespace gmmfb;

namespace {

ChannelDataset make_dataset(std::vector<CMatrix> hs)
{
    ChannelDataset ds;
    ds.channels = std::move(hs);
    return ds;
}

ChannelDataset random_dataset(Rng& rng, int count, int nrx, int ntx)
{
    const CMatrix mix = test::random_matrix(rng, ntx, ntx);
    std::vector<CMatrix> hs;
    for (int i = 0; i < count; ++i) hs.push_back(test::random_matrix(rng, nrx, ntx) * mix);
    return make_dataset(std::move(hs));
}

// Capped-simplex projection by bisection on the threshold.
RVector ref_capped_simplex(const RVector& v, double rho)
{
    if (v.cwiseMax(0.0).sum() <= rho) return v.cwiseMax(0.0);
    double lo = 0.0, hi = v.maxCoeff();
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        if ((v.array() - mid).cwiseMax(0.0).sum() > rho) lo = mid;
        else hi = mid;
    }
    return (v.array() - 0.5 * (lo + hi)).cwiseMax(0.0).matrix();
}

void expect_feasible(const CMatrix& q, double rho)
{
    EXPECT_LE(q.trace().real(), rho + 1e-8);
    EXPECT_GE(eig_descending(q).values.minCoeff(), -1e-10);
    EXPECT_LT((q - q.adjoint()).norm(), 1e-12 * std::max(1.0, q.norm()));
}

}  // namespace

TEST(SpectralEfficiency, ClosedForms)
{
    Rng rng(1);
    const CMatrix h = test::random_matrix(rng, 2, 3);
    EXPECT_EQ(spectral_efficiency(h, CMatrix::Zero(3, 3), 1.0), 0.0);
    EXPECT_NEAR(spectral_efficiency(CMatrix::Identity(2, 2), CMatrix::Identity(2, 2), 1.0), 2.0, 1e-15);
    const CMatrix not_psd = -CMatrix::Identity(3, 3);
    EXPECT_THROW(spectral_efficiency(h, not_psd, 1.0), ArgumentError);
    EXPECT_THROW(spectral_efficiency(h, CMatrix::Identity(2, 2), 1.0), ArgumentError);
}

TEST(SpectralEfficiency, TwoByTwoDeterminantExpansion)
{
    Rng rng(2);
    for (int t = 0; t < 50; ++t) {
        const CMatrix h = test::random_matrix(rng, 2, 2);
        const CMatrix q = test::random_covariance(rng, 2, 3.0);
        const double s2 = 0.7;
        const CMatrix m = CMatrix::Identity(2, 2) + h * q * h.adjoint() / s2;
        const double det = (m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0)).real();
        EXPECT_NEAR(spectral_efficiency(h, q, s2), std::log2(det), 1e-10);
    }
}

TEST(ProjectPsdTrace, EigenvalueExample)
{
    Rng rng(3);
    Eigen::HouseholderQR<CMatrix> qr(test::random_matrix(rng, 2, 2));
    const CMatrix u = qr.householderQ();
    RVector lam(2);
    lam << 2.0, -1.0;
    const CMatrix raw = u * lam.cast<Complex>().asDiagonal() * u.adjoint();
    // brute-force grid over the capped simplex
    double best = std::numeric_limits<double>::infinity();
    double b1 = 0.0, b2 = 0.0;
    for (int i = 0; i <= 400; ++i)
        for (int j = 0; i + j <= 400; ++j) {
            const double x = i / 400.0, y = j / 400.0;
            const double d = (x - 2.0) * (x - 2.0) + (y + 1.0) * (y + 1.0);
            if (d < best) {
                best = d;
                b1 = x;
                b2 = y;
            }
        }
    EXPECT_EQ(b1, 1.0);
    EXPECT_EQ(b2, 0.0);
    const CMatrix expect = u.col(0) * u.col(0).adjoint();
    EXPECT_LT((project_psd_trace(raw, 1.0) - expect).norm(), 1e-12);
}

TEST(ProjectPsdTrace, FeasibleUnchangedAndNegativeToZero)
{
    Rng rng(4);
    const CMatrix q = test::random_covariance(rng, 4, 0.8);
    EXPECT_LT((project_psd_trace(q, 1.0) - q).norm(), 1e-12);
    EXPECT_LT(project_psd_trace(-CMatrix::Identity(3, 3), 1.0).norm(), 1e-15);
}

TEST(ProjectPsdTrace, MatchesBisectionOracle)
{
    Rng rng(5);
    std::uniform_real_distribution<double> uni(-2.0, 3.0);
    for (int t = 0; t < 200; ++t) {
        RVector v(5);
        for (Eigen::Index i = 0; i < 5; ++i) v[i] = uni(rng);
        const double rho = 0.5 + 0.01 * t;
        const RVector p = project_capped_simplex(v, rho);
        EXPECT_LT((p - ref_capped_simplex(v, rho)).norm(), 1e-10);
        EXPECT_LE(p.sum(), rho + 1e-12);
        EXPECT_GE(p.minCoeff(), 0.0);
    }
    const CMatrix raw = hermitian_part(test::random_matrix(rng, 4, 4));
    const CMatrix q = project_psd_trace(raw, 1.5);
    expect_feasible(q, 1.5);
    // the projection is closer than any other feasible point we try
    for (int t = 0; t < 100; ++t) {
        const CMatrix other = test::random_covariance(rng, 4, 1.5 * (t + 1) / 100.0);
        EXPECT_LE((q - raw).norm(), (other - raw).norm() + 1e-12);
    }
}

TEST(Pga, OrthogonalRowsReachWaterfilling)
{
    Rng rng(6);
    Eigen::HouseholderQR<CMatrix> qr(test::random_matrix(rng, 4, 4));
    const CMatrix v = CMatrix(qr.householderQ()).leftCols(2);
    RVector s(2);
    s << 1.5, 0.4;
    const CMatrix h = s.cast<Complex>().asDiagonal() * v.adjoint();
    for (double rho : {0.3, 2.0, 20.0}) {
        RVector g = s.cwiseAbs2();
        const RVector p = waterfill(g, rho, 1.0);
        double cap = 0.0;
        for (int i = 0; i < 2; ++i) cap += std::log2(1.0 + g[i] * p[i]);
        PgaOptions opts;
        opts.max_iter = 2000;
        opts.tol = 1e-12;
        const PgaResult r = pga_sum_rate({h}, rho, 1.0, opts);
        EXPECT_LT(cap - r.objective.back(), 1e-4);
        EXPECT_LE(r.objective.back(), cap + 1e-12);
        expect_feasible(r.q, rho);
    }
}

TEST(Pga, ScalarChannelsUseFullPower)
{
    Rng rng(7);
    std::vector<CMatrix> cluster;
    for (int i = 0; i < 10; ++i) cluster.push_back(test::random_matrix(rng, 1, 1));
    const PgaResult r = pga_sum_rate(cluster, 2.5, 0.1);
    EXPECT_NEAR(r.q(0, 0).real(), 2.5, 1e-6);
}

TEST(Pga, StartAtOptimumStopsQuickly)
{
    Rng rng(8);
    const CMatrix h = test::random_matrix(rng, 2, 4);
    const CapacityResult opt = waterfilling_capacity(h, 3.0, 1.0);
    PgaOptions opts;
    const PgaResult r = pga_sum_rate({h}, 3.0, 1.0, opts, &opt.q);
    EXPECT_LE(r.iterations, 2);
    EXPECT_LT(std::abs(r.objective.back() - r.objective.front()), opts.tol * std::abs(r.objective.front()) + 1e-12);
    EXPECT_NEAR(r.objective.front(), opt.capacity, 1e-10);
}

TEST(Pga, ObjectiveNondecreasingAndFeasible)
{
    Rng rng(9);
    for (int t = 0; t < 5; ++t) {
        const ChannelDataset ds = random_dataset(rng, 30, 2, 6);
        const PgaResult r = pga_sum_rate(ds.channels, 10.0, 0.5);
        for (std::size_t i = 1; i < r.objective.size(); ++i) EXPECT_GE(r.objective[i], r.objective[i - 1]);
        expect_feasible(r.q, 10.0);
        double mean = 0.0;
        for (const auto& h : ds.channels) mean += test::ref_rate(h, r.q, 0.5);
        EXPECT_NEAR(mean / 30.0, r.objective.back(), 1e-10);
        EXPECT_GT(r.objective.back(), r.objective.front());
    }
    EXPECT_THROW(pga_sum_rate({}, 1.0, 1.0), ArgumentError);
}

TEST(LauUpdate, SingletonIsWaterfilling)
{
    Rng rng(10);
    const CMatrix h = test::random_matrix(rng, 2, 5);
    const CMatrix q = lau_update({h}, 4.0, 0.5);
    EXPECT_LT((q - waterfilling_capacity(h, 4.0, 0.5).q).norm(), 1e-8);
    EXPECT_NEAR(q.trace().real(), 4.0, 1e-12);
}

TEST(LauUpdate, IsotropicClusterEqualizes)
{
    Rng rng(11);
    std::vector<CMatrix> cluster;
    for (int i = 0; i < 5000; ++i) cluster.push_back(test::random_matrix(rng, 2, 4));
    const CMatrix q = lau_update(cluster, 2.0, 0.1);
    const RVector lam = eig_descending(q).values;
    EXPECT_NEAR(lam[0], 1.0, 0.02);
    EXPECT_NEAR(lam[1], 1.0, 0.02);
    EXPECT_NEAR(lam[2], 0.0, 1e-12);
    EXPECT_NEAR(q.trace().real(), 2.0, 1e-12);
}

TEST(Lloyd, SingleEntryIsOnePgaSolve)
{
    Rng rng(12);
    const ChannelDataset ds = random_dataset(rng, 40, 2, 4);
    LloydReport rep;
    const CovCodebook cb = lloyd_codebook(ds, 1, 5.0, 0.5, {}, &rep);
    const PgaResult r = pga_sum_rate(ds.channels, 5.0, 0.5);
    ASSERT_EQ(cb.size(), 1u);
    EXPECT_LT((cb.entries[0] - r.q).norm(), 1e-12);
    EXPECT_TRUE(rep.converged);
    EXPECT_EQ(rep.outer_iterations, 1);
    EXPECT_NEAR(cb.design_snr_db, 10.0, 1e-12);
}

TEST(Lloyd, OrthogonalRankOneSingletons)
{
    CMatrix h1 = CMatrix::Zero(1, 2), h2 = CMatrix::Zero(1, 2);
    h1(0, 0) = Complex(1.0, 1.0);
    h2(0, 1) = Complex(0.0, -2.0);
    const ChannelDataset ds = make_dataset({h1, h2});
    LloydOptions opts;
    opts.pga.max_iter = 1000;
    opts.pga.tol = 1e-12;
    LloydReport rep;
    const CovCodebook cb = lloyd_codebook(ds, 2, 1.0, 1.0, opts, &rep);
    EXPECT_NE(rep.labels[0], rep.labels[1]);
    for (std::size_t i = 0; i < 2; ++i) {
        const CMatrix& q = cb.entries[rep.labels[i]];
        const CapacityResult wf = waterfilling_capacity(ds.channels[i], 1.0, 1.0);
        EXPECT_LT(wf.capacity - spectral_efficiency(ds.channels[i], q, 1.0), 1e-4);
    }
}

TEST(Lloyd, StagesAreMonotone)
{
    Rng rng(13);
    const ChannelDataset ds = random_dataset(rng, 120, 2, 4);
    LloydOptions opts;
    opts.seed = 3;
    LloydReport rep;
    const CovCodebook cb = lloyd_codebook(ds, 6, 10.0, 1.0, opts, &rep);
    for (const auto& [before, after] : rep.assignment_objective) EXPECT_GE(after, before);
    if (rep.reseeds == 0)
        for (std::size_t i = 1; i < rep.mean_selected_rate.size(); ++i)
            EXPECT_GE(rep.mean_selected_rate[i], rep.mean_selected_rate[i - 1] - 1e-12);
    for (const auto& q : cb.entries) expect_feasible(q, 10.0);

    // labels follow the rate argmax with ties to the lowest index
    for (std::size_t i = 0; i < ds.size() && rep.converged; ++i) {
        std::vector<double> r;
        for (const auto& q : cb.entries) r.push_back(test::ref_rate(ds.channels[i], q, 1.0));
        EXPECT_EQ(rep.labels[i], argmax_first(r));
    }
}

TEST(Lloyd, DuplicateChannelsForceReseed)
{
    // identical channels always pick the same entry, emptying the others
    Rng rng(14);
    const CMatrix h = test::random_matrix(rng, 1, 3);
    const ChannelDataset ds = make_dataset(std::vector<CMatrix>(6, h));
    LloydOptions opts;
    opts.max_outer = 3;
    LloydReport rep;
    const CovCodebook cb = lloyd_codebook(ds, 3, 1.0, 1.0, opts, &rep);
    EXPECT_GT(rep.reseeds, 0);
    std::vector<std::size_t> count(3, 0);
    for (auto l : rep.labels) ++count[l];
    for (auto c : count) EXPECT_GT(c, 0u);
    for (const auto& q : cb.entries) expect_feasible(q, 1.0);
}

TEST(Lloyd, InvalidArguments)
{
    Rng rng(15);
    const ChannelDataset ds = random_dataset(rng, 3, 1, 2);
    EXPECT_THROW(lloyd_codebook(ds, 4, 1.0, 1.0), ArgumentError);
    EXPECT_THROW(lloyd_codebook(ds, 0, 1.0, 1.0), ArgumentError);
    EXPECT_THROW(lloyd_codebook(ds, 2, 1.0, 0.0), ArgumentError);
}

TEST(GmmCodebook, SingleComponentMatchesLloyd)
{
    Rng rng(16);
    const ChannelDataset ds = random_dataset(rng, 50, 2, 3);
    GmmModel m = test::random_full_model(rng, 1, 2, 3);
    const CovCodebook a = gmm_codebook(m, ds, 3.0, 0.3);
    const CovCodebook b = lloyd_codebook(ds, 1, 3.0, 0.3);
    EXPECT_LT((a.entries[0] - b.entries[0]).norm(), 1e-12);
}

TEST(GmmCodebook, SeparatedComponentsPartition)
{
    Rng rng(17);
    GmmModel m = test::random_full_model(rng, 2, 2, 2);
    m.means[0] = CVector::Constant(4, Complex(8.0, 0.0));
    m.means[1] = CVector::Constant(4, Complex(-8.0, 0.0));
    m.weights = {0.5, 0.5};
    std::vector<CMatrix> hs;
    std::vector<std::size_t> truth;
    for (int i = 0; i < 400; ++i) {
        const std::size_t k = static_cast<std::size_t>(i % 2);
        hs.push_back(unvec(sample_component(m, k, rng), 2, 2));
        truth.push_back(k);
    }
    const ChannelDataset ds = make_dataset(hs);
    GmmCodebookReport rep;
    const CovCodebook cb = gmm_codebook(m, ds, 2.0, 0.2, {}, &rep);
    int agree = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) agree += rep.labels[i] == truth[i];
    EXPECT_GE(agree, 396);
    for (const auto& q : cb.entries) expect_feasible(q, 2.0);
    EXPECT_TRUE(rep.empty_components.empty());
}

TEST(GmmCodebook, PartitionFollowsResponsibilityArgmax)
{
    Rng rng(18);
    const GmmModel m = test::random_kronecker_model(rng, 2, 2, 2, 2);
    const ChannelDataset ds = random_dataset(rng, 100, 2, 2);
    const auto labels = responsibility_partition(m, ds);
    GmmModel scaled = m;
    // multiply all densities by a positive constant (through the weights)
    for (auto& w : scaled.weights) w *= 0.25;
    const auto bank = GaussianBank::from_model(scaled);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        EXPECT_EQ(labels[i], argmax_first(test::ref_responsibilities(m, vec(ds.channels[i]))));
        EXPECT_EQ(labels[i], argmax_first(bank.log_joint(vec(ds.channels[i]))));
    }
}

TEST(GmmCodebook, ComponentWithoutDataUsesItsOwnGram)
{
    Rng rng(19);
    GmmModel m = test::random_full_model(rng, 2, 2, 3);
    m.means[1] = CVector::Constant(6, Complex(50.0, 0.0));
    std::vector<CMatrix> hs;
    for (int i = 0; i < 30; ++i) hs.push_back(unvec(sample_component(m, 0, rng), 2, 3));
    GmmCodebookReport rep;
    const CovCodebook cb = gmm_codebook(m, make_dataset(hs), 1.0, 0.1, {}, &rep);
    ASSERT_EQ(rep.empty_components, std::vector<std::size_t>{1});
    EXPECT_EQ(rep.cluster_sizes[0], 30u);
    EXPECT_LT((cb.entries[1] - waterfill_gram(component_gram(m, 1), 2, 1.0, 0.1)).norm(), 1e-14);
    expect_feasible(cb.entries[1], 1.0);
    EXPECT_NEAR(cb.entries[1].trace().real(), 1.0, 1e-12);
}

TEST(ComponentGram, MonteCarloAndKroneckerAgree)
{
    Rng rng(20);
    const GmmModel kr = test::random_kronecker_model(rng, 2, 1, 2, 3);
    GmmModel full = kr;
    full.structure = CovarianceStructure::Full;
    full.covariances = {kr.covariance(0), kr.covariance(1)};
    full.tx_factors.clear();
    full.rx_factors.clear();
    for (std::size_t k = 0; k < 2; ++k) {
        const CMatrix g = component_gram(kr, k);
        EXPECT_LT((g - component_gram(full, k)).norm(), 1e-12 * g.norm());
        const ComponentSampler smp(kr, k);
        CMatrix acc = CMatrix::Zero(3, 3);
        const int n = 100000;
        for (int i = 0; i < n; ++i) {
            const CMatrix h = unvec(smp.draw(rng), 2, 3);
            acc += h.adjoint() * h;
        }
        EXPECT_LT((acc / n - g).norm() / g.norm(), 0.02);
    }
}

TEST(ExtractDirections, DiagonalEntry)
{
    CovCodebook cb;
    CMatrix q = CMatrix::Zero(4, 4);
    q.diagonal() << 3.0, 2.0, 1.0, 0.0;
    cb.entries = {q};
    const DirCodebook d = extract_directions(cb, 2);
    EXPECT_NEAR(std::abs(d.entries[0](0, 0)), 1.0, 1e-12);
    EXPECT_NEAR(std::abs(d.entries[0](1, 1)), 1.0, 1e-12);
    EXPECT_NEAR(d.entries[0].col(0).tail(3).norm(), 0.0, 1e-12);
    EXPECT_NEAR(d.entries[0].col(1).tail(2).norm() + std::abs(d.entries[0](0, 1)), 0.0, 1e-12);
    EXPECT_THROW(extract_directions(cb, 4), RankError);
    const DirCodebook full = extract_directions(cb, 4, true);
    EXPECT_LT((full.entries[0].adjoint() * full.entries[0] - CMatrix::Identity(4, 4)).norm(), 1e-12);
    EXPECT_NEAR(std::abs(full.entries[0](3, 3)), 1.0, 1e-12);
}

TEST(ExtractDirections, RecoversConstructedSubspace)
{
    Rng rng(21);
    CovCodebook cb;
    std::vector<CMatrix> truth;
    for (int k = 0; k < 8; ++k) {
        Eigen::HouseholderQR<CMatrix> qr(test::random_matrix(rng, 6, 2));
        truth.push_back(CMatrix(qr.householderQ()).leftCols(2));
        cb.entries.push_back(4.0 * truth.back() * truth.back().adjoint() / 2.0);
    }
    const DirCodebook d = extract_directions(cb, 2);
    for (int k = 0; k < 8; ++k) {
        EXPECT_LT((d.entries[k].adjoint() * d.entries[k] - CMatrix::Identity(2, 2)).norm(), 1e-9);
        EXPECT_LT(chordal_distance_sq(d.entries[k], truth[k]), 1e-12);
    }
}

TEST(Grassmann, SemiUnitaryAndReproducible)
{
    Rng a(5), b(5);
    const DirCodebook x = random_grassmann_codebook(64, 8, 2, a);
    const DirCodebook y = random_grassmann_codebook(64, 8, 2, b);
    ASSERT_EQ(x.size(), 64u);
    for (std::size_t k = 0; k < 64; ++k) {
        EXPECT_LT((x.entries[k].adjoint() * x.entries[k] - CMatrix::Identity(2, 2)).norm(), 1e-9);
        EXPECT_EQ(x.entries[k], y.entries[k]);
    }
    EXPECT_THROW(random_grassmann_codebook(4, 2, 3, a), ArgumentError);
}

TEST(Grassmann, ChordalDistanceConcentrates)
{
    // independent uniform subspaces: E[d^2] = n (1 - n / N)
    Rng rng(22);
    const int ntx = 8, nrx = 2;
    const double expected = nrx * (1.0 - static_cast<double>(nrx) / ntx);
    auto spread = [&](std::size_t k) {
        std::vector<double> means;
        for (int rep = 0; rep < 20; ++rep) {
            const DirCodebook cb = random_grassmann_codebook(k, ntx, nrx, rng);
            double s = 0.0;
            for (std::size_t i = 0; i + 1 < k; i += 2) s += chordal_distance_sq(cb.entries[i], cb.entries[i + 1]);
            means.push_back(s / static_cast<double>(k / 2));
        }
        double mu = 0.0, var = 0.0;
        for (double v : means) mu += v / means.size();
        for (double v : means) var += (v - mu) * (v - mu) / (means.size() - 1);
        return std::make_pair(mu, var);
    };
    const auto small = spread(16);
    const auto large = spread(512);
    EXPECT_NEAR(large.first, expected, 0.03 * expected);
    EXPECT_LT(large.second, small.second);
}
