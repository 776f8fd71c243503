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

#ifndef GMMFB_TEST_UTIL_HPP
#define GMMFB_TEST_UTIL_HPP

// Shared fixtures and brute-force reference formulas for the test suites.
// The references deliberately avoid the library's factorizations: they use
// LU determinants and explicit inverses.

#include "gmmfb/gmmfb.hpp"

#include <Eigen/LU>

namespace gmmfb::test {

inline CMatrix random_matrix(Rng& rng, Eigen::Index r, Eigen::Index c, double var = 1.0) {
    return complex_normal_matrix(rng, r, c, var);
}

/// Random Hermitian positive definite matrix with eigenvalues in [lo, hi].
inline CMatrix random_hpd(Rng& rng, Eigen::Index n, double lo = 0.2, double hi = 2.0) {
    Eigen::HouseholderQR<CMatrix> qr(random_matrix(rng, n, n));
    const CMatrix u = qr.householderQ();
    std::uniform_real_distribution<double> uni(lo, hi);
    RVector lam(n);
    for (Eigen::Index i = 0; i < n; ++i) lam[i] = uni(rng);
    return hermitian_part(u * lam.cast<Complex>().asDiagonal() * u.adjoint());
}

/// Random feasible transmit covariance: PSD with trace rho.
inline CMatrix random_covariance(Rng& rng, Eigen::Index n, double rho, Eigen::Index rank = -1) {
    if (rank < 0) rank = n;
    const CMatrix g = random_matrix(rng, n, rank);
    CMatrix q = g * g.adjoint();
    q *= rho / q.trace().real();
    return hermitian_part(q);
}

/// Small full-covariance mixture with well-conditioned components.
inline GmmModel random_full_model(Rng& rng, std::size_t k, int nrx, int ntx, double mean_scale = 1.0) {
    GmmModel m;
    m.structure = CovarianceStructure::Full;
    m.nrx = nrx;
    m.ntx = ntx;
    const Eigen::Index n = static_cast<Eigen::Index>(nrx) * ntx;
    std::uniform_real_distribution<double> uni(0.5, 1.5);
    double total = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        m.weights.push_back(uni(rng));
        total += m.weights.back();
        m.means.push_back(complex_normal_vector(rng, n, mean_scale * mean_scale));
        m.covariances.push_back(random_hpd(rng, n));
    }
    for (auto& w : m.weights) w /= total;
    return m;
}

inline GmmModel random_kronecker_model(Rng& rng, std::size_t k_tx, std::size_t k_rx, int nrx, int ntx) {
    GmmModel m;
    m.structure = CovarianceStructure::Kronecker;
    m.nrx = nrx;
    m.ntx = ntx;
    for (std::size_t a = 0; a < k_tx; ++a) m.tx_factors.push_back(random_hpd(rng, ntx));
    for (std::size_t b = 0; b < k_rx; ++b) m.rx_factors.push_back(random_hpd(rng, nrx));
    std::uniform_real_distribution<double> uni(0.5, 1.5);
    double total = 0.0;
    for (std::size_t i = 0; i < k_tx * k_rx; ++i) {
        m.weights.push_back(uni(rng));
        total += m.weights.back();
        m.means.push_back(complex_normal_vector(rng, static_cast<Eigen::Index>(nrx) * ntx));
    }
    for (auto& w : m.weights) w /= total;
    return m;
}

// ---- reference formulas ------------------------------------------------------

/// log CN(x; mu, C) through an explicit inverse and LU determinant.
inline double ref_log_normal(const CVector& x, const CVector& mu, const CMatrix& c) {
    const CVector d = x - mu;
    const Complex quad = d.dot(c.inverse() * d);
    const double logdet = std::log(std::abs(c.determinant()));
    return -static_cast<double>(x.size()) * std::log(kPi) - logdet - quad.real();
}

inline std::vector<double> ref_responsibilities(const GmmModel& m, const CVector& x) {
    std::vector<double> lj(m.size());
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < m.size(); ++k) {
        lj[k] = std::log(m.weights[k]) + ref_log_normal(x, m.means[k], m.covariance(k));
        mx = std::max(mx, lj[k]);
    }
    double s = 0.0;
    for (auto& v : lj) s += std::exp(v - mx);
    for (auto& v : lj) v = std::exp(v - mx) / s;
    return lj;
}

/// log2 det(I + H Q H^H / sigma2) via LU.
inline double ref_rate(const CMatrix& h, const CMatrix& q, double sigma2) {
    CMatrix m = CMatrix::Identity(h.rows(), h.rows()) + h * q * h.adjoint() / sigma2;
    return std::log2(std::abs(m.determinant()));
}

inline double rel_err(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300});
}

inline double rel_err(const CMatrix& a, const CMatrix& b) {
    const double s = std::max(a.norm(), b.norm());
    return s == 0.0 ? 0.0 : (a - b).norm() / s;
}

}  // namespace gmmfb::test

#endif  // GMMFB_TEST_UTIL_HPP
