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

#ifndef GMMFB_PILOT_SYSTEM_HPP
#define GMMFB_PILOT_SYSTEM_HPP

#include "gmmfb/core.hpp"

namespace gmmfb {

/// Unitary DFT matrix, F[m, k] = exp(-2 pi j m k / n) / sqrt(n).
inline CMatrix dft_matrix(int n) {
    CMatrix f(n, n);
    const double s = 1.0 / std::sqrt(static_cast<double>(n));
    for (int m = 0; m < n; ++m)
        for (int k = 0; k < n; ++k)
            f(m, k) = std::polar(s, -2.0 * kPi * static_cast<double>((static_cast<long long>(m) * k) % n) / n);
    return f;
}

/// Column indices of the 2D-DFT used as pilots: floor(i * ntx / n_p).
inline std::vector<int> pilot_columns(int ntx, int n_p) {
    std::vector<int> cols(static_cast<std::size_t>(n_p));
    for (int i = 0; i < n_p; ++i)
        cols[static_cast<std::size_t>(i)] =
            static_cast<int>((static_cast<long long>(i) * ntx) / n_p);
    return cols;
}

/// Pilot matrix (ntx x n_p): strided columns of F_h kron F_v, each scaled to
/// squared norm rho.
inline CMatrix build_pilot_matrix(int ntx_h, int ntx_v, int n_p, double rho) {
    if (ntx_h < 1 || ntx_v < 1) throw ArgumentError("build_pilot_matrix: antenna counts must be >= 1");
    const int ntx = ntx_h * ntx_v;
    if (n_p < 1 || n_p > ntx) throw ArgumentError("build_pilot_matrix: need 1 <= n_p <= ntx");
    if (!(rho > 0.0)) throw ArgumentError("build_pilot_matrix: rho must be > 0");
    const CMatrix full = kron(dft_matrix(ntx_h), dft_matrix(ntx_v));
    const auto cols = pilot_columns(ntx, n_p);
    CMatrix p(ntx, n_p);
    for (int i = 0; i < n_p; ++i) p.col(i) = std::sqrt(rho) * full.col(cols[static_cast<std::size_t>(i)]);
    return p;
}

/// A = P^T kron I_nrx, so that A vec(H) = vec(H P).
inline CMatrix build_observation_operator(const CMatrix& pilots, int nrx) {
    if (nrx < 1) throw ArgumentError("build_observation_operator: nrx must be >= 1");
    return kron(pilots.transpose(), CMatrix::Identity(nrx, nrx));
}

struct ObservationModel {
    CMatrix pilots;    // ntx x n_p
    CMatrix operator_; // nrx*n_p x nrx*ntx
    double sigma2 = 1.0;
    double rho = 1.0;
    int nrx = 1;

    Eigen::Index observation_dim() const { return operator_.rows(); }
    Eigen::Index channel_dim() const { return operator_.cols(); }
    const CMatrix& A() const { return operator_; }
};

inline ObservationModel make_observation_model(int ntx_h, int ntx_v, int nrx, int n_p, double rho, double sigma2) {
    if (sigma2 < 0.0) throw ArgumentError("make_observation_model: sigma2 must be >= 0");
    ObservationModel obs;
    obs.pilots = build_pilot_matrix(ntx_h, ntx_v, n_p, rho);
    obs.operator_ = build_observation_operator(obs.pilots, nrx);
    obs.sigma2 = sigma2;
    obs.rho = rho;
    obs.nrx = nrx;
    return obs;
}

/// y = A vec(H) + n, n ~ CN(0, sigma2 I).
inline CVector observe(const CMatrix& h, const ObservationModel& obs, Rng& rng) {
    if (h.rows() != obs.nrx || h.cols() != obs.pilots.rows())
        throw ArgumentError("observe: channel dimensions do not match the observation model");
    // H P is cheaper than A vec(H) and equal by the Kronecker identity
    CVector y = vec(h * obs.pilots);
    if (obs.sigma2 > 0.0)
        for (Eigen::Index i = 0; i < y.size(); ++i) y[i] += complex_normal(rng, obs.sigma2);
    return y;
}

}  // namespace gmmfb

#endif  // GMMFB_PILOT_SYSTEM_HPP
