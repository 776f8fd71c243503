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

#ifndef GMMFB_ESTIMATORS_HPP
#define GMMFB_ESTIMATORS_HPP

#include "gmmfb/channel_model.hpp"
#include "gmmfb/gmm.hpp"

namespace gmmfb {

/// Mixture of per-component LMMSE estimates weighted by p(k | y).
inline CVector estimate_gmm(const AdaptedGmm& adapted, const CVector& y) {
    if (y.size() != adapted.observation_dim()) throw ArgumentError("estimate_gmm: observation dimension mismatch");
    const auto resp = responsibilities(adapted, y);
    CVector h = CVector::Zero(adapted.channel_means.front().size());
    for (std::size_t k = 0; k < adapted.size(); ++k) {
        if (resp[k] == 0.0) continue;
        h.noalias() += resp[k] * (adapted.lmmse_gains[k] * (y - adapted.means_y[k]) + adapted.channel_means[k]);
    }
    return h;
}

/// (1/M) sum_m h_m h_m^H over the vectorized channels.
inline CMatrix sample_covariance(const CMatrix& x) {
    if (x.cols() == 0) throw ArgumentError("sample_covariance: empty dataset");
    return hermitian_part(x * x.adjoint() / static_cast<double>(x.cols()));
}

inline CMatrix sample_covariance(const ChannelDataset& ds) {
    if (ds.empty()) throw ArgumentError("sample_covariance: empty dataset");
    return sample_covariance(stack_vectorized(ds));
}

/// Linear filter C A^H (A C A^H + sigma2 I)^-1.
inline CMatrix lmmse_filter(const CMatrix& cov, const CMatrix& a, double sigma2) {
    if (cov.rows() != a.cols() || cov.cols() != a.cols()) throw ArgumentError("lmmse: dimension mismatch");
    const CMatrix cah = cov * a.adjoint();
    CMatrix cy = hermitian_part(a * cah);
    cy.diagonal().array() += sigma2;
    Eigen::LLT<CMatrix> llt(cy);
    if (llt.info() != Eigen::Success) throw NumericalError("lmmse: observation covariance is singular");
    return llt.solve(cah.adjoint()).adjoint();
}

inline CVector estimate_lmmse(const CMatrix& cov, const CMatrix& a, double sigma2, const CVector& y) {
    if (y.size() != a.rows()) throw ArgumentError("estimate_lmmse: observation dimension mismatch");
    return lmmse_filter(cov, a, sigma2) * y;
}

// ---- sparse recovery ----------------------------------------------------------

/// Oversampled DFT matrix n x (factor n) with unit-norm columns.
inline CMatrix oversampled_dft(int n, int factor) {
    const int g = n * factor;
    CMatrix d(n, g);
    const double s = 1.0 / std::sqrt(static_cast<double>(n));
    for (int m = 0; m < n; ++m)
        for (int c = 0; c < g; ++c)
            d(m, c) = std::polar(s, -2.0 * kPi * static_cast<double>((static_cast<long long>(m) * c) % g) / g);
    return d;
}

struct Dictionary {
    CMatrix atoms;  // N x N_grid
    int oversampling_rx = 2;
    int oversampling_tx_h = 2;
    int oversampling_tx_v = 2;
};

/// Dictionary for vec(H), H of shape nrx x ntx: (D_tx_h kron D_tx_v) kron D_rx.
inline Dictionary build_dictionary(int nrx, int ntx_h, int ntx_v, int os_rx = 2, int os_tx_h = 2, int os_tx_v = 2) {
    if (os_rx < 1 || os_tx_h < 1 || os_tx_v < 1) throw ConfigError("dictionary: oversampling factors must be >= 1");
    Dictionary d;
    d.atoms = kron(kron(oversampled_dft(ntx_h, os_tx_h), oversampled_dft(ntx_v, os_tx_v)), oversampled_dft(nrx, os_rx));
    d.oversampling_rx = os_rx;
    d.oversampling_tx_h = os_tx_h;
    d.oversampling_tx_v = os_tx_v;
    return d;
}

struct OmpResult {
    CVector h_hat;
    int sparsity = 0;
};

/// Orthogonal matching pursuit on the effective dictionary A D with the
/// sparsity order picked by a genie that knows the true channel.
class OmpEstimator {
public:
    OmpEstimator(const Dictionary& dict, const CMatrix& a) : atoms_(dict.atoms) {
        if (a.cols() != atoms_.rows()) throw ArgumentError("omp: operator does not match dictionary");
        const RVector norms = atoms_.colwise().norm().transpose();
        if (norms.size() == 0 || norms.minCoeff() <= 0.0) throw ConfigError("omp: dictionary has a zero column");
        effective_ = a * atoms_;
        effective_norms_ = effective_.colwise().norm().transpose();
    }

    OmpResult estimate(const CVector& y, const CVector& h_true, int s_max) const {
        if (y.size() != effective_.rows()) throw ArgumentError("omp: observation dimension mismatch");
        if (h_true.size() != atoms_.rows()) throw ArgumentError("omp: channel dimension mismatch");
        if (s_max < 1 || s_max > effective_.rows()) throw ArgumentError("omp: need 1 <= s_max <= observation dimension");
        const Eigen::Index g = effective_.cols();
        std::vector<Eigen::Index> support;
        std::vector<char> used(static_cast<std::size_t>(g), 0);
        CVector residual = y;
        OmpResult best{CVector::Zero(h_true.size()), 0};
        double best_err = std::numeric_limits<double>::infinity();
        for (int s = 1; s <= s_max; ++s) {
            const CVector corr = effective_.adjoint() * residual;
            Eigen::Index pick = -1;
            double pick_val = -1.0;
            for (Eigen::Index c = 0; c < g; ++c) {
                if (used[static_cast<std::size_t>(c)] || effective_norms_[c] <= 0.0) continue;
                const double v = std::abs(corr[c]) / effective_norms_[c];
                if (v > pick_val) {
                    pick_val = v;
                    pick = c;
                }
            }
            if (pick < 0) break;
            used[static_cast<std::size_t>(pick)] = 1;
            support.push_back(pick);
            CMatrix phi_s(effective_.rows(), static_cast<Eigen::Index>(support.size()));
            CMatrix d_s(atoms_.rows(), static_cast<Eigen::Index>(support.size()));
            for (std::size_t i = 0; i < support.size(); ++i) {
                phi_s.col(static_cast<Eigen::Index>(i)) = effective_.col(support[i]);
                d_s.col(static_cast<Eigen::Index>(i)) = atoms_.col(support[i]);
            }
            const CVector t = phi_s.colPivHouseholderQr().solve(y);
            residual = y - phi_s * t;
            CVector h_hat = d_s * t;
            const double err = (h_hat - h_true).norm();
            if (err < best_err) {
                best_err = err;
                best.h_hat = std::move(h_hat);
                best.sparsity = s;
            }
        }
        return best;
    }

private:
    CMatrix atoms_;
    CMatrix effective_;
    RVector effective_norms_;
};

inline OmpResult estimate_omp_genie(const Dictionary& dict, const CMatrix& a, const CVector& y, const CVector& h_true,
                                    int s_max) {
    return OmpEstimator(dict, a).estimate(y, h_true, s_max);
}

}  // namespace gmmfb

#endif  // GMMFB_ESTIMATORS_HPP
