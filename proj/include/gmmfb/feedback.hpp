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

#ifndef GMMFB_FEEDBACK_HPP
#define GMMFB_FEEDBACK_HPP

#include "gmmfb/codebooks.hpp"
#include "gmmfb/gmm.hpp"

namespace gmmfb {

enum class FeedbackMethod { RateCov, RateSubspace, Responsibility, ResponsibilityPerfect, Chordal };

inline const char* to_string(FeedbackMethod m) {
    switch (m) {
        case FeedbackMethod::RateCov: return "rate_cov";
        case FeedbackMethod::RateSubspace: return "rate_subspace";
        case FeedbackMethod::Responsibility: return "responsibility";
        case FeedbackMethod::ResponsibilityPerfect: return "responsibility_perfect";
        case FeedbackMethod::Chordal: return "chordal";
    }
    return "unknown";
}

/// Zero-based codebook index sent back to the transmitter.
struct FeedbackIndex {
    std::size_t index = 0;
    FeedbackMethod method = FeedbackMethod::RateCov;
};

inline FeedbackIndex select_by_rate_cov(const CMatrix& h_hat, const CovCodebook& cb, double sigma2) {
    if (cb.size() == 0) throw ArgumentError("select_by_rate_cov: empty codebook");
    if (cb.entries.front().rows() != h_hat.cols()) throw ArgumentError("select_by_rate_cov: dimension mismatch");
    std::size_t best = 0;
    double best_rate = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < cb.size(); ++k) {
        const double r = detail::rate(h_hat, cb.entries[k], sigma2);
        if (r > best_rate) {
            best_rate = r;
            best = k;
        }
    }
    return {best, FeedbackMethod::RateCov};
}

/// Rate metric with Q = (rho / nrx) W W^H.
inline double subspace_metric(const CMatrix& h_hat, const CMatrix& w, double rho, double sigma2) {
    return detail::rate_gram(h_hat * w, rho / (sigma2 * static_cast<double>(w.cols())));
}

inline FeedbackIndex select_by_rate_subspace(const CMatrix& h_hat, const DirCodebook& cb, double rho, double sigma2) {
    if (cb.size() == 0) throw ArgumentError("select_by_rate_subspace: empty codebook");
    if (cb.entries.front().rows() != h_hat.cols()) throw ArgumentError("select_by_rate_subspace: dimension mismatch");
    std::size_t best = 0;
    double best_val = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < cb.size(); ++k) {
        const double v = subspace_metric(h_hat, cb.entries[k], rho, sigma2);
        if (v > best_val) {
            best_val = v;
            best = k;
        }
    }
    return {best, FeedbackMethod::RateSubspace};
}

/// argmax_k p(k | y), evaluated in the log domain. No channel estimate is formed.
inline FeedbackIndex select_by_responsibility(const AdaptedGmm& adapted, const CVector& y) {
    if (y.size() != adapted.observation_dim())
        throw ArgumentError("select_by_responsibility: observation dimension mismatch");
    return {argmax_first(adapted.bank.log_joint(y)), FeedbackMethod::Responsibility};
}

inline FeedbackIndex select_by_responsibility_perfect(const GmmDensity& density, const CVector& h) {
    return {argmax_first(density.bank.log_joint(h)), FeedbackMethod::ResponsibilityPerfect};
}

inline FeedbackIndex select_by_responsibility_perfect(const GmmModel& model, const CVector& h) {
    return select_by_responsibility_perfect(GmmDensity(model), h);
}

inline FeedbackIndex select_by_chordal(const CMatrix& v_bar, const DirCodebook& cb) {
    if (cb.size() == 0) throw ArgumentError("select_by_chordal: empty codebook");
    if (cb.entries.front().rows() != v_bar.rows()) throw ArgumentError("select_by_chordal: dimension mismatch");
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < cb.size(); ++k) {
        const double d = chordal_distance_sq(v_bar, cb.entries[k]);
        if (d < best_d) {
            best_d = d;
            best = k;
        }
    }
    return {best, FeedbackMethod::Chordal};
}

/// First n right singular vectors of H (ntx x n).
inline CMatrix dominant_right_subspace(const CMatrix& h, int n) {
    Eigen::JacobiSVD<CMatrix> svd(h, Eigen::ComputeFullV);
    return svd.matrixV().leftCols(n);
}

}  // namespace gmmfb

#endif  // GMMFB_FEEDBACK_HPP
