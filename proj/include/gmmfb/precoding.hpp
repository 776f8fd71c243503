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

#ifndef GMMFB_PRECODING_HPP
#define GMMFB_PRECODING_HPP

#include "gmmfb/codebooks.hpp"
#include "gmmfb/gmm.hpp"

#include <functional>

namespace gmmfb {

/// Per-user precoders M_j (ntx x d_j) sharing the power budget rho.
struct PrecoderSet {
    std::vector<CMatrix> m;
    double rho = 1.0;

    std::size_t users() const { return m.size(); }

    double total_power() const {
        double p = 0.0;
        for (const auto& x : m) p += x.squaredNorm();
        return p;
    }
};

// ---- single-user strategies ------------------------------------------------------

struct CapacityResult {
    CMatrix q;
    double capacity = 0.0;
};

/// Capacity-achieving transmit covariance by water-filling over the squared
/// singular values of H.
inline CapacityResult waterfilling_capacity(const CMatrix& h, double rho, double sigma2) {
    if (h.size() == 0 || h.cwiseAbs().maxCoeff() == 0.0) throw DegenerateDataError("waterfilling_capacity: H is zero");
    if (!(sigma2 > 0.0)) throw ArgumentError("waterfilling_capacity: sigma2 must be > 0");
    Eigen::JacobiSVD<CMatrix> svd(h, Eigen::ComputeFullV);
    const RVector s = svd.singularValues();
    const RVector gains = s.cwiseAbs2();
    const RVector p = waterfill(gains, rho, sigma2);
    const CMatrix v = svd.matrixV().leftCols(s.size());
    CapacityResult out;
    out.q = hermitian_part(v * p.cast<Complex>().asDiagonal() * v.adjoint());
    for (Eigen::Index i = 0; i < s.size(); ++i) out.capacity += std::log2(1.0 + gains[i] * p[i] / sigma2);
    return out;
}

enum class BaselineKind { UniformCov, UniformEigsp };

/// (rho / ntx) I, or (rho / nrx) V V^H over the top-nrx right singular vectors of H.
inline CMatrix baseline_tx_strategy(BaselineKind kind, const CMatrix* h, int ntx, int nrx, double rho) {
    if (kind == BaselineKind::UniformCov) return CMatrix::Identity(ntx, ntx) * (rho / static_cast<double>(ntx));
    if (!h) throw ArgumentError("baseline_tx_strategy: UniformEigsp needs a channel");
    if (h->cols() != ntx) throw ArgumentError("baseline_tx_strategy: channel does not match ntx");
    const int r = std::min(nrx, ntx);
    Eigen::JacobiSVD<CMatrix> svd(*h, Eigen::ComputeFullV);
    const CMatrix v = svd.matrixV().leftCols(r);
    return hermitian_part(v * v.adjoint() * (rho / static_cast<double>(r)));
}

// ---- rate and power ----------------------------------------------------------------

/// Sum over users of log2 det(I + H_j M_j M_j^H H_j^H R_j^-1) with R_j the
/// interference-plus-noise covariance.
inline double sum_rate(const std::vector<CMatrix>& h, const PrecoderSet& p, double sigma2) {
    if (h.size() != p.users()) throw ArgumentError("sum_rate: user count mismatch");
    double total = 0.0;
    for (std::size_t j = 0; j < h.size(); ++j) {
        if (h[j].cols() != p.m[j].rows()) throw ArgumentError("sum_rate: dimension mismatch");
        CMatrix r = CMatrix::Identity(h[j].rows(), h[j].rows()) * sigma2;
        for (std::size_t i = 0; i < h.size(); ++i) {
            if (i == j) continue;
            const CMatrix hm = h[j] * p.m[i];
            r.noalias() += hm * hm.adjoint();
        }
        const CMatrix hs = h[j] * p.m[j];
        const CMatrix s = hermitian_part(r + hs * hs.adjoint());
        total += (logdet_hpd(s) - logdet_hpd(hermitian_part(r))) / kLn2;
    }
    return std::max(0.0, total);
}

/// Uniform scaling to total power rho.
inline PrecoderSet normalize_power(const PrecoderSet& p, double rho) {
    const double power = p.total_power();
    if (!(power > 0.0)) throw DegenerateDataError("normalize_power: all precoders are zero");
    PrecoderSet out = p;
    out.rho = rho;
    const double c = std::sqrt(rho / power);
    if (c != 1.0)
        for (auto& x : out.m) x *= c;
    return out;
}

// ---- linear multi-user precoders ------------------------------------------------------

namespace detail {

inline void check_users(const std::vector<CMatrix>& h, const char* who) {
    if (h.size() < 2) throw ArgumentError(std::string(who) + ": need at least two users");
    for (const auto& x : h)
        if (x.cols() != h.front().cols() || x.rows() < 1)
            throw ArgumentError(std::string(who) + ": dimension mismatch");
}

inline CMatrix stack_rows(const std::vector<CMatrix>& h, std::size_t skip) {
    Eigen::Index rows = 0;
    for (std::size_t i = 0; i < h.size(); ++i)
        if (i != skip) rows += h[i].rows();
    CMatrix out(rows, h.front().cols());
    Eigen::Index r = 0;
    for (std::size_t i = 0; i < h.size(); ++i) {
        if (i == skip) continue;
        out.middleRows(r, h[i].rows()) = h[i];
        r += h[i].rows();
    }
    return out;
}

inline double regularization(const std::vector<CMatrix>& h, double rho, double sigma2) {
    return static_cast<double>(h.size()) * static_cast<double>(h.front().rows()) * sigma2 / rho;
}

}  // namespace detail

/// Regularized block diagonalization with uniform power per stream.
inline PrecoderSet rbd(const std::vector<CMatrix>& h, double rho, double sigma2) {
    detail::check_users(h, "rbd");
    const double alpha = detail::regularization(h, rho, sigma2);
    const Eigen::Index ntx = h.front().cols();
    PrecoderSet out{{}, rho};
    for (std::size_t j = 0; j < h.size(); ++j) {
        const CMatrix hb = detail::stack_rows(h, j);
        CMatrix g = hb.adjoint() * hb;
        g.diagonal().array() += alpha;
        const auto e = eig_descending(g);
        if (!(e.values.minCoeff() > 0.0)) throw NumericalError("rbd: regularized Gram matrix is singular");
        const CMatrix w = e.vectors * e.values.cwiseSqrt().cwiseInverse().cast<Complex>().asDiagonal() *
                          e.vectors.adjoint();
        Eigen::JacobiSVD<CMatrix> svd(h[j] * w, Eigen::ComputeFullV);
        const Eigen::Index d = std::min(h[j].rows(), ntx);
        out.m.push_back(w * svd.matrixV().leftCols(d));
    }
    return normalize_power(out, rho);
}

/// Regularized channel inversion on the stacked channel.
inline PrecoderSet rci(const std::vector<CMatrix>& h, double rho, double sigma2) {
    detail::check_users(h, "rci");
    const double alpha = detail::regularization(h, rho, sigma2);
    const CMatrix hs = detail::stack_rows(h, h.size());
    CMatrix g = hs * hs.adjoint();
    g.diagonal().array() += alpha;
    const CMatrix m = hs.adjoint() * g.ldlt().solve(CMatrix::Identity(g.rows(), g.cols()));
    PrecoderSet out{{}, rho};
    Eigen::Index c = 0;
    for (const auto& x : h) {
        out.m.push_back(m.middleCols(c, x.rows()));
        c += x.rows();
    }
    return normalize_power(out, rho);
}

// ---- WMMSE -------------------------------------------------------------------------------

namespace detail {

/// M_j = (Phi + mu I)^-1 B_j with the smallest mu >= 0 such that the total
/// power does not exceed rho, then scaled up to exactly rho. Uniform scaling
/// up never lowers any user's rate.
inline std::vector<CMatrix> solve_precoders(const CMatrix& phi, const std::vector<CMatrix>& b, double rho) {
    const auto e = eig_descending(phi);
    const Eigen::Index n = phi.rows();
    std::vector<CMatrix> g;
    RVector energy = RVector::Zero(n);
    for (const auto& bj : b) {
        g.push_back(e.vectors.adjoint() * bj);
        energy += g.back().rowwise().squaredNorm().transpose();
    }
    const double lmax = std::max(e.values[0], 0.0);
    const double floor = 1e-12 * std::max(lmax, 1e-300);
    auto power = [&](double mu) {
        double p = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double den = e.values[i] + mu;
            if (den <= floor) continue;  // null space of Phi, no component of B there
            p += energy[i] / (den * den);
        }
        return p;
    };
    double mu = 0.0;
    if (power(0.0) > rho) {
        double hi = std::max(lmax, 1e-12);
        while (power(hi) > rho) hi *= 2.0;
        double lo = 0.0;
        for (int it = 0; it < 60; ++it) {
            const double mid = 0.5 * (lo + hi);
            (power(mid) > rho ? lo : hi) = mid;
        }
        mu = hi;
    }
    std::vector<CMatrix> m;
    double total = 0.0;
    for (const auto& gj : g) {
        CMatrix scaled = gj;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double den = e.values[i] + mu;
            scaled.row(i) *= den <= floor ? 0.0 : 1.0 / den;
        }
        m.push_back(e.vectors * scaled);
        total += m.back().squaredNorm();
    }
    if (total > 0.0) {
        const double c = std::sqrt(rho / total);
        for (auto& x : m) x *= c;
    }
    return m;
}

/// MMSE receive filters and MSE weights for fixed precoders.
inline void receivers(const std::vector<CMatrix>& h, const std::vector<CMatrix>& m, double sigma2,
                      std::vector<CMatrix>& u, std::vector<CMatrix>& w) {
    const std::size_t users = h.size();
    u.resize(users);
    w.resize(users);
    for (std::size_t j = 0; j < users; ++j) {
        CMatrix r = CMatrix::Identity(h[j].rows(), h[j].rows()) * sigma2;
        for (std::size_t i = 0; i < users; ++i) {
            const CMatrix hm = h[j] * m[i];
            r.noalias() += hm * hm.adjoint();
        }
        const CMatrix hmj = h[j] * m[j];
        u[j] = hermitian_part(r).llt().solve(hmj);
        CMatrix e = -u[j].adjoint() * hmj;
        e.diagonal().array() += 1.0;
        e = hermitian_part(e);
        w[j] = hermitian_part(e.llt().solve(CMatrix::Identity(e.rows(), e.cols())));
    }
}

/// Equal-power precoders on the dominant d right singular vectors of each H_j.
inline std::vector<CMatrix> svd_init(const std::vector<CMatrix>& h, int d, double rho) {
    std::vector<CMatrix> m;
    for (const auto& x : h) {
        Eigen::JacobiSVD<CMatrix> svd(x, Eigen::ComputeFullV);
        m.push_back(svd.matrixV().leftCols(d));
    }
    const double c = std::sqrt(rho / static_cast<double>(h.size() * static_cast<std::size_t>(d)));
    for (auto& x : m) x *= c;
    return m;
}

}  // namespace detail

struct WmmseOptions {
    int d = 1;
    int max_iter = 300;
    double tol = 1e-6;  // relative sum-rate change
};

/// Iterative WMMSE sum-rate maximization. `trace` receives the sum-rate of
/// the initial point followed by one entry per iteration.
inline PrecoderSet wmmse(const std::vector<CMatrix>& h, double rho, double sigma2, const WmmseOptions& opts = {},
                         std::vector<double>* trace = nullptr) {
    if (h.empty()) throw ArgumentError("wmmse: no users");
    if (!(sigma2 > 0.0)) throw ArgumentError("wmmse: sigma2 must be > 0");
    for (const auto& x : h) {
        if (x.cols() != h.front().cols()) throw ArgumentError("wmmse: dimension mismatch");
        if (opts.d < 1 || opts.d > x.rows() || opts.d > x.cols()) throw ArgumentError("wmmse: need 1 <= d <= nrx");
    }
    PrecoderSet p{detail::svd_init(h, opts.d, rho), rho};
    double rate = sum_rate(h, p, sigma2);
    if (trace) trace->assign(1, rate);
    std::vector<CMatrix> u, w, b(h.size());
    const Eigen::Index ntx = h.front().cols();
    for (int it = 1; it <= opts.max_iter; ++it) {
        detail::receivers(h, p.m, sigma2, u, w);
        CMatrix phi = CMatrix::Zero(ntx, ntx);
        for (std::size_t j = 0; j < h.size(); ++j) {
            const CMatrix hu = h[j].adjoint() * u[j];
            b[j] = hu * w[j];
            phi.noalias() += b[j] * hu.adjoint();
        }
        PrecoderSet next{detail::solve_precoders(hermitian_part(phi), b, rho), rho};
        const double next_rate = sum_rate(h, next, sigma2);
        p = std::move(next);
        const double change = std::abs(next_rate - rate);
        rate = next_rate;
        if (trace) trace->push_back(rate);
        if (change <= opts.tol * std::max(std::abs(rate), 1e-12)) break;
    }
    return p;
}

// ---- stochastic WMMSE ----------------------------------------------------------------------

struct SwmmseOptions {
    int max_iter = 300;
    double beta_scale = 1e-4;  // beta = beta_scale * rho
    double step_delay = 20.0;  // averaging weight gamma_i = step_delay / (step_delay + i)
};

struct SwmmseTrace {
    std::vector<double> sample_rate;   // sum-rate of the precoders entering iteration i on that iteration's samples
    std::vector<double> running_mean;  // mean of sample_rate up to each iteration
    std::vector<double> true_rate;     // sum-rate after iteration i on the supplied true channels, if any
};

/// Stochastic WMMSE on the ergodic sum-rate under the GMM components
/// selected by the users' feedback. Uses d = nrx streams per user.
inline PrecoderSet swmmse(const GmmModel& model, const std::vector<std::size_t>& k_stars, double rho, double sigma2,
                          Rng& rng, const SwmmseOptions& opts = {}, SwmmseTrace* trace = nullptr,
                          const std::vector<CMatrix>* true_channels = nullptr) {
    if (k_stars.empty()) throw ArgumentError("swmmse: no users");
    if (!(sigma2 > 0.0)) throw ArgumentError("swmmse: sigma2 must be > 0");
    if (!(opts.step_delay > 0.0)) throw ArgumentError("swmmse: step_delay must be > 0");
    for (auto k : k_stars)
        if (k >= model.size()) throw ArgumentError("swmmse: component index out of range");
    const int nrx = model.nrx;
    const int ntx = model.ntx;
    const int d = std::min(nrx, ntx);
    const std::size_t users = k_stars.size();
    const double beta = opts.beta_scale * rho;

    std::vector<ComponentSampler> samplers;
    for (auto k : k_stars) samplers.emplace_back(model, k);

    std::vector<CMatrix> m;
    for (auto k : k_stars) m.push_back(eig_descending(component_gram(model, k)).vectors.leftCols(d));
    {
        const double c = std::sqrt(rho / static_cast<double>(users * static_cast<std::size_t>(d)));
        for (auto& x : m) x *= c;
    }

    CMatrix a = CMatrix::Zero(ntx, ntx);
    std::vector<CMatrix> b(users, CMatrix::Zero(ntx, d));
    std::vector<CMatrix> h(users), u, w;
    SwmmseTrace tr;
    double acc = 0.0;
    for (int it = 1; it <= opts.max_iter; ++it) {
        for (std::size_t j = 0; j < users; ++j) h[j] = unvec(samplers[j].draw(rng), nrx, ntx);
        if (trace) {
            // the fresh sample is unseen by the current precoders
            const double r = sum_rate(h, PrecoderSet{m, rho}, sigma2);
            acc += r;
            tr.sample_rate.push_back(r);
            tr.running_mean.push_back(acc / static_cast<double>(it));
        }
        detail::receivers(h, m, sigma2, u, w);
        const double gamma = opts.step_delay / (opts.step_delay + static_cast<double>(it));
        CMatrix phi = CMatrix::Identity(ntx, ntx) * beta;
        for (std::size_t j = 0; j < users; ++j) {
            const CMatrix hu = h[j].adjoint() * u[j];
            const CMatrix huw = hu * w[j];
            phi.noalias() += huw * hu.adjoint();
            b[j] = (1.0 - gamma) * b[j] + gamma * (beta * m[j] + huw);
        }
        a = hermitian_part((1.0 - gamma) * a + gamma * phi);
        m = detail::solve_precoders(a, b, rho);
        if (trace && true_channels) tr.true_rate.push_back(sum_rate(*true_channels, PrecoderSet{m, rho}, sigma2));
    }
    if (trace) *trace = std::move(tr);
    return {std::move(m), rho};
}

}  // namespace gmmfb

#endif  // GMMFB_PRECODING_HPP
