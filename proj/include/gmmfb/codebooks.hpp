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

#ifndef GMMFB_CODEBOOKS_HPP
#define GMMFB_CODEBOOKS_HPP

#include "gmmfb/channel_model.hpp"
#include "gmmfb/core.hpp"
#include "gmmfb/gmm.hpp"

namespace gmmfb {

/// Transmit covariance codebook {Q_k}, tr(Q_k) <= rho, Q_k PSD.
struct CovCodebook {
    std::vector<CMatrix> entries;
    double design_snr_db = 0.0;
    double rho = 1.0;

    std::size_t size() const { return entries.size(); }
};

/// Directional codebook of semi-unitary ntx x nrx matrices.
struct DirCodebook {
    std::vector<CMatrix> entries;

    std::size_t size() const { return entries.size(); }
};

// ---- rates -------------------------------------------------------------------

namespace detail {

/// log2 det(I + H Q H^H / sigma2) without input checks.
inline double rate(const CMatrix& h, const CMatrix& q, double sigma2) {
    CMatrix m = (h * q * h.adjoint()) / sigma2;
    m = hermitian_part(m);
    m.diagonal().array() += 1.0;
    return logdet_hpd(m) / kLn2;
}

/// log2 det(I + scale * B B^H).
inline double rate_gram(const CMatrix& b, double scale) {
    CMatrix m = scale * (b * b.adjoint());
    m.diagonal().array() += 1.0;
    return logdet_hpd(m) / kLn2;
}

}  // namespace detail

/// Spectral efficiency log2 det(I + H Q H^H / sigma2) in bit/s/Hz.
inline double spectral_efficiency(const CMatrix& h, const CMatrix& q, double sigma2) {
    if (q.rows() != h.cols() || q.cols() != h.cols()) throw ArgumentError("spectral_efficiency: dimension mismatch");
    if (!(sigma2 > 0.0)) throw ArgumentError("spectral_efficiency: sigma2 must be > 0");
    if (!is_psd(q)) throw ArgumentError("spectral_efficiency: Q is not Hermitian PSD");
    return std::max(0.0, detail::rate(h, q, sigma2));
}

// ---- projection and PGA --------------------------------------------------------

/// Euclidean projection of a vector onto {x >= 0, sum x <= rho}.
inline RVector project_capped_simplex(const RVector& v, double rho) {
    RVector clipped = v.cwiseMax(0.0);
    if (clipped.sum() <= rho) return clipped;
    std::vector<double> s(v.data(), v.data() + v.size());
    std::sort(s.begin(), s.end(), std::greater<>());
    double cum = 0.0;
    double theta = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        cum += s[i];
        const double t = (cum - rho) / static_cast<double>(i + 1);
        if (i + 1 == s.size() || s[i + 1] <= t) {
            theta = t;
            break;
        }
    }
    return (v.array() - theta).cwiseMax(0.0).matrix();
}

/// Projection onto {Q PSD, tr Q <= rho} through the eigenvalues.
inline CMatrix project_psd_trace(const CMatrix& q_raw, double rho) {
    const auto e = eig_descending(q_raw);
    const RVector lam = project_capped_simplex(e.values, rho);
    return hermitian_part(e.vectors * lam.cast<Complex>().asDiagonal() * e.vectors.adjoint());
}

struct PgaOptions {
    int max_iter = 200;
    double step_init = 1.0;
    double tol = 1e-7;      // relative objective improvement
    double shrink = 0.5;
    int max_backtracks = 30;
    double armijo = 1e-4;
};

struct PgaResult {
    CMatrix q;
    std::vector<double> objective;  // entry 0 is the starting point
    int iterations = 0;
};

namespace detail {

/// Mean rate over a cluster and its gradient with respect to Q.
inline double mean_rate(const std::vector<const CMatrix*>& cluster, const CMatrix& q, double sigma2,
                        CMatrix* gradient) {
    const Eigen::Index n = q.rows();
    double acc = 0.0;
    if (gradient) gradient->setZero(n, n);
    for (const CMatrix* hp : cluster) {
        const CMatrix& h = *hp;
        CMatrix m = hermitian_part(h * q * h.adjoint());
        m.diagonal().array() += sigma2;
        Eigen::LLT<CMatrix> llt(m);
        if (llt.info() != Eigen::Success) throw NumericalError("PGA: singular rate matrix");
        double ld = 0.0;
        for (Eigen::Index i = 0; i < m.rows(); ++i) ld += std::log(llt.matrixLLT()(i, i).real());
        acc += 2.0 * ld - static_cast<double>(m.rows()) * std::log(sigma2);
        if (gradient) {
            const CMatrix li_h = llt.matrixL().solve(h);
            gradient->noalias() += li_h.adjoint() * li_h;
        }
    }
    const double scale = 1.0 / (static_cast<double>(cluster.size()) * kLn2);
    if (gradient) *gradient = hermitian_part(*gradient * scale);
    return acc * scale;
}

inline PgaResult pga(const std::vector<const CMatrix*>& cluster, double rho, double sigma2, const PgaOptions& opts,
                     const CMatrix& start) {
    PgaResult res;
    res.q = project_psd_trace(start, rho);
    CMatrix grad;
    double f = mean_rate(cluster, res.q, sigma2, &grad);
    res.objective.push_back(f);
    double step = opts.step_init;
    for (int it = 1; it <= opts.max_iter; ++it) {
        bool accepted = false;
        CMatrix q_new;
        double f_new = f;
        double t = step;
        for (int b = 0; b <= opts.max_backtracks; ++b, t *= opts.shrink) {
            q_new = project_psd_trace(res.q + t * grad, rho);
            f_new = mean_rate(cluster, q_new, sigma2, nullptr);
            const double ascent = (grad.adjoint() * (q_new - res.q)).trace().real();
            if (f_new >= f + opts.armijo * ascent && f_new >= f) {
                accepted = true;
                break;
            }
        }
        if (!accepted) break;
        res.iterations = it;
        const double gain = f_new - f;
        res.q = std::move(q_new);
        f = mean_rate(cluster, res.q, sigma2, &grad);
        res.objective.push_back(f);
        // next search starts near the last accepted step
        step = std::min(opts.step_init, 2.0 * t);
        if (gain <= opts.tol * std::max(std::abs(f), 1e-12)) break;
    }
    return res;
}

}  // namespace detail

/// Projected gradient ascent on the mean rate (1/|V|) sum r(H, Q) over
/// {Q PSD, tr Q <= rho}, with Armijo backtracking. Starts at `warm_start`
/// when given, else at (rho / ntx) I.
inline PgaResult pga_sum_rate(const std::vector<CMatrix>& cluster, double rho, double sigma2,
                              const PgaOptions& opts = {}, const CMatrix* warm_start = nullptr) {
    if (cluster.empty()) throw ArgumentError("pga_sum_rate: empty cluster");
    if (!(sigma2 > 0.0)) throw ArgumentError("pga_sum_rate: sigma2 must be > 0");
    std::vector<const CMatrix*> ptrs;
    for (const auto& h : cluster) ptrs.push_back(&h);
    const Eigen::Index n = cluster.front().cols();
    const CMatrix start = warm_start ? *warm_start : CMatrix(CMatrix::Identity(n, n) * (rho / static_cast<double>(n)));
    return detail::pga(ptrs, rho, sigma2, opts, start);
}

// ---- Lau's heuristic -----------------------------------------------------------

/// Water-filling over the top-nrx eigenpairs of a Gram matrix S.
inline CMatrix waterfill_gram(const CMatrix& s, int nrx, double rho, double sigma2) {
    const auto e = eig_descending(s);
    const Eigen::Index r = std::min<Eigen::Index>(nrx, s.rows());
    const RVector gains = e.values.head(r).cwiseMax(0.0);
    const RVector p = waterfill(gains, rho, sigma2);
    const CMatrix v = e.vectors.leftCols(r);
    return hermitian_part(v * p.cast<Complex>().asDiagonal() * v.adjoint());
}

/// Lau's codebook update: S = mean H^H H, then water-filling on its
/// dominant nrx eigenmodes.
inline CMatrix lau_update(const std::vector<CMatrix>& cluster, double rho, double sigma2) {
    if (cluster.empty()) throw ArgumentError("lau_update: empty cluster");
    const Eigen::Index n = cluster.front().cols();
    CMatrix s = CMatrix::Zero(n, n);
    for (const auto& h : cluster) s.noalias() += h.adjoint() * h;
    s /= static_cast<double>(cluster.size());
    return waterfill_gram(s, static_cast<int>(cluster.front().rows()), rho, sigma2);
}

/// E[H^H H] under component k, H = unvec(h) with h ~ CN(mu_k, C_k).
inline CMatrix component_gram(const GmmModel& model, std::size_t k) {
    const int nrx = model.nrx;
    const int ntx = model.ntx;
    const CMatrix mu = unvec(model.means.at(k), nrx, ntx);
    CMatrix s = mu.adjoint() * mu;
    if (model.structure == CovarianceStructure::Kronecker) {
        const CMatrix& ctx = model.tx_factors[model.tx_index(k)];
        const CMatrix& crx = model.rx_factors[model.rx_index(k)];
        s += crx.trace() * ctx.transpose();
    } else {
        const CMatrix& c = model.covariances.at(k);
        for (int a = 0; a < ntx; ++a)
            for (int b = 0; b < ntx; ++b) {
                Complex acc = 0.0;
                for (int r = 0; r < nrx; ++r) acc += c(r + nrx * b, r + nrx * a);
                s(a, b) += acc;
            }
    }
    return hermitian_part(s);
}

// ---- Lloyd codebook --------------------------------------------------------------

struct LloydOptions {
    int max_outer = 30;
    std::uint64_t seed = 0;
    PgaOptions pga{};
};

struct LloydReport {
    int outer_iterations = 0;
    bool converged = false;
    int reseeds = 0;
    /// Mean over the training set of max_k r(H, Q_k) after each codebook update.
    std::vector<double> mean_selected_rate;
    /// Population objective sum r(H, Q_label) before and after each assignment stage.
    std::vector<std::pair<double, double>> assignment_objective;
    std::vector<std::size_t> labels;
};

namespace detail {

inline double design_snr_db(double rho, double sigma2) {
    return 10.0 * std::log10(rho / sigma2);
}

}  // namespace detail

/// Lloyd codebook: alternates rate-maximizing assignment and per-cluster PGA
/// updates (warm-started) from a random initial partition.
inline CovCodebook lloyd_codebook(const ChannelDataset& train, std::size_t k, double rho, double sigma2,
                                  const LloydOptions& opts = {}, LloydReport* report = nullptr) {
    const std::size_t m = train.size();
    if (k < 1) throw ArgumentError("lloyd_codebook: K must be >= 1");
    if (m < k) throw ArgumentError("lloyd_codebook: fewer training samples than codebook entries");
    if (!(sigma2 > 0.0)) throw ArgumentError("lloyd_codebook: sigma2 must be > 0");
    const Eigen::Index ntx = train.cols();

    LloydReport rep;
    // random partition with every cluster non-empty
    std::vector<std::size_t> perm(m);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    Rng rng(derive_seed(opts.seed, 0x6c6c6f7964));
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<std::size_t> label(m);
    for (std::size_t i = 0; i < m; ++i) label[perm[i]] = i % k;

    std::vector<CMatrix> q(k, CMatrix::Identity(ntx, ntx) * (rho / static_cast<double>(ntx)));
    auto update = [&]() {
        std::vector<std::vector<const CMatrix*>> clusters(k);
        for (std::size_t i = 0; i < m; ++i) clusters[label[i]].push_back(&train.channels[i]);
        for (std::size_t c = 0; c < k; ++c)
            if (!clusters[c].empty()) q[c] = detail::pga(clusters[c], rho, sigma2, opts.pga, q[c]).q;
    };
    update();

    RMatrix rates(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(k));
    for (int outer = 1; outer <= opts.max_outer; ++outer) {
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t c = 0; c < k; ++c)
                rates(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) =
                    detail::rate(train.channels[i], q[c], sigma2);
        double before = 0.0;
        double after = 0.0;
        bool changed = false;
        std::vector<std::size_t> count(k, 0);
        for (std::size_t i = 0; i < m; ++i) {
            const auto row = rates.row(static_cast<Eigen::Index>(i));
            before += row(static_cast<Eigen::Index>(label[i]));
            std::size_t best = 0;
            for (std::size_t c = 1; c < k; ++c)
                if (row(static_cast<Eigen::Index>(c)) > row(static_cast<Eigen::Index>(best))) best = c;
            after += row(static_cast<Eigen::Index>(best));
            changed = changed || best != label[i];
            label[i] = best;
            ++count[best];
        }
        rep.assignment_objective.emplace_back(before, after);
        rep.mean_selected_rate.push_back(after / static_cast<double>(m));
        rep.outer_iterations = outer;

        // empty cluster: take the worst-served member of the largest cluster
        for (std::size_t c = 0; c < k; ++c) {
            if (count[c] > 0) continue;
            const auto largest = static_cast<std::size_t>(std::max_element(count.begin(), count.end()) - count.begin());
            if (count[largest] < 2) break;
            std::size_t worst = m;
            for (std::size_t i = 0; i < m; ++i)
                if (label[i] == largest &&
                    (worst == m || rates(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(largest)) <
                                       rates(static_cast<Eigen::Index>(worst), static_cast<Eigen::Index>(largest))))
                    worst = i;
            label[worst] = c;
            --count[largest];
            ++count[c];
            ++rep.reseeds;
            changed = true;
        }
        if (!changed) {
            rep.converged = true;
            break;
        }
        update();
    }
    if (!rep.converged) {
        // report the objective of the final codebook
        double total = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            double best = -std::numeric_limits<double>::infinity();
            for (std::size_t c = 0; c < k; ++c) best = std::max(best, detail::rate(train.channels[i], q[c], sigma2));
            total += best;
        }
        rep.mean_selected_rate.push_back(total / static_cast<double>(m));
    }
    rep.labels = label;
    if (report) *report = std::move(rep);
    return {std::move(q), detail::design_snr_db(rho, sigma2), rho};
}

// ---- GMM codebook ----------------------------------------------------------------

struct GmmCodebookReport {
    std::vector<std::size_t> labels;
    std::vector<std::size_t> cluster_sizes;
    std::vector<std::size_t> empty_components;
};

/// Partition of the vectorized training channels by argmax_k p(k | h); ties
/// resolve to the lowest index.
inline std::vector<std::size_t> responsibility_partition(const GmmModel& model, const ChannelDataset& train) {
    const auto bank = GaussianBank::from_model(model);
    const RMatrix ld = bank.log_density_batch(stack_vectorized(train));
    std::vector<std::size_t> label(train.size(), 0);
    for (Eigen::Index i = 0; i < ld.cols(); ++i) {
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < model.size(); ++k) {
            const double v = bank.log_weights()[k] + ld(static_cast<Eigen::Index>(k), i);
            if (v > best) {
                best = v;
                label[static_cast<std::size_t>(i)] = k;
            }
        }
    }
    return label;
}

/// One codebook entry per GMM component: PGA over the training channels the
/// component is most responsible for; components without data use Lau's
/// update on the component's own E[H^H H].
inline CovCodebook gmm_codebook(const GmmModel& model, const ChannelDataset& train, double rho, double sigma2,
                                const PgaOptions& opts = {}, GmmCodebookReport* report = nullptr) {
    if (train.empty()) throw ArgumentError("gmm_codebook: empty training set");
    if (train.rows() != model.nrx || train.cols() != model.ntx)
        throw ArgumentError("gmm_codebook: model and training data dimensions differ");
    if (!(sigma2 > 0.0)) throw ArgumentError("gmm_codebook: sigma2 must be > 0");
    const std::size_t k = model.size();
    const Eigen::Index ntx = train.cols();
    GmmCodebookReport rep;
    rep.labels = responsibility_partition(model, train);
    std::vector<std::vector<const CMatrix*>> clusters(k);
    for (std::size_t i = 0; i < train.size(); ++i) clusters[rep.labels[i]].push_back(&train.channels[i]);
    CovCodebook cb{std::vector<CMatrix>(k), detail::design_snr_db(rho, sigma2), rho};
    const CMatrix start = CMatrix::Identity(ntx, ntx) * (rho / static_cast<double>(ntx));
    for (std::size_t c = 0; c < k; ++c) {
        rep.cluster_sizes.push_back(clusters[c].size());
        if (clusters[c].empty()) {
            rep.empty_components.push_back(c);
            cb.entries[c] = waterfill_gram(component_gram(model, c), model.nrx, rho, sigma2);
        } else {
            cb.entries[c] = detail::pga(clusters[c], rho, sigma2, opts, start).q;
        }
    }
    if (report) *report = std::move(rep);
    return cb;
}

// ---- directional codebooks ---------------------------------------------------------

/// Dominant nrx eigenvectors of every entry (descending eigenvalues). With
/// `allow_deficient`, entries of rank < nrx are completed by eigenvectors of
/// the null space instead of raising RankError.
inline DirCodebook extract_directions(const CovCodebook& cb, int nrx, bool allow_deficient = false) {
    DirCodebook out;
    for (std::size_t k = 0; k < cb.size(); ++k) {
        const auto e = eig_descending(cb.entries[k]);
        if (nrx < 1 || nrx > e.values.size()) throw ArgumentError("extract_directions: invalid nrx");
        const double lmax = e.values[0];
        if (!allow_deficient && (!(lmax > 0.0) || !(e.values[nrx - 1] > 1e-8 * lmax)))
            throw RankError("extract_directions: codebook entry " + std::to_string(k) + " has rank < " +
                            std::to_string(nrx) + "; build the codebook at a higher SNR");
        out.entries.push_back(e.vectors.leftCols(nrx));
    }
    return out;
}

/// K independent subspaces uniformly distributed on the Grassmann manifold.
inline DirCodebook random_grassmann_codebook(std::size_t k, int ntx, int nrx, Rng& rng) {
    if (nrx < 1 || nrx > ntx) throw ArgumentError("random_grassmann_codebook: need 1 <= nrx <= ntx");
    DirCodebook out;
    for (std::size_t i = 0; i < k; ++i) {
        const CMatrix g = complex_normal_matrix(rng, ntx, nrx);
        Eigen::HouseholderQR<CMatrix> qr(g);
        out.entries.push_back(qr.householderQ() * CMatrix::Identity(ntx, nrx));
    }
    return out;
}

/// N_rx - tr(V^H W W^H V).
inline double chordal_distance_sq(const CMatrix& v, const CMatrix& w) {
    return static_cast<double>(v.cols()) - (v.adjoint() * w).squaredNorm();
}

}  // namespace gmmfb

#endif  // GMMFB_CODEBOOKS_HPP
